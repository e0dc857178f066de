//! Simulation and optimization library for a two-user wireless powered
//! communication network with backscatter-assisted cooperation.
//!
//! A hybrid access point powers two devices over the air. The devices
//! exchange their messages with passive backscatter while still harvesting,
//! then relay the pooled messages to the access point with Alamouti coding
//! funded entirely by the harvested energy. The library models the physical
//! layer ([`model`], [`rates`]), optimizes the block's time allocation for
//! max-min fairness ([`solver`]), and validates the closed-form detector
//! error rate by sample-level simulation ([`mcdetector`]).

pub mod error;
pub mod mcdetector;
pub mod model;
pub mod rates;
pub mod solver;

pub use error::{Error, Result};
pub use mcdetector::{
    compare_with_lemma, hypothesis_means, simulate_ber, BerEstimate, DetectorScenario,
    LemmaComparison, SignalModel,
};
pub use model::{
    gains_from_topology, path_loss_gain, validate, validate_or_error, ChannelGains, Direction,
    SystemParams, TimeAllocation, Topology, ValidationReport,
};
pub use rates::{
    alamouti_rate, benchmark_rates, ber_backscatter, bsc_capacity, exchange_rates,
    harvest_backscatter, harvest_wet, overall_rates, transmit_powers, EnergyLedger, HarvestPolicy,
    OwnSlotMode, RateBreakdown,
};
pub use solver::{
    benchmark_grid_oracle, grid_oracle, max_concave_1d, maximize_benchmark,
    maximize_common_throughput, refine_max_min, Solution, SolverConfig, SolverDiagnostics,
};
