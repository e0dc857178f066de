//! Command-line driver for the two-user wireless powered network
//! simulator: configuration files, single-instance solving, parameter
//! sweeps, and detector comparison reports.
//!
//! The binary (`wpcn`) is a thin wrapper over this library; everything the
//! subcommands do is exposed here so experiments can also be scripted
//! directly against the crate.

pub mod config;
pub mod instance;
pub mod report;
pub mod sweep;

pub use config::{FileConfig, ResolvedConfig};
pub use instance::{render_solution, solve_instance, SchemeChoice};
pub use report::{run_ber_report, BerReportSpec, BerRow};
pub use sweep::{run_sweep, Scheme, SweepKind, SweepRow, SweepSpec};
