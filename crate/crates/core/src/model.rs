//! Domain types for the two-user wireless powered communication network.
//!
//! The network consists of an energy node broadcasting RF power, two
//! wireless devices (WD1 and WD2) that harvest that power, and an access
//! point that receives the devices' joint uplink transmission. Every
//! communication block lasts one second and is divided into a channel
//! estimation overhead `t0`, a dedicated energy-transfer phase `t1`, two
//! information-exchange slots `t21` and `t22` (WD1 talks first), and two
//! joint-transmission slots `t31` and `t32`.
//!
//! This module owns the parameter records, the channel-gain records, the
//! block time allocation, free-space path-loss conversion from distances to
//! gains, and validation of all of the above.

use crate::error::{Error, Result};

/// Speed of light used by the path-loss model, m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Direction of a device-to-device link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// WD1 transmits, WD2 receives (slot `t21`).
    Wd1ToWd2,
    /// WD2 transmits, WD1 receives (slot `t22`).
    Wd2ToWd1,
}

impl Direction {
    /// Short label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            Direction::Wd1ToWd2 => "wd1_to_wd2",
            Direction::Wd2ToWd1 => "wd2_to_wd1",
        }
    }
}

/// System-level parameters shared by every stage of the protocol.
///
/// Defaults reproduce the reference evaluation setup: 1 W power source,
/// 80% harvesting efficiency, power-splitting ratio 0.7, reflection
/// coefficients 0.8, thermal and decoder noise of 1e-10 W, a 100 kbit/s
/// backscatter rate sampled at 600 kS/s, 100 kHz of uplink bandwidth, and a
/// 915 MHz carrier with path-loss exponent 2.5.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Energy-node transmit power, W.
    pub p0: f64,
    /// RF-to-DC energy harvesting efficiency, in `(0, 1]`.
    pub eta: f64,
    /// Power-splitting ratio: fraction of received power routed to the
    /// harvester while a device decodes, in `[0, 1]`.
    pub beta: f64,
    /// Backscatter reflection coefficient of WD1, in `[0, 1]`.
    pub mu1: f64,
    /// Backscatter reflection coefficient of WD2, in `[0, 1]`.
    pub mu2: f64,
    /// Antenna (thermal) noise power, W.
    pub sigma0_sq: f64,
    /// Decoder circuit noise power, W.
    pub sigmas_sq: f64,
    /// Backscatter bit rate, bit/s.
    pub rb: f64,
    /// Receiver sampling rate during backscatter decoding, samples/s.
    pub s_rate: f64,
    /// Channel-estimation overhead at the start of each block, in `[0, 1)`.
    pub t0: f64,
    /// Bandwidth of the actively transmitted (non-backscatter) links, Hz.
    pub bandwidth: f64,
    /// Combined transmit/receive antenna gain of the path-loss model.
    pub ga: f64,
    /// Carrier frequency, Hz.
    pub fd: f64,
    /// Path-loss exponent (non-negative; free space is 2, dense urban up to 6).
    pub lambda_pl: f64,
    /// Circuit power drawn by an active radio while it transmits, W.
    /// Only the no-backscatter baseline pays this cost; backscatter
    /// modulators are passive. See `rates::benchmark_rates`.
    pub p_circuit: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            p0: 1.0,
            eta: 0.8,
            beta: 0.7,
            mu1: 0.8,
            mu2: 0.8,
            sigma0_sq: 1e-10,
            sigmas_sq: 1e-10,
            rb: 1e5,
            s_rate: 6e5,
            t0: 0.0,
            bandwidth: 1e5,
            ga: 2.0,
            fd: 915e6,
            lambda_pl: 2.5,
            p_circuit: 5e-3,
        }
    }
}

impl SystemParams {
    /// Samples collected per backscatter bit, `s_rate / rb`.
    pub fn samples_per_bit(&self) -> f64 {
        self.s_rate / self.rb
    }

    /// Usable block time once the channel-estimation overhead is removed.
    pub fn block_budget(&self) -> f64 {
        1.0 - self.t0
    }
}

/// Power gains of the six links in the network.
///
/// `h_e1`/`h_e2` connect the energy node to the devices, `h_1a`/`h_2a`
/// connect the devices to the access point, and `h_12`/`h_21` is the
/// reciprocal device-to-device channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGains {
    /// Energy node to WD1.
    pub h_e1: f64,
    /// Energy node to WD2.
    pub h_e2: f64,
    /// WD1 to access point.
    pub h_1a: f64,
    /// WD2 to access point.
    pub h_2a: f64,
    /// WD1 to WD2.
    pub h_12: f64,
    /// WD2 to WD1; reciprocity requires `h_21 == h_12`.
    pub h_21: f64,
}

impl Default for ChannelGains {
    /// Reference setup: both devices 8.5e-5 from the energy node, 8.5e-6
    /// to the access point, and 4 m apart (free-space conversion).
    fn default() -> Self {
        let h_12 = free_space_gain(4.0, 2.0, 915e6, 2.5);
        ChannelGains {
            h_e1: 8.5e-5,
            h_e2: 8.5e-5,
            h_1a: 8.5e-6,
            h_2a: 8.5e-6,
            h_12,
            h_21: h_12,
        }
    }
}

/// Node distances, m. An alternative to specifying gains directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Topology {
    /// Energy node to WD1.
    pub d_e1: f64,
    /// Energy node to WD2.
    pub d_e2: f64,
    /// WD1 to access point.
    pub d_1a: f64,
    /// WD2 to access point.
    pub d_2a: f64,
    /// Inter-device distance.
    pub d_12: f64,
}

/// Division of one communication block among the protocol stages.
///
/// Components are in seconds (the block length is normalized to one) and
/// must be non-negative and sum to one within `FEASIBILITY_TOL`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeAllocation {
    /// Channel-estimation overhead.
    pub t0: f64,
    /// Energy-transfer phase.
    pub t1: f64,
    /// Exchange slot in which WD1 transmits.
    pub t21: f64,
    /// Exchange slot in which WD2 transmits.
    pub t22: f64,
    /// First joint-transmission slot.
    pub t31: f64,
    /// Second joint-transmission slot.
    pub t32: f64,
}

/// Absolute tolerance on the block-sum constraint.
pub const FEASIBILITY_TOL: f64 = 1e-12;

impl TimeAllocation {
    /// Builds an allocation, rejecting negative components and block sums
    /// different from one.
    pub fn new(t0: f64, t1: f64, t21: f64, t22: f64, t31: f64, t32: f64) -> Result<Self> {
        let alloc = TimeAllocation {
            t0,
            t1,
            t21,
            t22,
            t31,
            t32,
        };
        alloc.check_feasible()?;
        Ok(alloc)
    }

    /// Builds an allocation with the joint-transmission stage split into
    /// two equal slots, as the cooperative protocol requires.
    pub fn from_stage_times(t0: f64, t1: f64, t21: f64, t22: f64, t3: f64) -> Result<Self> {
        Self::new(t0, t1, t21, t22, t3 / 2.0, t3 / 2.0)
    }

    /// Total joint-transmission time `t31 + t32`.
    pub fn t3(&self) -> f64 {
        self.t31 + self.t32
    }

    /// Signed deviation of the component sum from one block.
    pub fn block_sum_error(&self) -> f64 {
        (self.t0 + self.t1 + self.t21 + self.t22 + self.t31 + self.t32) - 1.0
    }

    /// Verifies non-negativity and the block-sum constraint.
    pub fn check_feasible(&self) -> Result<()> {
        let named = [
            ("t0", self.t0),
            ("t1", self.t1),
            ("t21", self.t21),
            ("t22", self.t22),
            ("t31", self.t31),
            ("t32", self.t32),
        ];
        for (name, value) in named {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Infeasible(format!(
                    "{name} = {value} violates {name} >= 0"
                )));
            }
        }
        let err = self.block_sum_error();
        if err.abs() > FEASIBILITY_TOL {
            return Err(Error::Infeasible(format!(
                "components sum to 1 {err:+e}, violating the unit block length"
            )));
        }
        Ok(())
    }
}

/// Free-space path gain without parameter validation; shared by
/// [`path_loss_gain`] and `ChannelGains::default`.
fn free_space_gain(d: f64, ga: f64, fd: f64, lambda_pl: f64) -> f64 {
    ga * (SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * d * fd)).powf(lambda_pl)
}

/// Converts a distance to a power gain with the free-space model
/// `h = ga * (c / (4 pi d fd))^lambda`.
///
/// Strictly decreasing in `d`; errors on non-positive or non-finite
/// distances.
pub fn path_loss_gain(d: f64, params: &SystemParams) -> Result<f64> {
    if !d.is_finite() || d <= 0.0 {
        return Err(Error::Domain(format!(
            "distance must be positive and finite, got {d}"
        )));
    }
    Ok(free_space_gain(d, params.ga, params.fd, params.lambda_pl))
}

/// Derives all six channel gains from node distances. The device-to-device
/// link is reciprocal by construction (`h_12 == h_21`).
pub fn gains_from_topology(topology: &Topology, params: &SystemParams) -> Result<ChannelGains> {
    let h_12 = path_loss_gain(topology.d_12, params)?;
    Ok(ChannelGains {
        h_e1: path_loss_gain(topology.d_e1, params)?,
        h_e2: path_loss_gain(topology.d_e2, params)?,
        h_1a: path_loss_gain(topology.d_1a, params)?,
        h_2a: path_loss_gain(topology.d_2a, params)?,
        h_12,
        h_21: h_12,
    })
}

/// Outcome of validating a parameter/gain pair. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    /// One human-readable entry per violated constraint.
    pub violations: Vec<String>,
}

impl ValidationReport {
    /// True when no constraint is violated.
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Converts the report into an error when any violation is present.
    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Validation(self.violations.join("; ")))
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_valid() {
            write!(f, "valid")
        } else {
            write!(f, "{}", self.violations.join("; "))
        }
    }
}

/// Checks every invariant of a parameter record and a gain record and
/// returns the full list of violations.
pub fn validate(params: &SystemParams, gains: &ChannelGains) -> ValidationReport {
    let mut v = Vec::new();
    let mut check = |ok: bool, msg: String| {
        if !ok {
            v.push(msg);
        }
    };

    let p = params;
    check(
        p.p0.is_finite() && p.p0 > 0.0,
        format!("p0 must be positive, got {}", p.p0),
    );
    check(
        p.eta.is_finite() && p.eta > 0.0 && p.eta <= 1.0,
        format!("eta must lie in (0, 1], got {}", p.eta),
    );
    check(
        p.beta.is_finite() && (0.0..=1.0).contains(&p.beta),
        format!("beta must lie in [0, 1], got {}", p.beta),
    );
    check(
        p.mu1.is_finite() && (0.0..=1.0).contains(&p.mu1),
        format!("mu1 must lie in [0, 1], got {}", p.mu1),
    );
    check(
        p.mu2.is_finite() && (0.0..=1.0).contains(&p.mu2),
        format!("mu2 must lie in [0, 1], got {}", p.mu2),
    );
    check(
        p.sigma0_sq.is_finite() && p.sigma0_sq > 0.0,
        format!("sigma0_sq must be positive, got {}", p.sigma0_sq),
    );
    check(
        p.sigmas_sq.is_finite() && p.sigmas_sq > 0.0,
        format!("sigmas_sq must be positive, got {}", p.sigmas_sq),
    );
    check(
        p.rb.is_finite() && p.rb > 0.0,
        format!("rb must be positive, got {}", p.rb),
    );
    check(
        p.s_rate.is_finite() && p.s_rate > 0.0,
        format!("s_rate must be positive, got {}", p.s_rate),
    );
    if p.rb > 0.0 && p.s_rate > 0.0 {
        let n = p.samples_per_bit();
        check(
            n >= 1.0,
            format!("s_rate/rb must be at least 1 sample per bit, got {n}"),
        );
        // The detector draws a whole number of samples per bit, so a
        // fractional ratio has no physical realization.
        check(
            (n - n.round()).abs() <= 1e-9,
            format!("s_rate/rb must be a whole number of samples per bit, got {n}"),
        );
    }
    check(
        p.t0.is_finite() && (0.0..1.0).contains(&p.t0),
        format!("t0 must lie in [0, 1), got {}", p.t0),
    );
    check(
        p.bandwidth.is_finite() && p.bandwidth > 0.0,
        format!("bandwidth must be positive, got {}", p.bandwidth),
    );
    check(
        p.ga.is_finite() && p.ga > 0.0,
        format!("ga must be positive, got {}", p.ga),
    );
    check(
        p.fd.is_finite() && p.fd > 0.0,
        format!("fd must be positive, got {}", p.fd),
    );
    check(
        p.lambda_pl.is_finite() && p.lambda_pl >= 0.0,
        format!("lambda_pl must be non-negative, got {}", p.lambda_pl),
    );
    check(
        p.p_circuit.is_finite() && p.p_circuit >= 0.0,
        format!("p_circuit must be non-negative, got {}", p.p_circuit),
    );

    let g = gains;
    let named = [
        ("h_e1", g.h_e1),
        ("h_e2", g.h_e2),
        ("h_1a", g.h_1a),
        ("h_2a", g.h_2a),
        ("h_12", g.h_12),
        ("h_21", g.h_21),
    ];
    for (name, value) in named {
        check(
            value.is_finite() && value > 0.0,
            format!("{name} must be a positive power gain, got {value}"),
        );
    }
    check(
        g.h_12 == g.h_21,
        format!(
            "device channel must be reciprocal (h_12 == h_21), got {} and {}",
            g.h_12, g.h_21
        ),
    );

    ValidationReport { violations: v }
}

/// Validates and errors in one step; used at solver entry points.
pub fn validate_or_error(params: &SystemParams, gains: &ChannelGains) -> Result<()> {
    validate(params, gains).into_result()
}
