//! Per-stage energy and rate expressions.
//!
//! The cooperative protocol harvests in two places (the dedicated
//! energy-transfer phase and, thanks to the power splitter, during the
//! backscatter exchange itself), models the device-to-device backscatter
//! links as binary symmetric channels whose crossover probability follows
//! from an energy detector, and closes the block with an Alamouti-coded
//! joint transmission to the access point. The achievable rate of each user
//! is the minimum of its exchange rate and the joint-transmission rate.
//!
//! A conventional baseline in which the devices exchange data with active
//! radios (spending harvested energy instead of reflecting the power
//! carrier) is provided by [`benchmark_rates`].

use crate::error::{Error, Result};
use crate::model::{ChannelGains, Direction, SystemParams, TimeAllocation};

/// How much of the incident carrier a device converts to energy while it
/// is backscattering its own bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OwnSlotMode {
    /// Ignore own-slot harvesting entirely.
    None,
    /// Harvest the full incident power for the whole slot.
    Full,
    /// Average over equiprobable bits: a reflected `1` diverts a fraction
    /// `mu^2` of the incident power, an absorbed `0` diverts nothing, so
    /// the expected harvest scales by `1 - mu^2 / 2`.
    #[default]
    BitAveraged,
}

/// Options controlling the backscatter-stage energy model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarvestPolicy {
    /// Own-slot harvesting model for the transmitting device.
    pub own_slot_mode: OwnSlotMode,
    /// Whether the receiving device's harvest keeps the cross term
    /// `mu * sqrt(h_e_tx * h_e_rx * h_link)` that arises from the coherent
    /// sum of the direct carrier and the reflected carrier.
    pub include_cross_term: bool,
}

impl Default for HarvestPolicy {
    fn default() -> Self {
        HarvestPolicy {
            own_slot_mode: OwnSlotMode::BitAveraged,
            include_cross_term: true,
        }
    }
}

/// Where each device's energy came from, J.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyLedger {
    /// WD1 harvest during the energy-transfer phase.
    pub e1_wet: f64,
    /// WD2 harvest during the energy-transfer phase.
    pub e2_wet: f64,
    /// WD1 harvest during the backscatter exchange.
    pub e1_bs: f64,
    /// WD2 harvest during the backscatter exchange.
    pub e2_bs: f64,
}

impl EnergyLedger {
    /// Total energy available to WD1 for the joint transmission.
    pub fn e1_total(&self) -> f64 {
        self.e1_wet + self.e1_bs
    }

    /// Total energy available to WD2 for the joint transmission.
    pub fn e2_total(&self) -> f64 {
        self.e2_wet + self.e2_bs
    }
}

/// Rates achieved by one evaluated allocation, bits per block, together
/// with the transmit powers and the energy ledger behind them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBreakdown {
    /// Bits WD1 delivers to WD2 during the exchange stage.
    pub r1_ex: f64,
    /// Bits WD2 delivers to WD1 during the exchange stage.
    pub r2_ex: f64,
    /// Joint-transmission rate, identical for both users.
    pub r3: f64,
    /// Overall rate of WD1, `min(r1_ex, r3)`.
    pub r1: f64,
    /// Overall rate of WD2, `min(r2_ex, r3)`.
    pub r2: f64,
    /// Crossover probability of the WD2-to-WD1 backscatter link.
    pub pe1: f64,
    /// Crossover probability of the WD1-to-WD2 backscatter link.
    pub pe2: f64,
    /// Capacity of the binary symmetric channel with crossover `pe1`.
    pub c1: f64,
    /// Capacity of the binary symmetric channel with crossover `pe2`.
    pub c2: f64,
    /// WD1 transmit power during the joint transmission, W.
    pub p1: f64,
    /// WD2 transmit power during the joint transmission, W.
    pub p2: f64,
    /// Where the energy funding the joint transmission came from.
    pub ledger: EnergyLedger,
}

/// Energy harvested by each device during the energy-transfer phase,
/// `E_i = p0 * eta * h_ei * t1`. Linear in `t1`; errors on negative `t1`.
pub fn harvest_wet(t1: f64, gains: &ChannelGains, params: &SystemParams) -> Result<(f64, f64)> {
    if !t1.is_finite() || t1 < 0.0 {
        return Err(Error::Domain(format!(
            "energy-transfer duration must be non-negative, got {t1}"
        )));
    }
    let base = params.p0 * params.eta * t1;
    Ok((base * gains.h_e1, base * gains.h_e2))
}

/// Receiving-side harvest rate (J per second of slot time) at the device
/// that listens while the other backscatters. The power splitter keeps
/// only the fraction `beta` for the harvester; the incident field is the
/// coherent sum of the direct carrier and the carrier reflected by the
/// transmitting device.
fn receiving_side_rate(
    mu_tx: f64,
    h_e_tx: f64,
    h_e_rx: f64,
    h_link: f64,
    params: &SystemParams,
    policy: &HarvestPolicy,
) -> f64 {
    let cross = if policy.include_cross_term {
        mu_tx * (h_e_tx * h_e_rx * h_link).sqrt()
    } else {
        0.0
    };
    params.eta * params.beta * params.p0 * (h_e_rx + cross + 0.5 * mu_tx * mu_tx * h_e_tx * h_link)
}

/// Own-slot harvest rate (J per second of slot time) at the device that is
/// currently backscattering. No power splitting applies because the device
/// does not decode while it transmits.
fn own_slot_rate(mu_tx: f64, h_e_tx: f64, params: &SystemParams, policy: &HarvestPolicy) -> f64 {
    let scale = match policy.own_slot_mode {
        OwnSlotMode::None => return 0.0,
        OwnSlotMode::Full => 1.0,
        OwnSlotMode::BitAveraged => 1.0 - 0.5 * mu_tx * mu_tx,
    };
    params.eta * params.p0 * h_e_tx * scale
}

/// Energy harvested by each device during the backscatter exchange.
///
/// During `t21` WD1 backscatters (harvesting per its own-slot mode) and WD2
/// listens (harvesting the split-off fraction of the combined field);
/// during `t22` the roles swap. Linear in both durations; errors on
/// negative durations.
pub fn harvest_backscatter(
    t21: f64,
    t22: f64,
    gains: &ChannelGains,
    params: &SystemParams,
    policy: &HarvestPolicy,
) -> Result<(f64, f64)> {
    for (name, value) in [("t21", t21), ("t22", t22)] {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Domain(format!(
                "exchange duration {name} must be non-negative, got {value}"
            )));
        }
    }
    let e1 = t21 * own_slot_rate(params.mu1, gains.h_e1, params, policy)
        + t22
            * receiving_side_rate(
                params.mu2, gains.h_e2, gains.h_e1, gains.h_21, params, policy,
            );
    let e2 =
        t21 * receiving_side_rate(
            params.mu1, gains.h_e1, gains.h_e2, gains.h_12, params, policy,
        ) + t22 * own_slot_rate(params.mu2, gains.h_e2, params, policy);
    Ok((e1, e2))
}

/// Bit error rate of the backscatter link in the given direction, per the
/// closed-form energy-detector expression
/// `pe = erfc((1-beta) p0 sqrt(N) / (4 (1-beta) sigma0_sq + 4 sigmas_sq)
///            * mu_tx^2 h_e_tx h_link) / 2`
/// with `N = s_rate / rb` samples per bit. Always in `[0, 0.5]`.
pub fn ber_backscatter(direction: Direction, gains: &ChannelGains, params: &SystemParams) -> f64 {
    let (mu_tx, h_e_tx, h_link) = match direction {
        Direction::Wd1ToWd2 => (params.mu1, gains.h_e1, gains.h_12),
        Direction::Wd2ToWd1 => (params.mu2, gains.h_e2, gains.h_21),
    };
    let n = params.samples_per_bit();
    let one_minus_beta = 1.0 - params.beta;
    let scale = one_minus_beta * params.p0 * n.sqrt()
        / (4.0 * one_minus_beta * params.sigma0_sq + 4.0 * params.sigmas_sq);
    let arg = scale * mu_tx * mu_tx * h_e_tx * h_link;
    (0.5 * libm::erfc(arg)).clamp(0.0, 0.5)
}

/// Capacity of a binary symmetric channel with crossover probability `pe`,
/// `1 + (1-pe) log2(1-pe) + pe log2(pe)`, with `0 log2 0 = 0`.
///
/// Errors when `pe` lies outside `[0, 0.5]`.
pub fn bsc_capacity(pe: f64) -> Result<f64> {
    if !pe.is_finite() || !(0.0..=0.5).contains(&pe) {
        return Err(Error::Domain(format!(
            "crossover probability must lie in [0, 0.5], got {pe}"
        )));
    }
    let plogp = |p: f64| if p == 0.0 { 0.0 } else { p * p.log2() };
    Ok(1.0 + plogp(1.0 - pe) + plogp(pe))
}

/// Exchange-stage rates in bits per block: each user's bits are limited by
/// the slot length and by the capacity of the channel its *receiver*
/// decodes, so `r1_ex = rb * t21 * c2` and `r2_ex = rb * t22 * c1`.
pub fn exchange_rates(t21: f64, t22: f64, c1: f64, c2: f64, params: &SystemParams) -> (f64, f64) {
    (params.rb * t21 * c2, params.rb * t22 * c1)
}

/// Transmit powers for the joint-transmission stage: each device exhausts
/// everything it has harvested, `p_i = (e_i_wet + e_i_bs) / t3`.
///
/// A zero-length stage with zero energy yields `(0, 0)` by convention; a
/// zero-length stage with positive energy is a domain error because the
/// power would be unbounded.
pub fn transmit_powers(ledger: &EnergyLedger, t3: f64) -> Result<(f64, f64)> {
    if !t3.is_finite() || t3 < 0.0 {
        return Err(Error::Domain(format!(
            "joint-transmission duration must be non-negative, got {t3}"
        )));
    }
    let (e1, e2) = (ledger.e1_total(), ledger.e2_total());
    if t3 == 0.0 {
        if e1 == 0.0 && e2 == 0.0 {
            return Ok((0.0, 0.0));
        }
        return Err(Error::Domain(
            "cannot radiate positive energy in a zero-length joint-transmission stage".into(),
        ));
    }
    Ok((e1 / t3, e2 / t3))
}

/// Alamouti joint-transmission rate over the two half-slots, in bits per
/// block: `(t3 / 2) * bandwidth * log2(1 + p1 h_1a / sigma0_sq + p2 h_2a / sigma0_sq)`.
/// Zero when `t3 == 0` or when both powers are zero.
pub fn alamouti_rate(
    t3: f64,
    p1: f64,
    p2: f64,
    gains: &ChannelGains,
    params: &SystemParams,
) -> f64 {
    if t3 <= 0.0 {
        return 0.0;
    }
    let snr = (p1 * gains.h_1a + p2 * gains.h_2a) / params.sigma0_sq;
    0.5 * t3 * params.bandwidth * (1.0 + snr).log2()
}

/// Evaluates the full cooperative protocol on one allocation: harvesting,
/// backscatter exchange through the binary symmetric channels, joint
/// transmission with all accumulated energy, and the per-user `min`.
pub fn overall_rates(
    t: &TimeAllocation,
    gains: &ChannelGains,
    params: &SystemParams,
    policy: &HarvestPolicy,
) -> Result<RateBreakdown> {
    t.check_feasible()?;

    let pe2 = ber_backscatter(Direction::Wd1ToWd2, gains, params);
    let pe1 = ber_backscatter(Direction::Wd2ToWd1, gains, params);
    let c2 = bsc_capacity(pe2)?;
    let c1 = bsc_capacity(pe1)?;
    let (r1_ex, r2_ex) = exchange_rates(t.t21, t.t22, c1, c2, params);

    let (e1_wet, e2_wet) = harvest_wet(t.t1, gains, params)?;
    let (e1_bs, e2_bs) = harvest_backscatter(t.t21, t.t22, gains, params, policy)?;
    let ledger = EnergyLedger {
        e1_wet,
        e2_wet,
        e1_bs,
        e2_bs,
    };

    let t3 = t.t3();
    let (p1, p2, r3) = if t3 > 0.0 {
        let (p1, p2) = transmit_powers(&ledger, t3)?;
        (p1, p2, alamouti_rate(t3, p1, p2, gains, params))
    } else {
        // No stage-three airtime: nothing is jointly transmitted and the
        // harvested energy is simply left unused.
        (0.0, 0.0, 0.0)
    };

    Ok(RateBreakdown {
        r1_ex,
        r2_ex,
        r3,
        r1: r1_ex.min(r3),
        r2: r2_ex.min(r3),
        pe1,
        pe2,
        c1,
        c2,
        p1,
        p2,
        ledger,
    })
}

/// Shannon rate of one active exchange transmission, bits per block.
///
/// The transmitting device drains `e` joules over the slot `tau`; its radio
/// circuits draw `p_circuit` watts of that budget and only the remainder is
/// radiated, so `rate = tau * bandwidth * log2(1 + (e/tau - p_circuit) h / sigma0_sq)`
/// (zero when the slot is empty, nothing is spent, or circuits eat the
/// entire budget).
pub fn active_exchange_rate(tau: f64, e: f64, h_link: f64, params: &SystemParams) -> f64 {
    if tau <= 0.0 || e <= 0.0 {
        return 0.0;
    }
    let radiated = e / tau - params.p_circuit;
    if radiated <= 0.0 {
        return 0.0;
    }
    tau * params.bandwidth * (1.0 + radiated * h_link / params.sigma0_sq).log2()
}

/// Evaluates the no-backscatter baseline on one allocation.
///
/// The devices exchange with conventional active radios: user `i` spends
/// `e_ex_i` joules of its energy-transfer harvest on an active transmission
/// during its slot (see [`active_exchange_rate`]), no energy is harvested
/// during the exchange stage, and the joint transmission runs on the
/// residual energy. The same per-user `min` applies. Since the active links
/// are not binary symmetric channels, the breakdown reports them as
/// error-free (`pe = 0`, `c = 1`).
///
/// Errors when an `e_ex_i` is negative or exceeds the corresponding
/// energy-transfer harvest.
pub fn benchmark_rates(
    t: &TimeAllocation,
    e_ex1: f64,
    e_ex2: f64,
    gains: &ChannelGains,
    params: &SystemParams,
) -> Result<RateBreakdown> {
    t.check_feasible()?;
    let (e1_wet, e2_wet) = harvest_wet(t.t1, gains, params)?;
    for (name, spent, available) in [("e_ex1", e_ex1, e1_wet), ("e_ex2", e_ex2, e2_wet)] {
        if !spent.is_finite() || spent < 0.0 {
            return Err(Error::Domain(format!(
                "exchange energy {name} must be non-negative, got {spent}"
            )));
        }
        // Tiny tolerance so that a solver handing back `e == harvest` with
        // rounding dust is not rejected.
        if spent > available * (1.0 + 1e-9) + 1e-21 {
            return Err(Error::Domain(format!(
                "exchange energy {name} = {spent} exceeds the harvested {available}"
            )));
        }
    }

    let r1_ex = active_exchange_rate(t.t21, e_ex1, gains.h_12, params);
    let r2_ex = active_exchange_rate(t.t22, e_ex2, gains.h_21, params);

    let ledger = EnergyLedger {
        e1_wet,
        e2_wet,
        e1_bs: 0.0,
        e2_bs: 0.0,
    };
    // Only the energy left over after the active exchange reaches stage 3.
    let residual = EnergyLedger {
        e1_wet: (e1_wet - e_ex1).max(0.0),
        e2_wet: (e2_wet - e_ex2).max(0.0),
        e1_bs: 0.0,
        e2_bs: 0.0,
    };
    let t3 = t.t3();
    let (p1, p2, r3) = if t3 > 0.0 {
        let (p1, p2) = transmit_powers(&residual, t3)?;
        (p1, p2, alamouti_rate(t3, p1, p2, gains, params))
    } else {
        (0.0, 0.0, 0.0)
    };

    Ok(RateBreakdown {
        r1_ex,
        r2_ex,
        r3,
        r1: r1_ex.min(r3),
        r2: r2_ex.min(r3),
        pe1: 0.0,
        pe2: 0.0,
        c1: 1.0,
        c2: 1.0,
        p1,
        p2,
        ledger,
    })
}
