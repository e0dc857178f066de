//! Optimal time allocation for both transmission schemes.
//!
//! The common-throughput maximization is solved by bisecting on the target
//! throughput `z` and answering each feasibility probe exactly:
//!
//! * Cooperative scheme: delivering `z` bits through each backscatter link
//!   pins the minimum exchange-slot lengths, and because every harvested
//!   joule is linear in the stage durations, the leftover budget is best
//!   spent on the duration with the largest energy-per-second weight. That
//!   leaves a single concave one-dimensional problem in the
//!   joint-transmission length, solved by a scan-bracketed golden-section
//!   search.
//! * Baseline scheme: inverting the active-radio rate expression gives the
//!   exact energy each device must spend to deliver `z` bits in a given
//!   slot, so feasibility reduces to nested one-dimensional concave
//!   maximizations over the slot lengths, with each feasible window located
//!   through convex sublevel-set bisection.
//!
//! Exhaustive grid oracles ([`grid_oracle`], [`benchmark_grid_oracle`]) and
//! a direct nested search over the time simplex ([`refine_max_min`])
//! provide independent cross-checks of the bisection solvers.

// Guards are written `!(a > b)` rather than `a <= b` on purpose: a NaN
// produced by a degenerate instance must fall into the defensive branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{validate_or_error, ChannelGains, Direction, SystemParams, TimeAllocation};
use crate::rates::{
    benchmark_rates, ber_backscatter, bsc_capacity, harvest_backscatter, harvest_wet,
    overall_rates, HarvestPolicy, RateBreakdown,
};

/// Inverse golden ratio used by the section search.
const INV_PHI: f64 = 0.618_033_988_749_894_8;
/// Once the bisection lower bound is positive, the gap must also shrink
/// below this fraction of it before the solver reports convergence.
const RELATIVE_Z_TOLERANCE: f64 = 1e-9;
/// Scan points used to bracket the cooperative probe's concave search.
const COOP_SCAN: usize = 33;
/// Scan points used by the baseline probe's nested searches.
const BENCH_SCAN: usize = 13;
/// Scan points used by [`refine_max_min`] at each nesting level.
const REFINE_SCAN: usize = 17;

/// Tunable solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Absolute bisection-gap tolerance on the common throughput, bits.
    pub z_tolerance: f64,
    /// Interval tolerance of the inner one-dimensional searches, block
    /// fractions.
    pub inner_tolerance: f64,
    /// Maximum number of bisection iterations before giving up.
    pub max_iterations: usize,
    /// Default step of the exhaustive grid oracle, block fractions.
    pub grid_resolution: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            z_tolerance: 1e-10,
            inner_tolerance: 1e-12,
            max_iterations: 200,
            grid_resolution: 0.005,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.z_tolerance.is_finite() && self.z_tolerance > 0.0) {
            return Err(Error::Validation(format!(
                "z_tolerance must be positive and finite, got {}",
                self.z_tolerance
            )));
        }
        if !(self.inner_tolerance.is_finite() && self.inner_tolerance > 0.0) {
            return Err(Error::Validation(format!(
                "inner_tolerance must be positive and finite, got {}",
                self.inner_tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Validation(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.grid_resolution.is_finite()
            && self.grid_resolution > 0.0
            && self.grid_resolution <= 0.25)
        {
            return Err(Error::Validation(format!(
                "grid_resolution must lie in (0, 0.25], got {}",
                self.grid_resolution
            )));
        }
        Ok(())
    }
}

/// Convergence record of one bisection run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverDiagnostics {
    /// Bisection iterations performed.
    pub iterations: usize,
    /// Largest target proven feasible (the reported optimum).
    pub lower_bound: f64,
    /// Smallest target proven infeasible.
    pub upper_bound: f64,
    /// Whether the gap closed within tolerance.
    pub converged: bool,
    /// Which rate constraints are tight at the returned allocation (the
    /// max-min equalization set), plus `"exchange_impossible"` when a dead
    /// exchange link pinned the optimum at zero.
    pub active_constraints: Vec<&'static str>,
}

impl SolverDiagnostics {
    /// Width of the final bisection bracket, bits.
    pub fn gap(&self) -> f64 {
        self.upper_bound - self.lower_bound
    }
}

/// Names the rate constraints that bind the common throughput `z` at the
/// breakdown `b`: a constraint is active when its rate exceeds `z` by less
/// than a millionth of the throughput scale.
fn active_labels(b: &RateBreakdown, z: f64) -> Vec<&'static str> {
    let tolerance = 1e-6 * z.abs().max(1.0);
    let mut labels = Vec::new();
    if b.r1_ex - z <= tolerance {
        labels.push("r1_ex");
    }
    if b.r2_ex - z <= tolerance {
        labels.push("r2_ex");
    }
    if b.r3 - z <= tolerance {
        labels.push("r3");
    }
    labels
}

/// An optimized allocation together with everything it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// The certified time allocation.
    pub allocation: TimeAllocation,
    /// `min(r1, r2)` recomputed directly from the allocation, bits.
    pub common_throughput: f64,
    /// Full rate breakdown (including the energy ledger) at the allocation.
    pub breakdown: RateBreakdown,
    /// Energy each device spends on its active exchange transmission;
    /// present only for baseline solutions.
    pub exchange_energies: Option<(f64, f64)>,
    /// Bisection convergence record.
    pub diagnostics: SolverDiagnostics,
}

/// Maximizes a concave function on `[lo, hi]` by bracketing the best of a
/// uniform scan and refining with a golden-section search.
///
/// Returns the best *evaluated* point and its value, so the result is
/// always a valid primal bound even for extended-value functions that are
/// negative infinity near the interval ends.
pub fn max_concave_1d(
    lo: f64,
    hi: f64,
    scan_points: usize,
    tolerance: f64,
    f: impl Fn(f64) -> f64,
) -> (f64, f64) {
    if !(hi > lo) {
        return (lo, f(lo));
    }
    let n = scan_points.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect();

    let mut best_x = grid[0];
    let mut best_f = f64::NEG_INFINITY;
    let mut best_i = 0;
    for (i, &x) in grid.iter().enumerate() {
        let v = f(x);
        if v > best_f {
            best_f = v;
            best_x = x;
            best_i = i;
        }
    }

    let mut a = grid[best_i.saturating_sub(1)];
    let mut b = grid[(best_i + 1).min(n - 1)];
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tolerance {
        if f1 > best_f {
            best_f = f1;
            best_x = x1;
        }
        if f2 > best_f {
            best_f = f2;
            best_x = x2;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    if f1 > best_f {
        best_f = f1;
        best_x = x1;
    }
    if f2 > best_f {
        best_f = f2;
        best_x = x2;
    }
    (best_x, best_f)
}

/// Locates the interval `{x in [lo, hi] : f(x) < 0}` of a convex `f` by
/// minimizing and then bisecting toward both sign changes. Returns `None`
/// when the minimum is non-negative; the returned endpoints satisfy
/// `f < 0`.
fn convex_negative_window(
    lo: f64,
    hi: f64,
    scan_points: usize,
    tolerance: f64,
    f: &impl Fn(f64) -> f64,
) -> Option<(f64, f64)> {
    if !(hi > lo) {
        return if f(lo) < 0.0 { Some((lo, lo)) } else { None };
    }
    let (x_min, negated) = max_concave_1d(lo, hi, scan_points, tolerance, |x| -f(x));
    if !(negated > 0.0) {
        return None;
    }
    let left = if f(lo) < 0.0 {
        lo
    } else {
        bisect_to_negative(lo, x_min, tolerance, f)
    };
    let right = if f(hi) < 0.0 {
        hi
    } else {
        bisect_to_negative(hi, x_min, tolerance, f)
    };
    Some((left, right))
}

/// Shrinks the bracket between a point where `f >= 0` and one where
/// `f < 0`, returning a point on the negative side.
fn bisect_to_negative(mut pos: f64, mut neg: f64, tolerance: f64, f: &impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        if (pos - neg).abs() <= tolerance {
            break;
        }
        let mid = 0.5 * (pos + neg);
        if f(mid) < 0.0 {
            neg = mid;
        } else {
            pos = mid;
        }
    }
    neg
}

/// Joint-transmission rate written in terms of the gain-weighted energy
/// `l = e1 * h_1a + e2 * h_2a`, bits per block.
fn weighted_alamouti(l: f64, t3: f64, params: &SystemParams) -> f64 {
    if t3 <= 0.0 {
        return 0.0;
    }
    0.5 * t3 * params.bandwidth * (1.0 + l / (params.sigma0_sq * t3)).log2()
}

/// Energy a device must spend to deliver `z` bits over an active link of
/// gain `h_link` in a slot of length `tau`, inverting the active-radio rate
/// expression (circuit draw included). Infinite for an empty slot.
fn phi_active(tau: f64, z: f64, h_link: f64, params: &SystemParams) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if tau <= 0.0 {
        return f64::INFINITY;
    }
    let snr = libm::exp2(z / (params.bandwidth * tau)) - 1.0;
    tau * (params.p_circuit + snr * params.sigma0_sq / h_link)
}

/// Gain-weighted energy the joint transmission needs to reach `z` bits in
/// a stage of length `t3`. Infinite for an empty stage.
fn psi_joint(t3: f64, z: f64, params: &SystemParams) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if t3 <= 0.0 {
        return f64::INFINITY;
    }
    t3 * params.sigma0_sq * (libm::exp2(2.0 * z / (params.bandwidth * t3)) - 1.0)
}

/// Precomputed quantities shared by every cooperative feasibility probe.
struct CooperativeProbe<'a> {
    params: &'a SystemParams,
    /// Capacity of the link decoded by WD1 (WD2's bits).
    c1: f64,
    /// Capacity of the link decoded by WD2 (WD1's bits).
    c2: f64,
    /// Gain-weighted harvest per second of `t1`, `t21`, `t22`.
    weights: [f64; 3],
    /// Airtime available after the reserved overhead.
    budget: f64,
    tolerance: f64,
}

impl CooperativeProbe<'_> {
    /// Certifies whether a common throughput of `z` bits is reachable,
    /// returning an allocation that achieves it when so.
    fn feasible(&self, z: f64) -> Option<TimeAllocation> {
        let a1 = if z <= 0.0 {
            0.0
        } else {
            z / (self.params.rb * self.c2)
        };
        let a2 = if z <= 0.0 {
            0.0
        } else {
            z / (self.params.rb * self.c1)
        };
        if !(a1.is_finite() && a2.is_finite()) || a1 + a2 > self.budget {
            return None;
        }
        let spare = self.budget - a1 - a2;
        let base = self.weights[1] * a1 + self.weights[2] * a2;
        let w_max = self.weights[0].max(self.weights[1]).max(self.weights[2]);
        let g = |t3: f64| weighted_alamouti(base + w_max * (spare - t3).max(0.0), t3, self.params);
        let (t3, g_max) = max_concave_1d(0.0, spare, COOP_SCAN, self.tolerance, g);
        if g_max < z {
            return None;
        }
        // Hand every spare second to the duration(s) with the maximal
        // weight; exact ties (bitwise, as arises under symmetric gains) are
        // split evenly so symmetric inputs yield symmetric allocations.
        let winners = [
            self.weights[0] == w_max,
            self.weights[1] == w_max,
            self.weights[2] == w_max,
        ];
        let share = (spare - t3).max(0.0) / winners.iter().filter(|w| **w).count() as f64;
        let t1 = if winners[0] { share } else { 0.0 };
        let t21 = a1 + if winners[1] { share } else { 0.0 };
        let t22 = a2 + if winners[2] { share } else { 0.0 };
        TimeAllocation::from_stage_times(self.params.t0, t1, t21, t22, t3).ok()
    }
}

/// Maximizes the common throughput `min(r1, r2)` of the cooperative
/// backscatter scheme over all feasible time allocations.
///
/// Returns the certified optimum; if the bisection hits its iteration
/// budget first, the best certified solution travels inside
/// [`Error::NonConvergence`].
pub fn maximize_common_throughput(
    gains: &ChannelGains,
    params: &SystemParams,
    policy: &HarvestPolicy,
    config: &SolverConfig,
) -> Result<Solution> {
    validate_or_error(params, gains)?;
    config.validate()?;
    let budget = params.block_budget();

    let pe2 = ber_backscatter(Direction::Wd1ToWd2, gains, params);
    let pe1 = ber_backscatter(Direction::Wd2ToWd1, gains, params);
    let c2 = bsc_capacity(pe2)?;
    let c1 = bsc_capacity(pe1)?;
    if c1 == 0.0 || c2 == 0.0 {
        // A useless exchange link pins the common throughput at exactly
        // zero; report the whole budget handed to the joint stage.
        let allocation = TimeAllocation::from_stage_times(params.t0, 0.0, 0.0, 0.0, budget)?;
        let breakdown = overall_rates(&allocation, gains, params, policy)?;
        let mut active_constraints = vec!["exchange_impossible"];
        active_constraints.extend(active_labels(&breakdown, 0.0));
        return Ok(Solution {
            allocation,
            common_throughput: 0.0,
            breakdown,
            exchange_energies: None,
            diagnostics: SolverDiagnostics {
                iterations: 0,
                lower_bound: 0.0,
                upper_bound: 0.0,
                converged: true,
                active_constraints,
            },
        });
    }

    // Harvested energy is linear in each duration, so one unit-duration
    // evaluation per stage recovers the exact gain-weighted coefficients.
    let (e1_t1, e2_t1) = harvest_wet(1.0, gains, params)?;
    let (e1_t21, e2_t21) = harvest_backscatter(1.0, 0.0, gains, params, policy)?;
    let (e1_t22, e2_t22) = harvest_backscatter(0.0, 1.0, gains, params, policy)?;
    let weights = [
        e1_t1 * gains.h_1a + e2_t1 * gains.h_2a,
        e1_t21 * gains.h_1a + e2_t21 * gains.h_2a,
        e1_t22 * gains.h_1a + e2_t22 * gains.h_2a,
    ];
    let probe = CooperativeProbe {
        params,
        c1,
        c2,
        weights,
        budget,
        tolerance: config.inner_tolerance,
    };

    // Upper bound: each rate term individually capped over the whole block.
    let w_max = weights[0].max(weights[1]).max(weights[2]);
    let (_, r3_cap) = max_concave_1d(0.0, budget, COOP_SCAN, config.inner_tolerance, |t3| {
        weighted_alamouti(w_max * (budget - t3), t3, params)
    });
    let cap = (params.rb * c2 * budget)
        .min(params.rb * c1 * budget)
        .min(r3_cap);
    let mut hi = cap * (1.0 + 1e-9) + 1e-9;
    for _ in 0..128 {
        if probe.feasible(hi).is_none() {
            break;
        }
        hi = hi * 2.0 + 1.0;
    }

    let mut lo = 0.0;
    let mut certificate = probe
        .feasible(0.0)
        .expect("a zero target is always feasible");
    let mut iterations = 0;
    let converged = loop {
        let gap = hi - lo;
        if gap <= config.z_tolerance && (lo == 0.0 || gap <= RELATIVE_Z_TOLERANCE * lo) {
            break true;
        }
        if iterations >= config.max_iterations {
            break false;
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        match probe.feasible(mid) {
            Some(allocation) => {
                lo = mid;
                certificate = allocation;
            }
            None => hi = mid,
        }
    };

    let breakdown = overall_rates(&certificate, gains, params, policy)?;
    let common_throughput = breakdown.r1.min(breakdown.r2);
    let active_constraints = active_labels(&breakdown, common_throughput);
    let solution = Solution {
        allocation: certificate,
        common_throughput,
        breakdown,
        exchange_energies: None,
        diagnostics: SolverDiagnostics {
            iterations,
            lower_bound: lo,
            upper_bound: hi,
            converged,
            active_constraints,
        },
    };
    if converged {
        Ok(solution)
    } else {
        Err(Error::NonConvergence {
            iterations,
            best_value: solution.common_throughput,
            best: Box::new(solution),
        })
    }
}

/// Precomputed quantities shared by every baseline feasibility probe.
struct BenchmarkProbe<'a> {
    params: &'a SystemParams,
    gains: &'a ChannelGains,
    /// Harvest per second of `t1` at each device.
    a1: f64,
    a2: f64,
    budget: f64,
    tolerance: f64,
}

impl BenchmarkProbe<'_> {
    fn phi1(&self, tau: f64, z: f64) -> f64 {
        phi_active(tau, z, self.gains.h_12, self.params)
    }

    fn phi2(&self, tau: f64, z: f64) -> f64 {
        phi_active(tau, z, self.gains.h_21, self.params)
    }

    /// Maximizes the joint-stage energy surplus over `t1` for fixed slots,
    /// returning `(surplus, t1)`; the surplus is negative infinity when no
    /// `t1` leaves both devices solvent.
    fn best_t1(&self, z: f64, t21: f64, t22: f64) -> (f64, f64) {
        let spend1 = self.phi1(t21, z);
        let spend2 = self.phi2(t22, z);
        if !(spend1.is_finite() && spend2.is_finite()) {
            return (f64::NEG_INFINITY, 0.0);
        }
        let t1_min = (spend1 / self.a1).max(spend2 / self.a2);
        let t1_max = self.budget - t21 - t22;
        if !(t1_min < t1_max) {
            return (f64::NEG_INFINITY, 0.0);
        }
        let surplus = |t1: f64| {
            (self.a1 * t1 - spend1) * self.gains.h_1a + (self.a2 * t1 - spend2) * self.gains.h_2a
                - psi_joint(t1_max - t1, z, self.params)
        };
        let (t1, value) = max_concave_1d(t1_min, t1_max, BENCH_SCAN, self.tolerance, surplus);
        (value, t1)
    }

    /// Maximizes the surplus over `(t22, t1)` for a fixed `t21`, returning
    /// `(surplus, t22, t1)`.
    fn best_t22(&self, z: f64, t21: f64) -> (f64, f64, f64) {
        let upper = self.budget - t21;
        let need1 = self.phi1(t21, z) / self.a1;
        if !(upper > 0.0) || !need1.is_finite() {
            return (f64::NEG_INFINITY, 0.0, 0.0);
        }
        // t22 values admitting a non-empty t1 window form the sublevel set
        // of this convex margin.
        let margin = |t22: f64| need1.max(self.phi2(t22, z) / self.a2) + t21 + t22 - self.budget;
        let Some((w_lo, w_hi)) =
            convex_negative_window(0.0, upper, BENCH_SCAN, self.tolerance, &margin)
        else {
            return (f64::NEG_INFINITY, 0.0, 0.0);
        };
        let (t22, _) = max_concave_1d(w_lo, w_hi, BENCH_SCAN, self.tolerance, |t22| {
            self.best_t1(z, t21, t22).0
        });
        let (value, t1) = self.best_t1(z, t21, t22);
        (value, t22, t1)
    }

    /// Smallest achievable margin over `t22` for a fixed `t21`; convex in
    /// `t21`, so its negative sublevel set is the `t21` search window.
    fn min_margin(&self, z: f64, t21: f64) -> f64 {
        let upper = self.budget - t21;
        let need1 = self.phi1(t21, z) / self.a1;
        if !(upper > 0.0) || !need1.is_finite() {
            return f64::INFINITY;
        }
        let (_, negated) = max_concave_1d(0.0, upper, BENCH_SCAN, self.tolerance, |t22| {
            -(need1.max(self.phi2(t22, z) / self.a2) + t21 + t22 - self.budget)
        });
        -negated
    }

    /// Certifies whether the baseline can reach `z` bits for both users,
    /// returning the allocation and per-device exchange spends when so.
    fn feasible(&self, z: f64) -> Option<(TimeAllocation, (f64, f64))> {
        let window =
            convex_negative_window(0.0, self.budget, BENCH_SCAN, self.tolerance, &|t21| {
                self.min_margin(z, t21)
            })?;
        let (t21, surplus) =
            max_concave_1d(window.0, window.1, BENCH_SCAN, self.tolerance, |t21| {
                self.best_t22(z, t21).0
            });
        if !(surplus >= 0.0) {
            return None;
        }
        let (_, t22, t1) = self.best_t22(z, t21);
        let t3 = (self.budget - t21 - t22 - t1).max(0.0);
        let allocation = TimeAllocation::from_stage_times(self.params.t0, t1, t21, t22, t3).ok()?;
        Some((allocation, (self.phi1(t21, z), self.phi2(t22, z))))
    }
}

/// Maximizes the common throughput of the no-backscatter baseline, in
/// which each device funds an active exchange transmission from its
/// energy-transfer harvest and the residual powers the joint transmission.
pub fn maximize_benchmark(
    gains: &ChannelGains,
    params: &SystemParams,
    config: &SolverConfig,
) -> Result<Solution> {
    validate_or_error(params, gains)?;
    config.validate()?;
    let budget = params.block_budget();
    let probe = BenchmarkProbe {
        params,
        gains,
        a1: params.eta * params.p0 * gains.h_e1,
        a2: params.eta * params.p0 * gains.h_e2,
        budget,
        tolerance: config.inner_tolerance.max(1e-9),
    };

    // Upper bounds with every constraint but one relaxed: the whole block
    // both harvesting and transmitting.
    let weighted = (probe.a1 * gains.h_1a + probe.a2 * gains.h_2a) * budget;
    let r3_cap = weighted_alamouti(weighted, budget, params);
    let ex_cap =
        |a: f64, h: f64| budget * params.bandwidth * (1.0 + a * h / params.sigma0_sq).log2();
    let cap = r3_cap
        .min(ex_cap(probe.a1, gains.h_12))
        .min(ex_cap(probe.a2, gains.h_21));
    let mut hi = cap * (1.0 + 1e-9) + 1e-9;
    for _ in 0..128 {
        if probe.feasible(hi).is_none() {
            break;
        }
        hi = hi * 2.0 + 1.0;
    }

    let mut lo = 0.0;
    let mut certificate: Option<(TimeAllocation, (f64, f64))> = None;
    let mut iterations = 0;
    let converged = loop {
        let gap = hi - lo;
        if gap <= config.z_tolerance && (lo == 0.0 || gap <= RELATIVE_Z_TOLERANCE * lo) {
            break true;
        }
        if iterations >= config.max_iterations {
            break false;
        }
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        match probe.feasible(mid) {
            Some(cert) => {
                lo = mid;
                certificate = Some(cert);
            }
            None => hi = mid,
        }
    };

    let (allocation, (e_ex1, e_ex2)) = match certificate {
        Some(cert) => cert,
        // Nothing positive was certified: report an idle baseline.
        None => (
            TimeAllocation::from_stage_times(params.t0, 0.0, 0.0, 0.0, budget)?,
            (0.0, 0.0),
        ),
    };
    let breakdown = benchmark_rates(&allocation, e_ex1, e_ex2, gains, params)?;
    let common_throughput = breakdown.r1.min(breakdown.r2);
    let active_constraints = active_labels(&breakdown, common_throughput);
    let solution = Solution {
        allocation,
        common_throughput,
        breakdown,
        exchange_energies: Some((e_ex1, e_ex2)),
        diagnostics: SolverDiagnostics {
            iterations,
            lower_bound: lo,
            upper_bound: hi,
            converged,
            active_constraints,
        },
    };
    if converged {
        Ok(solution)
    } else {
        Err(Error::NonConvergence {
            iterations,
            best_value: solution.common_throughput,
            best: Box::new(solution),
        })
    }
}

/// Wraps a best-on-grid point as a full [`Solution`] so oracle results can
/// be inspected and reported exactly like solver results.
fn grid_solution(
    value: f64,
    allocation: TimeAllocation,
    breakdown: RateBreakdown,
    exchange_energies: Option<(f64, f64)>,
) -> Solution {
    let active_constraints = active_labels(&breakdown, value);
    Solution {
        allocation,
        common_throughput: value,
        breakdown,
        exchange_energies,
        diagnostics: SolverDiagnostics {
            iterations: 0,
            lower_bound: value,
            upper_bound: value,
            converged: true,
            active_constraints,
        },
    }
}

/// Exhaustively evaluates the cooperative scheme on every allocation whose
/// first three durations are multiples of `resolution` (the joint stage
/// takes the remainder), returning the best point found. Ties keep the
/// lexicographically first `(t1, t21, t22)`.
pub fn grid_oracle(
    gains: &ChannelGains,
    params: &SystemParams,
    policy: &HarvestPolicy,
    resolution: f64,
) -> Result<Solution> {
    validate_or_error(params, gains)?;
    let budget = params.block_budget();
    if !(resolution.is_finite() && resolution > 0.0 && resolution <= 0.25) {
        return Err(Error::Validation(format!(
            "grid resolution must lie in (0, 0.25], got {resolution}"
        )));
    }
    let n = (budget / resolution + 1e-9).floor() as usize;
    let per_t1: Vec<Option<(f64, TimeAllocation)>> = (0..n + 1)
        .into_par_iter()
        .map(|i| {
            let t1 = i as f64 * resolution;
            let mut best: Option<(f64, TimeAllocation)> = None;
            for j in 0..n + 1 - i {
                let t21 = j as f64 * resolution;
                for k in 0..n + 1 - i - j {
                    let t22 = k as f64 * resolution;
                    let t3 = (budget - t1 - t21 - t22).max(0.0);
                    let Ok(allocation) =
                        TimeAllocation::from_stage_times(params.t0, t1, t21, t22, t3)
                    else {
                        continue;
                    };
                    let Ok(rates) = overall_rates(&allocation, gains, params, policy) else {
                        continue;
                    };
                    let value = rates.r1.min(rates.r2);
                    if best.as_ref().is_none_or(|(b, _)| value > *b) {
                        best = Some((value, allocation));
                    }
                }
            }
            best
        })
        .collect();

    let mut overall: Option<(f64, TimeAllocation)> = None;
    for candidate in per_t1.into_iter().flatten() {
        if overall.as_ref().is_none_or(|(b, _)| candidate.0 > *b) {
            overall = Some(candidate);
        }
    }
    let (value, allocation) =
        overall.ok_or_else(|| Error::Infeasible("the allocation grid is empty".into()))?;
    let breakdown = overall_rates(&allocation, gains, params, policy)?;
    Ok(grid_solution(value, allocation, breakdown, None))
}

/// Exhaustive oracle for the baseline: the same time grid crossed with
/// `energy_levels` evenly spaced exchange spends per device (from nothing
/// to the full energy-transfer harvest). Returns the best point found with
/// the winning spends in `exchange_energies`.
pub fn benchmark_grid_oracle(
    gains: &ChannelGains,
    params: &SystemParams,
    resolution: f64,
    energy_levels: usize,
) -> Result<Solution> {
    validate_or_error(params, gains)?;
    let budget = params.block_budget();
    if !(resolution.is_finite() && resolution > 0.0 && resolution <= 0.25) {
        return Err(Error::Validation(format!(
            "grid resolution must lie in (0, 0.25], got {resolution}"
        )));
    }
    if energy_levels < 2 {
        return Err(Error::Validation(format!(
            "need at least 2 energy levels, got {energy_levels}"
        )));
    }
    let fractions: Vec<f64> = (0..energy_levels)
        .map(|l| l as f64 / (energy_levels - 1) as f64)
        .collect();
    let n = (budget / resolution + 1e-9).floor() as usize;
    type Best = Option<(f64, TimeAllocation, (f64, f64))>;
    let per_t1: Vec<Best> = (0..n + 1)
        .into_par_iter()
        .map(|i| {
            let t1 = i as f64 * resolution;
            let Ok((cap1, cap2)) = harvest_wet(t1, gains, params) else {
                return None;
            };
            let mut best: Best = None;
            for j in 0..n + 1 - i {
                let t21 = j as f64 * resolution;
                for k in 0..n + 1 - i - j {
                    let t22 = k as f64 * resolution;
                    let t3 = (budget - t1 - t21 - t22).max(0.0);
                    let Ok(allocation) =
                        TimeAllocation::from_stage_times(params.t0, t1, t21, t22, t3)
                    else {
                        continue;
                    };
                    for fa in &fractions {
                        for fb in &fractions {
                            let spends = (fa * cap1, fb * cap2);
                            let Ok(rates) =
                                benchmark_rates(&allocation, spends.0, spends.1, gains, params)
                            else {
                                continue;
                            };
                            let value = rates.r1.min(rates.r2);
                            if best.as_ref().is_none_or(|(b, _, _)| value > *b) {
                                best = Some((value, allocation, spends));
                            }
                        }
                    }
                }
            }
            best
        })
        .collect();

    let mut overall: Best = None;
    for candidate in per_t1.into_iter().flatten() {
        if overall.as_ref().is_none_or(|(b, _, _)| candidate.0 > *b) {
            overall = Some(candidate);
        }
    }
    let (value, allocation, spends) =
        overall.ok_or_else(|| Error::Infeasible("the allocation grid is empty".into()))?;
    let breakdown = benchmark_rates(&allocation, spends.0, spends.1, gains, params)?;
    Ok(grid_solution(value, allocation, breakdown, Some(spends)))
}

/// Directly maximizes the cooperative common throughput by nesting
/// golden-section searches over `t21`, `t22`, and `t1` (the joint stage
/// takes the remainder). The objective is concave, and partial
/// maximization preserves concavity, so each level is unimodal. Serves as
/// an independent high-resolution cross-check of
/// [`maximize_common_throughput`].
pub fn refine_max_min(
    gains: &ChannelGains,
    params: &SystemParams,
    policy: &HarvestPolicy,
    config: &SolverConfig,
) -> Result<(f64, TimeAllocation)> {
    validate_or_error(params, gains)?;
    config.validate()?;
    let budget = params.block_budget();
    let tolerance = config.inner_tolerance.max(1e-10);

    let value_at = |t21: f64, t22: f64, t1: f64| -> f64 {
        let t3 = (budget - t21 - t22 - t1).max(0.0);
        TimeAllocation::from_stage_times(params.t0, t1, t21, t22, t3)
            .and_then(|a| overall_rates(&a, gains, params, policy))
            .map_or(f64::NEG_INFINITY, |rates| rates.r1.min(rates.r2))
    };
    let best_t1 = |t21: f64, t22: f64| -> (f64, f64) {
        max_concave_1d(
            0.0,
            (budget - t21 - t22).max(0.0),
            REFINE_SCAN,
            tolerance,
            |t1| value_at(t21, t22, t1),
        )
    };
    let best_t22 = |t21: f64| -> (f64, f64) {
        max_concave_1d(
            0.0,
            (budget - t21).max(0.0),
            REFINE_SCAN,
            tolerance,
            |t22| best_t1(t21, t22).1,
        )
    };

    let (t21, _) = max_concave_1d(0.0, budget, REFINE_SCAN, tolerance, |t21| best_t22(t21).1);
    let (t22, _) = best_t22(t21);
    let (t1, _) = best_t1(t21, t22);
    let t3 = (budget - t21 - t22 - t1).max(0.0);
    let allocation = TimeAllocation::from_stage_times(params.t0, t1, t21, t22, t3)?;
    let rates = overall_rates(&allocation, gains, params, policy)?;
    Ok((rates.r1.min(rates.r2), allocation))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concave_search_finds_interior_quadratic_maximum() {
        let (x, v) = max_concave_1d(0.0, 1.0, 17, 1e-10, |x| -(x - 0.3) * (x - 0.3));
        assert!((x - 0.3).abs() <= 1e-6, "argmax {x} should be 0.3");
        assert!((-1e-12..=0.0).contains(&v), "value {v} should be ~0");
    }

    #[test]
    fn concave_search_handles_boundary_maximum() {
        let (x, v) = max_concave_1d(0.0, 1.0, 17, 1e-10, |x| x);
        assert!((x - 1.0).abs() <= 1e-6, "argmax {x} should be the boundary");
        assert!((v - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn concave_search_survives_infinite_end_regions() {
        let f = |x: f64| {
            if (0.30..=0.34).contains(&x) {
                1.0 - (x - 0.32) * (x - 0.32)
            } else {
                f64::NEG_INFINITY
            }
        };
        let (x, v) = max_concave_1d(0.0, 1.0, 33, 1e-10, f);
        assert!((x - 0.32).abs() <= 1e-6, "argmax {x} should be 0.32");
        assert!((v - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn concave_search_collapsed_interval_evaluates_endpoint() {
        let (x, v) = max_concave_1d(0.25, 0.25, 17, 1e-10, |x| 2.0 * x);
        assert_eq!(x, 0.25);
        assert_eq!(v, 0.5);
    }

    #[test]
    fn negative_window_matches_analytic_roots() {
        // f(x) = (x - 0.2)(x - 0.6) is negative exactly on (0.2, 0.6).
        let f = |x: f64| (x - 0.2) * (x - 0.6);
        let (lo, hi) = convex_negative_window(0.0, 1.0, 17, 1e-12, &f).unwrap();
        assert!((lo - 0.2).abs() <= 1e-9, "left root {lo}");
        assert!((hi - 0.6).abs() <= 1e-9, "right root {hi}");
        assert!(f(lo) < 0.0 && f(hi) < 0.0, "endpoints must sit inside");
        assert!(convex_negative_window(0.0, 1.0, 17, 1e-12, &|x: f64| {
            (x - 0.5) * (x - 0.5) + 0.1
        })
        .is_none());
    }

    #[test]
    fn solver_converges_on_the_default_instance() {
        let params = SystemParams::default();
        let gains = ChannelGains::default();
        let solution = maximize_common_throughput(
            &gains,
            &params,
            &HarvestPolicy::default(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(solution.diagnostics.converged);
        assert!(
            solution.diagnostics.gap() <= 1e-10 + 1e-9 * solution.diagnostics.lower_bound,
            "gap {} too wide",
            solution.diagnostics.gap()
        );
        assert!(solution.common_throughput > 0.0);
        solution.allocation.check_feasible().unwrap();
        // The certificate must actually deliver the certified value.
        assert!(
            solution.common_throughput >= solution.diagnostics.lower_bound * (1.0 - 1e-9) - 1e-12,
            "certificate {} below certified bound {}",
            solution.common_throughput,
            solution.diagnostics.lower_bound
        );
    }

    #[test]
    fn solver_dominates_a_coarse_grid() {
        let params = SystemParams::default();
        let gains = ChannelGains::default();
        let policy = HarvestPolicy::default();
        let config = SolverConfig::default();
        let solution = maximize_common_throughput(&gains, &params, &policy, &config).unwrap();
        let grid = grid_oracle(&gains, &params, &policy, 0.05).unwrap();
        assert!(
            solution.common_throughput >= grid.common_throughput - 1e-9,
            "solver {} must dominate grid {}",
            solution.common_throughput,
            grid.common_throughput
        );
        // The oracle's record is self-consistent like any solver output.
        assert_eq!(
            grid.common_throughput,
            grid.breakdown.r1.min(grid.breakdown.r2)
        );
    }

    #[test]
    fn solver_agrees_with_direct_nested_search() {
        let params = SystemParams::default();
        let gains = ChannelGains::default();
        let policy = HarvestPolicy::default();
        let config = SolverConfig::default();
        let solution = maximize_common_throughput(&gains, &params, &policy, &config).unwrap();
        let (refined, _) = refine_max_min(&gains, &params, &policy, &config).unwrap();
        let scale = solution.common_throughput.max(refined).max(1.0);
        assert!(
            (solution.common_throughput - refined).abs() <= 1e-6 * scale,
            "bisection {} vs direct search {}",
            solution.common_throughput,
            refined
        );
    }

    #[test]
    fn full_power_splitting_zeroes_the_common_throughput_exactly() {
        let params = SystemParams {
            beta: 1.0,
            ..SystemParams::default()
        };
        let gains = ChannelGains::default();
        let solution = maximize_common_throughput(
            &gains,
            &params,
            &HarvestPolicy::default(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(solution.common_throughput, 0.0);
        assert_eq!(solution.allocation.t21, 0.0);
        assert_eq!(solution.allocation.t22, 0.0);
        assert_eq!(solution.allocation.t3(), params.block_budget());
        assert!(
            solution
                .diagnostics
                .active_constraints
                .contains(&"exchange_impossible"),
            "dead link must be called out: {:?}",
            solution.diagnostics.active_constraints
        );
    }

    #[test]
    fn zero_reflection_zeroes_the_common_throughput_exactly() {
        let params = SystemParams {
            mu1: 0.0,
            ..SystemParams::default()
        };
        let gains = ChannelGains::default();
        let solution = maximize_common_throughput(
            &gains,
            &params,
            &HarvestPolicy::default(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(solution.common_throughput, 0.0);
    }

    #[test]
    fn symmetric_instance_yields_symmetric_solution() {
        let params = SystemParams::default();
        let gains = ChannelGains::default(); // identical devices
        let solution = maximize_common_throughput(
            &gains,
            &params,
            &HarvestPolicy::default(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(
            solution.allocation.t21, solution.allocation.t22,
            "mirrored devices must get mirrored slots"
        );
        assert_eq!(
            solution.breakdown.r1, solution.breakdown.r2,
            "mirrored devices must achieve identical rates"
        );
    }

    #[test]
    fn solver_value_grows_with_carrier_power() {
        let gains = ChannelGains::default();
        let policy = HarvestPolicy::default();
        let config = SolverConfig::default();
        let weak = SystemParams::default();
        let strong = SystemParams {
            p0: 50.0,
            ..SystemParams::default()
        };
        let z_weak = maximize_common_throughput(&gains, &weak, &policy, &config)
            .unwrap()
            .common_throughput;
        let z_strong = maximize_common_throughput(&gains, &strong, &policy, &config)
            .unwrap()
            .common_throughput;
        assert!(
            z_strong >= z_weak,
            "raising carrier power cannot hurt: {z_weak} -> {z_strong}"
        );
    }

    #[test]
    fn iteration_budget_exhaustion_reports_best_so_far() {
        let params = SystemParams::default();
        let gains = ChannelGains::default();
        let config = SolverConfig {
            max_iterations: 2,
            ..SolverConfig::default()
        };
        let result =
            maximize_common_throughput(&gains, &params, &HarvestPolicy::default(), &config);
        match result {
            Err(Error::NonConvergence {
                iterations, best, ..
            }) => {
                assert_eq!(iterations, 2);
                assert!(!best.diagnostics.converged);
                best.allocation.check_feasible().unwrap();
            }
            other => panic!("expected NonConvergence, got {other:?}"),
        }
    }

    #[test]
    fn grid_oracle_is_deterministic() {
        let params = SystemParams::default();
        let gains = ChannelGains::default();
        let policy = HarvestPolicy::default();
        let a = grid_oracle(&gains, &params, &policy, 0.05).unwrap();
        let b = grid_oracle(&gains, &params, &policy, 0.05).unwrap();
        assert_eq!(
            a.common_throughput.to_bits(),
            b.common_throughput.to_bits(),
            "value must be bit-identical"
        );
        assert_eq!(a.allocation, b.allocation, "allocation must be identical");
    }

    #[test]
    fn grid_oracle_rejects_bad_resolution() {
        let params = SystemParams::default();
        let gains = ChannelGains::default();
        let policy = HarvestPolicy::default();
        for resolution in [0.0, -0.1, 0.3, f64::NAN] {
            assert!(
                matches!(
                    grid_oracle(&gains, &params, &policy, resolution),
                    Err(Error::Validation(_))
                ),
                "resolution {resolution} must be rejected"
            );
        }
    }

    #[test]
    fn benchmark_solver_produces_a_valid_certificate() {
        let params = SystemParams::default();
        let gains = ChannelGains::default();
        let config = SolverConfig::default();
        let solution = maximize_benchmark(&gains, &params, &config).unwrap();
        assert!(solution.diagnostics.converged);
        assert!(solution.common_throughput > 0.0);
        let (e_ex1, e_ex2) = solution.exchange_energies.unwrap();
        let (cap1, cap2) = harvest_wet(solution.allocation.t1, &gains, &params).unwrap();
        assert!(
            e_ex1 <= cap1 * (1.0 + 1e-9) && e_ex2 <= cap2 * (1.0 + 1e-9),
            "spends ({e_ex1}, {e_ex2}) must fit the harvest ({cap1}, {cap2})"
        );
        // Recomputing from the certificate reproduces the reported value.
        let rates = benchmark_rates(&solution.allocation, e_ex1, e_ex2, &gains, &params).unwrap();
        assert_eq!(rates.r1.min(rates.r2), solution.common_throughput);
        assert!(
            solution.common_throughput >= solution.diagnostics.lower_bound * (1.0 - 1e-9) - 1e-12,
            "certificate {} below certified bound {}",
            solution.common_throughput,
            solution.diagnostics.lower_bound
        );
    }

    #[test]
    fn benchmark_solver_dominates_a_coarse_grid() {
        let params = SystemParams::default();
        let gains = ChannelGains::default();
        let config = SolverConfig::default();
        let solution = maximize_benchmark(&gains, &params, &config).unwrap();
        let grid = benchmark_grid_oracle(&gains, &params, 0.1, 5).unwrap();
        assert!(
            solution.common_throughput >= grid.common_throughput - 1e-9,
            "solver {} must dominate grid {}",
            solution.common_throughput,
            grid.common_throughput
        );
        assert!(
            grid.exchange_energies.is_some(),
            "oracle must report spends"
        );
    }

    #[test]
    fn benchmark_symmetric_instance_yields_symmetric_solution() {
        let params = SystemParams::default();
        let gains = ChannelGains::default();
        let solution = maximize_benchmark(&gains, &params, &SolverConfig::default()).unwrap();
        assert!(
            (solution.breakdown.r1 - solution.breakdown.r2).abs()
                <= 1e-6 * solution.breakdown.r1.max(1.0),
            "mirrored devices should achieve near-identical rates: {} vs {}",
            solution.breakdown.r1,
            solution.breakdown.r2
        );
    }

    #[test]
    fn converged_solutions_report_an_equalized_active_set() {
        // Max-min equalization: at a non-degenerate optimum at least two of
        // the four rate constraints (the joint-transmission rate counts for
        // both users) must be tight.
        let params = SystemParams::default();
        let gains = ChannelGains::default();
        let solution = maximize_common_throughput(
            &gains,
            &params,
            &HarvestPolicy::default(),
            &SolverConfig::default(),
        )
        .unwrap();
        let labels = &solution.diagnostics.active_constraints;
        assert!(!labels.is_empty(), "the binding constraint must be named");
        let mut tight = 0;
        for label in labels {
            tight += match *label {
                "r3" => 2, // binds both users' overall rates
                "r1_ex" | "r2_ex" => 1,
                other => panic!("unexpected constraint label {other}"),
            };
        }
        assert!(
            tight >= 2,
            "expected an equalized active set, got {labels:?}"
        );

        let benchmark = maximize_benchmark(&gains, &params, &SolverConfig::default()).unwrap();
        assert!(
            !benchmark.diagnostics.active_constraints.is_empty(),
            "baseline active set must also be reported"
        );
    }
}
