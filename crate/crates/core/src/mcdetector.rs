//! Sample-level Monte Carlo simulation of the backscatter receiver.
//!
//! The receiving device splits its antenna signal, feeding a fraction
//! `beta` to the harvester and the rest to an energy detector that decides
//! each bit by comparing the average sample energy against a threshold. The
//! simulation draws every baseband sample explicitly — carrier waveform,
//! per-bit reflection phase, antenna noise before the splitter, and decoder
//! circuit noise after it — and therefore serves as an empirical
//! cross-check of the closed-form bit-error-rate expression used by the
//! rate model ([`crate::rates::ber_backscatter`]).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{validate_or_error, ChannelGains, Direction, SystemParams};
use crate::rates::ber_backscatter;

/// Bits simulated per random stream; chunking keeps the run deterministic
/// under any parallel schedule while letting long runs use every core.
const CHUNK_BITS: u64 = 1024;
/// Two-sided 95% normal quantile for the binomial confidence interval.
const CI_QUANTILE: f64 = 1.959_963_984_540_054;

/// Statistical model of the pseudo-random carrier waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignalModel {
    /// Circularly symmetric complex Gaussian samples of unit average power.
    #[default]
    GaussianEnergySignal,
    /// Unit-magnitude samples with independent uniform phases.
    UnitModulusRandomPhase,
}

/// One detector experiment: who transmits, how many bits, and how the
/// randomness is seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectorScenario {
    /// Which device backscatters its bits to the other.
    pub direction: Direction,
    /// Number of equiprobable bits to simulate.
    pub n_bits: u64,
    /// Root seed; the run is a pure function of this value.
    pub seed: u64,
    /// Carrier waveform statistics.
    pub signal_model: SignalModel,
}

/// Empirical bit error rate with its binomial confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerEstimate {
    /// Fraction of bits decided incorrectly.
    pub p_hat: f64,
    /// Half-width of the 95% binomial confidence interval.
    pub ci_halfwidth: f64,
    /// Bits simulated.
    pub n_bits: u64,
    /// Decision threshold applied to the average sample energy.
    pub threshold: f64,
}

/// Side-by-side comparison of the closed-form bit error rate and the
/// Monte Carlo estimate at one operating point. Diagnostic only: the rate
/// model keeps using the closed form regardless of the outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaComparison {
    /// The simulated experiment.
    pub scenario: DetectorScenario,
    /// Samples per bit at this operating point.
    pub samples_per_bit: u32,
    /// Closed-form bit error rate.
    pub lemma_ber: f64,
    /// Monte Carlo estimate at the analytic midpoint threshold.
    pub estimate: BerEstimate,
    /// `estimate.p_hat / lemma_ber`.
    pub ratio: f64,
    /// Threshold that would have minimized the empirical error count.
    pub best_threshold: f64,
    /// Error rate at that empirically best threshold.
    pub best_threshold_error_rate: f64,
}

/// Per-link quantities of one detector experiment.
struct LinkGeometry {
    /// Reflection coefficient of the transmitting device.
    mu_tx: f64,
    /// Energy-node gain at the transmitting device.
    h_e_tx: f64,
    /// Energy-node gain at the receiving device.
    h_e_rx: f64,
    /// Device-to-device gain.
    h_link: f64,
}

fn link_geometry(
    direction: Direction,
    gains: &ChannelGains,
    params: &SystemParams,
) -> LinkGeometry {
    match direction {
        Direction::Wd1ToWd2 => LinkGeometry {
            mu_tx: params.mu1,
            h_e_tx: gains.h_e1,
            h_e_rx: gains.h_e2,
            h_link: gains.h_12,
        },
        Direction::Wd2ToWd1 => LinkGeometry {
            mu_tx: params.mu2,
            h_e_tx: gains.h_e2,
            h_e_rx: gains.h_e1,
            h_link: gains.h_21,
        },
    }
}

/// Mean average-sample-energy of the detector statistic under an absorbed
/// bit (`m0`) and a reflected bit (`m1`, averaged over the reflection
/// phase). The detector thresholds at the midpoint of the two.
pub fn hypothesis_means(
    direction: Direction,
    gains: &ChannelGains,
    params: &SystemParams,
) -> (f64, f64) {
    let link = link_geometry(direction, gains, params);
    let split = 1.0 - params.beta;
    let m0 = split * (params.p0 * link.h_e_rx + params.sigma0_sq) + params.sigmas_sq;
    let m1 = m0 + split * params.p0 * link.mu_tx * link.mu_tx * link.h_e_tx * link.h_link;
    (m0, m1)
}

/// Draws one complex sample of the carrier waveform with unit average
/// power.
fn sample_waveform(model: SignalModel, rng: &mut ChaCha8Rng) -> (f64, f64) {
    match model {
        SignalModel::GaussianEnergySignal => {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            (
                re * std::f64::consts::FRAC_1_SQRT_2,
                im * std::f64::consts::FRAC_1_SQRT_2,
            )
        }
        SignalModel::UnitModulusRandomPhase => {
            let phase = rng.gen::<f64>() * std::f64::consts::TAU;
            (phase.cos(), phase.sin())
        }
    }
}

/// Simulates the bits of one chunk on its own random stream, returning the
/// average sample energy and the transmitted bit for each.
fn simulate_chunk(
    chunk_index: u64,
    bits: u64,
    scenario: &DetectorScenario,
    link: &LinkGeometry,
    params: &SystemParams,
) -> Vec<(f64, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(chunk_index);

    let n = params.samples_per_bit().round() as usize;
    let amp_carrier = params.p0.sqrt();
    let alpha_rx = link.h_e_rx.sqrt();
    let amp_reflect = link.mu_tx * (link.h_e_tx * link.h_link).sqrt();
    let split = (1.0 - params.beta).sqrt();
    let noise0 = (params.sigma0_sq * 0.5).sqrt();
    let noises = (params.sigmas_sq * 0.5).sqrt();

    let mut out = Vec::with_capacity(bits as usize);
    for _ in 0..bits {
        let bit = rng.gen_bool(0.5);
        // The reflected path picks up one random phase per bit; drawing it
        // for absorbed bits too keeps both hypotheses on the same stream
        // positions.
        let phase = rng.gen::<f64>() * std::f64::consts::TAU;
        let (coeff_re, coeff_im) = if bit {
            (
                alpha_rx + amp_reflect * phase.cos(),
                amp_reflect * phase.sin(),
            )
        } else {
            (alpha_rx, 0.0)
        };

        let mut energy = 0.0;
        for _ in 0..n {
            let (x_re, x_im) = sample_waveform(scenario.signal_model, &mut rng);
            let s_re = amp_carrier * (coeff_re * x_re - coeff_im * x_im);
            let s_im = amp_carrier * (coeff_re * x_im + coeff_im * x_re);
            let n0_re: f64 = rng.sample(StandardNormal);
            let n0_im: f64 = rng.sample(StandardNormal);
            let ns_re: f64 = rng.sample(StandardNormal);
            let ns_im: f64 = rng.sample(StandardNormal);
            let y_re = split * (s_re + noise0 * n0_re) + noises * ns_re;
            let y_im = split * (s_im + noise0 * n0_im) + noises * ns_im;
            energy += y_re * y_re + y_im * y_im;
        }
        out.push((energy / n as f64, bit));
    }
    out
}

/// Runs the full experiment, returning the per-bit detector statistics in
/// bit order.
fn detector_statistics(
    scenario: &DetectorScenario,
    gains: &ChannelGains,
    params: &SystemParams,
) -> Result<Vec<(f64, bool)>> {
    validate_or_error(params, gains)?;
    if scenario.n_bits == 0 {
        return Err(Error::Validation(
            "a detector run needs at least one bit".into(),
        ));
    }
    let link = link_geometry(scenario.direction, gains, params);
    let chunks = scenario.n_bits.div_ceil(CHUNK_BITS);
    let per_chunk: Vec<Vec<(f64, bool)>> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let bits = CHUNK_BITS.min(scenario.n_bits - chunk * CHUNK_BITS);
            simulate_chunk(chunk, bits, scenario, &link, params)
        })
        .collect();
    Ok(per_chunk.into_iter().flatten().collect())
}

fn binomial_ci_halfwidth(p_hat: f64, n_bits: u64) -> f64 {
    CI_QUANTILE * (p_hat * (1.0 - p_hat) / n_bits as f64).sqrt()
}

/// Simulates the detector and reports the empirical bit error rate at the
/// analytic midpoint threshold. Fully deterministic given the scenario.
pub fn simulate_ber(
    scenario: &DetectorScenario,
    gains: &ChannelGains,
    params: &SystemParams,
) -> Result<BerEstimate> {
    let stats = detector_statistics(scenario, gains, params)?;
    let (m0, m1) = hypothesis_means(scenario.direction, gains, params);
    let threshold = 0.5 * (m0 + m1);
    let errors = stats
        .iter()
        .filter(|(energy, bit)| (*energy > threshold) != *bit)
        .count();
    let p_hat = errors as f64 / scenario.n_bits as f64;
    Ok(BerEstimate {
        p_hat,
        ci_halfwidth: binomial_ci_halfwidth(p_hat, scenario.n_bits),
        n_bits: scenario.n_bits,
        threshold,
    })
}

/// Finds the threshold minimizing the empirical error count by sweeping
/// every cut point of the sorted statistics. Returns the threshold and its
/// error count.
fn best_empirical_threshold(stats: &[(f64, bool)]) -> (f64, usize) {
    let mut sorted: Vec<(f64, bool)> = stats.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total_ones = sorted.iter().filter(|(_, bit)| *bit).count();

    // Cutting before index i decides `1` for everything at or above i, so
    // the errors are the ones below plus the zeros above.
    let mut ones_below = 0usize;
    let mut best_errors = sorted.len() - total_ones; // cut at the bottom
    let mut best_index = 0usize;
    for (i, (_, bit)) in sorted.iter().enumerate() {
        ones_below += usize::from(*bit);
        let zeros_above = (sorted.len() - i - 1) - (total_ones - ones_below);
        let errors = ones_below + zeros_above;
        if errors < best_errors {
            best_errors = errors;
            best_index = i + 1;
        }
    }

    let threshold = if best_index == 0 {
        sorted[0].0 - 1.0
    } else if best_index == sorted.len() {
        sorted[sorted.len() - 1].0 + 1.0
    } else {
        0.5 * (sorted[best_index - 1].0 + sorted[best_index].0)
    };
    (threshold, best_errors)
}

/// Simulates the detector and lines the result up against the closed-form
/// bit error rate, including the empirically best threshold as a further
/// diagnostic.
pub fn compare_with_lemma(
    scenario: &DetectorScenario,
    gains: &ChannelGains,
    params: &SystemParams,
) -> Result<LemmaComparison> {
    let stats = detector_statistics(scenario, gains, params)?;
    let (m0, m1) = hypothesis_means(scenario.direction, gains, params);
    let threshold = 0.5 * (m0 + m1);
    let errors = stats
        .iter()
        .filter(|(energy, bit)| (*energy > threshold) != *bit)
        .count();
    let p_hat = errors as f64 / scenario.n_bits as f64;
    let estimate = BerEstimate {
        p_hat,
        ci_halfwidth: binomial_ci_halfwidth(p_hat, scenario.n_bits),
        n_bits: scenario.n_bits,
        threshold,
    };

    let lemma_ber = ber_backscatter(scenario.direction, gains, params);
    let (best_threshold, best_errors) = best_empirical_threshold(&stats);
    Ok(LemmaComparison {
        scenario: *scenario,
        samples_per_bit: params.samples_per_bit().round() as u32,
        lemma_ber,
        estimate,
        ratio: p_hat / lemma_ber,
        best_threshold,
        best_threshold_error_rate: best_errors as f64 / scenario.n_bits as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gains_from_topology, Topology};

    /// Close-range device link where the detector genuinely discriminates;
    /// at the reference 4 m spacing the reflected power sits far below the
    /// sample-energy noise floor and every estimate saturates near 0.5.
    fn strong_link_gains(params: &SystemParams) -> ChannelGains {
        let mut gains = ChannelGains::default();
        let topo = Topology {
            d_e1: 1.0,
            d_e2: 1.0,
            d_1a: 1.0,
            d_2a: 1.0,
            d_12: 0.3,
        };
        let h = gains_from_topology(&topo, params).unwrap().h_12;
        gains.h_12 = h;
        gains.h_21 = h;
        gains
    }

    fn scenario(n_bits: u64, seed: u64, signal_model: SignalModel) -> DetectorScenario {
        DetectorScenario {
            direction: Direction::Wd1ToWd2,
            n_bits,
            seed,
            signal_model,
        }
    }

    #[test]
    fn identical_scenarios_reproduce_bit_for_bit() {
        let params = SystemParams::default();
        let gains = ChannelGains::default();
        let s = scenario(4096, 7, SignalModel::GaussianEnergySignal);
        let a = simulate_ber(&s, &gains, &params).unwrap();
        let b = simulate_ber(&s, &gains, &params).unwrap();
        assert_eq!(a, b, "same seed must give the same estimate");
        let c = simulate_ber(
            &scenario(4096, 8, SignalModel::GaussianEnergySignal),
            &gains,
            &params,
        )
        .unwrap();
        assert_ne!(a.p_hat.to_bits(), c.p_hat.to_bits(), "new seed, new draw");
    }

    #[test]
    fn threshold_is_the_midpoint_of_the_hypothesis_means() {
        let params = SystemParams::default();
        let gains = ChannelGains::default();
        let s = scenario(64, 1, SignalModel::GaussianEnergySignal);
        let estimate = simulate_ber(&s, &gains, &params).unwrap();
        let (m0, m1) = hypothesis_means(Direction::Wd1ToWd2, &gains, &params);
        assert_eq!(estimate.threshold, 0.5 * (m0 + m1));
        assert!(m1 > m0, "a reflected bit must raise the mean energy");
    }

    #[test]
    fn symmetric_hypotheses_give_a_coin_flip() {
        let gains = ChannelGains::default();
        let n_bits = 20_000;
        // Three binomial standard errors around one half.
        let slack = 3.0 * (0.25 / n_bits as f64).sqrt();

        let params = SystemParams {
            beta: 1.0,
            ..SystemParams::default()
        };
        let s = scenario(n_bits, 11, SignalModel::GaussianEnergySignal);
        let estimate = simulate_ber(&s, &gains, &params).unwrap();
        assert!(
            (estimate.p_hat - 0.5).abs() <= slack,
            "beta=1 estimate {} should sit within {slack} of 0.5",
            estimate.p_hat
        );

        let params = SystemParams {
            mu1: 0.0,
            ..SystemParams::default()
        };
        let estimate = simulate_ber(&s, &gains, &params).unwrap();
        assert!(
            (estimate.p_hat - 0.5).abs() <= slack,
            "mu=0 estimate {} should sit within {slack} of 0.5",
            estimate.p_hat
        );
    }

    #[test]
    fn error_rate_is_non_increasing_in_carrier_power() {
        let params = SystemParams::default();
        let gains = strong_link_gains(&params);
        let s = scenario(100_000, 42, SignalModel::UnitModulusRandomPhase);
        let mut previous: Option<BerEstimate> = None;
        for p0 in [0.25, 1.0, 4.0] {
            let mut params = params.clone();
            params.p0 = p0;
            let estimate = simulate_ber(&s, &gains, &params).unwrap();
            if let Some(last) = previous {
                assert!(
                    estimate.p_hat <= last.p_hat + last.ci_halfwidth + estimate.ci_halfwidth,
                    "raising the carrier to {p0} W worsened the error rate: {} -> {}",
                    last.p_hat,
                    estimate.p_hat
                );
            }
            previous = Some(estimate);
        }
        let final_p = previous.unwrap().p_hat;
        assert!(
            final_p < 0.4,
            "strong link should beat a coin flip, got {final_p}"
        );
    }

    #[test]
    fn error_rate_is_non_increasing_in_samples_per_bit() {
        let base = SystemParams::default();
        let gains = strong_link_gains(&base);
        for seed in [42, 1234] {
            let s = scenario(100_000, seed, SignalModel::UnitModulusRandomPhase);
            let mut previous: Option<BerEstimate> = None;
            for rb in [1e5, 5e4] {
                // Halving the bit rate doubles the samples per bit.
                let mut params = base.clone();
                params.rb = rb;
                let estimate = simulate_ber(&s, &gains, &params).unwrap();
                if let Some(last) = previous {
                    assert!(
                        estimate.p_hat <= last.p_hat + last.ci_halfwidth + estimate.ci_halfwidth,
                        "seed {seed}: doubling samples worsened the error rate: {} -> {}",
                        last.p_hat,
                        estimate.p_hat
                    );
                }
                previous = Some(estimate);
            }
        }
    }

    #[test]
    fn empirically_best_threshold_never_loses_to_the_midpoint() {
        let params = SystemParams::default();
        let gains = strong_link_gains(&params);
        let s = scenario(20_000, 3, SignalModel::GaussianEnergySignal);
        let report = compare_with_lemma(&s, &gains, &params).unwrap();
        assert!(
            report.best_threshold_error_rate <= report.estimate.p_hat,
            "optimizing the threshold cannot increase the error count: {} vs {}",
            report.best_threshold_error_rate,
            report.estimate.p_hat
        );
        assert_eq!(report.samples_per_bit, 6);
        // At this close range the closed form underflows to an exact zero,
        // so the ratio degenerates to infinity; both stay reportable.
        assert!(report.lemma_ber >= 0.0);
        assert!(
            report.ratio >= 0.0,
            "ratio {} must not be NaN",
            report.ratio
        );
    }

    #[test]
    fn comparison_at_symmetric_hypotheses_reports_unity_ratio() {
        let params = SystemParams {
            beta: 1.0,
            ..SystemParams::default()
        };
        let gains = ChannelGains::default();
        let s = scenario(20_000, 5, SignalModel::GaussianEnergySignal);
        let report = compare_with_lemma(&s, &gains, &params).unwrap();
        assert_eq!(report.lemma_ber, 0.5);
        let slack = 3.0 * (0.25 / s.n_bits as f64).sqrt();
        assert!(
            (report.ratio - 1.0).abs() <= 2.0 * slack,
            "both sides should be a coin flip, ratio {}",
            report.ratio
        );
    }

    #[test]
    fn zero_bits_are_rejected() {
        let params = SystemParams::default();
        let gains = ChannelGains::default();
        let s = scenario(0, 1, SignalModel::GaussianEnergySignal);
        assert!(matches!(
            simulate_ber(&s, &gains, &params),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn chunk_boundaries_do_not_change_the_outcome_shape() {
        // A run shorter than one chunk and one spanning several chunks both
        // produce estimates on the same scale; this guards the chunked
        // stream plumbing (lengths, ordering, final partial chunk).
        let params = SystemParams::default();
        let gains = strong_link_gains(&params);
        let short = simulate_ber(
            &scenario(100, 9, SignalModel::UnitModulusRandomPhase),
            &gains,
            &params,
        )
        .unwrap();
        let long = simulate_ber(
            &scenario(3 * CHUNK_BITS + 17, 9, SignalModel::UnitModulusRandomPhase),
            &gains,
            &params,
        )
        .unwrap();
        assert_eq!(short.n_bits, 100);
        assert_eq!(long.n_bits, 3 * CHUNK_BITS + 17);
        assert!((0.0..=1.0).contains(&short.p_hat));
        assert!((0.0..=1.0).contains(&long.p_hat));
        assert!(
            long.ci_halfwidth < short.ci_halfwidth,
            "more bits, tighter CI"
        );
    }
}
