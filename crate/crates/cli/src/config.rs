//! Configuration files for the command-line driver.
//!
//! Instances are described in TOML. Every section and every key is
//! optional; anything omitted falls back to the reference defaults baked
//! into the core crate. Unknown keys are rejected with the offending line
//! so typos cannot silently run a different experiment.
//!
//! Channel gains resolve in three layers, later layers winning key by key:
//!
//! 1. the built-in reference gains,
//! 2. `[topology]` distances converted through the path-loss model,
//! 3. `[gains]` explicit power gains.
//!
//! Setting `h_12` (by distance or explicitly) also sets `h_21` unless
//! `h_21` itself is given, keeping the device link reciprocal.

use std::path::Path;

use serde::Deserialize;

use wpcn_core::{
    gains_from_topology, validate_or_error, ChannelGains, Direction, Error, HarvestPolicy,
    OwnSlotMode, Result, SignalModel, SolverConfig, SystemParams, Topology,
};

/// Top-level structure of a configuration file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Overrides for [`SystemParams`].
    #[serde(default)]
    pub system: SystemSection,
    /// Overrides for [`HarvestPolicy`].
    #[serde(default)]
    pub harvest: HarvestSection,
    /// Overrides for [`SolverConfig`].
    #[serde(default)]
    pub solver: SolverSection,
    /// Node distances, converted to gains through the path-loss model.
    pub topology: Option<TopologySection>,
    /// Explicit channel gains; win over `[topology]` key by key.
    pub gains: Option<GainsSection>,
    /// Sweep description consumed by the `sweep` subcommand.
    pub sweep: Option<SweepSection>,
    /// Detector-report description consumed by the `ber` subcommand.
    pub ber: Option<BerSection>,
}

/// `[system]`: every field of [`SystemParams`], individually optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub p0: Option<f64>,
    pub eta: Option<f64>,
    pub beta: Option<f64>,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub sigma0_sq: Option<f64>,
    pub sigmas_sq: Option<f64>,
    pub rb: Option<f64>,
    pub s_rate: Option<f64>,
    pub t0: Option<f64>,
    pub bandwidth: Option<f64>,
    pub ga: Option<f64>,
    pub fd: Option<f64>,
    pub lambda_pl: Option<f64>,
    pub p_circuit: Option<f64>,
}

impl SystemSection {
    fn apply(&self, params: &mut SystemParams) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(value) = self.$field {
                    params.$field = value;
                })*
            };
        }
        set!(
            p0, eta, beta, mu1, mu2, sigma0_sq, sigmas_sq, rb, s_rate, t0, bandwidth, ga, fd,
            lambda_pl, p_circuit
        );
    }
}

/// `[harvest]`: backscatter-stage energy model options.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarvestSection {
    /// `"none"`, `"full"`, or `"bit_averaged"`.
    pub own_slot: Option<String>,
    pub cross_term: Option<bool>,
}

impl HarvestSection {
    fn apply(&self, policy: &mut HarvestPolicy) -> Result<()> {
        if let Some(mode) = &self.own_slot {
            policy.own_slot_mode = match mode.as_str() {
                "none" => OwnSlotMode::None,
                "full" => OwnSlotMode::Full,
                "bit_averaged" => OwnSlotMode::BitAveraged,
                other => {
                    return Err(Error::Config(format!(
                        "own_slot must be \"none\", \"full\", or \"bit_averaged\", got \"{other}\""
                    )))
                }
            };
        }
        if let Some(cross) = self.cross_term {
            policy.include_cross_term = cross;
        }
        Ok(())
    }
}

/// `[solver]`: bisection and search tolerances.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub z_tolerance: Option<f64>,
    pub inner_tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub grid_resolution: Option<f64>,
}

impl SolverSection {
    fn apply(&self, config: &mut SolverConfig) {
        if let Some(v) = self.z_tolerance {
            config.z_tolerance = v;
        }
        if let Some(v) = self.inner_tolerance {
            config.inner_tolerance = v;
        }
        if let Some(v) = self.max_iterations {
            config.max_iterations = v;
        }
        if let Some(v) = self.grid_resolution {
            config.grid_resolution = v;
        }
    }
}

/// `[topology]`: node distances in meters, individually optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub d_e1: Option<f64>,
    pub d_e2: Option<f64>,
    pub d_1a: Option<f64>,
    pub d_2a: Option<f64>,
    pub d_12: Option<f64>,
}

/// `[gains]`: explicit power gains, individually optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub h_e1: Option<f64>,
    pub h_e2: Option<f64>,
    pub h_1a: Option<f64>,
    pub h_2a: Option<f64>,
    pub h_12: Option<f64>,
    pub h_21: Option<f64>,
}

/// `[sweep]`: raw sweep description; turned into a full spec by the sweep
/// module once the base configuration is resolved.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// `"channel_disparity"`, `"inter_user_distance"`, or `"custom"`.
    pub kind: Option<String>,
    /// Abscissa values, strictly monotone.
    pub values: Option<Vec<f64>>,
    /// Transmission schemes to sweep.
    #[serde(default)]
    pub schemes: Vec<SchemeSection>,
    /// CSV output path.
    pub output: Option<String>,
    pub seed: Option<u64>,
    pub grid_check: Option<bool>,
}

/// One `[[sweep.schemes]]` entry.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    /// `"backscatter"` or `"no_backscatter"`.
    pub kind: String,
    /// Backscatter bit rate for `"backscatter"` schemes; defaults to the
    /// resolved system `rb`.
    pub rb: Option<f64>,
}

/// `[ber]`: raw detector-report description.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BerSection {
    /// Device separations (m) at which links are simulated.
    pub distances: Option<Vec<f64>>,
    pub n_bits: Option<u64>,
    /// `"gaussian"` or `"unit_modulus"`.
    pub signal: Option<String>,
    /// Subset of `["wd1_to_wd2", "wd2_to_wd1"]`; defaults to both.
    pub directions: Option<Vec<String>>,
    pub seed: Option<u64>,
    /// CSV output path.
    pub output: Option<String>,
}

/// A configuration with every default filled in and all invariants checked.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub params: SystemParams,
    pub gains: ChannelGains,
    pub policy: HarvestPolicy,
    pub solver: SolverConfig,
    /// Raw sweep section, if the file had one.
    pub sweep: Option<SweepSection>,
    /// Raw detector-report section, if the file had one.
    pub ber: Option<BerSection>,
}

impl FileConfig {
    /// Parses a configuration from TOML text. Syntax and schema errors keep
    /// the parser's line/column pointer.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|err| Error::Config(err.to_string()))
    }

    /// Reads and parses a configuration file, prefixing errors with the
    /// path.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|err| Error::Config(format!("{}: {err}", path.display())))
    }

    /// Fills every default, converts distances to gains, applies per-key
    /// overrides, and validates the result.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let mut params = SystemParams::default();
        self.system.apply(&mut params);

        let mut policy = HarvestPolicy::default();
        self.harvest.apply(&mut policy)?;

        let mut solver = SolverConfig::default();
        self.solver.apply(&mut solver);

        let mut gains = ChannelGains::default();
        if let Some(topo) = &self.topology {
            // Any distance given replaces the corresponding reference gain;
            // a full section behaves exactly like `gains_from_topology`.
            let reference = Topology {
                d_e1: topo.d_e1.unwrap_or(1.0),
                d_e2: topo.d_e2.unwrap_or(1.0),
                d_1a: topo.d_1a.unwrap_or(1.0),
                d_2a: topo.d_2a.unwrap_or(1.0),
                d_12: topo.d_12.unwrap_or(1.0),
            };
            let derived = gains_from_topology(&reference, &params)?;
            if topo.d_e1.is_some() {
                gains.h_e1 = derived.h_e1;
            }
            if topo.d_e2.is_some() {
                gains.h_e2 = derived.h_e2;
            }
            if topo.d_1a.is_some() {
                gains.h_1a = derived.h_1a;
            }
            if topo.d_2a.is_some() {
                gains.h_2a = derived.h_2a;
            }
            if topo.d_12.is_some() {
                gains.h_12 = derived.h_12;
                gains.h_21 = derived.h_21;
            }
        }
        if let Some(section) = &self.gains {
            if let Some(v) = section.h_e1 {
                gains.h_e1 = v;
            }
            if let Some(v) = section.h_e2 {
                gains.h_e2 = v;
            }
            if let Some(v) = section.h_1a {
                gains.h_1a = v;
            }
            if let Some(v) = section.h_2a {
                gains.h_2a = v;
            }
            if let Some(v) = section.h_12 {
                gains.h_12 = v;
                gains.h_21 = section.h_21.unwrap_or(v);
            } else if let Some(v) = section.h_21 {
                gains.h_21 = v;
                gains.h_12 = v;
            }
        }

        validate_or_error(&params, &gains)?;
        Ok(ResolvedConfig {
            params,
            gains,
            policy,
            solver,
            sweep: self.sweep.clone(),
            ber: self.ber.clone(),
        })
    }
}

impl Default for ResolvedConfig {
    /// The reference setup with no file at all.
    fn default() -> Self {
        FileConfig::default()
            .resolve()
            .expect("built-in defaults must validate")
    }
}

/// Parses a report direction label (`"wd1_to_wd2"` / `"wd2_to_wd1"`).
pub fn parse_direction(label: &str) -> Result<Direction> {
    match label {
        "wd1_to_wd2" => Ok(Direction::Wd1ToWd2),
        "wd2_to_wd1" => Ok(Direction::Wd2ToWd1),
        other => Err(Error::Config(format!(
            "direction must be \"wd1_to_wd2\" or \"wd2_to_wd1\", got \"{other}\""
        ))),
    }
}

/// Parses a carrier signal model label (`"gaussian"` / `"unit_modulus"`).
pub fn parse_signal_model(label: &str) -> Result<SignalModel> {
    match label {
        "gaussian" => Ok(SignalModel::GaussianEnergySignal),
        "unit_modulus" => Ok(SignalModel::UnitModulusRandomPhase),
        other => Err(Error::Config(format!(
            "signal must be \"gaussian\" or \"unit_modulus\", got \"{other}\""
        ))),
    }
}

/// Label used in configuration and reports for a signal model.
pub fn signal_model_label(model: SignalModel) -> &'static str {
    match model {
        SignalModel::GaussianEnergySignal => "gaussian",
        SignalModel::UnitModulusRandomPhase => "unit_modulus",
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // frozen reference values keep all their digits
mod tests {
    use super::*;

    #[test]
    fn empty_text_resolves_to_reference_defaults() {
        let resolved = FileConfig::from_toml("").unwrap().resolve().unwrap();
        assert_eq!(resolved.params, SystemParams::default());
        assert_eq!(resolved.gains, ChannelGains::default());
        assert_eq!(resolved.policy, HarvestPolicy::default());
        assert_eq!(resolved.solver, SolverConfig::default());
        assert!(resolved.sweep.is_none() && resolved.ber.is_none());
    }

    #[test]
    fn system_overrides_apply_field_by_field() {
        let resolved = FileConfig::from_toml("[system]\nbeta = 0.5\nrb = 5e4\n")
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(resolved.params.beta, 0.5);
        assert_eq!(resolved.params.rb, 5e4);
        assert_eq!(resolved.params.p0, 1.0, "untouched fields keep defaults");
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_line_pointer() {
        let err = FileConfig::from_toml("[system]\nbeta = 0.5\nbetaa = 0.1\n").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("line 3"),
            "expected a line pointer, got: {msg}"
        );
        assert!(msg.contains("betaa"), "expected the bad key, got: {msg}");
    }

    #[test]
    fn syntax_errors_are_rejected_with_a_line_pointer() {
        let err = FileConfig::from_toml("[system\nbeta = 0.5\n").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("line 1"),
            "expected a line pointer, got: {msg}"
        );
    }

    #[test]
    fn topology_distances_override_only_named_links() {
        let resolved = FileConfig::from_toml("[topology]\nd_12 = 2.0\n")
            .unwrap()
            .resolve()
            .unwrap();
        let expected = 3.887_592_611_668_334e-5; // path loss at 2 m
        assert!((resolved.gains.h_12 - expected).abs() <= 1e-12 * expected);
        assert_eq!(resolved.gains.h_21, resolved.gains.h_12);
        assert_eq!(resolved.gains.h_e1, 8.5e-5, "unnamed links keep defaults");
    }

    #[test]
    fn explicit_gains_win_over_topology() {
        let text = "[topology]\nd_12 = 2.0\nd_e1 = 3.0\n[gains]\nh_12 = 1e-6\n";
        let resolved = FileConfig::from_toml(text).unwrap().resolve().unwrap();
        assert_eq!(resolved.gains.h_12, 1e-6, "explicit gain must win");
        assert_eq!(resolved.gains.h_21, 1e-6, "reciprocity follows h_12");
        let from_topo = 1.4107582557631482e-5; // path loss at 3 m
        assert!(
            (resolved.gains.h_e1 - from_topo).abs() <= 1e-12 * from_topo,
            "links the gain section does not name keep the topology value"
        );
    }

    #[test]
    fn lone_h21_keeps_the_link_reciprocal() {
        let resolved = FileConfig::from_toml("[gains]\nh_21 = 2e-6\n")
            .unwrap()
            .resolve()
            .unwrap();
        assert_eq!(resolved.gains.h_12, 2e-6);
        assert_eq!(resolved.gains.h_21, 2e-6);
    }

    #[test]
    fn contradictory_explicit_device_gains_fail_validation() {
        let err = FileConfig::from_toml("[gains]\nh_12 = 1e-6\nh_21 = 2e-6\n")
            .unwrap()
            .resolve()
            .unwrap_err();
        assert!(
            err.to_string().contains("reciprocal"),
            "expected a reciprocity violation, got: {err}"
        );
    }

    #[test]
    fn harvest_section_parses_every_mode() {
        for (label, expected) in [
            ("none", OwnSlotMode::None),
            ("full", OwnSlotMode::Full),
            ("bit_averaged", OwnSlotMode::BitAveraged),
        ] {
            let text = format!("[harvest]\nown_slot = \"{label}\"\ncross_term = false\n");
            let resolved = FileConfig::from_toml(&text).unwrap().resolve().unwrap();
            assert_eq!(resolved.policy.own_slot_mode, expected);
            assert!(!resolved.policy.include_cross_term);
        }
        let err = FileConfig::from_toml("[harvest]\nown_slot = \"half\"\n")
            .unwrap()
            .resolve()
            .unwrap_err();
        assert!(err.to_string().contains("own_slot"));
    }

    #[test]
    fn invalid_parameters_are_reported_at_resolution() {
        let err = FileConfig::from_toml("[system]\neta = 1.5\n")
            .unwrap()
            .resolve()
            .unwrap_err();
        assert!(
            err.to_string().contains("eta"),
            "expected the violated field, got: {err}"
        );
    }

    #[test]
    fn sweep_and_ber_sections_survive_resolution() {
        let text = r#"
[sweep]
kind = "inter_user_distance"
values = [1.0, 2.0]
output = "rows.csv"

[[sweep.schemes]]
kind = "backscatter"
rb = 1e5

[ber]
distances = [4.0]
n_bits = 1000
"#;
        let resolved = FileConfig::from_toml(text).unwrap().resolve().unwrap();
        let sweep = resolved.sweep.expect("sweep section must survive");
        assert_eq!(sweep.kind.as_deref(), Some("inter_user_distance"));
        assert_eq!(sweep.values.as_deref(), Some(&[1.0, 2.0][..]));
        assert_eq!(sweep.schemes.len(), 1);
        assert_eq!(sweep.schemes[0].rb, Some(1e5));
        let ber = resolved.ber.expect("ber section must survive");
        assert_eq!(ber.distances.as_deref(), Some(&[4.0][..]));
        assert_eq!(ber.n_bits, Some(1000));
    }

    #[test]
    fn direction_and_signal_labels_round_trip() {
        assert_eq!(parse_direction("wd1_to_wd2").unwrap().label(), "wd1_to_wd2");
        assert_eq!(parse_direction("wd2_to_wd1").unwrap().label(), "wd2_to_wd1");
        assert!(parse_direction("up").is_err());
        for model in [
            SignalModel::GaussianEnergySignal,
            SignalModel::UnitModulusRandomPhase,
        ] {
            assert_eq!(
                parse_signal_model(signal_model_label(model)).unwrap(),
                model
            );
        }
        assert!(parse_signal_model("sine").is_err());
    }
}
