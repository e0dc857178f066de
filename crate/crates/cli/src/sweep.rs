//! Parameter sweeps over both transmission schemes.
//!
//! A sweep solves the max-min throughput problem for every combination of
//! an abscissa value and a transmission scheme and emits one CSV row per
//! combination, plus a gnuplot-friendly companion file with one block per
//! scheme. Points are solved in parallel but always written in abscissa
//! order, so a sweep's output is a pure function of its spec.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use wpcn_core::{
    benchmark_grid_oracle, grid_oracle, maximize_benchmark, maximize_common_throughput,
    path_loss_gain, validate_or_error, ChannelGains, Error, HarvestPolicy, Result, Solution,
    SolverConfig, SystemParams,
};

use crate::config::{ResolvedConfig, SweepSection};

/// What the abscissa of a sweep means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Abscissa `r >= 1` scales the device-to-AP disparity:
    /// `h_2a = h_1a / r`.
    ChannelDisparity,
    /// Abscissa `d > 0` is the device separation in meters:
    /// `h_12 = h_21 = path_loss_gain(d)`.
    InterUserDistance,
    /// Abscissa is a plain label; every point solves the base instance.
    Custom,
}

impl SweepKind {
    /// Stable label used in configuration files and CSV headers.
    pub fn label(self) -> &'static str {
        match self {
            SweepKind::ChannelDisparity => "channel_disparity",
            SweepKind::InterUserDistance => "inter_user_distance",
            SweepKind::Custom => "custom",
        }
    }

    fn parse(label: &str) -> Result<Self> {
        match label {
            "channel_disparity" => Ok(SweepKind::ChannelDisparity),
            "inter_user_distance" => Ok(SweepKind::InterUserDistance),
            "custom" => Ok(SweepKind::Custom),
            other => Err(Error::Config(format!(
                "sweep kind must be \"channel_disparity\", \"inter_user_distance\", \
                 or \"custom\", got \"{other}\""
            ))),
        }
    }
}

/// One transmission scheme of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Cooperative backscatter exchange at the given bit rate.
    Backscatter { rb: f64 },
    /// Active-radio baseline funded by the energy-transfer harvest.
    NoBackscatter,
}

impl Scheme {
    /// Stable label used in CSV rows and gnuplot block headers.
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Backscatter { .. } => "backscatter",
            Scheme::NoBackscatter => "no_backscatter",
        }
    }

    /// Header/legend description including the bit rate where relevant.
    pub fn describe(self) -> String {
        match self {
            Scheme::Backscatter { rb } => format!("backscatter rb={rb}"),
            Scheme::NoBackscatter => "no_backscatter".to_string(),
        }
    }
}

/// A fully resolved sweep: base instance, abscissa semantics, schemes, and
/// output destination.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub kind: SweepKind,
    /// Strictly monotone, non-empty abscissa values.
    pub sweep_values: Vec<f64>,
    /// Non-empty, duplicate-free scheme list.
    pub schemes: Vec<Scheme>,
    pub params: SystemParams,
    pub gains: ChannelGains,
    pub policy: HarvestPolicy,
    pub solver: SolverConfig,
    pub output_path: PathBuf,
    pub seed: u64,
    /// Also run the exhaustive grid oracle per point and emit its value and
    /// the solver-minus-oracle gap.
    pub grid_check: bool,
}

/// Energy levels per device used by the baseline oracle during
/// `--grid-check` runs.
const GRID_CHECK_ENERGY_LEVELS: usize = 5;
/// The baseline oracle adds two energy dimensions, so grid-check runs cap
/// its time resolution at this value to stay tractable.
const BENCH_ORACLE_MIN_RESOLUTION: f64 = 0.05;

impl SweepSpec {
    /// Builds a spec from a `[sweep]` section on top of a resolved base
    /// configuration.
    pub fn from_section(base: &ResolvedConfig, section: &SweepSection) -> Result<Self> {
        let kind = match &section.kind {
            Some(label) => SweepKind::parse(label)?,
            None => SweepKind::Custom,
        };
        let sweep_values = section
            .values
            .clone()
            .ok_or_else(|| Error::Config("sweep.values must be provided".into()))?;
        if section.schemes.is_empty() {
            return Err(Error::Config(
                "at least one [[sweep.schemes]] entry is required".into(),
            ));
        }
        let mut schemes = Vec::with_capacity(section.schemes.len());
        for entry in &section.schemes {
            let scheme = match entry.kind.as_str() {
                "backscatter" => Scheme::Backscatter {
                    rb: entry.rb.unwrap_or(base.params.rb),
                },
                "no_backscatter" => {
                    if entry.rb.is_some() {
                        return Err(Error::Config(
                            "rb does not apply to a no_backscatter scheme".into(),
                        ));
                    }
                    Scheme::NoBackscatter
                }
                other => {
                    return Err(Error::Config(format!(
                        "scheme kind must be \"backscatter\" or \"no_backscatter\", got \"{other}\""
                    )))
                }
            };
            schemes.push(scheme);
        }
        let spec = SweepSpec {
            kind,
            sweep_values,
            schemes,
            params: base.params.clone(),
            gains: base.gains,
            policy: base.policy,
            solver: base.solver,
            output_path: PathBuf::from(section.output.as_deref().unwrap_or("sweep.csv")),
            seed: section.seed.unwrap_or(0),
            grid_check: section.grid_check.unwrap_or(false),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Channel-disparity preset: both devices harvest through 8.5e-5
    /// links, WD1 reaches the access point at 8.5e-6, and the abscissa
    /// `r in {1, ..., 10}` degrades WD2's AP link to `h_1a / r`. The device
    /// separation stays at 4 m. Schemes: backscatter at 100 and 50 kbit/s,
    /// plus the active-radio baseline.
    pub fn disparity_preset(base: &ResolvedConfig) -> Result<Self> {
        let params = base.params.clone();
        let h_12 = path_loss_gain(4.0, &params)?;
        let gains = ChannelGains {
            h_e1: 8.5e-5,
            h_e2: 8.5e-5,
            h_1a: 8.5e-6,
            h_2a: 8.5e-6,
            h_12,
            h_21: h_12,
        };
        let spec = SweepSpec {
            kind: SweepKind::ChannelDisparity,
            sweep_values: (1..=10).map(f64::from).collect(),
            schemes: vec![
                Scheme::Backscatter { rb: 1e5 },
                Scheme::Backscatter { rb: 5e4 },
                Scheme::NoBackscatter,
            ],
            params,
            gains,
            policy: base.policy,
            solver: base.solver,
            output_path: PathBuf::from("disparity_sweep.csv"),
            seed: 0,
            grid_check: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Inter-user-distance preset: the reference gain setup with the device
    /// separation swept over `d in {1.0, 1.5, ..., 5.0}` m. Same schemes as
    /// the disparity preset.
    pub fn distance_preset(base: &ResolvedConfig) -> Result<Self> {
        let params = base.params.clone();
        let h_12 = path_loss_gain(4.0, &params)?;
        let gains = ChannelGains {
            h_e1: 8.5e-5,
            h_e2: 8.5e-5,
            h_1a: 8.5e-6,
            h_2a: 8.5e-6,
            h_12,
            h_21: h_12,
        };
        let spec = SweepSpec {
            kind: SweepKind::InterUserDistance,
            sweep_values: (0..=8).map(|i| 1.0 + 0.5 * f64::from(i)).collect(),
            schemes: vec![
                Scheme::Backscatter { rb: 1e5 },
                Scheme::Backscatter { rb: 5e4 },
                Scheme::NoBackscatter,
            ],
            params,
            gains,
            policy: base.policy,
            solver: base.solver,
            output_path: PathBuf::from("distance_sweep.csv"),
            seed: 0,
            grid_check: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks every spec invariant: non-empty strictly monotone values that
    /// fit the sweep kind, a non-empty duplicate-free scheme list, and a
    /// base instance every scheme can actually solve.
    pub fn validate(&self) -> Result<()> {
        if self.sweep_values.is_empty() {
            return Err(Error::Validation("sweep values must not be empty".into()));
        }
        if self.sweep_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("sweep values must all be finite".into()));
        }
        let increasing = self.sweep_values.windows(2).all(|w| w[1] > w[0]);
        let decreasing = self.sweep_values.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::Validation(format!(
                "sweep values must be strictly monotone, got {:?}",
                self.sweep_values
            )));
        }
        match self.kind {
            SweepKind::ChannelDisparity => {
                if self.sweep_values.iter().any(|&r| r <= 0.0) {
                    return Err(Error::Validation(
                        "disparity ratios must be positive".into(),
                    ));
                }
            }
            SweepKind::InterUserDistance => {
                if self.sweep_values.iter().any(|&d| d <= 0.0) {
                    return Err(Error::Validation(
                        "device separations must be positive".into(),
                    ));
                }
            }
            SweepKind::Custom => {}
        }
        if self.schemes.is_empty() {
            return Err(Error::Validation("schemes must not be empty".into()));
        }
        for (i, a) in self.schemes.iter().enumerate() {
            for b in self.schemes.iter().skip(i + 1) {
                if a == b {
                    return Err(Error::Validation(format!(
                        "duplicate scheme: {}",
                        a.describe()
                    )));
                }
            }
        }
        for scheme in &self.schemes {
            validate_or_error(&self.params_for(*scheme), &self.gains)?;
        }
        Ok(())
    }

    /// Channel gains at one abscissa value.
    // `!(a > b)` rather than `a <= b` so a NaN ratio is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn gains_at(&self, abscissa: f64) -> Result<ChannelGains> {
        let mut gains = self.gains;
        match self.kind {
            SweepKind::ChannelDisparity => {
                if !(abscissa > 0.0) {
                    return Err(Error::Domain(format!(
                        "disparity ratio must be positive, got {abscissa}"
                    )));
                }
                gains.h_2a = gains.h_1a / abscissa;
            }
            SweepKind::InterUserDistance => {
                let h = path_loss_gain(abscissa, &self.params)?;
                gains.h_12 = h;
                gains.h_21 = h;
            }
            SweepKind::Custom => {}
        }
        Ok(gains)
    }

    /// System parameters with the scheme's bit rate applied.
    pub fn params_for(&self, scheme: Scheme) -> SystemParams {
        let mut params = self.params.clone();
        if let Scheme::Backscatter { rb } = scheme {
            params.rb = rb;
        }
        params
    }

    /// Path of the gnuplot companion written next to the CSV.
    pub fn companion_path(&self) -> PathBuf {
        self.output_path.with_extension("dat")
    }
}

/// One solved sweep point. Numeric fields are absent when the point failed
/// (the failure itself is recorded in `diagnostics`); the oracle columns
/// are present only on `--grid-check` runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub abscissa: f64,
    /// Scheme label, `"backscatter"` or `"no_backscatter"`.
    pub scheme: &'static str,
    /// Backscatter bit rate; absent for the baseline.
    pub rb: Option<f64>,
    pub common_throughput: Option<f64>,
    pub t1: Option<f64>,
    pub t21: Option<f64>,
    pub t22: Option<f64>,
    pub t3: Option<f64>,
    /// Baseline exchange spends, J; absent for backscatter rows.
    pub e_ex1: Option<f64>,
    pub e_ex2: Option<f64>,
    /// Exhaustive-oracle value at this point (grid-check runs only).
    pub oracle_z: Option<f64>,
    /// `common_throughput - oracle_z` (grid-check runs only).
    pub gap: Option<f64>,
    /// Convergence record or failure description; never contains commas.
    pub diagnostics: String,
}

/// Strips CSV-hostile characters from free-form diagnostic text.
fn sanitize(text: &str) -> String {
    text.replace(',', ";").replace('\n', " ")
}

fn diagnostics_of(solution: &Solution, converged: bool) -> String {
    let d = &solution.diagnostics;
    let mut text = format!(
        "{} iterations={} bracket={:e}",
        if converged {
            "converged"
        } else {
            "non_convergence"
        },
        d.iterations,
        d.gap(),
    );
    if !d.active_constraints.is_empty() {
        text.push_str(" active=");
        text.push_str(&d.active_constraints.join("|"));
    }
    text
}

fn row_from_solution(
    abscissa: f64,
    scheme: Scheme,
    solution: &Solution,
    converged: bool,
) -> SweepRow {
    SweepRow {
        abscissa,
        scheme: scheme.label(),
        rb: match scheme {
            Scheme::Backscatter { rb } => Some(rb),
            Scheme::NoBackscatter => None,
        },
        common_throughput: Some(solution.common_throughput),
        t1: Some(solution.allocation.t1),
        t21: Some(solution.allocation.t21),
        t22: Some(solution.allocation.t22),
        t3: Some(solution.allocation.t3()),
        e_ex1: solution.exchange_energies.map(|(e, _)| e),
        e_ex2: solution.exchange_energies.map(|(_, e)| e),
        oracle_z: None,
        gap: None,
        diagnostics: diagnostics_of(solution, converged),
    }
}

fn failed_row(abscissa: f64, scheme: Scheme, err: &Error) -> SweepRow {
    SweepRow {
        abscissa,
        scheme: scheme.label(),
        rb: match scheme {
            Scheme::Backscatter { rb } => Some(rb),
            Scheme::NoBackscatter => None,
        },
        common_throughput: None,
        t1: None,
        t21: None,
        t22: None,
        t3: None,
        e_ex1: None,
        e_ex2: None,
        oracle_z: None,
        gap: None,
        diagnostics: sanitize(&format!("error: {err}")),
    }
}

/// Solves one (abscissa, scheme) point. Never panics or aborts: failures
/// come back as rows whose diagnostics describe the problem.
fn solve_point(spec: &SweepSpec, abscissa: f64, scheme: Scheme) -> SweepRow {
    let gains = match spec.gains_at(abscissa) {
        Ok(g) => g,
        Err(err) => return failed_row(abscissa, scheme, &err),
    };
    let params = spec.params_for(scheme);
    let solved = match scheme {
        Scheme::Backscatter { .. } => {
            maximize_common_throughput(&gains, &params, &spec.policy, &spec.solver)
        }
        Scheme::NoBackscatter => maximize_benchmark(&gains, &params, &spec.solver),
    };
    let mut row = match solved {
        Ok(solution) => row_from_solution(abscissa, scheme, &solution, true),
        Err(Error::NonConvergence { best, .. }) => {
            row_from_solution(abscissa, scheme, &best, false)
        }
        Err(err) => return failed_row(abscissa, scheme, &err),
    };
    if spec.grid_check {
        let oracle = match scheme {
            Scheme::Backscatter { .. } => {
                grid_oracle(&gains, &params, &spec.policy, spec.solver.grid_resolution)
            }
            Scheme::NoBackscatter => benchmark_grid_oracle(
                &gains,
                &params,
                spec.solver.grid_resolution.max(BENCH_ORACLE_MIN_RESOLUTION),
                GRID_CHECK_ENERGY_LEVELS,
            ),
        };
        match oracle {
            Ok(solution) => {
                row.oracle_z = Some(solution.common_throughput);
                row.gap = row
                    .common_throughput
                    .map(|z| z - solution.common_throughput);
            }
            Err(err) => {
                row.diagnostics
                    .push_str(&sanitize(&format!(" oracle_error: {err}")));
            }
        }
    }
    row
}

/// Solves every point of the sweep in parallel and returns the rows in
/// abscissa-major, scheme-minor order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let jobs: Vec<(f64, Scheme)> = spec
        .sweep_values
        .iter()
        .flat_map(|&x| spec.schemes.iter().map(move |&s| (x, s)))
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|(x, scheme)| solve_point(spec, x, scheme))
        .collect())
}

fn format_cell(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

fn params_header(params: &SystemParams) -> String {
    format!(
        "p0={} eta={} beta={} mu1={} mu2={} sigma0_sq={} sigmas_sq={} rb={} s_rate={} t0={} \
         bandwidth={} ga={} fd={} lambda_pl={} p_circuit={}",
        params.p0,
        params.eta,
        params.beta,
        params.mu1,
        params.mu2,
        params.sigma0_sq,
        params.sigmas_sq,
        params.rb,
        params.s_rate,
        params.t0,
        params.bandwidth,
        params.ga,
        params.fd,
        params.lambda_pl,
        params.p_circuit,
    )
}

fn gains_header(gains: &ChannelGains) -> String {
    format!(
        "h_e1={} h_e2={} h_1a={} h_2a={} h_12={} h_21={}",
        gains.h_e1, gains.h_e2, gains.h_1a, gains.h_2a, gains.h_12, gains.h_21
    )
}

fn policy_header(policy: &HarvestPolicy) -> String {
    let own_slot = match policy.own_slot_mode {
        wpcn_core::OwnSlotMode::None => "none",
        wpcn_core::OwnSlotMode::Full => "full",
        wpcn_core::OwnSlotMode::BitAveraged => "bit_averaged",
    };
    format!(
        "own_slot={own_slot} cross_term={}",
        policy.include_cross_term
    )
}

fn solver_header(solver: &SolverConfig) -> String {
    format!(
        "z_tolerance={} inner_tolerance={} max_iterations={} grid_resolution={}",
        solver.z_tolerance, solver.inner_tolerance, solver.max_iterations, solver.grid_resolution
    )
}

/// Renders the sweep CSV: a versioned schema comment, the full resolved
/// configuration, a column header, and one line per row.
pub fn render_csv(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str("# wpcn sweep schema v1\n");
    out.push_str(&format!(
        "# kind={} seed={} grid_check={}\n",
        spec.kind.label(),
        spec.seed,
        spec.grid_check
    ));
    let values: Vec<String> = spec.sweep_values.iter().map(f64::to_string).collect();
    out.push_str(&format!("# values: {}\n", values.join(" ")));
    let schemes: Vec<String> = spec.schemes.iter().map(|s| s.describe()).collect();
    out.push_str(&format!("# schemes: {}\n", schemes.join(" | ")));
    out.push_str(&format!("# params: {}\n", params_header(&spec.params)));
    out.push_str(&format!("# gains: {}\n", gains_header(&spec.gains)));
    out.push_str(&format!("# policy: {}\n", policy_header(&spec.policy)));
    out.push_str(&format!("# solver: {}\n", solver_header(&spec.solver)));
    out.push_str(
        "abscissa,scheme,rb,common_throughput,t1,t21,t22,t3,e_ex1,e_ex2,oracle_z,gap,diagnostics\n",
    );
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            row.abscissa,
            row.scheme,
            format_cell(row.rb),
            format_cell(row.common_throughput),
            format_cell(row.t1),
            format_cell(row.t21),
            format_cell(row.t22),
            format_cell(row.t3),
            format_cell(row.e_ex1),
            format_cell(row.e_ex2),
            format_cell(row.oracle_z),
            format_cell(row.gap),
            row.diagnostics,
        ));
    }
    out
}

/// Renders the gnuplot companion: one `(abscissa, common_throughput)` block
/// per scheme, in scheme order, separated by two blank lines so blocks can
/// be addressed with gnuplot's `index`.
pub fn render_gnuplot(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str("# wpcn sweep gnuplot companion schema v1\n");
    out.push_str(&format!("# kind={}\n", spec.kind.label()));
    for (i, scheme) in spec.schemes.iter().enumerate() {
        if i > 0 {
            out.push_str("\n\n");
        }
        out.push_str(&format!("# index {i}: {}\n", scheme.describe()));
        out.push_str("# abscissa common_throughput\n");
        for row in rows {
            if row.scheme != scheme.label() || row.rb != scheme_rb(*scheme) {
                continue;
            }
            match row.common_throughput {
                Some(z) => out.push_str(&format!("{} {}\n", row.abscissa, z)),
                None => out.push_str(&format!(
                    "# abscissa {} failed: {}\n",
                    row.abscissa, row.diagnostics
                )),
            }
        }
    }
    out
}

fn scheme_rb(scheme: Scheme) -> Option<f64> {
    match scheme {
        Scheme::Backscatter { rb } => Some(rb),
        Scheme::NoBackscatter => None,
    }
}

/// Runs the sweep and writes the CSV and its gnuplot companion, creating
/// parent directories as needed. Returns the rows for inspection.
pub fn execute(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let rows = run_sweep(spec)?;
    write_text(&spec.output_path, &render_csv(spec, &rows))?;
    write_text(&spec.companion_path(), &render_gnuplot(spec, &rows))?;
    Ok(rows)
}

/// Writes a text file, creating parent directories as needed.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // frozen reference values keep all their digits
mod tests {
    use super::*;
    use crate::config::FileConfig;

    fn base() -> ResolvedConfig {
        ResolvedConfig::default()
    }

    fn custom_spec(values: Vec<f64>, schemes: Vec<Scheme>) -> SweepSpec {
        let base = base();
        SweepSpec {
            kind: SweepKind::Custom,
            sweep_values: values,
            schemes,
            params: base.params,
            gains: base.gains,
            policy: base.policy,
            solver: base.solver,
            output_path: PathBuf::from("unused.csv"),
            seed: 0,
            grid_check: false,
        }
    }

    #[test]
    fn single_point_custom_sweep_matches_a_direct_solver_call() {
        let base = base();
        let spec = custom_spec(vec![1.0], vec![Scheme::Backscatter { rb: 1e5 }]);
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.len(), 1);
        let direct =
            maximize_common_throughput(&base.gains, &base.params, &base.policy, &base.solver)
                .unwrap();
        assert_eq!(
            rows[0].common_throughput,
            Some(direct.common_throughput),
            "a one-point custom sweep is just the solver"
        );
        assert!(rows[0].diagnostics.starts_with("converged"));
    }

    #[test]
    fn presets_have_the_documented_shape() {
        let disparity = SweepSpec::disparity_preset(&base()).unwrap();
        assert_eq!(disparity.kind, SweepKind::ChannelDisparity);
        assert_eq!(disparity.sweep_values.len(), 10);
        assert_eq!(disparity.sweep_values[0], 1.0);
        assert_eq!(disparity.sweep_values[9], 10.0);
        assert_eq!(disparity.schemes.len(), 3);
        assert_eq!(disparity.gains.h_e1, 8.5e-5);
        assert_eq!(disparity.gains.h_1a, 8.5e-6);

        let distance = SweepSpec::distance_preset(&base()).unwrap();
        assert_eq!(distance.kind, SweepKind::InterUserDistance);
        assert_eq!(distance.sweep_values.len(), 9);
        assert_eq!(distance.sweep_values[0], 1.0);
        assert_eq!(distance.sweep_values[8], 5.0);
    }

    #[test]
    fn abscissa_semantics_follow_the_kind() {
        let mut spec = custom_spec(vec![2.0], vec![Scheme::NoBackscatter]);

        spec.kind = SweepKind::ChannelDisparity;
        let g = spec.gains_at(4.0).unwrap();
        assert_eq!(g.h_2a, spec.gains.h_1a / 4.0);
        assert_eq!(g.h_1a, spec.gains.h_1a, "the reference link is fixed");

        spec.kind = SweepKind::InterUserDistance;
        let g = spec.gains_at(2.0).unwrap();
        let expected = 3.887_592_611_668_334e-5;
        assert!((g.h_12 - expected).abs() <= 1e-12 * expected);
        assert_eq!(g.h_12, g.h_21);

        spec.kind = SweepKind::Custom;
        assert_eq!(spec.gains_at(7.5).unwrap(), spec.gains);
    }

    #[test]
    fn validation_rejects_malformed_specs() {
        let spec = custom_spec(vec![], vec![Scheme::NoBackscatter]);
        assert!(spec.validate().is_err(), "empty values must be rejected");

        let spec = custom_spec(vec![1.0, 3.0, 2.0], vec![Scheme::NoBackscatter]);
        assert!(
            spec.validate().is_err(),
            "non-monotone values must be rejected"
        );

        let spec = custom_spec(vec![1.0], vec![]);
        assert!(spec.validate().is_err(), "empty schemes must be rejected");

        let spec = custom_spec(
            vec![1.0],
            vec![
                Scheme::Backscatter { rb: 1e5 },
                Scheme::Backscatter { rb: 1e5 },
            ],
        );
        assert!(
            spec.validate().is_err(),
            "duplicate schemes must be rejected"
        );

        let spec = custom_spec(vec![1.0], vec![Scheme::Backscatter { rb: 0.9e5 }]);
        assert!(
            spec.validate().is_err(),
            "a bit rate with fractional samples per bit must be rejected"
        );

        let mut spec = custom_spec(vec![-1.0, 2.0], vec![Scheme::NoBackscatter]);
        spec.kind = SweepKind::InterUserDistance;
        assert!(spec.validate().is_err(), "distances must be positive");

        let spec = custom_spec(vec![3.0, 2.0, 1.0], vec![Scheme::Backscatter { rb: 1e5 }]);
        assert!(
            spec.validate().is_ok(),
            "strictly decreasing values are fine"
        );
    }

    #[test]
    fn from_section_applies_defaults_and_rejects_bad_schemes() {
        let text = r#"
[sweep]
values = [4.0]

[[sweep.schemes]]
kind = "backscatter"
"#;
        let resolved = FileConfig::from_toml(text).unwrap().resolve().unwrap();
        let spec = SweepSpec::from_section(&resolved, resolved.sweep.as_ref().unwrap()).unwrap();
        assert_eq!(spec.kind, SweepKind::Custom, "kind defaults to custom");
        assert_eq!(
            spec.schemes,
            vec![Scheme::Backscatter { rb: 1e5 }],
            "rb defaults to the resolved system rate"
        );
        assert_eq!(spec.output_path, PathBuf::from("sweep.csv"));
        assert_eq!(spec.seed, 0);

        let text = r#"
[sweep]
values = [4.0]

[[sweep.schemes]]
kind = "no_backscatter"
rb = 1e5
"#;
        let resolved = FileConfig::from_toml(text).unwrap().resolve().unwrap();
        let err = SweepSpec::from_section(&resolved, resolved.sweep.as_ref().unwrap()).unwrap_err();
        assert!(err.to_string().contains("rb does not apply"));
    }

    #[test]
    fn baseline_rows_carry_exchange_spends_and_no_bit_rate() {
        let spec = custom_spec(vec![1.0], vec![Scheme::NoBackscatter]);
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows[0].rb, None);
        assert!(rows[0].e_ex1.is_some() && rows[0].e_ex2.is_some());
        assert!(rows[0].e_ex1.unwrap() > 0.0, "the baseline spends energy");
    }

    #[test]
    fn exhausted_iteration_budgets_are_recorded_in_row() {
        let mut spec = custom_spec(
            vec![1.0, 2.0],
            vec![Scheme::Backscatter { rb: 1e5 }, Scheme::NoBackscatter],
        );
        spec.solver.max_iterations = 1;
        let rows = run_sweep(&spec).expect("per-point failures must not abort the sweep");
        assert_eq!(rows.len(), 4);
        for row in &rows {
            assert!(
                row.diagnostics.starts_with("non_convergence"),
                "diagnostics should record the failure: {}",
                row.diagnostics
            );
            assert!(
                row.common_throughput.is_some(),
                "the best-so-far value is still reported"
            );
        }
    }

    #[test]
    fn rows_come_back_in_abscissa_major_order() {
        let spec = custom_spec(
            vec![1.0, 2.0, 3.0],
            vec![Scheme::Backscatter { rb: 1e5 }, Scheme::NoBackscatter],
        );
        let rows = run_sweep(&spec).unwrap();
        let order: Vec<(f64, &str)> = rows.iter().map(|r| (r.abscissa, r.scheme)).collect();
        assert_eq!(
            order,
            vec![
                (1.0, "backscatter"),
                (1.0, "no_backscatter"),
                (2.0, "backscatter"),
                (2.0, "no_backscatter"),
                (3.0, "backscatter"),
                (3.0, "no_backscatter"),
            ]
        );
    }

    #[test]
    fn csv_has_versioned_schema_and_one_line_per_row() {
        let spec = custom_spec(vec![1.0], vec![Scheme::Backscatter { rb: 1e5 }]);
        let rows = run_sweep(&spec).unwrap();
        let csv = render_csv(&spec, &rows);
        assert!(csv.starts_with("# wpcn sweep schema v1\n"));
        let lines: Vec<&str> = csv.lines().collect();
        let header = lines
            .iter()
            .find(|l| !l.starts_with('#'))
            .expect("a column header must be present");
        assert!(header.starts_with("abscissa,scheme,rb,common_throughput"));
        let data_lines = lines.iter().filter(|l| !l.starts_with('#')).skip(1).count();
        assert_eq!(data_lines, rows.len());
        assert!(
            csv.contains("# params:") && csv.contains("# gains:"),
            "the resolved configuration must be captured in the header"
        );
    }

    #[test]
    fn gnuplot_companion_separates_schemes_into_blocks() {
        let spec = custom_spec(
            vec![1.0, 2.0],
            vec![Scheme::Backscatter { rb: 1e5 }, Scheme::NoBackscatter],
        );
        let rows = run_sweep(&spec).unwrap();
        let dat = render_gnuplot(&spec, &rows);
        assert!(dat.contains("# index 0: backscatter rb=100000"));
        assert!(dat.contains("# index 1: no_backscatter"));
        assert!(
            dat.contains("\n\n\n") || dat.contains("\n\n#"),
            "blocks must be separated by blank lines"
        );
    }

    #[test]
    fn grid_check_attaches_oracle_values_and_nonnegative_gaps() {
        let base = base();
        let mut spec = custom_spec(
            vec![1.0],
            vec![Scheme::Backscatter { rb: 1e5 }, Scheme::NoBackscatter],
        );
        spec.grid_check = true;
        spec.solver.grid_resolution = 0.05; // keep the unit test quick
        let _ = base;
        let rows = run_sweep(&spec).unwrap();
        for row in &rows {
            let oracle = row.oracle_z.expect("grid check must attach the oracle");
            let gap = row.gap.expect("grid check must attach the gap");
            assert!(
                gap >= -1e-9,
                "{}: solver {} must dominate the oracle {oracle}",
                row.scheme,
                row.common_throughput.unwrap()
            );
        }
    }
}
