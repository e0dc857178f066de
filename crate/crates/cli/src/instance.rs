//! Solving and pretty-printing a single instance.

use wpcn_core::{maximize_benchmark, maximize_common_throughput, Result, Solution};

use crate::config::ResolvedConfig;
use crate::sweep::{Scheme, SweepSpec};

/// Which optimizer the `solve` subcommand runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SchemeChoice {
    /// Cooperative backscatter exchange (the default).
    #[default]
    Backscatter,
    /// Active-radio baseline.
    NoBackscatter,
}

impl SchemeChoice {
    /// Human-readable description used in the printout.
    pub fn describe(self) -> &'static str {
        match self {
            SchemeChoice::Backscatter => "cooperative backscatter",
            SchemeChoice::NoBackscatter => "no-backscatter baseline",
        }
    }
}

/// Solves the configured instance with the chosen scheme.
pub fn solve_instance(config: &ResolvedConfig, scheme: SchemeChoice) -> Result<Solution> {
    match scheme {
        SchemeChoice::Backscatter => maximize_common_throughput(
            &config.gains,
            &config.params,
            &config.policy,
            &config.solver,
        ),
        SchemeChoice::NoBackscatter => {
            maximize_benchmark(&config.gains, &config.params, &config.solver)
        }
    }
}

/// Renders a solved instance: the achieved throughput, the allocation, the
/// full rate breakdown, the energy ledger, the active constraints, and the
/// resolved inputs it was all computed from.
pub fn render_solution(
    source: &str,
    scheme: SchemeChoice,
    config: &ResolvedConfig,
    solution: &Solution,
) -> String {
    let mut out = String::new();
    let a = &solution.allocation;
    let b = &solution.breakdown;
    let d = &solution.diagnostics;
    out.push_str(&format!("instance: {source}\n"));
    out.push_str(&format!("scheme: {}\n", scheme.describe()));
    out.push_str(&format!(
        "common throughput: {} bits/block\n",
        solution.common_throughput
    ));
    out.push_str(&format!(
        "allocation: t0={} t1={} t21={} t22={} t31={} t32={}\n",
        a.t0, a.t1, a.t21, a.t22, a.t31, a.t32
    ));
    out.push_str(&format!(
        "rates: r1_ex={} r2_ex={} r3={} r1={} r2={}\n",
        b.r1_ex, b.r2_ex, b.r3, b.r1, b.r2
    ));
    out.push_str(&format!(
        "exchange links: pe1={} c1={} pe2={} c2={}\n",
        b.pe1, b.c1, b.pe2, b.c2
    ));
    out.push_str(&format!("transmit powers: p1={} W p2={} W\n", b.p1, b.p2));
    out.push_str(&format!(
        "energy ledger: wd1 wet={} backscatter={} total={} J | wd2 wet={} backscatter={} total={} J\n",
        b.ledger.e1_wet,
        b.ledger.e1_bs,
        b.ledger.e1_total(),
        b.ledger.e2_wet,
        b.ledger.e2_bs,
        b.ledger.e2_total()
    ));
    if let Some((e_ex1, e_ex2)) = solution.exchange_energies {
        out.push_str(&format!(
            "exchange spends: e_ex1={e_ex1} J e_ex2={e_ex2} J\n"
        ));
    }
    out.push_str(&format!(
        "active constraints: {}\n",
        if d.active_constraints.is_empty() {
            "none".to_string()
        } else {
            d.active_constraints.join(" ")
        }
    ));
    out.push_str(&format!(
        "bisection: iterations={} bracket={:e} converged={}\n",
        d.iterations,
        d.gap(),
        d.converged
    ));
    // A throw-away custom spec reuses the sweep module's header formatting
    // so the printout and the CSV headers render inputs identically.
    let echo = SweepSpec {
        kind: crate::sweep::SweepKind::Custom,
        sweep_values: vec![0.0],
        schemes: vec![Scheme::NoBackscatter],
        params: config.params.clone(),
        gains: config.gains,
        policy: config.policy,
        solver: config.solver,
        output_path: std::path::PathBuf::new(),
        seed: 0,
        grid_check: false,
    };
    let csv = crate::sweep::render_csv(&echo, &[]);
    for line in csv.lines() {
        if line.starts_with("# params:")
            || line.starts_with("# gains:")
            || line.starts_with("# policy:")
            || line.starts_with("# solver:")
        {
            out.push_str(line.trim_start_matches("# "));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_instance_solves_and_renders_every_section() {
        let config = ResolvedConfig::default();
        let solution = solve_instance(&config, SchemeChoice::Backscatter).unwrap();
        assert!(solution.common_throughput > 0.0);
        let text = render_solution(
            "built-in defaults",
            SchemeChoice::Backscatter,
            &config,
            &solution,
        );
        for needle in [
            "scheme: cooperative backscatter",
            "common throughput:",
            "allocation: t0=",
            "rates: r1_ex=",
            "energy ledger:",
            "active constraints:",
            "bisection:",
            "params:",
            "gains:",
        ] {
            assert!(text.contains(needle), "missing `{needle}` in:\n{text}");
        }
    }

    #[test]
    fn baseline_render_includes_exchange_spends() {
        let config = ResolvedConfig::default();
        let solution = solve_instance(&config, SchemeChoice::NoBackscatter).unwrap();
        let text = render_solution(
            "built-in defaults",
            SchemeChoice::NoBackscatter,
            &config,
            &solution,
        );
        assert!(text.contains("scheme: no-backscatter baseline"));
        assert!(
            text.contains("exchange spends: e_ex1="),
            "baseline printouts carry the spends:\n{text}"
        );
    }

    #[test]
    fn dead_exchange_is_called_out_in_the_printout() {
        let mut config = ResolvedConfig::default();
        config.params.beta = 1.0;
        let solution = solve_instance(&config, SchemeChoice::Backscatter).unwrap();
        assert_eq!(solution.common_throughput, 0.0);
        let text = render_solution("test", SchemeChoice::Backscatter, &config, &solution);
        assert!(
            text.contains("exchange_impossible"),
            "the explanatory diagnostic must be printed:\n{text}"
        );
    }
}
