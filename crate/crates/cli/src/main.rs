//! `wpcn`: solve, sweep, and detector-report subcommands.
//!
//! Exit codes: 0 on success, 1 on configuration or validation errors
//! (including usage errors), 2 when an optimizer exhausts its iteration
//! budget without converging.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use wpcn_cli::config::{FileConfig, ResolvedConfig};
use wpcn_cli::instance::{render_solution, solve_instance, SchemeChoice};
use wpcn_cli::report::{self, BerReportSpec};
use wpcn_cli::sweep::{self, SweepSpec};
use wpcn_core::Error;

#[derive(Parser)]
#[command(
    name = "wpcn",
    version,
    about = "Two-user wireless powered network: throughput optimization and detector reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and print the optimal allocation.
    Solve {
        /// TOML configuration file; omitted means the built-in defaults.
        config: Option<PathBuf>,
        /// Transmission scheme to optimize.
        #[arg(long, value_enum, default_value_t = SchemeArg::Backscatter)]
        scheme: SchemeArg,
        /// Also write the printout to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a parameter sweep and write CSV plus gnuplot data.
    Sweep {
        /// TOML configuration file providing the base instance and,
        /// without --preset, the [sweep] section.
        config: Option<PathBuf>,
        /// Built-in experiment instead of a [sweep] section.
        #[arg(long, value_enum)]
        preset: Option<PresetArg>,
        /// Override the output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the sweep seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Also run the exhaustive grid oracle per point and emit the
        /// oracle value and gap columns.
        #[arg(long = "grid-check")]
        grid_check: bool,
    },
    /// Simulate the backscatter detector and compare it with the
    /// closed-form bit error rate.
    Ber {
        /// TOML configuration file; omitted means the reference report.
        config: Option<PathBuf>,
        /// Override the output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the report base seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    /// Cooperative backscatter exchange.
    #[value(name = "backscatter")]
    Backscatter,
    /// Active-radio baseline.
    #[value(name = "no_backscatter")]
    NoBackscatter,
}

impl From<SchemeArg> for SchemeChoice {
    fn from(arg: SchemeArg) -> Self {
        match arg {
            SchemeArg::Backscatter => SchemeChoice::Backscatter,
            SchemeArg::NoBackscatter => SchemeChoice::NoBackscatter,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PresetArg {
    /// Device-to-AP disparity ratios 1..10 at 4 m separation.
    Disparity,
    /// Device separations 1.0..5.0 m in 0.5 m steps.
    Distance,
}

fn load(config: &Option<PathBuf>) -> wpcn_core::Result<(ResolvedConfig, String)> {
    match config {
        Some(path) => Ok((
            FileConfig::load(path)?.resolve()?,
            path.display().to_string(),
        )),
        None => Ok((ResolvedConfig::default(), "built-in defaults".to_string())),
    }
}

fn run(cli: Cli) -> wpcn_core::Result<()> {
    match cli.command {
        Command::Solve {
            config,
            scheme,
            out,
        } => {
            let (resolved, source) = load(&config)?;
            let choice = SchemeChoice::from(scheme);
            let solution = solve_instance(&resolved, choice)?;
            let text = render_solution(&source, choice, &resolved, &solution);
            print!("{text}");
            if let Some(path) = out {
                sweep::write_text(&path, &text)?;
            }
            Ok(())
        }
        Command::Sweep {
            config,
            preset,
            out,
            seed,
            grid_check,
        } => {
            let (resolved, _) = load(&config)?;
            let mut spec = match preset {
                Some(PresetArg::Disparity) => SweepSpec::disparity_preset(&resolved)?,
                Some(PresetArg::Distance) => SweepSpec::distance_preset(&resolved)?,
                None => {
                    let section = resolved.sweep.as_ref().ok_or_else(|| {
                        Error::Config(
                            "no [sweep] section in the configuration and no --preset given".into(),
                        )
                    })?;
                    SweepSpec::from_section(&resolved, section)?
                }
            };
            if let Some(path) = out {
                spec.output_path = path;
            }
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            if grid_check {
                spec.grid_check = true;
            }
            let rows = sweep::execute(&spec)?;
            println!(
                "wrote {} rows to {} (gnuplot data: {})",
                rows.len(),
                spec.output_path.display(),
                spec.companion_path().display()
            );
            Ok(())
        }
        Command::Ber { config, out, seed } => {
            let (resolved, _) = load(&config)?;
            let mut spec = BerReportSpec::from_section(&resolved, resolved.ber.as_ref())?;
            if let Some(path) = out {
                spec.output_path = path;
            }
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            let rows = report::execute(&spec)?;
            println!(
                "wrote {} rows to {}",
                rows.len(),
                spec.output_path.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // --help and --version land here too; they are not failures.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::NonConvergence { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
