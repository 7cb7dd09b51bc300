//! `crn`: command-line analyses of mass-action reaction networks.
//!
//! Exit codes: 0 success, 2 input or parse error, 3 truncated component,
//! 4 hypothesis or verification failure, 5 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands::Output;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_TRUNCATED: u8 = 3;
pub const EXIT_HYPOTHESIS: u8 = 4;
pub const EXIT_NUMERIC: u8 = 5;

#[derive(Parser)]
#[command(name = "crn", version, about = "Structural and stochastic analysis of mass-action reaction networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Structural invariants: deficiency, linkage classes, terminal SCCs,
    /// weak reversibility, conservation laws.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Closed communicating classes and transient states inside a box.
    Components {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        region: RegionArgs,
    },
    /// Stationary distribution on the component containing the initial state.
    Stationary {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        region: RegionArgs,
        #[arg(long, value_enum, default_value_t = Method::Direct)]
        method: Method,
        /// Relative master-equation residual accepted for the result.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Master-equation and complex-balance residuals of a distribution CSV.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Distribution to check (columns: species..., probability).
        #[arg(long)]
        distribution: PathBuf,
        /// Optional second distribution; its total variation distance to the
        /// first must not exceed `--tv-tol`.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 1e-10)]
        tv_tol: f64,
    },
    /// Gillespie simulation; writes the trajectory, or the time-weighted
    /// empirical distribution when `--burn-in` is given.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Initial state, e.g. `3,0`.
        #[arg(long)]
        init: String,
        #[arg(long)]
        t_end: f64,
        #[arg(long, env = "CRN_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        burn_in: Option<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        max_jumps: usize,
    },
}

#[derive(Args)]
pub struct Common {
    /// Network file in `.crn` format.
    pub file: PathBuf,
    /// Output format; defaults to CSV for `stationary` and `simulate`,
    /// JSON otherwise.
    #[arg(long, value_enum, conflicts_with = "text")]
    pub format: Option<Format>,
    /// Shorthand for `--format text`.
    #[arg(long)]
    pub text: bool,
    /// Write the result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    fn format_or(&self, default: Format) -> Format {
        if self.text {
            Format::Text
        } else {
            self.format.unwrap_or(default)
        }
    }
}

#[derive(Args)]
pub struct RegionArgs {
    /// Initial state; restricts the search to its compatibility class.
    #[arg(long)]
    pub init: Option<String>,
    /// Per-species upper bounds `6,6`, or one bound for every species.
    #[arg(long = "box")]
    pub caps: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Poisson-like product of the complex balanced equilibrium.
    Product,
    /// Product form of the terminal network on a deficiency zero Γ-network.
    Terminal,
    /// Exact solve of the generator restricted to the component.
    Direct,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use crn_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::TruncatedComponent | E::BoxTooSmall(_)) => EXIT_TRUNCATED,
        Some(E::Hypothesis { .. } | E::NotTerminal(_) | E::AbsorbedBeforeBurnIn { .. }) => EXIT_HYPOTHESIS,
        Some(E::Numerical(_)) => EXIT_NUMERIC,
        _ => EXIT_INPUT,
    }
}

fn run(cli: Cli) -> anyhow::Result<(Output, Option<PathBuf>)> {
    Ok(match cli.command {
        Command::Analyze { common } => {
            let format = common.format_or(Format::Json);
            (commands::analyze(&common.file, format)?, common.out)
        }
        Command::Components { common, region } => {
            let format = common.format_or(Format::Json);
            (commands::components(&common.file, &region, format)?, common.out)
        }
        Command::Stationary {
            common,
            region,
            method,
            tol,
        } => {
            let format = common.format_or(Format::Csv);
            (commands::stationary(&common.file, &region, method, tol, format)?, common.out)
        }
        Command::Verify {
            common,
            distribution,
            reference,
            tol,
            tv_tol,
        } => {
            let format = common.format_or(Format::Json);
            let out = commands::verify(&common.file, &distribution, reference.as_deref(), tol, tv_tol, format)?;
            (out, common.out)
        }
        Command::Simulate {
            common,
            init,
            t_end,
            seed,
            burn_in,
            max_jumps,
        } => {
            let format = common.format_or(Format::Csv);
            let out = commands::simulate(&common.file, &init, t_end, seed, burn_in, max_jumps, format)?;
            (out, common.out)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((output, out_path)) => {
            for note in &output.notes {
                eprintln!("{note}");
            }
            let written = match out_path {
                Some(path) => std::fs::write(&path, &output.body)
                    .map_err(|e| format!("{}: {e}", path.display())),
                None => {
                    print!("{}", output.body);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(EXIT_INPUT);
            }
            ExitCode::from(output.code)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
