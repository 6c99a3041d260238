use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use horizon_core::problem::Builtin;

use crate::report::Format;

#[derive(Debug, Parser)]
#[command(
    name = "horizon-check",
    version,
    about = "Numerical checks of optimality conditions for infinite-horizon control problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the condition battery on an example's candidate.
    Check(RunArgs),
    /// Classify Ramsey initial points and emit nullclines and the saddle path.
    PhaseDiagram {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Compare the candidate's finite-horizon payoffs with a challenger family.
    Overtake(RunArgs),
    /// Tabulate needle-variation quotients against their first-order limit.
    Needle {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        needle: NeedleArgs,
    },
    /// List the built-in examples and their parameters.
    ListExamples(OutputArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, value_parser = parse_builtin)]
    pub example: Option<Builtin>,
    /// Largest horizon considered.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Grid size; its meaning depends on the subcommand.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Verdict slack, also the overtaking epsilon.
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub k0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    /// Constant part of the costate (integrator).
    #[arg(long, allow_negative_numbers = true)]
    pub a0: Option<f64>,
    /// Payoff multiplier; restricts `check` to this single multiplier.
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Default, Args)]
pub struct WindowArgs {
    #[arg(long)]
    pub k_min: Option<f64>,
    #[arg(long)]
    pub k_max: Option<f64>,
    #[arg(long)]
    pub c_min: Option<f64>,
    #[arg(long)]
    pub c_max: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct NeedleArgs {
    /// Right end of the needle interval.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Control value on the needle.
    #[arg(long, allow_negative_numbers = true)]
    pub u: Option<f64>,
    /// Finite horizon of the payoff comparison.
    #[arg(long)]
    pub horizon: Option<f64>,
}

fn parse_builtin(s: &str) -> Result<Builtin, String> {
    s.parse().map_err(|e: horizon_core::Error| e.to_string())
}
