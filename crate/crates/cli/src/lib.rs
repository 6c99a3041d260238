//! Subcommands of `horizon-check` and the report format they share.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod candidate;
pub mod check;
pub mod config;
pub mod examples;
pub mod needle;
pub mod overtake;
pub mod phase;
pub mod report;

use std::fs;

use anyhow::{Context, Result};
use horizon_core::problem::Builtin;
use horizon_core::Exec;

use args::{Cli, Command};
use config::RunConfig;
use report::{Format, Report};

/// Runs a parsed command and writes its report. Verdicts never turn into
/// errors; only configuration, integration and I/O failures do.
pub fn run(cli: &Cli) -> Result<()> {
    let exec = Exec::default();
    let (report, out, format) = match &cli.command {
        Command::Check(run) => {
            let cfg = RunConfig::from_args(run, None)?;
            (check::cmd_check(&cfg, exec)?, cfg.out, cfg.format)
        }
        Command::PhaseDiagram { run, window } => {
            let cfg = RunConfig::from_args(run, Some(Builtin::Ramsey))?;
            anyhow::ensure!(cfg.example == Builtin::Ramsey, "phase-diagram requires --example ramsey");
            (phase::cmd_phase_diagram(&cfg, window, exec)?, cfg.out, cfg.format)
        }
        Command::Overtake(run) => {
            let cfg = RunConfig::from_args(run, None)?;
            (overtake::cmd_overtake(&cfg, exec)?.0, cfg.out, cfg.format)
        }
        Command::Needle { run, needle } => {
            let cfg = RunConfig::from_args(run, None)?;
            (needle::cmd_needle(&cfg, needle)?.0, cfg.out, cfg.format)
        }
        Command::ListExamples(o) => (examples::cmd_list_examples(), o.out.clone(), o.format),
    };
    emit(&report, out.as_deref(), format)
}

fn emit(report: &Report, out: Option<&std::path::Path>, format: Format) -> Result<()> {
    match out {
        Some(path) => fs::write(path, report.render(format)).with_context(|| format!("writing {}", path.display())),
        None => report.write_to(format, std::io::stdout().lock()).context("writing to standard output"),
    }
}
