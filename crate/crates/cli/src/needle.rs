use anyhow::{bail, Result};
use horizon_core::overtaking::{needle_limit_check, NeedleReport};
use horizon_core::problem::Builtin;
use horizon_core::variational::variational_settings;

use crate::args::NeedleArgs;
use crate::candidate::build_candidate;
use crate::config::RunConfig;
use crate::report::Report;

pub const NEEDLE_COLUMNS: &[&str] =
    &["example", "tau", "u", "horizon", "alpha", "quotient", "prediction", "error", "error_over_alpha", "order"];

/// Widths `0.1·2^(−i)`; eleven of them reach below `10⁻⁴`.
pub const DEFAULT_HALVINGS: usize = 11;

pub fn widths(count: usize) -> Vec<f64> {
    (0..count).map(|i| 0.1 * 0.5f64.powi(i as i32)).collect()
}

pub fn cmd_needle(cfg: &RunConfig, needle: &NeedleArgs) -> Result<(Report, NeedleReport)> {
    let horizon = needle.horizon.unwrap_or(cfg.t_max.min(10.0));
    if horizon > cfg.t_max {
        bail!("--horizon {horizon} exceeds --t-max {}", cfg.t_max);
    }
    let tau = needle.tau.unwrap_or(1.0);
    let cand = build_candidate(&RunConfig { t_max: horizon, ..cfg.clone() })?;
    let u = match needle.u {
        Some(u) => u,
        None => match cfg.example {
            Builtin::Integrator => 0.0,
            Builtin::Oscillator => -1.0,
            Builtin::Ramsey => cand.control.evaluate(tau)[0] + 0.5,
        },
    };
    let alphas = widths(cfg.grid.unwrap_or(DEFAULT_HALVINGS));
    let rep = needle_limit_check(&cand.problem, &cand.control, tau, &[u], horizon, &alphas, &variational_settings())?;
    let mut report = Report::new("needle", NEEDLE_COLUMNS);
    for row in &rep.rows {
        report.push(vec![
            cfg.example.name().into(),
            tau.into(),
            u.into(),
            horizon.into(),
            row.alpha.into(),
            row.quotient.into(),
            rep.prediction.into(),
            row.error.into(),
            (row.error / row.alpha).into(),
            rep.order.into(),
        ]);
    }
    Ok((report, rep))
}
