use std::f64::consts::PI;

use anyhow::Result;
use horizon_core::ode::ControlSignal;
use horizon_core::overtaking::{delayed_start_challenger, empirical_overtaking_test, OvertakingReport};
use horizon_core::par;
use horizon_core::problem::Builtin;
use horizon_core::reference::ramsey::{consumption_signal, ramsey_full_path};
use horizon_core::variational::variational_settings;
use horizon_core::Exec;

use crate::candidate::{build_candidate, ramsey_params, shoot_settings};
use crate::config::RunConfig;
use crate::report::Report;

pub const OVERTAKE_COLUMNS: &[&str] = &[
    "example",
    "challenger",
    "verdict",
    "max_gap",
    "max_gap_horizon",
    "final_gap",
    "recurring_within_eps",
    "recurring_above_eps",
    "exit_time",
    "control_min",
    "control_max",
];

/// Offsets of the Ramsey challengers' initial consumption from the saddle value.
pub const RAMSEY_OFFSETS: [f64; 2] = [0.5, -0.5];

/// Named challengers for the example's candidate.
pub fn challengers(cfg: &RunConfig, saddle_c0: Option<f64>) -> Result<Vec<(String, ControlSignal)>> {
    Ok(match cfg.example {
        Builtin::Integrator | Builtin::Oscillator => [(PI / 2.0, "pi/2"), (PI, "pi"), (2.0 * PI, "2pi")]
            .into_iter()
            .map(|(s, name)| (format!("delayed_start s={name}"), delayed_start_challenger(s)))
            .collect(),
        Builtin::Ramsey => {
            let params = ramsey_params(cfg)?;
            let c0 = saddle_c0.expect("ramsey saddle");
            let settings = shoot_settings(cfg.t_max);
            let mut out = Vec::new();
            for off in RAMSEY_OFFSETS {
                let pair = ramsey_full_path(&params, params.k0, c0 + off, &settings)?;
                out.push((format!("saddle_c0{off:+}"), consumption_signal(&pair)));
            }
            out
        }
    })
}

/// Checkpoints at which recurrence is recorded.
pub fn checkpoints(t_max: f64) -> [f64; 3] {
    [t_max / 8.0, t_max / 4.0, t_max / 2.0]
}

pub fn cmd_overtake(cfg: &RunConfig, exec: Exec) -> Result<(Report, Vec<OvertakingReport>)> {
    let cand = build_candidate(cfg)?;
    let list = challengers(cfg, cand.saddle.as_ref().map(|s| s.c0))?;
    let settings = variational_settings();
    let marks = checkpoints(cfg.t_max);
    let results = par::map(exec, &list, |(_, ch)| {
        empirical_overtaking_test(&cand.problem, &cand.control, ch, cfg.tol, &marks, cfg.t_max, &settings)
    });
    let mut report = Report::new("overtake", OVERTAKE_COLUMNS);
    let mut full = Vec::with_capacity(list.len());
    for ((name, _), res) in list.iter().zip(results) {
        let r = res?;
        let (arg, max) =
            r.horizon_samples
                .iter()
                .fold((f64::NAN, f64::NEG_INFINITY), |acc, &(t, g)| if g > acc.1 { (t, g) } else { acc });
        report.push(vec![
            cfg.example.name().into(),
            name.clone().into(),
            r.verdict.as_str().into(),
            max.into(),
            arg.into(),
            r.horizon_samples.last().map(|s| s.1).into(),
            r.checkpoints.iter().all(|c| c.some_within_eps).into(),
            r.checkpoints.iter().all(|c| c.some_above_eps).into(),
            r.challenger_exit.into(),
            r.challenger_range.0.into(),
            r.challenger_range.1.into(),
        ]);
        full.push(r);
    }
    Ok((report, full))
}
