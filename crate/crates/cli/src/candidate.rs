use anyhow::{bail, Context, Result};
use horizon_core::ode::{solve_state, ControlSignal, Trajectory};
use horizon_core::problem::{make_builtin_problem, Builtin, ControlProblem};
use horizon_core::reference::ramsey::ShootSettings;
use horizon_core::reference::{capital_and_consumption, ramsey_shoot, RamseyParams, SaddlePath};
use horizon_core::variational::variational_settings;

use crate::config::RunConfig;

/// The example's candidate control and its trajectory up to at least `t_max`.
pub struct Candidate {
    pub problem: ControlProblem,
    pub label: &'static str,
    pub control: ControlSignal,
    pub trajectory: Trajectory,
    pub saddle: Option<SaddlePath>,
}

pub fn ramsey_params(cfg: &RunConfig) -> Result<RamseyParams> {
    Ok(RamseyParams::new(cfg.param("alpha"), cfg.param("delta"), cfg.param("theta"), cfg.param("k0"))?)
}

pub fn shoot_settings(t_max: f64) -> ShootSettings {
    let base = ShootSettings::default();
    ShootSettings { t_max: base.t_max.max(t_max), ..base }
}

pub fn build_candidate(cfg: &RunConfig) -> Result<Candidate> {
    let problem = make_builtin_problem(cfg.example, &cfg.params)?;
    match cfg.example {
        Builtin::Integrator | Builtin::Oscillator => {
            let control = ControlSignal::constant(vec![1.0]);
            let trajectory = solve_state(
                &problem,
                &control,
                problem.initial_time,
                &problem.initial_state,
                cfg.t_max,
                &variational_settings(),
            )
            .context("integrating the candidate trajectory")?;
            if let Some(ev) = trajectory.exit_event() {
                bail!("candidate leaves the state domain at t = {}", ev.time);
            }
            Ok(Candidate { problem, label: "u_hat=1", control, trajectory, saddle: None })
        }
        Builtin::Ramsey => {
            let params = ramsey_params(cfg)?;
            let saddle = ramsey_shoot(&params, &shoot_settings(cfg.t_max)).context("shooting for the saddle path")?;
            let (trajectory, control) = capital_and_consumption(&saddle.trajectory)?;
            Ok(Candidate { problem, label: "saddle", control, trajectory, saddle: Some(saddle) })
        }
    }
}
