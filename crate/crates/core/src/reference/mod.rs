//! Closed forms and dedicated solvers for the three built-in examples.
//!
//! These are the oracles the numerical machinery is checked against.

pub mod integrator;
pub mod oscillator;
pub mod ramsey;

pub use integrator::{integrator_reference, IntegratorReference};
pub use oscillator::{oscillator_reference, OscillatorReference};
pub use ramsey::{
    capital_and_consumption, ramsey_classify, ramsey_field, ramsey_shoot, ramsey_steady_state, RamseyClass,
    RamseyParams, SaddlePath, ShootSettings, SteadyState, SteadyStateKind,
};
