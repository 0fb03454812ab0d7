//! Master-equation solvers: time evolution, steady states, and the
//! input-output metrics built from their results.

mod generator;
mod integrator;
mod metrics;
mod steady;

pub use generator::{lindblad_rhs, Generator, RhsWorkspace};
pub use integrator::{evolve, EvolutionResult, EvolveOptions, Observable, ObservableTrace};
pub use metrics::{
    pulse_metrics, steady_observables, trace_names, transmittance_steady, trapezoid, PulseMetrics,
    SteadyObservables,
};
pub use steady::{steady_state, steady_state_with, SteadyMethod, SteadyOptions, SteadyStateResult};

use thiserror::Error;

use crate::hilbert::HilbertError;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("generator is time dependent; steady state undefined")]
    TimeDependentGenerator,
    #[error("state, observables and generator must share one layout")]
    LayoutMismatch,
    #[error("output grid must be strictly increasing with at least two points")]
    GridNotIncreasing,
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("trace drift {drift:.3e} at t = {t} exceeds the bound")]
    TraceDrift { t: f64, drift: f64 },
    #[error("observable {name} returned imaginary part {imag:.3e} at t = {t}")]
    ImaginaryObservable { name: String, t: f64, imag: f64 },
    #[error("no observable named {name} in this run")]
    MissingObservable { name: String },
    #[error("steady state is not unique (relaxed states differ by {distance:.3e})")]
    NonUniqueSteadyState { distance: f64 },
    #[error("steady state did not converge (residual {residual:.3e})")]
    SteadyStateNotConverged { residual: f64 },
    #[error("generator has no dissipation; relaxation cannot converge")]
    NoDissipation,
    #[error("total dimension {dim} exceeds the superoperator cap {cap}")]
    DimensionTooLarge { dim: usize, cap: usize },
    #[error("metric window [{t0}, {t1}] contains no grid points")]
    EmptyWindow { t0: f64, t1: f64 },
    #[error("packet energy outside the metric window: {outside:.3e} > 1e-3")]
    WindowTruncation { outside: f64 },
    #[error("{which} undefined: the corresponding drive is zero")]
    ZeroDriveMetric { which: &'static str },
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}
