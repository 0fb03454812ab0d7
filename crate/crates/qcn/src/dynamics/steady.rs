//! Steady states of time-independent generators.
//!
//! The primary route vectorizes the generator into a dense superoperator,
//! replaces one row with the trace constraint, and solves the resulting
//! linear system. The superoperator scales as dim⁴ in memory, so this is
//! capped at a configurable total dimension; above the cap, or when the
//! factorization looks ill-conditioned, the solver falls back to long-time
//! integration. A genuinely degenerate steady state (nullity above one) is
//! reported as an error rather than silently picking a representative.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::hilbert::DensityMatrix;
use crate::model::GeneratorBundle;

use super::generator::Generator;
use super::integrator::{evolve, EvolveOptions};
use super::DynamicsError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SteadyMethod {
    /// Trace-constrained linear solve of the vectorized generator.
    Nullspace,
    /// Relaxation by time integration.
    LongTime,
}

#[derive(Clone, Debug)]
pub struct SteadyStateResult {
    pub rho: DensityMatrix,
    /// ‖dρ/dt‖_F at the reported state.
    pub residual: f64,
    pub method: SteadyMethod,
}

#[derive(Clone, Debug)]
pub struct SteadyOptions {
    /// Largest total dimension for which the superoperator is materialized.
    pub dim_cap: usize,
    /// Pivot-ratio estimate above which the linear solve is distrusted.
    pub cond_threshold: f64,
    /// Residual required of the nullspace solution.
    pub residual_tol: f64,
    /// Permit the long-time fallback when the dimension exceeds the cap
    /// (sweeps disable this and treat the cell analytically instead).
    pub allow_long_time: bool,
    /// Integration horizon for the fallback, in units of the inverse
    /// smallest decay rate.
    pub horizon_factor: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            dim_cap: 100,
            cond_threshold: 1e12,
            residual_tol: 1e-9,
            allow_long_time: true,
            horizon_factor: 100.0,
        }
    }
}

pub fn steady_state(bundle: &GeneratorBundle) -> Result<SteadyStateResult, DynamicsError> {
    steady_state_with(bundle, &SteadyOptions::default())
}

pub fn steady_state_with(
    bundle: &GeneratorBundle,
    opts: &SteadyOptions,
) -> Result<SteadyStateResult, DynamicsError> {
    if !bundle.is_time_independent() {
        return Err(DynamicsError::TimeDependentGenerator);
    }
    let d = bundle.layout().total_dim();
    if d > opts.dim_cap {
        if !opts.allow_long_time {
            return Err(DynamicsError::DimensionTooLarge { dim: d, cap: opts.dim_cap });
        }
        return long_time_steady(bundle, opts);
    }

    let gen = Generator::compile(bundle);
    let n = d * d;
    let mut m = gen.superoperator()?;
    // trace row pins normalization and removes the generator's null row space
    for j in 0..n {
        m[(0, j)] = C64::new(0.0, 0.0);
    }
    for k in 0..d {
        m[(0, k * d + k)] = C64::new(1.0, 0.0);
    }
    let lu = PartialPivLu::new(m.as_ref());
    drop(m);

    let u = lu.U();
    let mut pmin = f64::INFINITY;
    let mut pmax = 0.0f64;
    for i in 0..n {
        let p = u[(i, i)].norm();
        pmin = pmin.min(p);
        pmax = pmax.max(p);
    }
    let suspicious = pmin == 0.0 || !pmin.is_finite() || pmax / pmin > opts.cond_threshold;

    if !suspicious {
        let mut b: Mat<C64> = Mat::zeros(n, 1);
        b[(0, 0)] = C64::new(1.0, 0.0);
        let x = lu.solve(&b);
        let mut rho_m: Array2<C64> = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                rho_m[(i, j)] = x[(i * d + j, 0)];
            }
        }
        let mut rho = DensityMatrix::from_matrix_unchecked(bundle.layout().clone(), rho_m);
        rho.hermitize();
        // normalization also fixes the global phase: the leading diagonal
        // element of a hermitized state is real, so dividing by the trace
        // leaves it positive
        rho.normalize()?;
        let residual = gen.residual(0.0, rho.matrix());
        if residual <= opts.residual_tol && rho.matrix().iter().all(|v| v.is_finite()) {
            return Ok(SteadyStateResult { rho, residual, method: SteadyMethod::Nullspace });
        }
    }

    // Ill-conditioned or inaccurate: relax from two distinct initial states
    // to distinguish slow mixing from true degeneracy.
    if !opts.allow_long_time {
        return Err(DynamicsError::SteadyStateNotConverged { residual: f64::NAN });
    }
    let a = long_time_steady(bundle, opts)?;
    let from_ground = DensityMatrix::vacuum(bundle.layout());
    let b = long_time_from(bundle, from_ground, opts)?;
    let dist = a.rho.trace_distance(&b.rho)?;
    if dist > 1e-6 {
        return Err(DynamicsError::NonUniqueSteadyState { distance: dist });
    }
    Ok(a)
}

fn long_time_steady(
    bundle: &GeneratorBundle,
    opts: &SteadyOptions,
) -> Result<SteadyStateResult, DynamicsError> {
    let rho0 = DensityMatrix::maximally_mixed(bundle.layout());
    long_time_from(bundle, rho0, opts)
}

fn long_time_from(
    bundle: &GeneratorBundle,
    rho0: DensityMatrix,
    opts: &SteadyOptions,
) -> Result<SteadyStateResult, DynamicsError> {
    let min_rate = bundle.min_nonzero_rate().ok_or(DynamicsError::NoDissipation)?;
    let horizon = opts.horizon_factor / min_rate;
    let gen = Generator::compile(bundle);
    let chunks = 16usize;
    let chunk = horizon / chunks as f64;
    let evolve_opts = EvolveOptions { rtol: 1e-9, atol: 1e-12, ..Default::default() };

    let mut rho = rho0;
    let mut t = 0.0;
    for _ in 0..chunks {
        let run = evolve(&rho, bundle, &[t, t + chunk], &[], &evolve_opts)?;
        rho = run.final_rho;
        t += chunk;
        if gen.residual(0.0, rho.matrix()) < opts.residual_tol {
            break;
        }
    }
    rho.hermitize();
    rho.normalize()?;
    let residual = gen.residual(0.0, rho.matrix());
    if residual > 1e-6 {
        return Err(DynamicsError::SteadyStateNotConverged { residual });
    }
    Ok(SteadyStateResult { rho, residual, method: SteadyMethod::LongTime })
}
