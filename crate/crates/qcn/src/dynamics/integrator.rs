//! Embedded Dormand–Prince 5(4) integration of the master equation.
//!
//! Adaptive step control follows the classic stabilized (PI) controller;
//! observables are sampled on the caller's output grid through the fourth
//! order dense-output interpolant, so step placement never depends on the
//! grid. Accepted states are re-symmetrized, ρ ← (ρ + ρ†)/2, which removes
//! rounding-induced hermiticity drift without touching the trace.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::hilbert::{DensityMatrix, QuantumOperator, OBSERVABLE_IMAG_TOL};
use crate::model::{GeneratorBundle, ScheduleFn};

use super::generator::{Generator, RhsWorkspace};
use super::DynamicsError;

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// 5th-order − 4th-order error weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_SHRINK_MAX: f64 = 5.0; // at most h/5 per rejection
const FAC_GROW_MAX: f64 = 0.1; // at most 10·h per acceptance

/// Named expectation value sampled along the evolution; `weight(t)` scales
/// the raw expectation (used for fluxes through scheduled couplings).
#[derive(Clone)]
pub struct Observable {
    pub name: String,
    pub op: QuantumOperator,
    pub weight: Option<ScheduleFn>,
}

impl Observable {
    pub fn new(name: impl Into<String>, op: QuantumOperator) -> Self {
        Self { name: name.into(), op, weight: None }
    }

    pub fn weighted(name: impl Into<String>, op: QuantumOperator, weight: ScheduleFn) -> Self {
        Self { name: name.into(), op, weight: Some(weight) }
    }
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    /// Relative tolerance of the embedded error control.
    pub rtol: f64,
    /// Absolute tolerance.
    pub atol: f64,
    /// Hard cap on the step size.
    pub max_step: Option<f64>,
    /// Initial step; estimated automatically when absent.
    pub first_step: Option<f64>,
    /// Keep the interpolated density matrix at every grid point.
    pub keep_states: bool,
    /// Abort when |tr ρ − 1| exceeds this.
    pub max_trace_drift: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_step: None,
            first_step: None,
            keep_states: false,
            max_trace_drift: 1e-6,
        }
    }
}

/// One named observable trace on the output grid.
#[derive(Clone, Debug)]
pub struct ObservableTrace {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    pub observables: Vec<ObservableTrace>,
    /// max |tr ρ(t) − 1| over the run.
    pub trace_drift: f64,
    pub final_rho: DensityMatrix,
    /// Interpolated states at grid points when requested.
    pub states: Option<Vec<Array2<C64>>>,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rhs_evals: usize,
}

impl EvolutionResult {
    pub fn trace_values(&self, name: &str) -> Result<&[f64], DynamicsError> {
        self.observables
            .iter()
            .find(|o| o.name == name)
            .map(|o| o.values.as_slice())
            .ok_or_else(|| DynamicsError::MissingObservable { name: name.to_string() })
    }
}

fn scaled_rms(err: &Array2<C64>, y0: &Array2<C64>, y1: &Array2<C64>, atol: f64, rtol: f64) -> f64 {
    let n = err.len();
    let mut acc = 0.0;
    for ((e, a), b) in err.iter().zip(y0).zip(y1) {
        let sk = atol + rtol * a.norm().max(b.norm());
        let r = e.norm() / sk;
        acc += r * r;
    }
    (acc / n as f64).sqrt()
}

fn trace_of(a: &Array2<C64>) -> C64 {
    a.diag().iter().sum()
}

/// Hairer-style automatic initial step. Costs one extra RHS evaluation.
fn initial_step(
    gen: &Generator,
    t0: f64,
    y0: &Array2<C64>,
    f0: &Array2<C64>,
    span: f64,
    opts: &EvolveOptions,
    ws: &mut RhsWorkspace,
) -> f64 {
    let sk = |m: &Array2<C64>| scaled_rms(m, y0, y0, opts.atol, opts.rtol);
    let d0 = sk(y0);
    let d1 = sk(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let y1 = y0 + &f0.mapv(|v| v * C64::new(h0, 0.0));
    let mut f1 = Array2::zeros(y0.raw_dim());
    gen.rhs_into(t0 + h0, &y1, &mut f1, ws);
    let d2 = sk(&(&f1 - f0)) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    let mut h = (100.0 * h0).min(h1).min(span);
    if let Some(hm) = opts.max_step {
        h = h.min(hm);
    }
    h
}

/// Integrate the master equation over `t_grid`, sampling `observables` at
/// every grid point.
pub fn evolve(
    rho0: &DensityMatrix,
    bundle: &GeneratorBundle,
    t_grid: &[f64],
    observables: &[Observable],
    opts: &EvolveOptions,
) -> Result<EvolutionResult, DynamicsError> {
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DynamicsError::GridNotIncreasing);
    }
    if rho0.layout() != bundle.layout() {
        return Err(DynamicsError::LayoutMismatch);
    }
    for obs in observables {
        if obs.op.layout() != bundle.layout() {
            return Err(DynamicsError::LayoutMismatch);
        }
    }

    let gen = Generator::compile(bundle);
    let d = gen.dim();
    let mut ws = RhsWorkspace::new(d);
    let t0 = t_grid[0];
    let t_end = *t_grid.last().unwrap();
    let span = t_end - t0;

    let mut t = t0;
    let mut y = rho0.matrix().clone();
    let mut k: Vec<Array2<C64>> = (0..7).map(|_| Array2::zeros((d, d))).collect();
    let mut y_stage: Array2<C64> = Array2::zeros((d, d));
    let mut y_new: Array2<C64> = Array2::zeros((d, d));
    let mut err_m: Array2<C64> = Array2::zeros((d, d));
    let mut evals = 0usize;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut trace_drift = 0.0f64;

    let mut traces: Vec<ObservableTrace> = observables
        .iter()
        .map(|o| ObservableTrace { name: o.name.clone(), values: Vec::with_capacity(t_grid.len()) })
        .collect();
    let mut states: Option<Vec<Array2<C64>>> = opts.keep_states.then(Vec::new);

    let record = |state: &Array2<C64>,
                  t: f64,
                  traces: &mut Vec<ObservableTrace>,
                  states: &mut Option<Vec<Array2<C64>>>,
                  drift: &mut f64|
     -> Result<(), DynamicsError> {
        *drift = drift.max((trace_of(state) - C64::new(1.0, 0.0)).norm());
        for (obs, trace) in observables.iter().zip(traces.iter_mut()) {
            let v = obs.op.csr().expect(state);
            if v.im.abs() > OBSERVABLE_IMAG_TOL * v.re.abs().max(1.0) {
                return Err(DynamicsError::ImaginaryObservable {
                    name: obs.name.clone(),
                    t,
                    imag: v.im,
                });
            }
            let w = obs.weight.as_ref().map_or(1.0, |f| f(t));
            trace.values.push(w * v.re);
        }
        if let Some(s) = states {
            s.push(state.clone());
        }
        Ok(())
    };

    record(&y, t0, &mut traces, &mut states, &mut trace_drift)?;
    let mut grid_idx = 1usize;

    gen.rhs_into(t0, &y, &mut k[0], &mut ws);
    evals += 1;
    let mut h = match opts.first_step {
        Some(h0) => h0,
        None => {
            evals += 1;
            initial_step(&gen, t0, &y, &k[0], span, opts, &mut ws)
        }
    };
    let mut facold: f64 = 1e-4;
    let mut last_rejected = false;

    while t < t_end {
        if h < 1e-13 * t.abs().max(1.0) {
            return Err(DynamicsError::StepSizeUnderflow { t });
        }
        if let Some(hm) = opts.max_step {
            h = h.min(hm);
        }
        h = h.min(t_end - t);

        // stages 2..=7; stage 7 lands on y_new (FSAL)
        for i in 1..7 {
            y_stage.assign(&y);
            for (j, kj) in k.iter().enumerate().take(i) {
                let a = A[i][j];
                if a != 0.0 {
                    y_stage.scaled_add(C64::new(h * a, 0.0), kj);
                }
            }
            if i == 6 {
                y_new.assign(&y_stage);
            }
            let (ks, t_i) = (&mut k[i], t + C[i] * h);
            gen.rhs_into(t_i, &y_stage, ks, &mut ws);
            evals += 1;
        }

        err_m.fill(C64::new(0.0, 0.0));
        for (i, ki) in k.iter().enumerate() {
            if E[i] != 0.0 {
                err_m.scaled_add(C64::new(h * E[i], 0.0), ki);
            }
        }
        let err = scaled_rms(&err_m, &y, &y_new, opts.atol, opts.rtol);

        let fac11 = err.powf(EXPO1);
        let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(FAC_GROW_MAX, FAC_SHRINK_MAX);
        let mut h_new = h / fac;

        if err <= 1.0 {
            facold = err.max(1e-4);
            accepted += 1;

            // dense output coefficients for this step
            let ydiff = &y_new - &y;
            let bspl = &k[0].mapv(|v| v * C64::new(h, 0.0)) - &ydiff;
            let mut cont4 = &ydiff - &k[6].mapv(|v| v * C64::new(h, 0.0));
            cont4 -= &bspl;
            let mut cont5: Array2<C64> = Array2::zeros((d, d));
            for (i, ki) in k.iter().enumerate() {
                if D[i] != 0.0 {
                    cont5.scaled_add(C64::new(h * D[i], 0.0), ki);
                }
            }

            while grid_idx < t_grid.len() && t_grid[grid_idx] <= t + h + 1e-14 * h {
                let tg = t_grid[grid_idx].min(t + h);
                let s = ((tg - t) / h).clamp(0.0, 1.0);
                let s1 = 1.0 - s;
                // y(s) = y + s·(c1 + s1·(c2 + s·(c3 + s1·c4)))
                let mut interp = &cont4 + &cont5.mapv(|v| v * C64::new(s1, 0.0));
                interp.mapv_inplace(|v| v * C64::new(s, 0.0));
                interp += &bspl;
                interp.mapv_inplace(|v| v * C64::new(s1, 0.0));
                interp += &ydiff;
                interp.mapv_inplace(|v| v * C64::new(s, 0.0));
                interp += &y;
                record(&interp, tg, &mut traces, &mut states, &mut trace_drift)?;
                grid_idx += 1;
            }

            t += h;
            if t_end - t < 1e-12 * span.max(1.0) {
                t = t_end;
            }
            std::mem::swap(&mut y, &mut y_new);
            // re-symmetrize: rounding is the only hermiticity-breaking term
            for i in 0..d {
                for j in (i + 1)..d {
                    let m = (y[(i, j)] + y[(j, i)].conj()) * 0.5;
                    y[(i, j)] = m;
                    y[(j, i)] = m.conj();
                }
                y[(i, i)] = C64::new(y[(i, i)].re, 0.0);
            }
            let drift = (trace_of(&y) - C64::new(1.0, 0.0)).norm();
            trace_drift = trace_drift.max(drift);
            if drift > opts.max_trace_drift {
                return Err(DynamicsError::TraceDrift { t, drift });
            }

            k.swap(0, 6); // FSAL: f(t+h, y_new) seeds the next step
            if last_rejected {
                h_new = h_new.min(h);
                last_rejected = false;
            }
        } else {
            rejected += 1;
            last_rejected = true;
            h_new = h / (fac11 / SAFE).min(FAC_SHRINK_MAX);
        }
        h = h_new;
    }

    let mut final_m = y;
    // hermitize + renormalize the reported state; the drift stays recorded
    let adj = final_m.t().mapv(|v| v.conj());
    final_m = (&final_m + &adj).mapv(|v| v * 0.5);
    let tr = trace_of(&final_m);
    if tr.norm() > 0.0 {
        final_m.mapv_inplace(|v| v / tr);
    }
    let final_rho = DensityMatrix::from_matrix_unchecked(bundle.layout().clone(), final_m);

    Ok(EvolutionResult {
        times: t_grid.to_vec(),
        observables: traces,
        trace_drift,
        final_rho,
        states,
        steps_accepted: accepted,
        steps_rejected: rejected,
        rhs_evals: evals,
    })
}
