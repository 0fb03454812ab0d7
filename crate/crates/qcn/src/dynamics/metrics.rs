//! Input-output observables: steady transmittances and windowed pulse
//! metrics of the cascaded runs.

use crate::hilbert::{QuantumOperator, Subsystem};
use crate::model::{CascadeSpec, ProbeMode, PulseSchedule, QcnParams};

use super::integrator::EvolutionResult;
use super::steady::SteadyStateResult;
use super::DynamicsError;

/// Steady-state transmittances T_a = κ_ex,2⟨a†a⟩/|α|²,
/// T_b = κ_ex,4⟨b†b⟩/|β|²; absent when the corresponding drive is off.
pub fn transmittance_steady(
    ss: &SteadyStateResult,
    params: &QcnParams,
) -> Result<(Option<f64>, Option<f64>), DynamicsError> {
    let layout = ss.rho.layout();
    let t_a = if params.alpha.norm() > 0.0 {
        let n_a = QuantumOperator::number(layout, Subsystem::CavA)?;
        Some(params.kappa_ex[1] * n_a.expect_real(&ss.rho)? / params.alpha.norm_sqr())
    } else {
        None
    };
    let t_b = if params.beta.norm() > 0.0 {
        let n_b = QuantumOperator::number(layout, Subsystem::CavB)?;
        Some(params.kappa_ex[3] * n_b.expect_real(&ss.rho)? / params.beta.norm_sqr())
    } else {
        None
    };
    Ok((t_a, t_b))
}

/// The full steady observable set reported by sweeps.
#[derive(Clone, Copy, Debug)]
pub struct SteadyObservables {
    pub t_a: Option<f64>,
    pub t_b: Option<f64>,
    pub sigma22: f64,
    pub sigma33: f64,
    pub n_a: f64,
    pub n_b: f64,
}

impl SteadyObservables {
    pub fn require_t_a(&self) -> Result<f64, DynamicsError> {
        self.t_a.ok_or(DynamicsError::ZeroDriveMetric { which: "T_a" })
    }

    pub fn require_t_b(&self) -> Result<f64, DynamicsError> {
        self.t_b.ok_or(DynamicsError::ZeroDriveMetric { which: "T_b" })
    }
}

pub fn steady_observables(
    ss: &SteadyStateResult,
    params: &QcnParams,
) -> Result<SteadyObservables, DynamicsError> {
    let layout = ss.rho.layout();
    let (t_a, t_b) = transmittance_steady(ss, params)?;
    let s22 = QuantumOperator::transition(layout, 2, 2)?.expect_real(&ss.rho)?;
    let s33 = QuantumOperator::transition(layout, 3, 3)?.expect_real(&ss.rho)?;
    let n_a = QuantumOperator::number(layout, Subsystem::CavA)?.expect_real(&ss.rho)?;
    let n_b = QuantumOperator::number(layout, Subsystem::CavB)?.expect_real(&ss.rho)?;
    Ok(SteadyObservables { t_a, t_b, sigma22: s22, sigma33: s33, n_a, n_b })
}

/// Windowed pulse transmittances/reflectances and the integrated input.
#[derive(Clone, Copy, Debug, Default)]
pub struct PulseMetrics {
    pub t_a: Option<f64>,
    pub r_a: Option<f64>,
    pub t_b: Option<f64>,
    pub r_b: Option<f64>,
    /// ∫⟨d₁,out† d₁,out⟩ dt over the window.
    pub input_photons: f64,
}

/// Trace names the cascaded runs must provide for metric extraction.
pub mod trace_names {
    pub const N_D1: &str = "n_d1";
    pub const N_D2: &str = "n_d2";
    pub const N_A: &str = "n_a";
    pub const N_B: &str = "n_b";
    /// ⟨d₁†a + a†d₁⟩ — interference part of the reflected flux.
    pub const X_AD: &str = "x_ad";
    /// ⟨d₂†b + b†d₂⟩.
    pub const X_BD: &str = "x_bd";
}

/// Trapezoidal quadrature of samples `ys` on grid `ts` over `[i0, i1]`.
pub fn trapezoid(ts: &[f64], ys: &[f64], i0: usize, i1: usize) -> f64 {
    let mut acc = 0.0;
    for k in i0..i1 {
        acc += 0.5 * (ys[k] + ys[k + 1]) * (ts[k + 1] - ts[k]);
    }
    acc
}

/// Integrate the flux observables of a cascaded run over `[t0, t1]`.
///
/// The reflected signal flux is the composite
/// ⟨a_r†a_r⟩ = κ_d1,ex2(t)⟨d₁†d₁⟩ + κ_ex,1⟨a†a⟩ + √(κ_d1,ex2(t)κ_ex,1)⟨d₁†a + a†d₁⟩;
/// the interference cross terms are what cancel the retro-reflection of an
/// impedance-matched cavity, so they must not be dropped.
pub fn pulse_metrics(
    run: &EvolutionResult,
    params: &QcnParams,
    schedule: &PulseSchedule,
    spec: &CascadeSpec,
    window: (f64, f64),
) -> Result<PulseMetrics, DynamicsError> {
    let n_s = spec.n_s;
    let probe_mode = spec.probe_mode;
    let probe_kappa_d2_ex2 = spec.probe_kappa_d2_ex2;
    let (t0, t1) = window;
    let ts = &run.times;
    let i0 = ts.partition_point(|&t| t < t0);
    let i1 = ts.partition_point(|&t| t <= t1).saturating_sub(1);
    if i1 <= i0 {
        return Err(DynamicsError::EmptyWindow { t0, t1 });
    }

    let n_d1 = run.trace_values(trace_names::N_D1)?;
    let n_a = run.trace_values(trace_names::N_A)?;
    let n_b = run.trace_values(trace_names::N_B)?;
    let x_ad = run.trace_values(trace_names::X_AD)?;

    let kappa_ex1 = params.kappa_ex[0];
    let kappa_ex2 = params.kappa_ex[1];
    let kappa_ex4 = params.kappa_ex[3];

    let mut metrics = PulseMetrics::default();

    if n_s > 0 {
        // the window must hold essentially the whole packet
        let coverage = schedule.emitted_fraction(t1) - schedule.emitted_fraction(t0);
        if coverage < 0.999 {
            return Err(DynamicsError::WindowTruncation { outside: 1.0 - coverage });
        }
        let sig_in: Vec<f64> =
            ts.iter().zip(n_d1).map(|(&t, &nd)| schedule.kappa(t) * nd).collect();
        let sig_out: Vec<f64> = ts
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let ks = schedule.kappa(t);
                ks * n_d1[k] + kappa_ex1 * n_a[k] + (ks * kappa_ex1).sqrt() * x_ad[k]
            })
            .collect();
        let sig_tx: Vec<f64> = n_a.iter().map(|&na| kappa_ex2 * na).collect();
        let input = trapezoid(ts, &sig_in, i0, i1);
        metrics.input_photons = input;
        if input > 0.0 {
            metrics.r_a = Some(trapezoid(ts, &sig_out, i0, i1) / input);
            metrics.t_a = Some(trapezoid(ts, &sig_tx, i0, i1) / input);
        }
    }

    match probe_mode {
        ProbeMode::ClassicalDrive => {
            let beta2 = params.beta.norm_sqr();
            if beta2 > 0.0 {
                let out: Vec<f64> = n_b.iter().map(|&nb| kappa_ex4 * nb).collect();
                let duration = ts[i1] - ts[i0];
                metrics.t_b = Some(trapezoid(ts, &out, i0, i1) / (beta2 * duration));
            }
        }
        ProbeMode::CascadedSource => {
            let n_d2 = run.trace_values(trace_names::N_D2)?;
            let x_bd = run.trace_values(trace_names::X_BD)?;
            let kappa_ex3 = params.kappa_ex[2];
            let probe_in: Vec<f64> = n_d2.iter().map(|&nd| probe_kappa_d2_ex2 * nd).collect();
            let probe_out: Vec<f64> = (0..ts.len())
                .map(|k| {
                    probe_kappa_d2_ex2 * n_d2[k]
                        + kappa_ex3 * n_b[k]
                        + (probe_kappa_d2_ex2 * kappa_ex3).sqrt() * x_bd[k]
                })
                .collect();
            let probe_tx: Vec<f64> = n_b.iter().map(|&nb| kappa_ex4 * nb).collect();
            let input = trapezoid(ts, &probe_in, i0, i1);
            if input > 0.0 {
                metrics.t_b = Some(trapezoid(ts, &probe_tx, i0, i1) / input);
                metrics.r_b = Some(trapezoid(ts, &probe_out, i0, i1) / input);
            }
        }
    }

    Ok(metrics)
}
