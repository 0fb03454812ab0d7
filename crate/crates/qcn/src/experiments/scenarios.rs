//! Figure-reproduction scenarios and the generic steady sweep.


use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::analytic::AnalyticInputs;
use crate::dynamics::{
    evolve, pulse_metrics, steady_observables, steady_state_with, trace_names, EvolveOptions,
    Observable, PulseMetrics, SteadyObservables, SteadyOptions,
};
use crate::hilbert::{QuantumOperator, SpaceLayout, Subsystem};
use crate::model::{
    build_cascaded, build_driven, CascadeSpec, ProbeMode, QcnParams,
};

use super::config::{RunConfig, TruncationSpec};
use super::convergence::{
    converge_cascade, converge_steady, probe_source_truncation, TruncationLevels,
    TruncationReport,
};
use super::ExperimentsError;

/// Where a cell's numbers came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Numeric,
    AnalyticOnly,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Numeric => "numeric",
            Provenance::AnalyticOnly => "analytic",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CellValues {
    pub t_a: Option<f64>,
    pub t_b: Option<f64>,
    pub sigma22: f64,
    pub sigma33: f64,
}

impl From<SteadyObservables> for CellValues {
    fn from(o: SteadyObservables) -> Self {
        Self { t_a: o.t_a, t_b: o.t_b, sigma22: o.sigma22, sigma33: o.sigma33 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SweepCell {
    pub alpha2: f64,
    pub beta2: f64,
    pub numeric: Option<CellValues>,
    pub analytic: Option<CellValues>,
    pub provenance: Provenance,
    pub levels: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
pub struct SweepTable {
    pub alpha2_axis: Vec<f64>,
    pub beta2_axis: Vec<f64>,
    /// Row-major over (alpha2, beta2).
    pub cells: Vec<SweepCell>,
    pub anchor_report: TruncationReport,
}

fn analytic_cell(params: &QcnParams) -> Result<Option<CellValues>, ExperimentsError> {
    let inputs = match AnalyticInputs::from_params(params) {
        Ok(x) => x,
        // outside the closed forms' domain: report nothing rather than extrapolate
        Err(crate::analytic::AnalyticError::OffResonance { .. })
        | Err(crate::analytic::AnalyticError::AsymmetricCoupling { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let (t_a, t_b) = inputs.transmissions()?;
    let (s22, s33) = inputs.populations()?;
    Ok(Some(CellValues {
        t_a: (inputs.alpha2 > 0.0).then_some(t_a),
        t_b: (inputs.beta2 > 0.0).then_some(t_b),
        sigma22: s22,
        sigma33: s33,
    }))
}

fn with_drives(base: &QcnParams, alpha2: f64, beta2: f64) -> QcnParams {
    QcnParams {
        alpha: C64::new(alpha2.sqrt(), 0.0),
        beta: C64::new(beta2.sqrt(), 0.0),
        ..base.clone()
    }
}

/// Rough feasibility screen from the bare-cavity occupations; cells that
/// cannot fit the numeric budget go analytic-only without running a ladder.
fn dim_estimate(params: &QcnParams) -> usize {
    let est = |mean: f64| ((2.0 * mean).ceil() as usize).max(1) + 1;
    let na = est(2.0 * params.alpha.norm_sqr() / params.kappa_a());
    let nb = est(2.0 * params.beta.norm_sqr() / params.kappa_b());
    3 * (na + 1) * (nb + 1)
}

/// Generic 2-D steady sweep with per-cell truncation ladders anchored at
/// the strongest-drive cell.
pub fn run_sweep(config: &RunConfig) -> Result<SweepTable, ExperimentsError> {
    let alpha2_axis = config.alpha2_axis.values();
    let beta2_axis = config.beta2_axis.values();
    let tol = match config.truncation {
        TruncationSpec::Auto { tol } => tol,
        TruncationSpec::Fixed { .. } => 1e-3,
    };

    // anchor: converge + verify at the strongest numerically feasible cell;
    // when nothing on the grid fits the numeric budget the whole sweep is
    // analytic and no ladder runs
    let anchor = alpha2_axis
        .iter()
        .flat_map(|&a| beta2_axis.iter().map(move |&b| (a, b)))
        .filter(|&(a, b)| dim_estimate(&with_drives(&config.params, a, b)) <= config.max_numeric_dim)
        .fold(None::<(f64, f64)>, |best, cand| match best {
            Some(b) if b.0 + b.1 >= cand.0 + cand.1 => Some(b),
            _ => Some(cand),
        });
    let (anchor_levels, anchor_report) = match (config.truncation, anchor) {
        (TruncationSpec::Fixed { n_a, n_b, .. }, _) => {
            let levels = TruncationLevels { n_a, n_b, n_d1: 0, n_d2: 0 };
            let report = TruncationReport {
                levels,
                tol,
                ladder: Vec::new(),
                verified_deltas: Default::default(),
                anchor: anchor.unwrap_or((0.0, 0.0)),
            };
            (levels, report)
        }
        (TruncationSpec::Auto { tol }, Some((a, b))) => {
            let p = with_drives(&config.params, a, b);
            converge_steady(&p, tol, config.max_total_dim, None, true)?
        }
        (TruncationSpec::Auto { tol }, None) => {
            let levels = TruncationLevels { n_a: 1, n_b: 1, n_d1: 0, n_d2: 0 };
            let report = TruncationReport {
                levels,
                tol,
                ladder: Vec::new(),
                verified_deltas: Default::default(),
                anchor: (0.0, 0.0),
            };
            (levels, report)
        }
    };
    let anchor_dominates = |alpha2: f64, beta2: f64| {
        anchor.is_some_and(|(a, b)| alpha2 <= a + 1e-15 && beta2 <= b + 1e-15)
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(if config.jobs == 0 { 0 } else { config.jobs })
        .build()
        .map_err(|e| ExperimentsError::Config(format!("thread pool: {e}")))?;

    let indices: Vec<(usize, usize)> = (0..alpha2_axis.len())
        .flat_map(|i| (0..beta2_axis.len()).map(move |j| (i, j)))
        .collect();

    let cells: Vec<SweepCell> = pool.install(|| {
        indices
            .par_iter()
            .map(|&(i, j)| -> Result<SweepCell, ExperimentsError> {
                let (alpha2, beta2) = (alpha2_axis[i], beta2_axis[j]);
                let p = with_drives(&config.params, alpha2, beta2);
                let analytic = analytic_cell(&p)?;

                if dim_estimate(&p) > config.max_numeric_dim {
                    return Ok(SweepCell {
                        alpha2,
                        beta2,
                        numeric: None,
                        analytic,
                        provenance: Provenance::AnalyticOnly,
                        levels: None,
                    });
                }
                // ladder budget leaves headroom for one-level-up probes
                let ladder_budget =
                    (config.max_numeric_dim + config.max_numeric_dim / 2).min(config.max_total_dim);
                let levels_result = match config.truncation {
                    TruncationSpec::Fixed { .. } => Ok((anchor_levels, None)),
                    TruncationSpec::Auto { tol } => converge_steady(
                        &p,
                        tol,
                        ladder_budget,
                        anchor_dominates(alpha2, beta2)
                            .then_some((anchor_levels.n_a, anchor_levels.n_b)),
                        false,
                    )
                    .map(|(l, r)| (l, Some(r))),
                };
                let analytic_only = SweepCell {
                    alpha2,
                    beta2,
                    numeric: None,
                    analytic,
                    provenance: Provenance::AnalyticOnly,
                    levels: None,
                };
                let (levels, _) = match levels_result {
                    Ok(x) => x,
                    Err(ExperimentsError::TruncationBudget { .. }) => return Ok(analytic_only),
                    Err(e) => {
                        return Err(ExperimentsError::Cell {
                            alpha2,
                            beta2,
                            source: Box::new(e),
                        })
                    }
                };
                if levels.steady_total_dim() > config.max_numeric_dim {
                    return Ok(analytic_only);
                }
                let cell = (|| -> Result<SweepCell, ExperimentsError> {
                    let layout = SpaceLayout::new(&[
                        (Subsystem::Qe, 3),
                        (Subsystem::CavA, levels.n_a + 1),
                        (Subsystem::CavB, levels.n_b + 1),
                    ])?;
                    let bundle = build_driven(&p, &layout)?;
                    let ss = steady_state_with(&bundle, &SteadyOptions::default())?;
                    let obs = steady_observables(&ss, &p)?;
                    Ok(SweepCell {
                        alpha2,
                        beta2,
                        numeric: Some(obs.into()),
                        analytic,
                        provenance: Provenance::Numeric,
                        levels: Some((levels.n_a, levels.n_b)),
                    })
                })();
                cell.map_err(|e| ExperimentsError::Cell { alpha2, beta2, source: Box::new(e) })
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    Ok(SweepTable { alpha2_axis, beta2_axis, cells, anchor_report })
}

/// Fig2 output: the 2-D transmission sweep plus line cuts across the full
/// power range (analytic everywhere, numeric where the budget allows).
#[derive(Clone, Debug)]
pub struct Fig2Output {
    pub table: SweepTable,
    pub cuts: Vec<SweepCell>,
    pub cut_beta2_values: Vec<f64>,
}

pub fn run_fig2(config: &RunConfig) -> Result<Fig2Output, ExperimentsError> {
    let table = run_sweep(config)?;

    // line cuts: T_a(|α|²) for a few probe powers across the full range
    let cut_beta2_values = vec![0.0, 1e-2, 1e0, 1e2];
    let alpha2_cut: Vec<f64> = {
        let (l0, l1) = (-4.0f64, 2.0f64);
        (0..25).map(|k| 10f64.powf(l0 + (l1 - l0) * k as f64 / 24.0)).collect()
    };
    let mut cuts = Vec::new();
    for &beta2 in &cut_beta2_values {
        for &alpha2 in &alpha2_cut {
            let p = with_drives(&config.params, alpha2, beta2);
            let analytic = analytic_cell(&p)?;
            let ladder_budget =
                (config.max_numeric_dim + config.max_numeric_dim / 2).min(config.max_total_dim);
            let numeric = if dim_estimate(&p) <= config.max_numeric_dim {
                match converge_steady(&p, 1e-3, ladder_budget, None, false) {
                    Ok((levels, _)) if levels.steady_total_dim() <= config.max_numeric_dim => {
                        let layout = SpaceLayout::new(&[
                            (Subsystem::Qe, 3),
                            (Subsystem::CavA, levels.n_a + 1),
                            (Subsystem::CavB, levels.n_b + 1),
                        ])?;
                        let bundle = build_driven(&p, &layout)?;
                        let ss = steady_state_with(&bundle, &SteadyOptions::default())?;
                        Some(steady_observables(&ss, &p)?.into())
                    }
                    Ok(_) => None,
                    Err(ExperimentsError::TruncationBudget { .. }) => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            cuts.push(SweepCell {
                alpha2,
                beta2,
                provenance: if numeric.is_some() {
                    Provenance::Numeric
                } else {
                    Provenance::AnalyticOnly
                },
                numeric,
                analytic,
                levels: None,
            });
        }
    }
    Ok(Fig2Output { table, cuts, cut_beta2_values })
}

/// One row of the probe-power sweep at fixed signal power.
#[derive(Clone, Copy, Debug)]
pub struct Fig3Row {
    pub beta2: f64,
    pub numeric: Option<CellValues>,
    pub analytic: Option<CellValues>,
    pub provenance: Provenance,
}

pub fn run_fig3(config: &RunConfig) -> Result<Vec<Fig3Row>, ExperimentsError> {
    let alpha2 = config.params.alpha.norm_sqr();
    let sub = RunConfig {
        alpha2_axis: super::config::AxisSpec::log(alpha2, alpha2, 1),
        ..config.clone()
    };
    let table = run_sweep(&sub)?;
    Ok(table
        .cells
        .into_iter()
        .map(|c| Fig3Row {
            beta2: c.beta2,
            numeric: c.numeric,
            analytic: c.analytic,
            provenance: c.provenance,
        })
        .collect())
}

/// One cascaded time-domain run.
#[derive(Clone, Debug)]
pub struct Fig4Run {
    pub n_s: usize,
    pub times: Vec<f64>,
    pub probe_in: Vec<f64>,
    pub probe_out: Vec<f64>,
    pub signal_in: Vec<f64>,
    pub signal_out: Vec<f64>,
    pub metrics: PulseMetrics,
    /// Probe transmission averaged over the packet's intensity FWHM.
    pub probe_tx_window: Option<f64>,
    /// Peak probe transmission inside the packet window.
    pub probe_tx_peak: Option<f64>,
    /// Signal-flux-weighted probe transmission (absent for n_s = 0).
    pub probe_tx_weighted: Option<f64>,
    pub trace_drift: f64,
    pub levels: TruncationLevels,
    pub steps_accepted: usize,
}

#[derive(Clone, Debug)]
pub struct Fig4Output {
    pub runs: Vec<Fig4Run>,
    pub warnings: Vec<String>,
    /// (τ_d − 5τ_s, τ_d + 5τ_s): the pulse-metric integration window.
    pub metric_window: (f64, f64),
    /// (τ_d − τ_s/2, τ_d + τ_s/2): the probe-transmission average window.
    pub probe_window: (f64, f64),
}

pub fn run_fig4(config: &RunConfig) -> Result<Fig4Output, ExperimentsError> {
    let params = &config.params;
    let spec0 = &config.cascade.spec;
    let window = config.window();
    let tau_d = spec0.delay;
    let tau_s = spec0.duration;
    // signal metrics integrate from just before the packet to the end of
    // the run: the emitter briefly shelves part of the excitation and
    // re-emits it over ~κ/(4g²), long after the packet itself has passed
    let metric_window = ((tau_d - 5.0 * tau_s).max(window.0), window.1);
    // the probe response is reduced over the packet neighborhood
    let probe_window = ((tau_d - 5.0 * tau_s).max(window.0), (tau_d + 5.0 * tau_s).min(window.1));

    let tol = match config.truncation {
        TruncationSpec::Auto { tol } => tol,
        TruncationSpec::Fixed { .. } => 1e-3,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(if config.jobs == 0 { 0 } else { config.jobs })
        .build()
        .map_err(|e| ExperimentsError::Config(format!("thread pool: {e}")))?;

    let runs: Vec<Fig4Run> = pool.install(|| {
        config
            .cascade
            .n_s_list
            .par_iter()
            .map(|&n_s| run_fig4_single(config, params, spec0, n_s, tol, metric_window, probe_window))
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut warnings: Vec<String> = Vec::new();
    for w in params.validate()? {
        warnings.push(w.to_string());
    }
    Ok(Fig4Output { runs, warnings, metric_window, probe_window })
}

fn run_fig4_single(
    config: &RunConfig,
    params: &QcnParams,
    spec0: &CascadeSpec,
    n_s: usize,
    tol: f64,
    metric_window: (f64, f64),
    probe_window: (f64, f64),
) -> Result<Fig4Run, ExperimentsError> {
    let window = config.window();
    let levels = match config.truncation {
        TruncationSpec::Fixed { n_a, n_b, n_d1, n_d2 } => {
            TruncationLevels { n_a, n_b, n_d1, n_d2 }
        }
        TruncationSpec::Auto { .. } => {
            let (mut levels, _) = converge_cascade(params, n_s, tol, config.max_total_dim)?;
            if spec0.probe_mode == ProbeMode::CascadedSource {
                levels.n_d2 =
                    probe_source_truncation(params.beta.norm_sqr(), spec0.probe_kappa_d2_ex2);
            }
            levels
        }
    };

    let mut subsystems = vec![
        (Subsystem::Qe, 3),
        (Subsystem::CavA, levels.n_a + 1),
        (Subsystem::CavB, levels.n_b + 1),
        (Subsystem::SrcD1, levels.n_d1 + 1),
    ];
    if spec0.probe_mode == ProbeMode::CascadedSource {
        subsystems.push((Subsystem::SrcD2, levels.n_d2 + 1));
    }
    let layout = SpaceLayout::new(&subsystems)?;
    let spec = CascadeSpec { n_s, ..spec0.clone() };
    let sys = build_cascaded(params, &spec, &layout, window)?;

    let cross = |s_src: Subsystem, s_sink: Subsystem| -> Result<QuantumOperator, ExperimentsError> {
        let src = QuantumOperator::destroy(&layout, s_src)?;
        let sink = QuantumOperator::destroy(&layout, s_sink)?;
        let p = src.adjoint().checked_mul(&sink)?;
        Ok(p.checked_add(&p.adjoint())?)
    };
    let mut observables = vec![
        Observable::new(trace_names::N_D1, QuantumOperator::number(&layout, Subsystem::SrcD1)?),
        Observable::new(trace_names::N_A, QuantumOperator::number(&layout, Subsystem::CavA)?),
        Observable::new(trace_names::N_B, QuantumOperator::number(&layout, Subsystem::CavB)?),
        Observable::new(trace_names::X_AD, cross(Subsystem::SrcD1, Subsystem::CavA)?),
    ];
    if spec0.probe_mode == ProbeMode::CascadedSource {
        observables.push(Observable::new(
            trace_names::N_D2,
            QuantumOperator::number(&layout, Subsystem::SrcD2)?,
        ));
        observables.push(Observable::new(trace_names::X_BD, cross(Subsystem::SrcD2, Subsystem::CavB)?));
    }

    let steps = ((window.1 - window.0) / config.cascade.grid_step).round() as usize;
    let grid: Vec<f64> =
        (0..=steps).map(|k| window.0 + k as f64 * config.cascade.grid_step).collect();
    let opts = EvolveOptions { rtol: config.rtol, atol: 1e-12, ..Default::default() };
    let run = evolve(&sys.rho0, &sys.bundle, &grid, &observables, &opts)?;

    let metrics = pulse_metrics(&run, params, &sys.schedule, &spec, metric_window)?;

    // flux traces for the CSV
    let sched = sys.schedule.clone();
    let n_d1 = run.trace_values(trace_names::N_D1)?;
    let n_a = run.trace_values(trace_names::N_A)?;
    let n_b = run.trace_values(trace_names::N_B)?;
    let x_ad = run.trace_values(trace_names::X_AD)?;
    let kappa_ex1 = params.kappa_ex[0];
    let beta2 = params.beta.norm_sqr();
    let times = run.times.clone();
    let signal_in: Vec<f64> =
        times.iter().zip(n_d1).map(|(&t, &nd)| sched.kappa(t) * nd).collect();
    let signal_out: Vec<f64> = times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let ks = sched.kappa(t);
            ks * n_d1[k] + kappa_ex1 * n_a[k] + (ks * kappa_ex1).sqrt() * x_ad[k]
        })
        .collect();
    let probe_in: Vec<f64> = vec![beta2; times.len()];
    let probe_out: Vec<f64> = n_b.iter().map(|&nb| params.kappa_ex[3] * nb).collect();

    // probe-transmission reductions over the pulse windows
    let tx = |k: usize| probe_out[k] / beta2;
    let idx = |t: f64| times.partition_point(|&x| x < t);
    let (w0, w1) = probe_window;
    let (m0, m1) = metric_window;
    let (probe_tx_window, probe_tx_peak, probe_tx_weighted) = if beta2 > 0.0 {
        let (i0, i1) = (idx(w0), idx(w1).min(times.len() - 1));
        let avg = if i1 > i0 {
            let vals: Vec<f64> = (0..times.len()).map(tx).collect();
            crate::dynamics::trapezoid(&times, &vals, i0, i1) / (times[i1] - times[i0])
        } else {
            f64::NAN
        };
        let (p0, p1) = (idx(m0), idx(m1).min(times.len() - 1));
        let peak = (p0..=p1).map(tx).fold(f64::NEG_INFINITY, f64::max);
        let weighted = if n_s > 0 {
            let num: Vec<f64> = (0..times.len()).map(|k| tx(k) * signal_in[k]).collect();
            let den = crate::dynamics::trapezoid(&times, &signal_in, p0, p1);
            (den > 0.0).then(|| crate::dynamics::trapezoid(&times, &num, p0, p1) / den)
        } else {
            None
        };
        (Some(avg), Some(peak), weighted)
    } else {
        (None, None, None)
    };

    Ok(Fig4Run {
        n_s,
        times,
        probe_in,
        probe_out,
        signal_in,
        signal_out,
        metrics,
        probe_tx_window,
        probe_tx_peak,
        probe_tx_weighted,
        trace_drift: run.trace_drift,
        levels,
        steps_accepted: run.steps_accepted,
    })
}

/// The physical-unit preset: miniature Fabry–Pérot cavities around the
/// ⁸⁷Rb D₂ line. External mirror rates 2π·{480, 6, 243, 243} MHz,
/// intrinsic losses 2π·0.5 MHz, emitter decays 2π·3 MHz, couplings
/// 2π·52 MHz. The rate unit is κ := κ_a.
pub const RB87_KAPPA_EX_MHZ: [f64; 4] = [480.0, 6.0, 243.0, 243.0];
pub const RB87_KAPPA_IN_MHZ: f64 = 0.5;
pub const RB87_GAMMA_MHZ: f64 = 3.0;
pub const RB87_G_MHZ: f64 = 52.0;

/// κ_a/2π in MHz; the normalization of the preset.
pub fn rb87_kappa_unit_mhz() -> f64 {
    RB87_KAPPA_EX_MHZ[0] + RB87_KAPPA_EX_MHZ[1] + RB87_KAPPA_IN_MHZ
}

/// Preset parameters in κ-normalized units with probe power `beta2`.
pub fn rb87_params(beta2: f64) -> QcnParams {
    let unit = rb87_kappa_unit_mhz();
    QcnParams {
        g1: RB87_G_MHZ / unit,
        g2: RB87_G_MHZ / unit,
        kappa_ex: [
            RB87_KAPPA_EX_MHZ[0] / unit,
            RB87_KAPPA_EX_MHZ[1] / unit,
            RB87_KAPPA_EX_MHZ[2] / unit,
            RB87_KAPPA_EX_MHZ[3] / unit,
        ],
        kappa_in_a: RB87_KAPPA_IN_MHZ / unit,
        kappa_in_b: RB87_KAPPA_IN_MHZ / unit,
        gamma21: RB87_GAMMA_MHZ / unit,
        gamma31: RB87_GAMMA_MHZ / unit,
        delta1: 0.0,
        delta2: 0.0,
        delta_a: 0.0,
        delta_b: 0.0,
        alpha: C64::new(0.0, 0.0),
        beta: C64::new(beta2.sqrt(), 0.0),
    }
}

#[derive(Clone, Debug)]
pub struct PresetOutput {
    pub kappa_unit_mhz: f64,
    pub params: QcnParams,
    pub fig4: Fig4Output,
    /// Signal survival R_a per n_s > 0 run.
    pub survival: Vec<(usize, f64)>,
}

pub fn run_preset_rb87(config: &RunConfig) -> Result<PresetOutput, ExperimentsError> {
    let params = rb87_params(config.params.beta.norm_sqr());
    let sub = RunConfig { params: params.clone(), ..config.clone() };
    let fig4 = run_fig4(&sub)?;
    let survival = fig4
        .runs
        .iter()
        .filter_map(|r| r.metrics.r_a.map(|ra| (r.n_s, ra)))
        .collect();
    Ok(PresetOutput { kappa_unit_mhz: rb87_kappa_unit_mhz(), params, fig4, survival })
}

/// Single steady solve at the configured parameters.
#[derive(Clone, Debug)]
pub struct SteadyOutput {
    pub observables: SteadyObservables,
    pub analytic: Option<CellValues>,
    pub residual: f64,
    pub method: &'static str,
    pub levels: TruncationLevels,
}

pub fn run_steady(config: &RunConfig) -> Result<SteadyOutput, ExperimentsError> {
    let tol = match config.truncation {
        TruncationSpec::Auto { tol } => tol,
        TruncationSpec::Fixed { .. } => 1e-3,
    };
    let levels = match config.truncation {
        TruncationSpec::Fixed { n_a, n_b, n_d1, n_d2 } => {
            TruncationLevels { n_a, n_b, n_d1, n_d2 }
        }
        TruncationSpec::Auto { .. } => {
            converge_steady(&config.params, tol, config.max_total_dim, None, true)?.0
        }
    };
    let layout = SpaceLayout::new(&[
        (Subsystem::Qe, 3),
        (Subsystem::CavA, levels.n_a + 1),
        (Subsystem::CavB, levels.n_b + 1),
    ])?;
    let bundle = build_driven(&config.params, &layout)?;
    let ss = steady_state_with(&bundle, &SteadyOptions::default())?;
    let observables = steady_observables(&ss, &config.params)?;
    Ok(SteadyOutput {
        observables,
        analytic: analytic_cell(&config.params)?,
        residual: ss.residual,
        method: match ss.method {
            crate::dynamics::SteadyMethod::Nullspace => "nullspace",
            crate::dynamics::SteadyMethod::LongTime => "long_time",
        },
        levels,
    })
}

/// The raw probe turn-on transient settles by roughly this time; the
/// default packet delay of 150 κ⁻¹ sits safely after it.
pub fn probe_settling_time() -> f64 {
    140.0
}

