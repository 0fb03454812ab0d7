//! Acceptance suite: one test per headline requirement, each printing a
//! PASS line with the measured numbers (run with `-- --nocapture` to see
//! them). The detection runs are shared across tests.

use std::sync::OnceLock;

use qcn::analytic::AnalyticInputs;
use qcn::dynamics::{
    evolve, steady_observables, steady_state, steady_state_with, EvolveOptions, Observable,
    SteadyOptions,
};
use qcn::hilbert::{DensityMatrix, QuantumOperator, SpaceLayout, Subsystem};
use qcn::model::{
    build_cascaded, build_driven, CascadeSpec, ProbeMode, PulseShape, QcnParams,
};
use qcn::experiments::{
    converge_steady, run_fig3, run_fig4, run_preset_rb87, run_sweep, AxisSpec, Fig4Output,
    Provenance, RunConfig, Scenario,
};

fn layout_ab(n_a: usize, n_b: usize) -> std::sync::Arc<SpaceLayout> {
    SpaceLayout::new(&[
        (Subsystem::Qe, 3),
        (Subsystem::CavA, n_a + 1),
        (Subsystem::CavB, n_b + 1),
    ])
    .unwrap()
}

fn fig4_output() -> &'static Fig4Output {
    static OUT: OnceLock<Fig4Output> = OnceLock::new();
    OUT.get_or_init(|| {
        let cfg = RunConfig::default_for(Scenario::Fig4);
        run_fig4(&cfg).expect("fig4 pipeline")
    })
}

/// Criterion 1: On the 9×9 grid of drive powers in [1e-4, 1e-1] with the symmetric
/// benchmark parameters, the numerical steady state and the closed forms
/// agree to 0.02 in transmission and 0.01 in population, at
/// auto-converged truncation.
#[test]
fn acceptance_1_analytic_numeric_equivalence() {
    let t0 = std::time::Instant::now();
    let cfg = RunConfig::default_for(Scenario::Sweep2d);
    let table = run_sweep(&cfg).expect("sweep");
    assert_eq!(table.cells.len(), 81);

    let mut max_t = 0.0f64;
    let mut max_p = 0.0f64;
    let mut worst_cell = (0.0f64, 0.0f64);
    for cell in &table.cells {
        assert_eq!(
            cell.provenance,
            Provenance::Numeric,
            "cell ({:e}, {:e}) fell back to analytic",
            cell.alpha2,
            cell.beta2
        );
        let n = cell.numeric.unwrap();
        let a = cell.analytic.unwrap();
        max_t = max_t.max((n.t_a.unwrap() - a.t_a.unwrap()).abs());
        max_t = max_t.max((n.t_b.unwrap() - a.t_b.unwrap()).abs());
        let p_dev = (n.sigma22 - a.sigma22).abs().max((n.sigma33 - a.sigma33).abs());
        if p_dev > max_p {
            max_p = p_dev;
            worst_cell = (cell.alpha2, cell.beta2);
        }
    }
    println!(
        "acceptance 1 measured: max |T_num - T_ana| = {max_t:.4}, \
         max population deviation = {max_p:.4} at (alpha2, beta2) = ({:.2e}, {:.2e}), \
         81 cells in {:.0} s",
        worst_cell.0,
        worst_cell.1,
        t0.elapsed().as_secs_f64()
    );
    if max_p > 0.01 {
        // substantiate that the gap is not a truncation artifact: re-solve
        // the worst cell two levels higher and report the numeric shift
        let p = QcnParams::symmetric(worst_cell.0, worst_cell.1);
        let (levels, _) = converge_steady(&p, 1e-3, 200, None, false).unwrap();
        let solve_at = |n_a: usize, n_b: usize| {
            let layout = layout_ab(n_a, n_b);
            let ss = steady_state_with(
                &build_driven(&p, &layout).unwrap(),
                &SteadyOptions { dim_cap: 80, ..Default::default() },
            )
            .unwrap();
            steady_observables(&ss, &p).unwrap()
        };
        let base = solve_at(levels.n_a, levels.n_b);
        let refined = solve_at(levels.n_a + 1, levels.n_b + 2);
        let shift = (base.sigma22 - refined.sigma22)
            .abs()
            .max((base.sigma33 - refined.sigma33).abs());
        println!(
            "acceptance 1 analysis: worst-cell populations shift only {shift:.1e} when the \
             truncation is raised two further levels; the residual gap to the closed form is \
             the saturation error of the weak-drive formulas at the strongest single-drive \
             cells, not a solver artifact"
        );
    }
    assert!(max_t <= 0.02, "max transmission deviation {max_t}");
    assert!(max_p <= 0.01, "max population deviation {max_p}");
    println!(
        "acceptance 1 PASS: max |T_num - T_ana| = {max_t:.4} (<= 0.02), \
         max population deviation = {max_p:.4} (<= 0.01)"
    );
}

/// Criterion 2: Modulation depth: at |α|²/κ = 1e-4 the signal cavity is almost
/// opaque without a probe (T_a < 0.10) and almost transparent at
/// |β|²/κ = 1e2 (T_a > 0.95).
#[test]
fn acceptance_2_modulation_depth() {
    // weak-drive endpoint, numeric and analytic
    let p = QcnParams::symmetric(1e-4, 0.0);
    let (levels, _) = converge_steady(&p, 1e-3, 1500, None, true).unwrap();
    let layout = layout_ab(levels.n_a, levels.n_b);
    let ss = steady_state(&build_driven(&p, &layout).unwrap()).unwrap();
    let t_a_num = steady_observables(&ss, &p).unwrap().t_a.unwrap();
    let (t_a_ana, _) = AnalyticInputs::from_params(&p).unwrap().transmissions().unwrap();
    assert!(t_a_num < 0.10, "numeric T_a = {t_a_num}");
    assert!(t_a_ana < 0.10, "analytic T_a = {t_a_ana}");

    // strong-probe endpoint: ~200 probe photons sit in cavity b, far past
    // the numeric budget, so the closed form is the only route
    let strong = AnalyticInputs::from_params(&QcnParams::symmetric(1e-4, 1e2)).unwrap();
    let (t_a_strong, _) = strong.transmissions().unwrap();
    assert!(t_a_strong > 0.95, "strong-probe T_a = {t_a_strong}");

    let mut cfg = RunConfig::default_for(Scenario::Sweep2d);
    cfg.alpha2_axis = AxisSpec::log(1e-4, 1e-4, 1);
    cfg.beta2_axis = AxisSpec::log(1e2, 1e2, 1);
    let table = run_sweep(&cfg).unwrap();
    assert_eq!(table.cells[0].provenance, Provenance::AnalyticOnly);

    println!(
        "acceptance 2 PASS: T_a(beta=0) = {t_a_num:.4} numeric / {t_a_ana:.4} analytic (< 0.10), \
         T_a(|beta|^2 = 1e2) = {t_a_strong:.5} analytic (> 0.95)"
    );
}

/// Criterion 3: Quantum competition: with |α|²/κ = 1e-2 fixed, the two excited-state
/// populations cross exactly at |β|²/κ = 1e-2, and σ₃₃ vanishes at β = 0.
#[test]
fn acceptance_3_competition_crossing() {
    let mut cfg = RunConfig::default_for(Scenario::Fig3);
    // restrict the sweep to the numerically cheap range around the crossing
    cfg.beta2_axis = AxisSpec { min: 1e-4, max: 1e-1, points: 13, include_zero: true };
    let rows = run_fig3(&cfg).expect("fig3 sweep");

    let zero = rows.iter().find(|r| r.beta2 == 0.0).unwrap();
    let s33_zero = zero.numeric.unwrap().sigma33;
    assert!(s33_zero.abs() < 1e-12, "sigma33 at beta=0: {s33_zero:e}");

    let cross = rows.iter().find(|r| (r.beta2 - 1e-2).abs() < 1e-12).unwrap();
    let n = cross.numeric.unwrap();
    let gap = (n.sigma22 - n.sigma33).abs();
    assert!(gap < 1e-9, "population gap at equal drives: {gap:e}");

    // the crossing is bracketed by the neighbors within grid resolution
    let below: Vec<_> = rows
        .iter()
        .filter(|r| r.beta2 > 0.0 && r.beta2 < 1e-2 - 1e-12)
        .map(|r| r.numeric.unwrap())
        .collect();
    let above: Vec<_> = rows
        .iter()
        .filter(|r| r.beta2 > 1e-2 + 1e-12)
        .map(|r| r.numeric.unwrap())
        .collect();
    assert!(below.iter().all(|v| v.sigma22 > v.sigma33));
    assert!(above.iter().all(|v| v.sigma22 < v.sigma33));

    println!(
        "acceptance 3 PASS: sigma33(beta=0) = {s33_zero:.1e}, population gap at \
         |beta|^2 = 1e-2 is {gap:.1e}, crossing bracketed by neighbors"
    );
}

/// Criterion 4: Photon-number readout: windowed probe transmissions for
/// n_s = 0, 1, 2, 3 match 40%, 48%, 54%, 59% within 3 percentage points,
/// and the empty-source run reproduces the plain driven model.
#[test]
fn acceptance_4_qnd_transmissions() {
    let out = fig4_output();
    let targets = [0.40, 0.48, 0.54, 0.59];
    let mut measured = Vec::new();
    for (run, &target) in out.runs.iter().zip(&targets) {
        let tx = run.probe_tx_window.expect("windowed probe transmission");
        assert!(
            (tx - target).abs() <= 0.03,
            "n_s = {}: windowed transmission {tx:.4} vs target {target}",
            run.n_s
        );
        measured.push(tx);
    }

    // an empty source decouples: the cascaded n_s = 0 run must match the
    // classically driven model trace for trace
    let p = QcnParams::single_sided(1e-2);
    let cascade_layout = SpaceLayout::new(&[
        (Subsystem::Qe, 3),
        (Subsystem::CavA, 1),
        (Subsystem::CavB, 3),
        (Subsystem::SrcD1, 1),
    ])
    .unwrap();
    let driven_layout = SpaceLayout::new(&[
        (Subsystem::Qe, 3),
        (Subsystem::CavA, 1),
        (Subsystem::CavB, 3),
    ])
    .unwrap();
    let spec = CascadeSpec { n_s: 0, delay: 40.0, duration: 4.0, ..CascadeSpec::gaussian_packet(0) };
    let sys = build_cascaded(&p, &spec, &cascade_layout, (0.0, 80.0)).unwrap();
    let driven = build_driven(&p, &driven_layout).unwrap();
    let grid: Vec<f64> = (0..=320).map(|k| 0.25 * k as f64).collect();
    let obs_c = [Observable::new(
        "n_b",
        QuantumOperator::number(&cascade_layout, Subsystem::CavB).unwrap(),
    )];
    let obs_d = [Observable::new(
        "n_b",
        QuantumOperator::number(&driven_layout, Subsystem::CavB).unwrap(),
    )];
    let opts = EvolveOptions { rtol: 1e-10, atol: 1e-13, ..Default::default() };
    let run_c = evolve(&sys.rho0, &sys.bundle, &grid, &obs_c, &opts).unwrap();
    let run_d =
        evolve(&DensityMatrix::vacuum(&driven_layout), &driven, &grid, &obs_d, &opts).unwrap();
    let max_dev = run_c
        .trace_values("n_b")
        .unwrap()
        .iter()
        .zip(run_d.trace_values("n_b").unwrap())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max)
        / 0.02; // relative to the bare-cavity occupation scale
    assert!(max_dev < 1e-6, "empty-source deviation {max_dev:e}");

    println!(
        "acceptance 4 PASS: windowed probe transmissions {:.1}% / {:.1}% / {:.1}% / {:.1}% \
         vs 40/48/54/59 (+-3 pp); empty-source run matches the driven model to {max_dev:.1e}",
        100.0 * measured[0],
        100.0 * measured[1],
        100.0 * measured[2],
        100.0 * measured[3]
    );
}

/// Criterion 5: Signal survival: the reflected fraction of the packet reaches
/// 95%, 95.5%, 96% for n_s = 1, 2, 3 within 1.5 percentage points and
/// never decreases with photon number.
#[test]
fn acceptance_5_signal_survival() {
    let out = fig4_output();
    let targets = [(1usize, 0.95), (2, 0.955), (3, 0.96)];
    let mut measured = Vec::new();
    for &(n_s, target) in &targets {
        let run = out.runs.iter().find(|r| r.n_s == n_s).unwrap();
        let ra = run.metrics.r_a.expect("survival");
        assert!(
            (ra - target).abs() <= 0.015,
            "n_s = {n_s}: survival {ra:.4} vs target {target}"
        );
        measured.push(ra);
    }
    assert!(
        measured.windows(2).all(|w| w[1] >= w[0] - 1e-12),
        "survival not monotone: {measured:?}"
    );
    println!(
        "acceptance 5 PASS: survival {:.2}% / {:.2}% / {:.2}% vs 95/95.5/96 (+-1.5 pp), monotone",
        100.0 * measured[0],
        100.0 * measured[1],
        100.0 * measured[2]
    );
}

/// Criterion 6: Physical preset: the Rb-line parameter set keeps more than 92% of a
/// single signal photon.
#[test]
fn acceptance_6_physical_preset() {
    let cfg = RunConfig::default_for(Scenario::PresetRb87);
    let out = run_preset_rb87(&cfg).expect("preset run");
    let (_, survival) = out
        .survival
        .iter()
        .find(|(n_s, _)| *n_s == 1)
        .copied()
        .expect("n_s = 1 in preset run");
    assert!(survival > 0.92, "preset survival {survival:.4}");
    println!(
        "acceptance 6 PASS: Rb preset single-photon survival {:.2}% (> 92%), kappa_a/2pi = {} MHz",
        100.0 * survival,
        out.kappa_unit_mhz
    );
}

/// Criterion 7: Property suite: trace conservation, positivity, steady-state vs
/// long-time agreement, exchange symmetry, cross-power monotonicity, and
/// the additive drive-combination invariance.
#[test]
fn acceptance_7_property_suite() {
    // trace conservation over the detection runs
    let out = fig4_output();
    let worst_drift = out.runs.iter().map(|r| r.trace_drift).fold(0.0f64, f64::max);
    assert!(worst_drift < 1e-6, "trace drift {worst_drift:e}");

    // positivity of sampled states along a driven evolution
    let p = QcnParams::symmetric(1e-2, 1e-2);
    let layout = layout_ab(2, 2);
    let bundle = build_driven(&p, &layout).unwrap();
    let grid: Vec<f64> = (0..=100).map(|k| 2.0 * k as f64).collect();
    let opts = EvolveOptions { keep_states: true, ..Default::default() };
    let run = evolve(&DensityMatrix::vacuum(&layout), &bundle, &grid, &[], &opts).unwrap();
    let mut min_eig = f64::INFINITY;
    for state in run.states.as_ref().unwrap() {
        min_eig = min_eig.min(DensityMatrix::min_eigenvalue_of(state));
    }
    assert!(min_eig >= -1e-6, "sampled eigenvalue {min_eig:e}");

    // steady state vs relaxation over 100 / min rate
    let t_long = 100.0 / 0.01;
    let ss = steady_state(&bundle).unwrap();
    let long = evolve(
        &DensityMatrix::vacuum(&layout),
        &bundle,
        &[0.0, t_long],
        &[],
        &EvolveOptions { rtol: 1e-9, atol: 1e-12, ..Default::default() },
    )
    .unwrap();
    let dist = ss.rho.trace_distance(&long.final_rho).unwrap();
    assert!(dist < 1e-5, "steady vs long-time distance {dist:e}");

    // exact exchange symmetry under relabeling a <-> b
    let mut asym = QcnParams::symmetric(2e-3, 8e-3);
    asym.g2 = 0.13;
    asym.gamma31 = 0.02;
    asym.kappa_ex = [0.5, 0.5, 0.3, 0.3];
    let swapped = asym.swapped();
    let solve = |p: &QcnParams, n_a: usize, n_b: usize| {
        let layout = layout_ab(n_a, n_b);
        let ss = steady_state(&build_driven(p, &layout).unwrap()).unwrap();
        steady_observables(&ss, p).unwrap()
    };
    let x = solve(&asym, 3, 3);
    let y = solve(&swapped, 3, 3);
    let sym_dev = [
        (x.t_a.unwrap() - y.t_b.unwrap()).abs(),
        (x.t_b.unwrap() - y.t_a.unwrap()).abs(),
        (x.sigma22 - y.sigma33).abs(),
        (x.sigma33 - y.sigma22).abs(),
        (x.n_a - y.n_b).abs(),
        (x.n_b - y.n_a).abs(),
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    assert!(sym_dev < 1e-9, "exchange-symmetry deviation {sym_dev:e}");

    // T_a numerically nondecreasing in the cross power
    let mut prev = -1.0f64;
    for k in 0..6 {
        let beta2 = 10f64.powf(-4.0 + 3.0 * k as f64 / 5.0);
        let p = QcnParams::symmetric(1e-3, beta2);
        let obs = solve(&p, 2, 3);
        let t_a = obs.t_a.unwrap();
        assert!(t_a >= prev - 1e-9, "T_a not monotone at beta2 = {beta2:e}");
        prev = t_a;
    }

    // drive pairs with equal g1^2 kb |alpha|^2 + g2^2 ka |beta|^2 give the
    // same T_a: exact in the closed form, within the weak-drive agreement
    // numerically
    let pair_a = QcnParams::symmetric(1e-3, 9e-3);
    let pair_b = QcnParams::symmetric(4e-3, 6e-3);
    let ana_a = AnalyticInputs::from_params(&pair_a).unwrap();
    let ana_b = AnalyticInputs::from_params(&pair_b).unwrap();
    assert!((ana_a.drive_combination() - ana_b.drive_combination()).abs() < 1e-18);
    let (ta_ana_a, _) = ana_a.transmissions().unwrap();
    let (ta_ana_b, _) = ana_b.transmissions().unwrap();
    assert!((ta_ana_a - ta_ana_b).abs() < 1e-12);
    let num_a = solve(&pair_a, 3, 3).t_a.unwrap();
    let num_b = solve(&pair_b, 3, 3).t_a.unwrap();
    let pair_dev = (num_a - num_b).abs();
    assert!(pair_dev < 5e-3, "equal-combination pair deviation {pair_dev:e}");

    println!(
        "acceptance 7 PASS: drift {worst_drift:.1e} < 1e-6, min eigenvalue {min_eig:.1e} >= -1e-6, \
         steady/long-time distance {dist:.1e} < 1e-5, exchange symmetry to {sym_dev:.1e}, \
         T_a monotone, equal-combination pairs within {pair_dev:.1e}"
    );
}

/// Criterion 8: Cascade oracle: one-way transfer between two bare cavities matches
/// the closed-form solution, and the downstream system never acts back on
/// the source.
#[test]
fn acceptance_8_cascade_oracle() {
    let exact = |t: f64, kd: f64, ka: f64| {
        if (ka - kd).abs() < 1e-12 {
            let x = ka * t;
            x * x * (-x).exp()
        } else {
            let e = (-kd * t / 2.0).exp() - (-ka * t / 2.0).exp();
            4.0 * ka * kd / (ka - kd).powi(2) * e * e
        }
    };
    let layout = SpaceLayout::new(&[
        (Subsystem::Qe, 3),
        (Subsystem::CavA, 2),
        (Subsystem::CavB, 1),
        (Subsystem::SrcD1, 2),
    ])
    .unwrap();
    let kd = 0.4;
    let spec = CascadeSpec {
        n_s: 1,
        kappa_d1_ex2_max: 1.0,
        shape: PulseShape::Exponential,
        delay: 0.0,
        duration: 1.0 / kd,
        probe_mode: ProbeMode::ClassicalDrive,
        probe_kappa_d2_ex2: 0.0,
    };
    let grid: Vec<f64> = (0..=600).map(|k| 0.05 * k as f64).collect();
    let opts = EvolveOptions { rtol: 1e-10, atol: 1e-13, ..Default::default() };

    // bare transfer: the emitter is decoupled
    let mut p = QcnParams::single_sided(0.0);
    p.g1 = 0.0;
    p.g2 = 0.0;
    let sys = build_cascaded(&p, &spec, &layout, (0.0, 30.0)).unwrap();
    let obs = [
        Observable::new("n_a", QuantumOperator::number(&layout, Subsystem::CavA).unwrap()),
        Observable::new("n_d", QuantumOperator::number(&layout, Subsystem::SrcD1).unwrap()),
    ];
    let run = evolve(&sys.rho0, &sys.bundle, &grid, &obs, &opts).unwrap();
    let n_a = run.trace_values("n_a").unwrap();
    let mut err2 = 0.0;
    let mut ref2 = 0.0;
    for (t, &v) in grid.iter().zip(n_a) {
        let e = exact(*t, kd, 1.0);
        err2 += (v - e) * (v - e);
        ref2 += e * e;
    }
    let l2 = (err2 / ref2).sqrt();
    assert!(l2 < 0.01, "transfer L2 error {l2:e}");

    // back-action-free even with a strongly coupled downstream system
    let mut pg = QcnParams::single_sided(1e-2);
    pg.g1 = 0.3;
    let sys = build_cascaded(&pg, &spec, &layout, (0.0, 30.0)).unwrap();
    let run = evolve(&sys.rho0, &sys.bundle, &grid, &obs[1..], &opts).unwrap();
    let max_dev = grid
        .iter()
        .zip(run.trace_values("n_d").unwrap())
        .map(|(t, &v)| (v - (-kd * t).exp()).abs())
        .fold(0.0f64, f64::max);
    assert!(max_dev <= 1e-8, "source back-action {max_dev:e}");

    println!(
        "acceptance 8 PASS: one-way transfer L2 error {l2:.2e} (< 1%), \
         source deviation {max_dev:.1e} (<= 1e-8) with g1 = 0.3"
    );
}
