//! Fock-truncation convergence control.
//!
//! Steady sweeps converge the truncation at the anchor cell (largest drive
//! powers on the grid): each cavity level is raised until the reported
//! observables move by less than the tolerance, then a joint bump of both
//! levels verifies the result. Occupations fall monotonically with drive
//! power, so the anchor certificate covers every weaker cell, whose own
//! ladder then runs without the verification solve and clamped at the
//! anchor levels.
//!
//! Cascaded runs need no ladder for the signal chain: the source holds at
//! most n_s photons and nothing downstream can create more, so
//! n_d1 = n_a = n_s exactly. Only the probe cavity is converged, on the
//! cheap signal-free steady problem, with one extra level of margin for
//! the transient.

use std::collections::BTreeMap;

use crate::dynamics::{
    steady_observables, steady_state_with, SteadyObservables, SteadyOptions,
};
use crate::hilbert::{SpaceLayout, Subsystem};
use crate::model::{build_driven, QcnParams};

use super::ExperimentsError;

/// Photon-number truncations per bosonic subsystem (dimension = n + 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TruncationLevels {
    pub n_a: usize,
    pub n_b: usize,
    pub n_d1: usize,
    pub n_d2: usize,
}

impl TruncationLevels {
    pub fn steady_total_dim(&self) -> usize {
        3 * (self.n_a + 1) * (self.n_b + 1)
    }
}

/// What the controller did and how sure it is.
#[derive(Clone, Debug)]
pub struct TruncationReport {
    pub levels: TruncationLevels,
    pub tol: f64,
    /// (n_a, n_b, observable deltas) for every ladder comparison made.
    pub ladder: Vec<(usize, usize, f64)>,
    /// Observable deltas of the joint verification bump.
    pub verified_deltas: BTreeMap<String, f64>,
    /// Drive powers of the cell the ladder ran at.
    pub anchor: (f64, f64),
}

fn obs_delta_map(a: &SteadyObservables, b: &SteadyObservables) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    if let (Some(x), Some(y)) = (a.t_a, b.t_a) {
        m.insert("T_a".to_string(), (x - y).abs());
    }
    if let (Some(x), Some(y)) = (a.t_b, b.t_b) {
        m.insert("T_b".to_string(), (x - y).abs());
    }
    m.insert("sigma22".to_string(), (a.sigma22 - b.sigma22).abs());
    m.insert("sigma33".to_string(), (a.sigma33 - b.sigma33).abs());
    m
}

fn max_delta(a: &SteadyObservables, b: &SteadyObservables) -> f64 {
    obs_delta_map(a, b).values().fold(0.0, |acc, &v| acc.max(v))
}

/// Shared solve cache so ladders never repeat a (n_a, n_b) cell.
pub(crate) struct SteadyLadder<'a> {
    params: &'a QcnParams,
    cache: BTreeMap<(usize, usize), SteadyObservables>,
    /// Probe solves above this dimension relax in time instead of
    /// factorizing the superoperator (cheaper past ~dim 75).
    probe_opts: SteadyOptions,
    final_opts: SteadyOptions,
    max_total_dim: usize,
}

impl<'a> SteadyLadder<'a> {
    pub fn new(params: &'a QcnParams, max_total_dim: usize) -> Self {
        Self {
            params,
            cache: BTreeMap::new(),
            probe_opts: SteadyOptions { dim_cap: 75, ..Default::default() },
            final_opts: SteadyOptions::default(),
            max_total_dim,
        }
    }

    pub fn solve(&mut self, n_a: usize, n_b: usize, probe: bool) -> Result<SteadyObservables, ExperimentsError> {
        if let Some(obs) = self.cache.get(&(n_a, n_b)) {
            return Ok(*obs);
        }
        let dim = 3 * (n_a + 1) * (n_b + 1);
        if dim > self.max_total_dim {
            return Err(ExperimentsError::TruncationBudget { dim, cap: self.max_total_dim });
        }
        let layout = SpaceLayout::new(&[
            (Subsystem::Qe, 3),
            (Subsystem::CavA, n_a + 1),
            (Subsystem::CavB, n_b + 1),
        ])?;
        let bundle = build_driven(self.params, &layout)?;
        let opts = if probe { &self.probe_opts } else { &self.final_opts };
        let ss = steady_state_with(&bundle, opts)?;
        let obs = steady_observables(&ss, self.params)?;
        self.cache.insert((n_a, n_b), obs);
        Ok(obs)
    }
}

/// Converge (n_a, n_b) for the steady problem at the given drive powers,
/// with a joint verification bump when `verify` is set.
pub fn converge_steady(
    params: &QcnParams,
    tol: f64,
    max_total_dim: usize,
    clamp: Option<(usize, usize)>,
    verify: bool,
) -> Result<(TruncationLevels, TruncationReport), ExperimentsError> {
    let mut ladder = SteadyLadder::new(params, max_total_dim);
    let (clamp_a, clamp_b) = clamp.unwrap_or((usize::MAX, usize::MAX));
    let mut visited = Vec::new();

    let mut n_a = 1usize;
    // climb the a ladder at the floor of the b ladder
    while n_a < clamp_a {
        let base = ladder.solve(n_a, 1, true)?;
        let up = ladder.solve(n_a + 1, 1, true)?;
        let d = max_delta(&base, &up);
        visited.push((n_a, 1, d));
        if d < tol {
            break;
        }
        n_a += 1;
    }
    let mut n_b = 1usize;
    while n_b < clamp_b {
        let base = ladder.solve(n_a, n_b, true)?;
        let up = ladder.solve(n_a, n_b + 1, true)?;
        let d = max_delta(&base, &up);
        visited.push((n_a, n_b, d));
        if d < tol {
            break;
        }
        n_b += 1;
    }

    let mut verified_deltas = BTreeMap::new();
    if verify {
        // one joint bump of both levels catches cross-truncation effects
        loop {
            let base = ladder.solve(n_a, n_b, false)?;
            let joint = ladder.solve(n_a + 1, n_b + 1, true)?;
            let deltas = obs_delta_map(&base, &joint);
            let worst = deltas.values().fold(0.0f64, |a, &v| a.max(v));
            visited.push((n_a, n_b, worst));
            if worst < tol {
                verified_deltas = deltas;
                break;
            }
            // climb the axis that moves more under a single-level probe
            let da = max_delta(&base, &ladder.solve(n_a + 1, n_b, true)?);
            let db = max_delta(&base, &ladder.solve(n_a, n_b + 1, true)?);
            if da >= db {
                n_a += 1;
            } else {
                n_b += 1;
            }
        }
    } else {
        // final solve at the stop levels with the reporting solver options
        ladder.solve(n_a, n_b, false)?;
    }

    let levels = TruncationLevels { n_a, n_b, n_d1: 0, n_d2: 0 };
    let report = TruncationReport {
        levels,
        tol,
        ladder: visited,
        verified_deltas,
        anchor: (params.alpha.norm_sqr(), params.beta.norm_sqr()),
    };
    Ok((levels, report))
}

/// Resolve truncation levels for a cascaded run with `n_s` signal photons.
///
/// The a-chain excitation number n_d1 + n_a + P(|2⟩) never grows, which
/// pins the source and signal-cavity truncations at n_s exactly; the probe
/// cavity is converged on the signal-free steady problem plus one level of
/// margin.
pub fn converge_cascade(
    params: &QcnParams,
    n_s: usize,
    tol: f64,
    max_total_dim: usize,
) -> Result<(TruncationLevels, TruncationReport), ExperimentsError> {
    let signal_free = QcnParams { alpha: num_complex::Complex64::new(0.0, 0.0), ..params.clone() };
    let mut ladder = SteadyLadder::new(&signal_free, max_total_dim);
    let mut visited = Vec::new();
    let mut n_b = 1usize;
    loop {
        let base = ladder.solve(0, n_b, true)?;
        let up = ladder.solve(0, n_b + 1, true)?;
        let d = max_delta(&base, &up);
        visited.push((0, n_b, d));
        if d < tol {
            break;
        }
        n_b += 1;
    }
    let levels = TruncationLevels {
        n_a: n_s,
        n_b: n_b + 1, // transient margin over the steady ladder
        n_d1: n_s,
        n_d2: 0,
    };
    let report = TruncationReport {
        levels,
        tol,
        ladder: visited,
        verified_deltas: BTreeMap::new(),
        anchor: (0.0, params.beta.norm_sqr()),
    };
    Ok((levels, report))
}

/// Truncation for the probe source cavity in cascaded-probe mode: a
/// coherent state of mean |β|²/κ_d2,ex2 with a five-sigma tail.
pub fn probe_source_truncation(beta2: f64, kappa_d2_ex2: f64) -> usize {
    if kappa_d2_ex2 <= 0.0 {
        return 0;
    }
    let mean = beta2 / kappa_d2_ex2;
    (mean + 5.0 * mean.sqrt() + 2.0).ceil() as usize
}
