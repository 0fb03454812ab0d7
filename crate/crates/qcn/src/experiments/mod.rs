//! Scenario orchestration: configuration, truncation convergence, sweeps,
//! cascaded detection runs, and file emission.

mod config;
mod convergence;
mod output;
mod scenarios;

pub use config::{AxisSpec, CascadeConfig, RunConfig, Scenario, TruncationSpec};
pub use convergence::{
    converge_cascade, converge_steady, probe_source_truncation, TruncationLevels,
    TruncationReport,
};
pub use output::{
    ensure_out_dir, write_fig2_outputs, write_fig3_outputs, write_fig4_outputs, write_manifest,
    write_preset_outputs, write_steady_output, write_sweep_csv,
};
pub use scenarios::{
    probe_settling_time, rb87_kappa_unit_mhz, rb87_params, run_fig2, run_fig3, run_fig4, run_preset_rb87, run_steady,
    run_sweep, CellValues, Fig2Output, Fig3Row, Fig4Output, Fig4Run, PresetOutput, Provenance,
    SteadyOutput, SweepCell, SweepTable, RB87_GAMMA_MHZ, RB87_G_MHZ, RB87_KAPPA_EX_MHZ,
    RB87_KAPPA_IN_MHZ,
};

use std::path::PathBuf;

use thiserror::Error;

use crate::analytic::AnalyticError;
use crate::dynamics::DynamicsError;
use crate::hilbert::HilbertError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum ExperimentsError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("truncation ladder needs dimension {dim}, over the budget {cap}")]
    TruncationBudget { dim: usize, cap: usize },
    #[error("cell (alpha2={alpha2:e}, beta2={beta2:e}) failed: {source}")]
    Cell { alpha2: f64, beta2: f64, source: Box<ExperimentsError> },
    #[error("io error at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
}

impl ExperimentsError {
    /// Machine-readable category and process exit code.
    pub fn category(&self) -> (&'static str, i32) {
        match self {
            ExperimentsError::Config(_) => ("config", 2),
            ExperimentsError::Model(_) | ExperimentsError::Hilbert(_) => ("model", 3),
            ExperimentsError::Analytic(_) => ("model", 3),
            ExperimentsError::Dynamics(_) | ExperimentsError::TruncationBudget { .. } => {
                ("solver", 4)
            }
            ExperimentsError::Cell { source, .. } => source.category(),
            ExperimentsError::Io { .. } => ("io", 5),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::AnalyticInputs;

    #[test]
    fn rb87_normalization() {
        // κ_a/2π = 480 + 6 + 0.5 MHz, and the κ-unit parameters recompute
        // the MHz inputs exactly
        assert_eq!(rb87_kappa_unit_mhz(), 486.5);
        let p = rb87_params(1e-2);
        let unit = rb87_kappa_unit_mhz();
        assert!((p.kappa_a() - 1.0).abs() < 1e-12);
        for (i, &mhz) in RB87_KAPPA_EX_MHZ.iter().enumerate() {
            assert!((p.kappa_ex[i] * unit - mhz).abs() < 1e-12 * mhz.max(1.0));
        }
        assert!((p.g1 * unit - RB87_G_MHZ).abs() < 1e-12 * RB87_G_MHZ);
        assert!((p.gamma21 * unit - RB87_GAMMA_MHZ).abs() < 1e-12 * RB87_GAMMA_MHZ);
        // same coupling regime as the κ-unit benchmark set
        assert!((p.g1 - 0.107).abs() < 1e-3);
        // the preset raises no regime warnings
        assert!(p.validate().unwrap().is_empty());
    }

    #[test]
    fn sweep_mini_grid_agrees_with_closed_forms() {
        let mut cfg = RunConfig::default_for(Scenario::Sweep2d);
        cfg.alpha2_axis = AxisSpec::log(1e-4, 1e-2, 3);
        cfg.beta2_axis = AxisSpec::log(1e-4, 1e-2, 3);
        let table = run_sweep(&cfg).unwrap();
        assert_eq!(table.cells.len(), 9);
        for cell in &table.cells {
            assert_eq!(cell.provenance, Provenance::Numeric);
            let n = cell.numeric.unwrap();
            let a = cell.analytic.unwrap();
            assert!((n.t_a.unwrap() - a.t_a.unwrap()).abs() < 0.02);
            assert!((n.sigma22 - a.sigma22).abs() < 0.01);
        }
        // verified convergence certificate at the anchor
        assert!(table
            .anchor_report
            .verified_deltas
            .values()
            .all(|&d| d < table.anchor_report.tol));
    }

    #[test]
    fn sweep_marks_infeasible_cells_analytic() {
        let mut cfg = RunConfig::default_for(Scenario::Sweep2d);
        cfg.alpha2_axis = AxisSpec::log(1e-3, 1e-3, 1);
        cfg.beta2_axis = AxisSpec::log(1e2, 1e2, 1);
        let table = run_sweep(&cfg).unwrap();
        let cell = &table.cells[0];
        assert_eq!(cell.provenance, Provenance::AnalyticOnly);
        assert!(cell.numeric.is_none());
        let a = cell.analytic.unwrap();
        // saturated: the strong probe drives T_a toward unity
        assert!(a.t_a.unwrap() > 0.95);
    }

    #[test]
    fn fig3_rows_cross_at_equal_drive() {
        let mut cfg = RunConfig::default_for(Scenario::Fig3);
        cfg.beta2_axis = AxisSpec { min: 1e-3, max: 1e-1, points: 5, include_zero: true };
        let rows = run_fig3(&cfg).unwrap();
        assert_eq!(rows[0].beta2, 0.0);
        let zero = rows[0].numeric.unwrap();
        assert!(zero.sigma33.abs() < 1e-12);
        // the α² = β² = 1e-2 row balances the populations
        let row = rows.iter().find(|r| (r.beta2 - 1e-2).abs() < 1e-12).unwrap();
        let n = row.numeric.unwrap();
        assert!((n.sigma22 - n.sigma33).abs() < 1e-9);
    }

    #[test]
    fn steady_scenario_smoke() {
        let cfg = RunConfig::default_for(Scenario::Steady);
        let out = run_steady(&cfg).unwrap();
        assert!(out.residual < 1e-9);
        assert_eq!(out.method, "nullspace");
        let x = AnalyticInputs::from_params(&cfg.params).unwrap();
        let (ta, _) = x.transmissions().unwrap();
        assert!((out.observables.t_a.unwrap() - ta).abs() < 0.02);
    }
}
