//! File emission: CSV tables, the run manifest, and plot scripts.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! fixed configuration reproduces every file byte for byte.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use super::convergence::TruncationReport;
use super::scenarios::{Fig2Output, Fig3Row, Fig4Output, PresetOutput, SteadyOutput, SweepTable};
use super::ExperimentsError;

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt)
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), ExperimentsError> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| ExperimentsError::Io { path: path.to_path_buf(), source: e })
}

pub fn ensure_out_dir(config: &RunConfig) -> Result<PathBuf, ExperimentsError> {
    let dir = match std::env::var_os("QCN_OUT_DIR") {
        Some(d) => PathBuf::from(d),
        None => config.out_dir.clone(),
    };
    fs::create_dir_all(&dir).map_err(|e| ExperimentsError::Io { path: dir.clone(), source: e })?;
    Ok(dir)
}

/// Manifest: a reloadable config with the resolved truncation pinned, plus
/// a commented report. Re-running from it reproduces all CSVs exactly.
pub fn write_manifest(
    dir: &Path,
    config: &RunConfig,
    resolved: Option<(&TruncationReport, &str)>,
) -> Result<PathBuf, ExperimentsError> {
    let mut cfg = config.clone();
    let mut notes = String::new();
    notes.push_str(&format!("# qcn {} run manifest\n", env!("CARGO_PKG_VERSION")));
    notes.push_str("# re-run with: qcn <scenario> --config <this file>\n");
    if let Some((report, label)) = resolved {
        cfg.truncation = super::config::TruncationSpec::Fixed {
            n_a: report.levels.n_a,
            n_b: report.levels.n_b,
            n_d1: report.levels.n_d1,
            n_d2: report.levels.n_d2,
        };
        notes.push_str(&format!(
            "# truncation resolved by {label}: n_a={} n_b={} n_d1={} n_d2={} (tol {})\n",
            report.levels.n_a, report.levels.n_b, report.levels.n_d1, report.levels.n_d2, report.tol
        ));
        notes.push_str(&format!(
            "# ladder anchor drives: alpha2={} beta2={}\n",
            report.anchor.0, report.anchor.1
        ));
        for (name, delta) in &report.verified_deltas {
            notes.push_str(&format!("# verified next-level delta {name}: {delta:e}\n"));
        }
    }
    let path = dir.join("manifest.cfg");
    let body = format!("{notes}\n{}", cfg.to_config_string());
    fs::write(&path, body).map_err(|e| ExperimentsError::Io { path: path.clone(), source: e })?;
    Ok(path)
}

pub fn write_sweep_csv(
    dir: &Path,
    name: &str,
    table: &SweepTable,
) -> Result<Vec<PathBuf>, ExperimentsError> {
    let main = dir.join(format!("{name}.csv"));
    write_csv(
        &main,
        &["alpha2_over_kappa", "beta2_over_kappa", "Ta_numeric", "Ta_analytic", "Tb_numeric", "Tb_analytic"],
        table.cells.iter().map(|c| {
            vec![
                fmt(c.alpha2),
                fmt(c.beta2),
                fmt_opt(c.numeric.and_then(|n| n.t_a)),
                fmt_opt(c.analytic.and_then(|a| a.t_a)),
                fmt_opt(c.numeric.and_then(|n| n.t_b)),
                fmt_opt(c.analytic.and_then(|a| a.t_b)),
            ]
        }),
    )?;
    let pops = dir.join(format!("{name}_populations.csv"));
    write_csv(
        &pops,
        &[
            "alpha2_over_kappa",
            "beta2_over_kappa",
            "sigma22_numeric",
            "sigma22_analytic",
            "sigma33_numeric",
            "sigma33_analytic",
            "provenance",
        ],
        table.cells.iter().map(|c| {
            vec![
                fmt(c.alpha2),
                fmt(c.beta2),
                fmt_opt(c.numeric.map(|n| n.sigma22)),
                fmt_opt(c.analytic.map(|a| a.sigma22)),
                fmt_opt(c.numeric.map(|n| n.sigma33)),
                fmt_opt(c.analytic.map(|a| a.sigma33)),
                c.provenance.as_str().to_string(),
            ]
        }),
    )?;
    Ok(vec![main, pops])
}

pub fn write_fig2_outputs(
    dir: &Path,
    out: &Fig2Output,
) -> Result<Vec<PathBuf>, ExperimentsError> {
    let mut files = write_sweep_csv(dir, "fig2", &out.table)?;
    let cuts = dir.join("fig2_cuts.csv");
    write_csv(
        &cuts,
        &["alpha2_over_kappa", "beta2_over_kappa", "Ta_numeric", "Ta_analytic", "provenance"],
        out.cuts.iter().map(|c| {
            vec![
                fmt(c.alpha2),
                fmt(c.beta2),
                fmt_opt(c.numeric.and_then(|n| n.t_a)),
                fmt_opt(c.analytic.and_then(|a| a.t_a)),
                c.provenance.as_str().to_string(),
            ]
        }),
    )?;
    files.push(cuts);
    files.push(write_plot_script(dir, "fig2")?);
    Ok(files)
}

pub fn write_fig3_outputs(dir: &Path, rows: &[Fig3Row]) -> Result<Vec<PathBuf>, ExperimentsError> {
    let path = dir.join("fig3.csv");
    write_csv(
        &path,
        &[
            "beta2_over_kappa",
            "sigma22_numeric",
            "sigma22_analytic",
            "sigma33_numeric",
            "sigma33_analytic",
            "Ta_numeric",
            "Ta_analytic",
            "provenance",
        ],
        rows.iter().map(|r| {
            vec![
                fmt(r.beta2),
                fmt_opt(r.numeric.map(|n| n.sigma22)),
                fmt_opt(r.analytic.map(|a| a.sigma22)),
                fmt_opt(r.numeric.map(|n| n.sigma33)),
                fmt_opt(r.analytic.map(|a| a.sigma33)),
                fmt_opt(r.numeric.and_then(|n| n.t_a)),
                fmt_opt(r.analytic.and_then(|a| a.t_a)),
                r.provenance.as_str().to_string(),
            ]
        }),
    )?;
    Ok(vec![path, write_plot_script(dir, "fig3")?])
}

pub fn write_fig4_outputs(
    dir: &Path,
    out: &Fig4Output,
    prefix: &str,
) -> Result<Vec<PathBuf>, ExperimentsError> {
    let traces = dir.join(format!("{prefix}.csv"));
    write_csv(
        &traces,
        &["t_over_kappa_inv", "probe_in_flux", "probe_out_flux", "signal_in_flux", "signal_out_flux", "n_s"],
        out.runs.iter().flat_map(|run| {
            run.times.iter().enumerate().map(move |(k, &t)| {
                vec![
                    fmt(t),
                    fmt(run.probe_in[k]),
                    fmt(run.probe_out[k]),
                    fmt(run.signal_in[k]),
                    fmt(run.signal_out[k]),
                    run.n_s.to_string(),
                ]
            })
        }),
    )?;
    let metrics = dir.join(format!("{prefix}_metrics.csv"));
    write_csv(
        &metrics,
        &[
            "n_s",
            "probe_transmission_window",
            "probe_transmission_peak",
            "probe_transmission_flux_weighted",
            "survival_ra",
            "input_photons",
            "window_t0",
            "window_t1",
            "trace_drift",
            "n_a",
            "n_b",
            "n_d1",
        ],
        out.runs.iter().map(|run| {
            vec![
                run.n_s.to_string(),
                fmt_opt(run.probe_tx_window),
                fmt_opt(run.probe_tx_peak),
                fmt_opt(run.probe_tx_weighted),
                fmt_opt(run.metrics.r_a),
                fmt(run.metrics.input_photons),
                fmt(out.metric_window.0),
                fmt(out.metric_window.1),
                fmt(run.trace_drift),
                run.levels.n_a.to_string(),
                run.levels.n_b.to_string(),
                run.levels.n_d1.to_string(),
            ]
        }),
    )?;
    Ok(vec![traces, metrics, write_plot_script(dir, prefix)?])
}

pub fn write_preset_outputs(dir: &Path, out: &PresetOutput) -> Result<Vec<PathBuf>, ExperimentsError> {
    let mut files = write_fig4_outputs(dir, &out.fig4, "preset_rb87")?;
    let p = &out.params;
    let path = dir.join("preset_rb87_params.csv");
    write_csv(
        &path,
        &["name", "value_kappa_units", "value_mhz_2pi"],
        [
            ("kappa_unit", 1.0, out.kappa_unit_mhz),
            ("g1", p.g1, p.g1 * out.kappa_unit_mhz),
            ("g2", p.g2, p.g2 * out.kappa_unit_mhz),
            ("kappa_ex1", p.kappa_ex[0], p.kappa_ex[0] * out.kappa_unit_mhz),
            ("kappa_ex2", p.kappa_ex[1], p.kappa_ex[1] * out.kappa_unit_mhz),
            ("kappa_ex3", p.kappa_ex[2], p.kappa_ex[2] * out.kappa_unit_mhz),
            ("kappa_ex4", p.kappa_ex[3], p.kappa_ex[3] * out.kappa_unit_mhz),
            ("kappa_in_a", p.kappa_in_a, p.kappa_in_a * out.kappa_unit_mhz),
            ("kappa_in_b", p.kappa_in_b, p.kappa_in_b * out.kappa_unit_mhz),
            ("gamma21", p.gamma21, p.gamma21 * out.kappa_unit_mhz),
            ("gamma31", p.gamma31, p.gamma31 * out.kappa_unit_mhz),
        ]
        .into_iter()
        .map(|(name, kappa, mhz)| vec![name.to_string(), fmt(kappa), fmt(mhz)]),
    )?;
    files.push(path);
    Ok(files)
}

pub fn write_steady_output(dir: &Path, out: &SteadyOutput) -> Result<Vec<PathBuf>, ExperimentsError> {
    let path = dir.join("steady.csv");
    write_csv(
        &path,
        &["observable", "numeric", "analytic"],
        [
            ("T_a", fmt_opt(out.observables.t_a), fmt_opt(out.analytic.and_then(|a| a.t_a))),
            ("T_b", fmt_opt(out.observables.t_b), fmt_opt(out.analytic.and_then(|a| a.t_b))),
            ("sigma22", fmt(out.observables.sigma22), fmt_opt(out.analytic.map(|a| a.sigma22))),
            ("sigma33", fmt(out.observables.sigma33), fmt_opt(out.analytic.map(|a| a.sigma33))),
            ("n_a", fmt(out.observables.n_a), String::new()),
            ("n_b", fmt(out.observables.n_b), String::new()),
            ("residual", fmt(out.residual), String::new()),
        ]
        .into_iter()
        .map(|(n, a, b)| vec![n.to_string(), a, b]),
    )?;
    Ok(vec![path])
}

/// Matplotlib script reading the emitted CSVs; plotting is left to the
/// user's environment.
fn write_plot_script(dir: &Path, which: &str) -> Result<PathBuf, ExperimentsError> {
    let body = match which {
        "fig2" => PLOT_FIG2,
        "fig3" => PLOT_FIG3,
        _ => PLOT_FIG4,
    };
    let path = dir.join(format!("plot_{which}.py"));
    let mut f = fs::File::create(&path)
        .map_err(|e| ExperimentsError::Io { path: path.clone(), source: e })?;
    let body = if which == "fig4" || which == "preset_rb87" {
        body.replace("__PREFIX__", which)
    } else {
        body.to_string()
    };
    f.write_all(body.as_bytes())
        .map_err(|e| ExperimentsError::Io { path: path.clone(), source: e })?;
    Ok(path)
}

const PLOT_FIG2: &str = r#"#!/usr/bin/env python3
"""Transmission of cavity a versus the two input powers."""
import csv, math
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

rows = list(csv.DictReader(open("fig2.csv")))
a = sorted({float(r["alpha2_over_kappa"]) for r in rows})
b = sorted({float(r["beta2_over_kappa"]) for r in rows})
grid = np.full((len(b), len(a)), np.nan)
for r in rows:
    i = b.index(float(r["beta2_over_kappa"]))
    j = a.index(float(r["alpha2_over_kappa"]))
    if r["Ta_numeric"]:
        grid[i, j] = float(r["Ta_numeric"])

fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
m = ax0.pcolormesh(a, b, grid, shading="nearest", vmin=0, vmax=1)
ax0.set_xscale("log"); ax0.set_yscale("log")
ax0.set_xlabel(r"$|\alpha|^2/\kappa$"); ax0.set_ylabel(r"$|\beta|^2/\kappa$")
fig.colorbar(m, ax=ax0, label=r"$T_a$")

cuts = list(csv.DictReader(open("fig2_cuts.csv")))
for beta2 in sorted({float(r["beta2_over_kappa"]) for r in cuts}):
    sel = [r for r in cuts if float(r["beta2_over_kappa"]) == beta2]
    x = [float(r["alpha2_over_kappa"]) for r in sel]
    y = [float(r["Ta_analytic"]) for r in sel]
    ax1.plot(x, y, label=rf"$|\beta|^2/\kappa = {beta2:g}$")
    xn = [float(r["alpha2_over_kappa"]) for r in sel if r["Ta_numeric"]]
    yn = [float(r["Ta_numeric"]) for r in sel if r["Ta_numeric"]]
    ax1.plot(xn, yn, "o", ms=3, mfc="none")
ax1.set_xscale("log"); ax1.set_xlabel(r"$|\alpha|^2/\kappa$"); ax1.set_ylabel(r"$T_a$")
ax1.legend(fontsize=7)
fig.tight_layout(); fig.savefig("fig2.png", dpi=160)
print("wrote fig2.png")
"#;

const PLOT_FIG3: &str = r#"#!/usr/bin/env python3
"""Excited-state populations and probe-side transmission vs drive power."""
import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

rows = [r for r in csv.DictReader(open("fig3.csv")) if float(r["beta2_over_kappa"]) > 0]
x = [float(r["beta2_over_kappa"]) for r in rows]
fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(5, 7), sharex=True)
ax0.plot(x, [float(r["sigma22_analytic"]) for r in rows], label=r"$\sigma_{22}$")
ax0.plot(x, [float(r["sigma33_analytic"]) for r in rows], label=r"$\sigma_{33}$")
for col, mk in (("sigma22_numeric", "o"), ("sigma33_numeric", "s")):
    xs = [float(r["beta2_over_kappa"]) for r in rows if r[col]]
    ys = [float(r[col]) for r in rows if r[col]]
    ax0.plot(xs, ys, mk, ms=3, mfc="none")
ax0.set_ylabel("population"); ax0.legend()
ax1.plot(x, [float(r["Ta_analytic"]) for r in rows])
xs = [float(r["beta2_over_kappa"]) for r in rows if r["Ta_numeric"]]
ys = [float(r["Ta_numeric"]) for r in rows if r["Ta_numeric"]]
ax1.plot(xs, ys, "o", ms=3, mfc="none")
ax1.set_xscale("log"); ax1.set_xlabel(r"$|\beta|^2/\kappa$"); ax1.set_ylabel(r"$T_a$")
fig.tight_layout(); fig.savefig("fig3.png", dpi=160)
print("wrote fig3.png")
"#;

const PLOT_FIG4: &str = r#"#!/usr/bin/env python3
"""Probe and signal photon fluxes of the cascaded detection runs."""
import csv
from collections import defaultdict
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open("__PREFIX__.csv")))
by_ns = defaultdict(list)
for r in rows:
    by_ns[int(r["n_s"])].append(r)

fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(7, 7), sharex=True)
for ns, sel in sorted(by_ns.items()):
    t = [float(r["t_over_kappa_inv"]) for r in sel]
    ax0.plot(t, [float(r["probe_out_flux"]) for r in sel], label=f"n_s = {ns}")
    if ns > 0:
        ax1.plot(t, [float(r["signal_in_flux"]) for r in sel], "--", lw=0.8)
        ax1.plot(t, [float(r["signal_out_flux"]) for r in sel], label=f"n_s = {ns}")
t = [float(r["t_over_kappa_inv"]) for r in rows[: len(by_ns[0])]] if by_ns[0] else []
if t:
    ax0.plot(t, [float(r["probe_in_flux"]) for r in by_ns[0]], "k:", lw=0.8, label="probe in")
ax0.set_ylabel("probe flux"); ax0.legend(fontsize=7)
ax1.set_ylabel("signal flux"); ax1.set_xlabel(r"$t\,[\kappa^{-1}]$"); ax1.legend(fontsize=7)
fig.tight_layout(); fig.savefig("__PREFIX__.png", dpi=160)
print("wrote __PREFIX__.png")
"#;
