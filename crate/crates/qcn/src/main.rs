//! Command-line entry point: scenario runners with config-file and flag
//! overrides, CSV/manifest emission, and categorized exit codes.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qcn::experiments::{
    ensure_out_dir, run_fig2, run_fig3, run_fig4, run_preset_rb87, run_steady, run_sweep,
    write_fig2_outputs, write_fig3_outputs, write_fig4_outputs, write_manifest,
    write_preset_outputs, write_steady_output, write_sweep_csv, ExperimentsError, RunConfig,
    Scenario, TruncationSpec,
};

#[derive(Parser)]
#[command(
    name = "qcn",
    version,
    about = "Steady-state and time-domain simulation of a V-type emitter coupled to two cavities"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Config file (key = value sections); values override scenario defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (also overridable with QCN_OUT_DIR).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integrator relative tolerance.
    #[arg(long)]
    rtol: Option<f64>,
    /// Truncation: `auto` or `NA,NB[,ND1[,ND2]]` photon numbers.
    #[arg(long)]
    truncation: Option<String>,
    /// Worker threads for sweep cells and per-packet runs (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Single steady-state solve with the closed-form cross-check.
    Steady(CommonArgs),
    /// 2-D steady sweep over both drive powers.
    Sweep2d(CommonArgs),
    /// Transmission vs both input powers on the benchmark grid, plus cuts.
    Fig2(CommonArgs),
    /// Populations and transmission vs probe power at fixed signal power.
    Fig3(CommonArgs),
    /// Cascaded wave-packet detection runs for n_s = 0..3.
    Fig4(CommonArgs),
    /// Physical-unit preset around the Rb D2 line; reports signal survival.
    PresetRb87(CommonArgs),
}

fn build_config(scenario: Scenario, args: &CommonArgs) -> Result<RunConfig, ExperimentsError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ExperimentsError::Io { path: path.clone(), source: e })?;
            let cfg = RunConfig::from_config_string(&text)?;
            if cfg.scenario != scenario {
                return Err(ExperimentsError::Config(format!(
                    "config file is for scenario `{}`, but `{}` was requested",
                    cfg.scenario.as_str(),
                    scenario.as_str()
                )));
            }
            cfg
        }
        None => RunConfig::default_for(scenario),
    };
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(rtol) = args.rtol {
        cfg.rtol = rtol;
    }
    if let Some(jobs) = args.jobs {
        cfg.jobs = jobs;
    }
    if let Some(spec) = &args.truncation {
        cfg.truncation = parse_truncation(spec)?;
    }
    Ok(cfg)
}

fn parse_truncation(spec: &str) -> Result<TruncationSpec, ExperimentsError> {
    if spec == "auto" {
        return Ok(TruncationSpec::Auto { tol: 1e-3 });
    }
    let parts: Vec<usize> = spec
        .split(',')
        .map(|s| {
            s.trim().parse().map_err(|_| {
                ExperimentsError::Config(format!("--truncation: not an integer: `{s}`"))
            })
        })
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [a, b] => Ok(TruncationSpec::Fixed { n_a: *a, n_b: *b, n_d1: 0, n_d2: 0 }),
        [a, b, d1] => Ok(TruncationSpec::Fixed { n_a: *a, n_b: *b, n_d1: *d1, n_d2: 0 }),
        [a, b, d1, d2] => Ok(TruncationSpec::Fixed { n_a: *a, n_b: *b, n_d1: *d1, n_d2: *d2 }),
        _ => Err(ExperimentsError::Config(
            "--truncation expects `auto` or 2..4 comma-separated photon numbers".into(),
        )),
    }
}

fn run(scenario: Scenario, args: &CommonArgs) -> Result<(), ExperimentsError> {
    let cfg = build_config(scenario, args)?;
    let dir = ensure_out_dir(&cfg)?;
    match scenario {
        Scenario::Steady => {
            let out = run_steady(&cfg)?;
            write_steady_output(&dir, &out)?;
            write_manifest(&dir, &cfg, None)?;
            println!(
                "steady: T_a = {}, T_b = {}, sigma22 = {:.6}, sigma33 = {:.6} ({}, residual {:.2e})",
                out.observables.t_a.map_or("n/a".into(), |v| format!("{v:.6}")),
                out.observables.t_b.map_or("n/a".into(), |v| format!("{v:.6}")),
                out.observables.sigma22,
                out.observables.sigma33,
                out.method,
                out.residual,
            );
        }
        Scenario::Sweep2d => {
            let table = run_sweep(&cfg)?;
            write_sweep_csv(&dir, "sweep2d", &table)?;
            write_manifest(&dir, &cfg, Some((&table.anchor_report, "sweep anchor ladder")))?;
            let numeric = table
                .cells
                .iter()
                .filter(|c| c.provenance == qcn::experiments::Provenance::Numeric)
                .count();
            println!("sweep2d: {} cells ({} numeric)", table.cells.len(), numeric);
        }
        Scenario::Fig2 => {
            let out = run_fig2(&cfg)?;
            write_fig2_outputs(&dir, &out)?;
            write_manifest(&dir, &cfg, Some((&out.table.anchor_report, "sweep anchor ladder")))?;
            let worst = out
                .table
                .cells
                .iter()
                .filter_map(|c| {
                    let n = c.numeric?.t_a?;
                    let a = c.analytic?.t_a?;
                    Some((n - a).abs())
                })
                .fold(0.0f64, f64::max);
            println!(
                "fig2: {} grid cells + {} cut points; max |Ta_numeric - Ta_analytic| = {worst:.4}",
                out.table.cells.len(),
                out.cuts.len()
            );
        }
        Scenario::Fig3 => {
            let rows = run_fig3(&cfg)?;
            write_fig3_outputs(&dir, &rows)?;
            write_manifest(&dir, &cfg, None)?;
            println!("fig3: {} probe powers swept", rows.len());
        }
        Scenario::Fig4 => {
            let out = run_fig4(&cfg)?;
            write_fig4_outputs(&dir, &out, "fig4")?;
            write_manifest(&dir, &cfg, None)?;
            for w in &out.warnings {
                eprintln!("warning: {w}");
            }
            for r in &out.runs {
                println!(
                    "fig4 n_s={}: probe transmission {} (peak {}), survival {}, drift {:.1e}",
                    r.n_s,
                    r.probe_tx_window.map_or("n/a".into(), |v| format!("{:.1}%", 100.0 * v)),
                    r.probe_tx_peak.map_or("n/a".into(), |v| format!("{:.1}%", 100.0 * v)),
                    r.metrics.r_a.map_or("n/a".into(), |v| format!("{:.1}%", 100.0 * v)),
                    r.trace_drift,
                );
            }
        }
        Scenario::PresetRb87 => {
            let out = run_preset_rb87(&cfg)?;
            write_preset_outputs(&dir, &out)?;
            write_manifest(&dir, &cfg, None)?;
            println!("preset-rb87: kappa_a/2pi = {} MHz", out.kappa_unit_mhz);
            for (n_s, ra) in &out.survival {
                println!("preset-rb87 n_s={n_s}: survival {:.2}%", 100.0 * ra);
            }
        }
    }
    println!("outputs written to {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, args) = match &cli.command {
        Command::Steady(a) => (Scenario::Steady, a),
        Command::Sweep2d(a) => (Scenario::Sweep2d, a),
        Command::Fig2(a) => (Scenario::Fig2, a),
        Command::Fig3(a) => (Scenario::Fig3, a),
        Command::Fig4(a) => (Scenario::Fig4, a),
        Command::PresetRb87(a) => (Scenario::PresetRb87, a),
    };
    match run(scenario, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (category, code) = e.category();
            eprintln!("error: category={category}: {e}");
            ExitCode::from(code as u8)
        }
    }
}
