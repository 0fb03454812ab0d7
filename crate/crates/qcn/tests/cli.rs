//! End-to-end checks of the command-line interface: output files, the
//! manifest round trip, exit codes, and the environment override.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn qcn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qcn"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qcn-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

#[test]
fn steady_writes_outputs_and_manifest() {
    let dir = temp_dir("steady");
    let status = qcn()
        .args(["steady", "--out"])
        .arg(&dir)
        .args(["--truncation", "2,2"])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = read(&dir.join("steady.csv"));
    assert!(csv.starts_with("observable,numeric,analytic\n"));
    assert!(csv.contains("T_a,"));
    let manifest = read(&dir.join("manifest.cfg"));
    assert!(manifest.contains("[run]"));
    assert!(manifest.contains("scenario = steady"));
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sweep_manifest_reruns_bit_identically() {
    let dir1 = temp_dir("det1");
    let config = "\
[run]
scenario = sweep2d

[sweep]
alpha2_min = 1e-4
alpha2_max = 1e-3
alpha2_points = 2
beta2_min = 1e-4
beta2_max = 1e-3
beta2_points = 2

[truncation]
mode = fixed
n_a = 2
n_b = 2
";
    let cfg_path = dir1.join("run.cfg");
    fs::write(&cfg_path, config).unwrap();
    let status = qcn()
        .args(["sweep2d", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&dir1)
        .status()
        .unwrap();
    assert!(status.success());
    let first = read(&dir1.join("sweep2d.csv"));
    let manifest = dir1.join("manifest.cfg");
    assert!(read(&manifest).contains("mode = fixed"));

    // re-run from the emitted manifest into a fresh directory
    let dir2 = temp_dir("det2");
    let status = qcn()
        .args(["sweep2d", "--config"])
        .arg(&manifest)
        .arg("--out")
        .arg(&dir2)
        .status()
        .unwrap();
    assert!(status.success());
    let second = read(&dir2.join("sweep2d.csv"));
    assert_eq!(first, second, "manifest re-run must reproduce the CSV exactly");
    let pops1 = read(&dir1.join("sweep2d_populations.csv"));
    let pops2 = read(&dir2.join("sweep2d_populations.csv"));
    assert_eq!(pops1, pops2);
    fs::remove_dir_all(&dir1).unwrap();
    fs::remove_dir_all(&dir2).unwrap();
}

#[test]
fn fig4_csv_columns_are_stable() {
    let dir = temp_dir("fig4");
    let config = "\
[run]
scenario = fig4

[cascade]
n_s_list = 0,1
tau_d = 40
tau_s = 4
t_end = 120
grid_step = 0.5
";
    let cfg_path = dir.join("run.cfg");
    fs::write(&cfg_path, config).unwrap();
    let status = qcn()
        .args(["fig4", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&dir)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = read(&dir.join("fig4.csv"));
    assert!(csv.starts_with(
        "t_over_kappa_inv,probe_in_flux,probe_out_flux,signal_in_flux,signal_out_flux,n_s\n"
    ));
    let metrics = read(&dir.join("fig4_metrics.csv"));
    assert!(metrics.contains("survival_ra"));
    assert!(dir.join("plot_fig4.py").exists());
    fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn env_var_overrides_output_directory() {
    let flag_dir = temp_dir("flagdir");
    let env_dir = temp_dir("envdir");
    let status = qcn()
        .args(["steady", "--truncation", "1,1", "--out"])
        .arg(&flag_dir)
        .env("QCN_OUT_DIR", &env_dir)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(env_dir.join("steady.csv").exists());
    assert!(!flag_dir.join("steady.csv").exists());
    fs::remove_dir_all(&flag_dir).unwrap();
    fs::remove_dir_all(&env_dir).unwrap();
}

#[test]
fn config_errors_exit_with_category() {
    let dir = temp_dir("badcfg");
    let cfg_path = dir.join("bad.cfg");
    fs::write(&cfg_path, "[run]\nscenario = fig2\nbogus_key = 1\n").unwrap();
    let out = qcn().args(["fig2", "--config"]).arg(&cfg_path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("category=config"), "stderr: {stderr}");

    // scenario mismatch between config and subcommand
    fs::write(&cfg_path, "[run]\nscenario = fig3\n").unwrap();
    let out = qcn().args(["fig2", "--config"]).arg(&cfg_path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // invalid model parameters surface as a model-category error
    fs::write(&cfg_path, "[run]\nscenario = steady\n[params]\ngamma21 = -1\n").unwrap();
    let out = qcn().args(["steady", "--config"]).arg(&cfg_path).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("category=model"), "stderr: {stderr}");
    fs::remove_dir_all(&dir).unwrap();
}
