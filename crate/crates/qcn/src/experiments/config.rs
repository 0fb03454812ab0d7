//! Run configuration: scenario presets, the key=value config format, and
//! manifest round-tripping.
//!
//! Config files are flat `key = value` pairs under `[section]` headers.
//! Manifests emitted after a run are valid config files with the resolved
//! truncation pinned, so re-running from a manifest reproduces the outputs
//! byte for byte.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64 as C64;

use crate::model::{CascadeSpec, ProbeMode, PulseShape, QcnParams};

use super::ExperimentsError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scenario {
    Steady,
    Sweep2d,
    Fig2,
    Fig3,
    Fig4,
    PresetRb87,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Steady => "steady",
            Scenario::Sweep2d => "sweep2d",
            Scenario::Fig2 => "fig2",
            Scenario::Fig3 => "fig3",
            Scenario::Fig4 => "fig4",
            Scenario::PresetRb87 => "preset-rb87",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ExperimentsError> {
        match s {
            "steady" => Ok(Scenario::Steady),
            "sweep2d" => Ok(Scenario::Sweep2d),
            "fig2" => Ok(Scenario::Fig2),
            "fig3" => Ok(Scenario::Fig3),
            "fig4" => Ok(Scenario::Fig4),
            "preset-rb87" | "preset_rb87" => Ok(Scenario::PresetRb87),
            other => Err(ExperimentsError::Config(format!("unknown scenario `{other}`"))),
        }
    }
}

/// Log-spaced sweep axis; `include_zero` prepends an exact zero point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub include_zero: bool,
}

impl AxisSpec {
    pub fn log(min: f64, max: f64, points: usize) -> Self {
        Self { min, max, points, include_zero: false }
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.points + 1);
        if self.include_zero {
            v.push(0.0);
        }
        if self.points == 1 {
            v.push(self.min);
            return v;
        }
        let (l0, l1) = (self.min.log10(), self.max.log10());
        for k in 0..self.points {
            v.push(10f64.powf(l0 + (l1 - l0) * k as f64 / (self.points - 1) as f64));
        }
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TruncationSpec {
    /// Grow truncations until every reported observable is stable.
    Auto { tol: f64 },
    /// Fixed photon-number truncations (dimension = n + 1).
    Fixed { n_a: usize, n_b: usize, n_d1: usize, n_d2: usize },
}

/// Cascade settings plus the fig4 time axis.
#[derive(Clone, Debug)]
pub struct CascadeConfig {
    pub spec: CascadeSpec,
    pub n_s_list: Vec<usize>,
    pub t_end: f64,
    pub grid_step: f64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            spec: CascadeSpec::gaussian_packet(0),
            n_s_list: vec![0, 1, 2, 3],
            // long enough for the shelved emitter excitation to re-emit;
            // the packet itself is gone by t ≈ 180
            t_end: 450.0,
            grid_step: 0.25,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub params: QcnParams,
    pub cascade: CascadeConfig,
    pub truncation: TruncationSpec,
    pub rtol: f64,
    pub jobs: usize,
    pub out_dir: PathBuf,
    pub alpha2_axis: AxisSpec,
    pub beta2_axis: AxisSpec,
    /// Budget for the convergence ladder (total Hilbert dimension).
    pub max_total_dim: usize,
    /// Largest total dimension solved numerically in sweeps; cells beyond
    /// this are reported from the closed forms only.
    pub max_numeric_dim: usize,
}

impl RunConfig {
    /// Scenario defaults; config files and CLI flags override these.
    pub fn default_for(scenario: Scenario) -> Self {
        let base = Self {
            scenario,
            params: QcnParams::symmetric(1e-2, 1e-2),
            cascade: CascadeConfig::default(),
            truncation: TruncationSpec::Auto { tol: 1e-3 },
            rtol: 1e-8,
            jobs: 1,
            out_dir: PathBuf::from(format!("runs/{}", scenario.as_str())),
            alpha2_axis: AxisSpec::log(1e-4, 1e-1, 9),
            beta2_axis: AxisSpec::log(1e-4, 1e-1, 9),
            max_total_dim: 1500,
            max_numeric_dim: 120,
        };
        match scenario {
            Scenario::Steady | Scenario::Sweep2d | Scenario::Fig2 => base,
            Scenario::Fig3 => Self {
                params: QcnParams::symmetric(1e-2, 0.0),
                beta2_axis: AxisSpec { min: 1e-4, max: 1e0, points: 17, include_zero: true },
                ..base
            },
            Scenario::Fig4 | Scenario::PresetRb87 => Self {
                params: QcnParams::single_sided(1e-2),
                cascade: CascadeConfig {
                    n_s_list: if scenario == Scenario::PresetRb87 { vec![0, 1] } else { vec![0, 1, 2, 3] },
                    ..CascadeConfig::default()
                },
                ..base
            },
        }
    }

    /// Simulation window of the cascaded scenarios.
    pub fn window(&self) -> (f64, f64) {
        (0.0, self.cascade.t_end)
    }

    pub fn to_config_string(&self) -> String {
        let p = &self.params;
        let c = &self.cascade;
        let mut s = String::new();
        s.push_str("[run]\n");
        s.push_str(&format!("scenario = {}\n", self.scenario.as_str()));
        s.push_str(&format!("rtol = {}\n", self.rtol));
        s.push_str(&format!("jobs = {}\n", self.jobs));
        s.push_str(&format!("out = {}\n", self.out_dir.display()));
        s.push_str(&format!("max_total_dim = {}\n", self.max_total_dim));
        s.push_str(&format!("max_numeric_dim = {}\n", self.max_numeric_dim));
        s.push_str("\n[params]\n");
        s.push_str(&format!("g1 = {}\ng2 = {}\n", p.g1, p.g2));
        for (i, k) in p.kappa_ex.iter().enumerate() {
            s.push_str(&format!("kappa_ex{} = {}\n", i + 1, k));
        }
        s.push_str(&format!("kappa_in_a = {}\nkappa_in_b = {}\n", p.kappa_in_a, p.kappa_in_b));
        s.push_str(&format!("gamma21 = {}\ngamma31 = {}\n", p.gamma21, p.gamma31));
        s.push_str(&format!(
            "delta1 = {}\ndelta2 = {}\ndelta_a = {}\ndelta_b = {}\n",
            p.delta1, p.delta2, p.delta_a, p.delta_b
        ));
        s.push_str(&format!("alpha_re = {}\nalpha_im = {}\n", p.alpha.re, p.alpha.im));
        s.push_str(&format!("beta_re = {}\nbeta_im = {}\n", p.beta.re, p.beta.im));
        s.push_str("\n[sweep]\n");
        s.push_str(&format!(
            "alpha2_min = {}\nalpha2_max = {}\nalpha2_points = {}\nalpha2_include_zero = {}\n",
            self.alpha2_axis.min, self.alpha2_axis.max, self.alpha2_axis.points,
            self.alpha2_axis.include_zero
        ));
        s.push_str(&format!(
            "beta2_min = {}\nbeta2_max = {}\nbeta2_points = {}\nbeta2_include_zero = {}\n",
            self.beta2_axis.min, self.beta2_axis.max, self.beta2_axis.points,
            self.beta2_axis.include_zero
        ));
        s.push_str("\n[cascade]\n");
        s.push_str(&format!(
            "n_s_list = {}\n",
            c.n_s_list.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(",")
        ));
        s.push_str(&format!(
            "shape = {}\n",
            match c.spec.shape {
                PulseShape::Gaussian => "gaussian",
                PulseShape::Exponential => "exponential",
            }
        ));
        s.push_str(&format!("tau_d = {}\ntau_s = {}\n", c.spec.delay, c.spec.duration));
        s.push_str(&format!("kappa_d1_ex2_max = {}\n", c.spec.kappa_d1_ex2_max));
        s.push_str(&format!(
            "probe_mode = {}\n",
            match c.spec.probe_mode {
                ProbeMode::ClassicalDrive => "classical_drive",
                ProbeMode::CascadedSource => "cascaded_source",
            }
        ));
        s.push_str(&format!("probe_kappa_d2_ex2 = {}\n", c.spec.probe_kappa_d2_ex2));
        s.push_str(&format!("t_end = {}\ngrid_step = {}\n", c.t_end, c.grid_step));
        s.push_str("\n[truncation]\n");
        match self.truncation {
            TruncationSpec::Auto { tol } => {
                s.push_str("mode = auto\n");
                s.push_str(&format!("tol = {tol}\n"));
            }
            TruncationSpec::Fixed { n_a, n_b, n_d1, n_d2 } => {
                s.push_str("mode = fixed\n");
                s.push_str(&format!("n_a = {n_a}\nn_b = {n_b}\nn_d1 = {n_d1}\nn_d2 = {n_d2}\n"));
            }
        }
        s
    }

    /// Parse a config file, layering values over the scenario defaults.
    /// Unknown sections or keys are rejected; `#` starts a comment.
    pub fn from_config_string(text: &str) -> Result<Self, ExperimentsError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ExperimentsError::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                )));
            };
            if current.is_empty() {
                return Err(ExperimentsError::Config(format!(
                    "line {}: key outside any [section]",
                    lineno + 1
                )));
            }
            sections
                .get_mut(&current)
                .unwrap()
                .insert(key.trim().to_string(), value.trim().to_string());
        }

        let run = sections.get("run").ok_or_else(|| {
            ExperimentsError::Config("missing [run] section with a scenario".into())
        })?;
        let scenario = Scenario::parse(
            run.get("scenario")
                .ok_or_else(|| ExperimentsError::Config("missing run.scenario".into()))?,
        )?;
        let mut cfg = RunConfig::default_for(scenario);

        let known_sections = ["run", "params", "sweep", "cascade", "truncation"];
        for name in sections.keys() {
            if !known_sections.contains(&name.as_str()) {
                return Err(ExperimentsError::Config(format!("unknown section [{name}]")));
            }
        }

        fn f64_of(section: &str, key: &str, v: &str) -> Result<f64, ExperimentsError> {
            v.parse().map_err(|_| {
                ExperimentsError::Config(format!("{section}.{key}: not a number: `{v}`"))
            })
        }
        fn usize_of(section: &str, key: &str, v: &str) -> Result<usize, ExperimentsError> {
            v.parse().map_err(|_| {
                ExperimentsError::Config(format!("{section}.{key}: not an integer: `{v}`"))
            })
        }
        fn bool_of(section: &str, key: &str, v: &str) -> Result<bool, ExperimentsError> {
            match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(ExperimentsError::Config(format!("{section}.{key}: not a bool: `{v}`"))),
            }
        }

        for (key, v) in run {
            match key.as_str() {
                "scenario" => {}
                "rtol" => cfg.rtol = f64_of("run", key, v)?,
                "jobs" => cfg.jobs = usize_of("run", key, v)?,
                "out" => cfg.out_dir = PathBuf::from(v),
                "max_total_dim" => cfg.max_total_dim = usize_of("run", key, v)?,
                "max_numeric_dim" => cfg.max_numeric_dim = usize_of("run", key, v)?,
                _ => return Err(ExperimentsError::Config(format!("unknown key run.{key}"))),
            }
        }
        if let Some(params) = sections.get("params") {
            let p = &mut cfg.params;
            for (key, v) in params {
                let x = f64_of("params", key, v)?;
                match key.as_str() {
                    "g1" => p.g1 = x,
                    "g2" => p.g2 = x,
                    "kappa_ex1" => p.kappa_ex[0] = x,
                    "kappa_ex2" => p.kappa_ex[1] = x,
                    "kappa_ex3" => p.kappa_ex[2] = x,
                    "kappa_ex4" => p.kappa_ex[3] = x,
                    "kappa_in_a" => p.kappa_in_a = x,
                    "kappa_in_b" => p.kappa_in_b = x,
                    "gamma21" => p.gamma21 = x,
                    "gamma31" => p.gamma31 = x,
                    "delta1" => p.delta1 = x,
                    "delta2" => p.delta2 = x,
                    "delta_a" => p.delta_a = x,
                    "delta_b" => p.delta_b = x,
                    "alpha_re" => p.alpha = C64::new(x, p.alpha.im),
                    "alpha_im" => p.alpha = C64::new(p.alpha.re, x),
                    "beta_re" => p.beta = C64::new(x, p.beta.im),
                    "beta_im" => p.beta = C64::new(p.beta.re, x),
                    _ => return Err(ExperimentsError::Config(format!("unknown key params.{key}"))),
                }
            }
        }
        if let Some(sweep) = sections.get("sweep") {
            for (key, v) in sweep {
                match key.as_str() {
                    "alpha2_min" => cfg.alpha2_axis.min = f64_of("sweep", key, v)?,
                    "alpha2_max" => cfg.alpha2_axis.max = f64_of("sweep", key, v)?,
                    "alpha2_points" => cfg.alpha2_axis.points = usize_of("sweep", key, v)?,
                    "alpha2_include_zero" => cfg.alpha2_axis.include_zero = bool_of("sweep", key, v)?,
                    "beta2_min" => cfg.beta2_axis.min = f64_of("sweep", key, v)?,
                    "beta2_max" => cfg.beta2_axis.max = f64_of("sweep", key, v)?,
                    "beta2_points" => cfg.beta2_axis.points = usize_of("sweep", key, v)?,
                    "beta2_include_zero" => cfg.beta2_axis.include_zero = bool_of("sweep", key, v)?,
                    _ => return Err(ExperimentsError::Config(format!("unknown key sweep.{key}"))),
                }
            }
        }
        if let Some(cascade) = sections.get("cascade") {
            let c = &mut cfg.cascade;
            for (key, v) in cascade {
                match key.as_str() {
                    "n_s_list" => {
                        c.n_s_list = v
                            .split(',')
                            .map(|s| usize_of("cascade", key, s.trim()))
                            .collect::<Result<_, _>>()?;
                    }
                    "shape" => {
                        c.spec.shape = match v.as_str() {
                            "gaussian" => PulseShape::Gaussian,
                            "exponential" => PulseShape::Exponential,
                            _ => {
                                return Err(ExperimentsError::Config(format!(
                                    "cascade.shape: unknown shape `{v}`"
                                )))
                            }
                        }
                    }
                    "tau_d" => c.spec.delay = f64_of("cascade", key, v)?,
                    "tau_s" => c.spec.duration = f64_of("cascade", key, v)?,
                    "kappa_d1_ex2_max" => c.spec.kappa_d1_ex2_max = f64_of("cascade", key, v)?,
                    "probe_mode" => {
                        c.spec.probe_mode = match v.as_str() {
                            "classical_drive" => ProbeMode::ClassicalDrive,
                            "cascaded_source" => ProbeMode::CascadedSource,
                            _ => {
                                return Err(ExperimentsError::Config(format!(
                                    "cascade.probe_mode: unknown mode `{v}`"
                                )))
                            }
                        }
                    }
                    "probe_kappa_d2_ex2" => c.spec.probe_kappa_d2_ex2 = f64_of("cascade", key, v)?,
                    "t_end" => c.t_end = f64_of("cascade", key, v)?,
                    "grid_step" => c.grid_step = f64_of("cascade", key, v)?,
                    _ => return Err(ExperimentsError::Config(format!("unknown key cascade.{key}"))),
                }
            }
        }
        if let Some(tr) = sections.get("truncation") {
            let mode = tr.get("mode").map(String::as_str).unwrap_or("auto");
            match mode {
                "auto" => {
                    let tol = tr.get("tol").map(|v| f64_of("truncation", "tol", v)).transpose()?;
                    cfg.truncation = TruncationSpec::Auto { tol: tol.unwrap_or(1e-3) };
                    for key in tr.keys() {
                        if !["mode", "tol"].contains(&key.as_str()) {
                            return Err(ExperimentsError::Config(format!(
                                "unknown key truncation.{key} in auto mode"
                            )));
                        }
                    }
                }
                "fixed" => {
                    let get = |k: &str| -> Result<usize, ExperimentsError> {
                        tr.get(k)
                            .map(|v| usize_of("truncation", k, v))
                            .transpose()?
                            .ok_or_else(|| {
                                ExperimentsError::Config(format!("truncation.{k} required in fixed mode"))
                            })
                    };
                    cfg.truncation = TruncationSpec::Fixed {
                        n_a: get("n_a")?,
                        n_b: get("n_b")?,
                        n_d1: tr.get("n_d1").map(|v| usize_of("truncation", "n_d1", v)).transpose()?.unwrap_or(0),
                        n_d2: tr.get("n_d2").map(|v| usize_of("truncation", "n_d2", v)).transpose()?.unwrap_or(0),
                    };
                    for key in tr.keys() {
                        if !["mode", "n_a", "n_b", "n_d1", "n_d2"].contains(&key.as_str()) {
                            return Err(ExperimentsError::Config(format!(
                                "unknown key truncation.{key} in fixed mode"
                            )));
                        }
                    }
                }
                other => {
                    return Err(ExperimentsError::Config(format!(
                        "truncation.mode must be auto or fixed, got `{other}`"
                    )))
                }
            }
        }
        Ok(cfg)
    }
}
