//! Physical model assembly: Hamiltonians, collapse channels, and cascaded
//! source-cavity couplings.
//!
//! All rates are expressed in units of a reference rate κ and all times in
//! κ⁻¹. The emitter couples its |1⟩↔|2⟩ transition to cavity a and its
//! |1⟩↔|3⟩ transition to cavity b; each cavity is driven either by a
//! classical coherent amplitude or by the output of a Fock-loaded source
//! cavity with a shaped, time-dependent output coupling.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::hilbert::{DensityMatrix, HilbertError, QuantumOperator, SpaceLayout, Subsystem};

pub type ScheduleFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("rate {name} is negative ({value})")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("drive amplitude is not finite")]
    NonFiniteAmplitude,
    #[error("layout is missing required subsystem {0}")]
    MissingSubsystem(Subsystem),
    #[error("layout contains {0}, which the requested model does not use")]
    UnexpectedSubsystem(Subsystem),
    #[error("signal photon number {n_s} does not fit source truncation (dimension {dim})")]
    PhotonNumberExceedsTruncation { n_s: usize, dim: usize },
    #[error("pulse envelope covers only {coverage:.6} of its energy inside the window")]
    EnvelopeNotNormalizable { coverage: f64 },
    #[error("pulse duration must be positive")]
    NonPositiveDuration,
    #[error("source output coupling cap must be positive")]
    NonPositiveCouplingCap,
    #[error(transparent)]
    Hilbert(#[from] HilbertError),
}

/// Non-fatal diagnostics produced while validating parameters or building
/// schedules.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelWarning {
    /// Nondestructive readout needs γ₂₁ and κ_in,a small against κ_a.
    QndRegime { rate: &'static str, value: f64, kappa_a: f64 },
    /// The coupling cap truncates the requested emission envelope.
    PulseClipping { fraction: f64 },
}

impl std::fmt::Display for ModelWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelWarning::QndRegime { rate, value, kappa_a } => write!(
                f,
                "{rate} = {value} is not small against kappa_a = {kappa_a}; readout back-action is not negligible"
            ),
            ModelWarning::PulseClipping { fraction } => write!(
                f,
                "coupling cap clips {:.2}% of the emission envelope",
                fraction * 100.0
            ),
        }
    }
}

/// All rates, detunings and drive amplitudes of the two-cavity model.
///
/// `delta3` and `delta4` are derived (Δ₃ = Δ_a + Δ₁, Δ₄ = Δ_b + Δ₂) and are
/// deliberately not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct QcnParams {
    /// Coupling of |1⟩↔|2⟩ to cavity a.
    pub g1: f64,
    /// Coupling of |1⟩↔|3⟩ to cavity b.
    pub g2: f64,
    /// External mirror rates κ_ex,1..4 (M1, M2 on cavity a; M3, M4 on b).
    pub kappa_ex: [f64; 4],
    pub kappa_in_a: f64,
    pub kappa_in_b: f64,
    /// Decay |2⟩ → |1⟩.
    pub gamma21: f64,
    /// Decay |3⟩ → |1⟩.
    pub gamma31: f64,
    /// Cavity–drive detunings.
    pub delta1: f64,
    pub delta2: f64,
    /// Cavity–transition detunings.
    pub delta_a: f64,
    pub delta_b: f64,
    /// Drive amplitudes in units of √(photon flux).
    pub alpha: C64,
    pub beta: C64,
}

impl QcnParams {
    /// Total loss of cavity a: κ_a = κ_ex,1 + κ_ex,2 + κ_in,a.
    pub fn kappa_a(&self) -> f64 {
        self.kappa_ex[0] + self.kappa_ex[1] + self.kappa_in_a
    }

    /// Total loss of cavity b: κ_b = κ_ex,3 + κ_ex,4 + κ_in,b.
    pub fn kappa_b(&self) -> f64 {
        self.kappa_ex[2] + self.kappa_ex[3] + self.kappa_in_b
    }

    /// Emitter detuning Δ₃ = Δ_a + Δ₁.
    pub fn delta3(&self) -> f64 {
        self.delta_a + self.delta1
    }

    /// Emitter detuning Δ₄ = Δ_b + Δ₂.
    pub fn delta4(&self) -> f64 {
        self.delta_b + self.delta2
    }

    /// Symmetric benchmark set: both cavities with equal mirrors summing to
    /// κ_a = κ_b = 1, g = 0.1, γ = 0.01, everything on resonance.
    pub fn symmetric(alpha2: f64, beta2: f64) -> Self {
        Self {
            g1: 0.1,
            g2: 0.1,
            kappa_ex: [0.5, 0.5, 0.5, 0.5],
            kappa_in_a: 0.0,
            kappa_in_b: 0.0,
            gamma21: 0.01,
            gamma31: 0.01,
            delta1: 0.0,
            delta2: 0.0,
            delta_a: 0.0,
            delta_b: 0.0,
            alpha: C64::new(alpha2.sqrt(), 0.0),
            beta: C64::new(beta2.sqrt(), 0.0),
        }
    }

    /// Detection set: single-sided cavity a (κ_ex,1 = κ_a = 1, κ_ex,2 = 0),
    /// symmetric cavity b with κ_ex,3 = κ_ex,4 = 0.5, probe power `beta2`.
    pub fn single_sided(beta2: f64) -> Self {
        Self {
            kappa_ex: [1.0, 0.0, 0.5, 0.5],
            alpha: C64::new(0.0, 0.0),
            beta: C64::new(beta2.sqrt(), 0.0),
            ..Self::symmetric(0.0, 0.0)
        }
    }

    /// Relabel the a-subsystem as b and vice versa (including the emitter
    /// levels the two transitions address). Observables of the swapped
    /// problem map onto the originals with a ↔ b.
    pub fn swapped(&self) -> Self {
        Self {
            g1: self.g2,
            g2: self.g1,
            kappa_ex: [self.kappa_ex[2], self.kappa_ex[3], self.kappa_ex[0], self.kappa_ex[1]],
            kappa_in_a: self.kappa_in_b,
            kappa_in_b: self.kappa_in_a,
            gamma21: self.gamma31,
            gamma31: self.gamma21,
            delta1: self.delta2,
            delta2: self.delta1,
            delta_a: self.delta_b,
            delta_b: self.delta_a,
            alpha: self.beta,
            beta: self.alpha,
        }
    }

    /// Check rates and amplitudes; returns regime warnings.
    pub fn validate(&self) -> Result<Vec<ModelWarning>, ModelError> {
        let named = [
            ("g1", self.g1),
            ("g2", self.g2),
            ("kappa_ex1", self.kappa_ex[0]),
            ("kappa_ex2", self.kappa_ex[1]),
            ("kappa_ex3", self.kappa_ex[2]),
            ("kappa_ex4", self.kappa_ex[3]),
            ("kappa_in_a", self.kappa_in_a),
            ("kappa_in_b", self.kappa_in_b),
            ("gamma21", self.gamma21),
            ("gamma31", self.gamma31),
        ];
        for (name, value) in named {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::NegativeRate { name, value });
            }
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(ModelError::NonFiniteAmplitude);
        }
        if self.kappa_a() <= 0.0 {
            return Err(ModelError::NegativeRate { name: "kappa_a", value: self.kappa_a() });
        }
        if self.kappa_b() <= 0.0 {
            return Err(ModelError::NegativeRate { name: "kappa_b", value: self.kappa_b() });
        }
        let mut warnings = Vec::new();
        let ka = self.kappa_a();
        if self.gamma21 > 0.1 * ka {
            warnings.push(ModelWarning::QndRegime { rate: "gamma21", value: self.gamma21, kappa_a: ka });
        }
        if self.kappa_in_a > 0.1 * ka {
            warnings.push(ModelWarning::QndRegime { rate: "kappa_in_a", value: self.kappa_in_a, kappa_a: ka });
        }
        Ok(warnings)
    }
}

/// Constant or scheduled nonnegative rate.
#[derive(Clone)]
pub enum Rate {
    Constant(f64),
    Scheduled(ScheduleFn),
}

impl Rate {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Rate::Constant(v) => *v,
            Rate::Scheduled(f) => f(t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Rate::Constant(_))
    }
}

impl std::fmt::Debug for Rate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rate::Constant(v) => write!(f, "Constant({v})"),
            Rate::Scheduled(_) => write!(f, "Scheduled(..)"),
        }
    }
}

/// One dissipation channel (Γ/2)(2OρO† − O†Oρ − ρO†O).
#[derive(Clone, Debug)]
pub struct LindbladTerm {
    pub rate: Rate,
    pub op: QuantumOperator,
}

impl LindbladTerm {
    pub fn constant(rate: f64, op: QuantumOperator) -> Result<Self, ModelError> {
        if !rate.is_finite() || rate < 0.0 {
            return Err(ModelError::NegativeRate { name: "lindblad", value: rate });
        }
        Ok(Self { rate: Rate::Constant(rate), op })
    }
}

/// Unidirectional coupling feeding the source output into a sink mode.
///
/// The generator contribution is
/// r(t)·(SρT† + TρS† − T†Sρ − ρS†T) with S the source and T the sink
/// operator, r(t) = √(κ_src(t)·κ_sink). The relative phase between source
/// and sink fields is fixed such that the retro-reflected port is the sum
/// √κ_src S + √κ_sink T; with that pairing a lossless mirror returns the
/// full packet.
#[derive(Clone, Debug)]
pub struct NetworkTerm {
    pub rate_product: Rate,
    pub source: QuantumOperator,
    pub sink: QuantumOperator,
}

/// Everything the solvers need: static Hamiltonian, optional scheduled
/// Hamiltonian pieces H(t) = H_static + Σ cₖ(t)·Hₖ, dissipators, and
/// cascaded network couplings.
#[derive(Clone)]
pub struct GeneratorBundle {
    layout: Arc<SpaceLayout>,
    pub h_static: QuantumOperator,
    pub h_schedule: Vec<(ScheduleFn, QuantumOperator)>,
    pub lindblad: Vec<LindbladTerm>,
    pub network: Vec<NetworkTerm>,
}

impl std::fmt::Debug for GeneratorBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneratorBundle")
            .field("dim", &self.layout.total_dim())
            .field("scheduled_h_terms", &self.h_schedule.len())
            .field("lindblad", &self.lindblad)
            .field("network", &self.network)
            .finish()
    }
}

impl GeneratorBundle {
    pub fn new(
        layout: Arc<SpaceLayout>,
        h_static: QuantumOperator,
        lindblad: Vec<LindbladTerm>,
        network: Vec<NetworkTerm>,
    ) -> Self {
        Self { layout, h_static, h_schedule: Vec::new(), lindblad, network }
    }

    pub fn layout(&self) -> &Arc<SpaceLayout> {
        &self.layout
    }

    /// True when the generator has no scheduled pieces, so a steady state
    /// is well defined.
    pub fn is_time_independent(&self) -> bool {
        self.h_schedule.is_empty()
            && self.lindblad.iter().all(|t| t.rate.is_constant())
            && self.network.iter().all(|t| t.rate_product.is_constant())
    }

    /// Smallest nonzero constant decay rate; sets the slowest relaxation
    /// timescale for long-time integration.
    pub fn min_nonzero_rate(&self) -> Option<f64> {
        self.lindblad
            .iter()
            .filter_map(|t| match t.rate {
                Rate::Constant(v) if v > 0.0 => Some(v),
                _ => None,
            })
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }
}

/// H_QCN: detuning terms plus the two Jaynes–Cummings couplings.
pub fn build_h_qcn(
    params: &QcnParams,
    layout: &Arc<SpaceLayout>,
) -> Result<QuantumOperator, ModelError> {
    for s in [Subsystem::Qe, Subsystem::CavA, Subsystem::CavB] {
        if !layout.contains(s) {
            return Err(ModelError::MissingSubsystem(s));
        }
    }
    let a = QuantumOperator::destroy(layout, Subsystem::CavA)?;
    let b = QuantumOperator::destroy(layout, Subsystem::CavB)?;
    let n_a = QuantumOperator::number(layout, Subsystem::CavA)?;
    let n_b = QuantumOperator::number(layout, Subsystem::CavB)?;
    let s22 = QuantumOperator::transition(layout, 2, 2)?;
    let s33 = QuantumOperator::transition(layout, 3, 3)?;
    let s21 = QuantumOperator::transition(layout, 2, 1)?;
    let s12 = QuantumOperator::transition(layout, 1, 2)?;
    let s31 = QuantumOperator::transition(layout, 3, 1)?;
    let s13 = QuantumOperator::transition(layout, 1, 3)?;

    let jc1 = &(&s21 * &a) + &(&a.adjoint() * &s12);
    let jc2 = &(&s31 * &b) + &(&b.adjoint() * &s13);
    let h = &(&(&n_a.scaled_re(params.delta1) + &n_b.scaled_re(params.delta2))
        + &(&s22.scaled_re(params.delta3()) + &s33.scaled_re(params.delta4())))
        + &(&jc1.scaled_re(params.g1) + &jc2.scaled_re(params.g2));
    Ok(h)
}

/// H_D: coherent drives through the input mirrors,
/// i√κ_ex,1(α*a − αa†) + i√κ_ex,3(β*b − βb†).
pub fn build_h_drive(
    params: &QcnParams,
    layout: &Arc<SpaceLayout>,
) -> Result<QuantumOperator, ModelError> {
    for s in [Subsystem::CavA, Subsystem::CavB] {
        if !layout.contains(s) {
            return Err(ModelError::MissingSubsystem(s));
        }
    }
    let i = C64::new(0.0, 1.0);
    let a = QuantumOperator::destroy(layout, Subsystem::CavA)?;
    let b = QuantumOperator::destroy(layout, Subsystem::CavB)?;
    let term_a = a
        .scaled(i * params.alpha.conj())
        .checked_sub(&a.adjoint().scaled(i * params.alpha))?
        .scaled_re(params.kappa_ex[0].sqrt());
    let term_b = b
        .scaled(i * params.beta.conj())
        .checked_sub(&b.adjoint().scaled(i * params.beta))?
        .scaled_re(params.kappa_ex[2].sqrt());
    Ok(term_a.checked_add(&term_b)?)
}

/// Collapse channels {κ_a, κ_b, γ₂₁, γ₃₁} on {a, b, σ₁₂, σ₁₃}, extended by
/// the source-cavity channels when sources are present in the layout.
pub fn collapse_terms(
    params: &QcnParams,
    layout: &Arc<SpaceLayout>,
    cascade: Option<(&CascadeSpec, &PulseSchedule)>,
) -> Result<Vec<LindbladTerm>, ModelError> {
    params.validate()?;
    let mut terms = vec![
        LindbladTerm::constant(params.kappa_a(), QuantumOperator::destroy(layout, Subsystem::CavA)?)?,
        LindbladTerm::constant(params.kappa_b(), QuantumOperator::destroy(layout, Subsystem::CavB)?)?,
        LindbladTerm::constant(params.gamma21, QuantumOperator::transition(layout, 1, 2)?)?,
        LindbladTerm::constant(params.gamma31, QuantumOperator::transition(layout, 1, 3)?)?,
    ];
    if layout.contains(Subsystem::SrcD1) {
        let (_, schedule) = cascade.ok_or(ModelError::UnexpectedSubsystem(Subsystem::SrcD1))?;
        let sched = schedule.clone();
        // the source has no intrinsic loss: κ_d1(t) = κ_d1,ex2(t)
        terms.push(LindbladTerm {
            rate: Rate::Scheduled(Arc::new(move |t| sched.kappa(t))),
            op: QuantumOperator::destroy(layout, Subsystem::SrcD1)?,
        });
    }
    if layout.contains(Subsystem::SrcD2) {
        let (spec, _) = cascade.ok_or(ModelError::UnexpectedSubsystem(Subsystem::SrcD2))?;
        terms.push(LindbladTerm::constant(
            spec.probe_kappa_d2_ex2,
            QuantumOperator::destroy(layout, Subsystem::SrcD2)?,
        )?);
    }
    Ok(terms)
}

/// Classically driven two-cavity system (no source cavities).
pub fn build_driven(
    params: &QcnParams,
    layout: &Arc<SpaceLayout>,
) -> Result<GeneratorBundle, ModelError> {
    for s in [Subsystem::SrcD1, Subsystem::SrcD2] {
        if layout.contains(s) {
            return Err(ModelError::UnexpectedSubsystem(s));
        }
    }
    let h = build_h_qcn(params, layout)?.checked_add(&build_h_drive(params, layout)?)?;
    let lindblad = collapse_terms(params, layout, None)?;
    Ok(GeneratorBundle::new(layout.clone(), h, lindblad, Vec::new()))
}

/// Requested emission envelope for the signal source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PulseShape {
    /// Delayed Gaussian wave packet; `duration` is the intensity FWHM.
    Gaussian,
    /// Exponential decay starting at `delay` with rate 1/`duration`.
    Exponential,
}

/// How the probe field on cavity b is realized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeMode {
    /// Coherent drive term in the Hamiltonian (default; smaller space).
    ClassicalDrive,
    /// Second source cavity d₂ cascaded into b.
    CascadedSource,
}

/// Signal-source configuration for the cascaded model.
#[derive(Clone, Debug)]
pub struct CascadeSpec {
    /// Photons loaded into the source cavity.
    pub n_s: usize,
    /// Cap on the source output coupling κ_d1,ex2(t).
    pub kappa_d1_ex2_max: f64,
    pub shape: PulseShape,
    /// Packet center τ_d (Gaussian) or onset (exponential).
    pub delay: f64,
    /// Packet duration τ_s: for a Gaussian, the FWHM of the amplitude
    /// envelope; for an exponential, the 1/e decay time.
    pub duration: f64,
    pub probe_mode: ProbeMode,
    /// Output coupling of the probe source cavity (cascaded probe only).
    pub probe_kappa_d2_ex2: f64,
}

impl CascadeSpec {
    /// Delayed Gaussian packet with the detection-benchmark timing:
    /// center τ_d = 150 κ⁻¹ (well after the probe transient settles around
    /// t ≈ 120–140 κ⁻¹) and intensity FWHM τ_s = 6 κ⁻¹.
    pub fn gaussian_packet(n_s: usize) -> Self {
        Self {
            n_s,
            kappa_d1_ex2_max: 2.0,
            shape: PulseShape::Gaussian,
            delay: 150.0,
            duration: 6.0,
            probe_mode: ProbeMode::ClassicalDrive,
            probe_kappa_d2_ex2: 0.0,
        }
    }
}

/// Time-dependent source output coupling realizing a target envelope.
///
/// For a normalized target intensity |ξ(t)|², a bare cavity emits exactly
/// n_s·|ξ(t)|² photon flux when its output coupling follows
/// κ(t) = |ξ(t)|² / (1 − ∫|ξ|²), capped at `kappa_max` and held there once
/// the cap is reached.
#[derive(Clone, Debug)]
pub struct PulseSchedule {
    shape: PulseShape,
    delay: f64,
    /// Gaussian: envelope width σ (intensity ∝ exp(−(t−τ_d)²/σ²)).
    /// Exponential: effective decay rate.
    scale: f64,
    t_start: f64,
    kappa_max: f64,
    /// First time at which the shaping rule hits the cap, if any.
    pub clip_time: Option<f64>,
    /// Fraction of the target envelope energy past the clip time.
    pub clipped_fraction: f64,
}

impl PulseSchedule {
    /// Target intensity envelope |ξ(t)|², unit integral over the window.
    pub fn envelope_sq(&self, t: f64) -> f64 {
        match self.shape {
            PulseShape::Gaussian => {
                let u = (t - self.delay) / self.scale;
                (-u * u).exp() / (self.scale * std::f64::consts::PI.sqrt())
            }
            PulseShape::Exponential => {
                if t < self.delay {
                    0.0
                } else {
                    self.scale * (-self.scale * (t - self.delay)).exp()
                }
            }
        }
    }

    /// Fraction of the target envelope energy still to be emitted after `t`.
    ///
    /// Computed through erfc so the deep Gaussian tail keeps full relative
    /// precision; the naive 1 − erf form loses monotonicity past ~5σ.
    pub fn remaining_fraction(&self, t: f64) -> f64 {
        match self.shape {
            PulseShape::Gaussian => {
                let u = (t - self.delay) / self.scale;
                let u0 = (self.t_start - self.delay) / self.scale;
                (0.5 * libm::erfc(u) - 0.5 * libm::erfc(-u0)).max(0.0)
            }
            PulseShape::Exponential => {
                if t < self.delay {
                    1.0
                } else {
                    (-self.scale * (t - self.delay)).exp()
                }
            }
        }
    }

    /// Fraction of the target envelope energy emitted up to `t`.
    pub fn emitted_fraction(&self, t: f64) -> f64 {
        (1.0 - self.remaining_fraction(t)).clamp(0.0, 1.0)
    }

    /// Output coupling κ_d1,ex2(t).
    pub fn kappa(&self, t: f64) -> f64 {
        if let Some(tc) = self.clip_time {
            if t >= tc {
                return self.kappa_max;
            }
        }
        match self.shape {
            PulseShape::Gaussian => {
                let remaining = self.remaining_fraction(t);
                if remaining <= 0.0 {
                    return self.kappa_max;
                }
                (self.envelope_sq(t) / remaining).min(self.kappa_max)
            }
            PulseShape::Exponential => {
                if t < self.delay {
                    0.0
                } else {
                    self.scale
                }
            }
        }
    }
}

/// Shape the source output coupling for the requested packet over the
/// simulation window. Fails when the envelope does not fit in the window.
pub fn pulse_coupling_schedule(
    spec: &CascadeSpec,
    window: (f64, f64),
) -> Result<(PulseSchedule, Vec<ModelWarning>), ModelError> {
    if spec.duration <= 0.0 || !spec.duration.is_finite() {
        return Err(ModelError::NonPositiveDuration);
    }
    if spec.kappa_d1_ex2_max <= 0.0 || !spec.kappa_d1_ex2_max.is_finite() {
        return Err(ModelError::NonPositiveCouplingCap);
    }
    let (t0, t1) = window;
    let mut sched = match spec.shape {
        PulseShape::Gaussian => {
            // duration is the FWHM of the packet amplitude ξ(t); the
            // intensity envelope is narrower by √2
            let sigma = spec.duration / (2.0 * (2.0 * (2.0f64).ln()).sqrt());
            PulseSchedule {
                shape: PulseShape::Gaussian,
                delay: spec.delay,
                scale: sigma,
                t_start: t0,
                kappa_max: spec.kappa_d1_ex2_max,
                clip_time: None,
                clipped_fraction: 0.0,
            }
        }
        PulseShape::Exponential => PulseSchedule {
            shape: PulseShape::Exponential,
            delay: spec.delay,
            scale: (1.0 / spec.duration).min(spec.kappa_d1_ex2_max),
            t_start: t0,
            kappa_max: spec.kappa_d1_ex2_max,
            clip_time: None,
            clipped_fraction: 0.0,
        },
    };
    let coverage = sched.emitted_fraction(t1);
    if coverage < 1.0 - 1e-4 {
        return Err(ModelError::EnvelopeNotNormalizable { coverage });
    }
    let mut warnings = Vec::new();
    if sched.shape == PulseShape::Gaussian {
        // scan for the first time the shaping rule would exceed the cap;
        // past ~26σ the erfc tail underflows, so stop there regardless
        let sigma = sched.scale;
        let scan_end = (sched.delay + 26.0 * sigma).min(t1 + 26.0 * sigma);
        let dt = sigma / 64.0;
        let mut t = t0;
        while t <= scan_end {
            let remaining = sched.remaining_fraction(t);
            if remaining <= 0.0 || sched.envelope_sq(t) / remaining >= sched.kappa_max {
                sched.clip_time = Some(t);
                sched.clipped_fraction = remaining.max(0.0);
                break;
            }
            t += dt;
        }
        if sched.clip_time.is_none() {
            sched.clip_time = Some(scan_end);
            sched.clipped_fraction = sched.remaining_fraction(scan_end).max(0.0);
        }
        if sched.clipped_fraction > 0.01 {
            warnings.push(ModelWarning::PulseClipping { fraction: sched.clipped_fraction });
        }
    }
    Ok((sched, warnings))
}

/// Cascaded model: generator bundle, initial state, and the source
/// schedule used for input/output bookkeeping.
#[derive(Clone, Debug)]
pub struct CascadedSystem {
    pub bundle: GeneratorBundle,
    pub rho0: DensityMatrix,
    pub schedule: PulseSchedule,
    pub warnings: Vec<ModelWarning>,
}

/// Assemble the cascaded source → cavity model over a simulation window.
///
/// The source cavity d₁ starts in Fock |n_s⟩ and leaks through the shaped
/// coupling into cavity a. The probe on cavity b is either the classical
/// drive term (default) or a second cascaded source cavity d₂ prepared in
/// a coherent state whose flux matches |β|².
pub fn build_cascaded(
    params: &QcnParams,
    spec: &CascadeSpec,
    layout: &Arc<SpaceLayout>,
    window: (f64, f64),
) -> Result<CascadedSystem, ModelError> {
    for s in [Subsystem::Qe, Subsystem::CavA, Subsystem::CavB, Subsystem::SrcD1] {
        if !layout.contains(s) {
            return Err(ModelError::MissingSubsystem(s));
        }
    }
    match spec.probe_mode {
        ProbeMode::ClassicalDrive => {
            if layout.contains(Subsystem::SrcD2) {
                return Err(ModelError::UnexpectedSubsystem(Subsystem::SrcD2));
            }
        }
        ProbeMode::CascadedSource => {
            if !layout.contains(Subsystem::SrcD2) {
                return Err(ModelError::MissingSubsystem(Subsystem::SrcD2));
            }
        }
    }
    let d1_dim = layout.dim_of(Subsystem::SrcD1).expect("src_d1 present");
    if spec.n_s >= d1_dim {
        return Err(ModelError::PhotonNumberExceedsTruncation { n_s: spec.n_s, dim: d1_dim });
    }

    let mut warnings = params.validate()?;
    let (schedule, mut sched_warnings) = pulse_coupling_schedule(spec, window)?;
    warnings.append(&mut sched_warnings);

    // probe drive: only the β term of H_D (the signal arrives by cascade)
    let mut h = build_h_qcn(params, layout)?;
    if spec.probe_mode == ProbeMode::ClassicalDrive {
        let i = C64::new(0.0, 1.0);
        let b = QuantumOperator::destroy(layout, Subsystem::CavB)?;
        let drive = b
            .scaled(i * params.beta.conj())
            .checked_sub(&b.adjoint().scaled(i * params.beta))?
            .scaled_re(params.kappa_ex[2].sqrt());
        h = h.checked_add(&drive)?;
    }

    let lindblad = collapse_terms(params, layout, Some((spec, &schedule)))?;

    let mut network = Vec::new();
    let kappa_ex1 = params.kappa_ex[0];
    let sched = schedule.clone();
    network.push(NetworkTerm {
        rate_product: Rate::Scheduled(Arc::new(move |t| (sched.kappa(t) * kappa_ex1).sqrt())),
        source: QuantumOperator::destroy(layout, Subsystem::SrcD1)?,
        sink: QuantumOperator::destroy(layout, Subsystem::CavA)?,
    });
    if spec.probe_mode == ProbeMode::CascadedSource {
        network.push(NetworkTerm {
            rate_product: Rate::Constant((spec.probe_kappa_d2_ex2 * params.kappa_ex[2]).sqrt()),
            source: QuantumOperator::destroy(layout, Subsystem::SrcD2)?,
            sink: QuantumOperator::destroy(layout, Subsystem::CavB)?,
        });
    }

    // initial state: emitter ground, cavities empty, d₁ in |n_s⟩, and for a
    // cascaded probe d₂ in a coherent state with flux |β|²
    let factors: Vec<Vec<C64>> = layout
        .subsystems()
        .iter()
        .map(|&(label, dim)| match label {
            Subsystem::SrcD1 => {
                let mut f = vec![C64::new(0.0, 0.0); dim];
                f[spec.n_s] = C64::new(1.0, 0.0);
                f
            }
            Subsystem::SrcD2 => coherent_ket(params.beta / spec.probe_kappa_d2_ex2.sqrt(), dim),
            _ => {
                let mut f = vec![C64::new(0.0, 0.0); dim];
                f[0] = C64::new(1.0, 0.0);
                f
            }
        })
        .collect();
    let rho0 = DensityMatrix::pure_from_factors(layout, &factors)?;

    let mut bundle = GeneratorBundle::new(layout.clone(), h, lindblad, network);
    bundle.h_schedule = Vec::new();
    Ok(CascadedSystem { bundle, rho0, schedule, warnings })
}

/// Truncated coherent-state ket (renormalized over the truncated space).
fn coherent_ket(amp: C64, dim: usize) -> Vec<C64> {
    let mut f = Vec::with_capacity(dim);
    let mut c = C64::new(1.0, 0.0);
    f.push(c);
    for n in 1..dim {
        c *= amp / C64::new((n as f64).sqrt(), 0.0);
        f.push(c);
    }
    let norm = f.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    for v in &mut f {
        *v /= norm;
    }
    f
}
