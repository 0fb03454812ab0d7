//! Closed-form steady-state transmittances and emitter populations on
//! resonance, used as the independent cross-check of the numerical solver.
//!
//! Valid for symmetric external coupling (κ_ex,1 = κ_ex,2, κ_ex,3 = κ_ex,4)
//! with every detuning zero. The drive dependence enters only through the
//! additive combination g₁²κ_b|α|² + g₂²κ_a|β|² in the shared denominator,
//! which is what makes one cavity's transmission controllable by the other
//! cavity's input power.

use thiserror::Error;

use crate::model::QcnParams;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticError {
    #[error("closed forms hold on resonance only; {name} = {value}")]
    OffResonance { name: &'static str, value: f64 },
    #[error("closed forms need symmetric external coupling; {name} differ ({left} vs {right})")]
    AsymmetricCoupling { name: &'static str, left: f64, right: f64 },
    #[error("rate {name} is negative ({value})")]
    NegativeRate { name: &'static str, value: f64 },
    #[error("denominator is degenerate (all damping and drive terms vanish)")]
    DegenerateDenominator,
}

/// Inputs of the resonant closed forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticInputs {
    pub g1: f64,
    pub g2: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    pub gamma21: f64,
    pub gamma31: f64,
    /// Input photon flux |α|².
    pub alpha2: f64,
    /// Input photon flux |β|².
    pub beta2: f64,
}

impl AnalyticInputs {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        g1: f64,
        g2: f64,
        kappa_a: f64,
        kappa_b: f64,
        gamma21: f64,
        gamma31: f64,
        alpha2: f64,
        beta2: f64,
    ) -> Result<Self, AnalyticError> {
        let named = [
            ("g1", g1),
            ("g2", g2),
            ("kappa_a", kappa_a),
            ("kappa_b", kappa_b),
            ("gamma21", gamma21),
            ("gamma31", gamma31),
            ("alpha2", alpha2),
            ("beta2", beta2),
        ];
        for (name, value) in named {
            if !value.is_finite() || value < 0.0 {
                return Err(AnalyticError::NegativeRate { name, value });
            }
        }
        Ok(Self { g1, g2, kappa_a, kappa_b, gamma21, gamma31, alpha2, beta2 })
    }

    /// Extract the closed-form inputs from full parameters, enforcing the
    /// validity domain instead of silently extrapolating.
    pub fn from_params(p: &QcnParams) -> Result<Self, AnalyticError> {
        let detunings = [
            ("delta1", p.delta1),
            ("delta2", p.delta2),
            ("delta_a", p.delta_a),
            ("delta_b", p.delta_b),
        ];
        for (name, value) in detunings {
            if value != 0.0 {
                return Err(AnalyticError::OffResonance { name, value });
            }
        }
        if (p.kappa_ex[0] - p.kappa_ex[1]).abs() > 1e-12 * p.kappa_a().max(1.0) {
            return Err(AnalyticError::AsymmetricCoupling {
                name: "kappa_ex1/kappa_ex2",
                left: p.kappa_ex[0],
                right: p.kappa_ex[1],
            });
        }
        if (p.kappa_ex[2] - p.kappa_ex[3]).abs() > 1e-12 * p.kappa_b().max(1.0) {
            return Err(AnalyticError::AsymmetricCoupling {
                name: "kappa_ex3/kappa_ex4",
                left: p.kappa_ex[2],
                right: p.kappa_ex[3],
            });
        }
        Self::new(
            p.g1,
            p.g2,
            p.kappa_a(),
            p.kappa_b(),
            p.gamma21,
            p.gamma31,
            p.alpha.norm_sqr(),
            p.beta.norm_sqr(),
        )
    }

    /// Γ_A = γ₂₁ + 4g₁²/κ_a.
    pub fn gamma_a(&self) -> f64 {
        self.gamma21 + 4.0 * self.g1 * self.g1 / self.kappa_a
    }

    /// Γ_B = γ₃₁ + 4g₂²/κ_b.
    pub fn gamma_b(&self) -> f64 {
        self.gamma31 + 4.0 * self.g2 * self.g2 / self.kappa_b
    }

    /// 𝒟 = Γ_AΓ_Bκ_aκ_b + 16(g₁²κ_b|α|² + g₂²κ_a|β|²).
    pub fn denominator(&self) -> f64 {
        self.gamma_a() * self.gamma_b() * self.kappa_a * self.kappa_b
            + 16.0 * self.drive_combination()
    }

    /// The additive drive combination g₁²κ_b|α|² + g₂²κ_a|β|².
    pub fn drive_combination(&self) -> f64 {
        self.g1 * self.g1 * self.kappa_b * self.alpha2
            + self.g2 * self.g2 * self.kappa_a * self.beta2
    }

    /// (T_a, T_b). Raw values, never clamped.
    pub fn transmissions(&self) -> Result<(f64, f64), AnalyticError> {
        let d = self.denominator();
        if d <= 0.0 {
            return Err(AnalyticError::DegenerateDenominator);
        }
        let t_a = 1.0
            - 8.0 * self.g1 * self.g1 * (self.kappa_b / self.kappa_a)
                * (self.gamma21 * self.kappa_a + 2.0 * self.g1 * self.g1)
                / d;
        let t_b = 1.0
            - 8.0 * self.g2 * self.g2 * (self.kappa_a / self.kappa_b)
                * (self.gamma31 * self.kappa_b + 2.0 * self.g2 * self.g2)
                / d;
        Ok((t_a, t_b))
    }

    /// (⟨σ₂₂⟩, ⟨σ₃₃⟩).
    pub fn populations(&self) -> Result<(f64, f64), AnalyticError> {
        let d = self.denominator();
        if d <= 0.0 {
            return Err(AnalyticError::DegenerateDenominator);
        }
        let s22 = 8.0 * self.g1 * self.g1 * self.kappa_b * self.alpha2 / d;
        let s33 = 8.0 * self.g2 * self.g2 * self.kappa_a * self.beta2 / d;
        Ok((s22, s33))
    }

    /// Exchange a ↔ b (couplings, widths, decays, drives).
    pub fn swapped(&self) -> Self {
        Self {
            g1: self.g2,
            g2: self.g1,
            kappa_a: self.kappa_b,
            kappa_b: self.kappa_a,
            gamma21: self.gamma31,
            gamma31: self.gamma21,
            alpha2: self.beta2,
            beta2: self.alpha2,
        }
    }
}

/// Bare-cavity mean photon numbers without the emitter,
/// ⟨a†a⟩ ≈ 2|α|²/κ_a and ⟨b†b⟩ ≈ 2|β|²/κ_b.
pub fn bare_cavity_photons(p: &QcnParams) -> (f64, f64) {
    (
        2.0 * p.alpha.norm_sqr() / p.kappa_a(),
        2.0 * p.beta.norm_sqr() / p.kappa_b(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn benchmark(alpha2: f64, beta2: f64) -> AnalyticInputs {
        AnalyticInputs::new(0.1, 0.1, 1.0, 1.0, 0.01, 0.01, alpha2, beta2).unwrap()
    }

    #[test]
    fn frozen_reference_values() {
        // hand evaluation: Γ_A = Γ_B = 0.05, 𝒟 = 0.0025 + 0.0016 = 0.0041,
        // T_a = 1 − 0.0024/0.0041
        let x = benchmark(1e-2, 0.0);
        assert!((x.gamma_a() - 0.05).abs() < 1e-15);
        assert!((x.denominator() - 0.0041).abs() < 1e-15);
        let (t_a, _) = x.transmissions().unwrap();
        assert!((t_a - (1.0 - 0.0024 / 0.0041)).abs() < 1e-12);
        assert!((t_a - 0.41463414634146345).abs() < 1e-12);

        // weak drive: almost fully absorptive; 𝒟 = 0.002516, T_a = 29/629
        let (t_a, _) = benchmark(1e-4, 0.0).transmissions().unwrap();
        assert!((t_a - 29.0 / 629.0).abs() < 1e-12);
        assert!(t_a < 0.10);
    }

    #[test]
    fn decoupled_cavity_transmits_fully() {
        let x = AnalyticInputs::new(0.0, 0.1, 1.0, 1.0, 0.01, 0.01, 1e-3, 1e-3).unwrap();
        let (t_a, _) = x.transmissions().unwrap();
        assert_eq!(t_a, 1.0);
    }

    #[test]
    fn saturation_limit() {
        let (t_a, t_b) = benchmark(1e6, 0.0).transmissions().unwrap();
        assert!(t_a > 0.999999);
        assert!(t_b > 0.999999);
    }

    #[test]
    fn populations_bounds_and_balance() {
        let x = benchmark(1e-2, 0.0);
        let (s22, s33) = x.populations().unwrap();
        assert_eq!(s33, 0.0);
        assert!(s22 > 0.0 && s22 < 1.0);

        // equal drives balance the two excited states
        let x = benchmark(1e-2, 1e-2);
        let (s22, s33) = x.populations().unwrap();
        assert!((s22 - s33).abs() < 1e-15);
        assert!(s22 + s33 <= 1.0);
        assert!((s22 - 0.0008 / 0.0057).abs() < 1e-12);
    }

    #[test]
    fn degenerate_denominator_detected() {
        let x = AnalyticInputs::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        assert_eq!(x.transmissions().unwrap_err(), AnalyticError::DegenerateDenominator);
    }

    #[test]
    fn domain_preconditions() {
        let mut p = QcnParams::symmetric(1e-2, 1e-2);
        AnalyticInputs::from_params(&p).unwrap();
        p.delta1 = 0.1;
        assert!(matches!(
            AnalyticInputs::from_params(&p).unwrap_err(),
            AnalyticError::OffResonance { name: "delta1", .. }
        ));

        let p = QcnParams::single_sided(1e-2);
        assert!(matches!(
            AnalyticInputs::from_params(&p).unwrap_err(),
            AnalyticError::AsymmetricCoupling { .. }
        ));

        assert!(matches!(
            AnalyticInputs::new(0.1, 0.1, 1.0, 1.0, -0.01, 0.01, 0.0, 0.0).unwrap_err(),
            AnalyticError::NegativeRate { name: "gamma21", .. }
        ));
    }

    #[test]
    fn bare_cavity_formula() {
        let p = QcnParams::symmetric(1e-2, 0.0);
        let (na, nb) = bare_cavity_photons(&p);
        assert!((na - 2e-2).abs() < 1e-15);
        assert_eq!(nb, 0.0);
    }

    #[test]
    fn monotone_in_cross_power() {
        // T_a never decreases as |β|² grows
        let mut prev = -1.0;
        for k in 0..60 {
            let beta2 = 10f64.powf(-4.0 + 6.0 * k as f64 / 59.0);
            let (t_a, _) = benchmark(1e-3, beta2).transmissions().unwrap();
            assert!(t_a >= prev - 1e-15);
            prev = t_a;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn exchange_symmetry_exact(
            g1 in 0.01f64..0.3, g2 in 0.01f64..0.3,
            ka in 0.5f64..2.0, kb in 0.5f64..2.0,
            c21 in 0.0f64..0.05, c31 in 0.0f64..0.05,
            a2 in 0.0f64..0.1, b2 in 0.0f64..0.1,
        ) {
            let x = AnalyticInputs::new(g1, g2, ka, kb, c21, c31, a2, b2).unwrap();
            let y = x.swapped();
            let (ta, tb) = x.transmissions().unwrap();
            let (ta_s, tb_s) = y.transmissions().unwrap();
            prop_assert!((ta - tb_s).abs() < 1e-14);
            prop_assert!((tb - ta_s).abs() < 1e-14);
            let (s22, s33) = x.populations().unwrap();
            let (s22_s, s33_s) = y.populations().unwrap();
            prop_assert!((s22 - s33_s).abs() < 1e-14);
            prop_assert!((s33 - s22_s).abs() < 1e-14);
        }

        #[test]
        fn drive_combination_invariance(
            a2 in 1e-5f64..5e-3,
            split in 0.05f64..0.95,
        ) {
            // pairs of drive powers with equal g₁²κ_b|α|² + g₂²κ_a|β|²
            // produce identical transmissions
            let x = benchmark(a2 * split, a2 * (1.0 - split));
            let y = benchmark(a2 * (1.0 - split), a2 * split);
            prop_assert!((x.drive_combination() - y.drive_combination()).abs() < 1e-18);
            let (ta_x, _) = x.transmissions().unwrap();
            let (ta_y, _) = y.transmissions().unwrap();
            prop_assert!((ta_x - ta_y).abs() < 1e-14);
        }
    }
}
