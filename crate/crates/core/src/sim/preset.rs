//! Scheme presets: concrete settings of the generic two-encoder lattice
//! scheme
//!
//! ```text
//! Xᵢ = [Vᵢ - αᵢ·S̃ᵢ + Dᵢ] mod Λᵢ,   Λᵢ = kᵢ·Λ
//! Y′ = [α_r·Y - γ·D₁ - β·D₂] mod Λ_r,  Λ_r = k_r·Λ
//! ```
//!
//! that realize the corner points of each achievable region.
//!
//! The imbalanced presets come in helper pairs. In `T1-Case1` and `T1-Case4`
//! the decoder works on user 2's (weaker) lattice; in `T1-Case2` and
//! `T1-Case3` on user 1's. The helper uses only the power it needs to keep
//! the decoding lattice nested, which may be less than its constraint.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::ScalarLattice;
use crate::rates::{
    classify_regime, mmse_alpha, powers_balanced, residual, weak_user1_condition,
    weak_user2_condition, ChannelParams, Regime, SchemeKind,
};

const POWER_RTOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    /// User 1 (strong) helps, user 2 carries the message.
    #[serde(rename = "T1-Case1")]
    T1Case1,
    /// User 1 (weak) helps, user 2 carries the message.
    #[serde(rename = "T1-Case2")]
    T1Case2,
    /// User 2 (strong) helps, user 1 carries the message.
    #[serde(rename = "T1-Case3")]
    T1Case3,
    /// User 2 (weak) helps, user 1 carries the message.
    #[serde(rename = "T1-Case4")]
    T1Case4,
    /// Equal powers, common lattice, both users carry messages.
    #[serde(rename = "T2-Balanced")]
    T2Balanced,
    /// Nearly balanced, decoding on user 1's lattice, user 2 helps.
    #[serde(rename = "T3-Case1")]
    T3Case1,
    /// Nearly balanced, decoding on user 2's lattice, user 2 helps.
    #[serde(rename = "T3-Case2")]
    T3Case2,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::T1Case1,
        Preset::T1Case2,
        Preset::T1Case3,
        Preset::T1Case4,
        Preset::T2Balanced,
        Preset::T3Case1,
        Preset::T3Case2,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Preset::T1Case1 => "T1-Case1",
            Preset::T1Case2 => "T1-Case2",
            Preset::T1Case3 => "T1-Case3",
            Preset::T1Case4 => "T1-Case4",
            Preset::T2Balanced => "T2-Balanced",
            Preset::T3Case1 => "T3-Case1",
            Preset::T3Case2 => "T3-Case2",
        }
    }

    pub fn is_imbalanced_corner(&self) -> bool {
        matches!(
            self,
            Preset::T1Case1 | Preset::T1Case2 | Preset::T1Case3 | Preset::T1Case4
        )
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .iter()
            .copied()
            .find(|p| p.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| invalid(format!("unknown preset '{s}'")))
    }
}

/// One fully determined instance of the generic scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub preset: Preset,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha_r: f64,
    pub k1: f64,
    pub k2: f64,
    pub kr: f64,
    /// Decoder coefficient on `D₂`.
    pub beta: f64,
    /// Decoder coefficient on `D₁`.
    pub gamma: f64,
    pub base: ScalarLattice,
    pub lattice1: ScalarLattice,
    pub lattice2: ScalarLattice,
    pub lattice_r: ScalarLattice,
    pub v1_active: bool,
    pub v2_active: bool,
    pub d1_zero: bool,
    pub d2_zero: bool,
}

/// Coefficients of the simplified decoder output
/// `Y′ = [c_v1·V₁ + c_v2·V₂ - c_x1·X₁ - c_x2·X₂ + c_n·(S₁-S̃₁ + S₂-S̃₂ + Z)] mod Λ_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalentForm {
    pub v1: f64,
    pub v2: f64,
    pub x1: f64,
    pub x2: f64,
    pub noise: f64,
}

impl SchemeConfig {
    /// Read the equivalent channel straight off the preset's derivation.
    pub fn equivalent_form(&self) -> EquivalentForm {
        let zero = EquivalentForm {
            v1: 0.0,
            v2: 0.0,
            x1: 0.0,
            x2: 0.0,
            noise: 0.0,
        };
        match self.preset {
            Preset::T1Case1 => {
                let a = self.alpha2;
                EquivalentForm {
                    v2: 1.0,
                    x2: 1.0 - a,
                    noise: a,
                    ..zero
                }
            }
            Preset::T1Case2 => {
                let a = self.alpha1;
                EquivalentForm {
                    v2: a,
                    x1: 1.0 - a,
                    noise: a,
                    ..zero
                }
            }
            Preset::T1Case3 => {
                let a = self.alpha1;
                EquivalentForm {
                    v1: 1.0,
                    x1: 1.0 - a,
                    noise: a,
                    ..zero
                }
            }
            Preset::T1Case4 => {
                let a = self.alpha2;
                EquivalentForm {
                    v1: a,
                    x2: 1.0 - a,
                    noise: a,
                    ..zero
                }
            }
            Preset::T2Balanced => {
                let a = self.alpha_r;
                EquivalentForm {
                    v1: 1.0,
                    v2: 1.0,
                    x1: 1.0 - a,
                    x2: 1.0 - a,
                    noise: a,
                }
            }
            Preset::T3Case1 => {
                let (a1, a2) = (self.alpha1, self.alpha2);
                EquivalentForm {
                    v1: 1.0,
                    x1: 1.0 - a1,
                    x2: a1 / a2 * (1.0 - a2),
                    noise: a1,
                    ..zero
                }
            }
            Preset::T3Case2 => {
                let (a1, a2) = (self.alpha1, self.alpha2);
                EquivalentForm {
                    v1: a2 / a1,
                    x1: a2 / a1 * (1.0 - a1),
                    x2: 1.0 - a2,
                    noise: a2,
                    ..zero
                }
            }
        }
    }

    /// Closed-form power of the effective noise
    /// `Σ c_xᵢ²·σᵢ² + c_n²·(E₁+E₂+N)`.
    pub fn analytic_noise_power(&self, params: &ChannelParams) -> f64 {
        let f = self.equivalent_form();
        f.x1 * f.x1 * self.lattice1.second_moment()
            + f.x2 * f.x2 * self.lattice2.second_moment()
            + f.noise * f.noise * residual(params)
    }

    /// The decoder output is uniform on the cell of `Λ_r`, so its second
    /// moment is the signal power.
    pub fn analytic_signal_power(&self) -> f64 {
        self.lattice_r.second_moment()
    }

    pub fn analytic_sinr(&self, params: &ChannelParams) -> f64 {
        self.analytic_signal_power() / self.analytic_noise_power(params)
    }

    /// The single message-carrying user, if there is exactly one.
    pub fn single_active_user(&self) -> Option<usize> {
        match (self.v1_active, self.v2_active) {
            (true, false) => Some(1),
            (false, true) => Some(2),
            _ => None,
        }
    }

    /// Same scheme with user 2's lattice step scaled by `1 + eps`, leaving
    /// every other lattice alone. Breaks the nesting for `eps ≠ 0`.
    pub fn with_perturbed_lattice2(&self, eps: f64) -> Result<Self> {
        let mut c = self.clone();
        c.lattice2 = self.lattice2.scaled(1.0 + eps)?;
        Ok(c)
    }

    /// Checks the nesting and dither relations the cancellations rely on.
    pub fn check_nesting(&self) -> Result<()> {
        let users = [
            (1, self.alpha1, &self.lattice1, self.gamma, self.d1_zero),
            (2, self.alpha2, &self.lattice2, self.beta, self.d2_zero),
        ];
        for (i, alpha, lattice, dither_coeff, dither_zero) in users {
            let factor = self.alpha_r / alpha;
            if !ScalarLattice::is_scaled_copy(lattice, &self.lattice_r, factor) {
                return Err(Error::Precondition(format!(
                    "(alpha_r/alpha{i})·Λ{i} is not Λ_r: {factor}·{} ≠ {}",
                    lattice.step(),
                    self.lattice_r.step()
                )));
            }
            if !dither_zero && (dither_coeff - factor).abs() > 1e-12 * factor {
                return Err(Error::Precondition(format!(
                    "decoder dither coefficient for user {i} is {dither_coeff}, expected {factor}"
                )));
            }
        }
        Ok(())
    }

    pub fn check_powers(&self, params: &ChannelParams) -> Result<()> {
        for (i, lattice, p) in [
            (1, &self.lattice1, params.p1),
            (2, &self.lattice2, params.p2),
        ] {
            let s = lattice.second_moment();
            if s > p * (1.0 + POWER_RTOL) {
                return Err(Error::Precondition(format!(
                    "sigma{i}^2 = {s} exceeds P{i} = {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Builds a preset with its MMSE scaling factor.
pub fn build_preset(preset: Preset, params: &ChannelParams) -> Result<SchemeConfig> {
    check_preconditions(preset, params)?;
    let cfg = assemble(preset, params, mmse_alpha_r(preset, params))?;
    for a in [cfg.alpha1, cfg.alpha2, cfg.alpha_r] {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Precondition(format!(
                "scaling factor {a} outside [0, 1]"
            )));
        }
    }
    cfg.check_nesting()?;
    cfg.check_powers(params)?;
    Ok(cfg)
}

/// Builds a preset with the decoder scaling `α_r` forced to `alpha_r`.
///
/// The decoding lattice keeps its MMSE-design second moment and the helper
/// lattice is rescaled to stay nested, so transmit powers are not checked.
/// Meant for probing the SINR around the optimum.
pub fn build_preset_with_alpha(
    preset: Preset,
    params: &ChannelParams,
    alpha_r: f64,
) -> Result<SchemeConfig> {
    check_preconditions(preset, params)?;
    if !(alpha_r.is_finite() && alpha_r > 0.0) {
        return Err(invalid(format!("alpha_r must be positive, got {alpha_r}")));
    }
    let cfg = assemble(preset, params, alpha_r)?;
    cfg.check_nesting()?;
    Ok(cfg)
}

/// The MMSE value of `α_r` for a preset.
pub fn mmse_alpha_r(preset: Preset, params: &ChannelParams) -> f64 {
    match preset {
        Preset::T1Case1 | Preset::T1Case4 => mmse_alpha(SchemeKind::ImbalancedUser2, params),
        Preset::T1Case2 | Preset::T1Case3 => mmse_alpha(SchemeKind::ImbalancedUser1, params),
        Preset::T2Balanced => mmse_alpha(SchemeKind::Balanced, params),
        Preset::T3Case1 => mmse_alpha(SchemeKind::GeneralNearly, params),
        Preset::T3Case2 => {
            mmse_alpha(SchemeKind::GeneralNearly, params) * (params.p2 / params.p1).sqrt()
        }
    }
}

fn check_preconditions(preset: Preset, params: &ChannelParams) -> Result<()> {
    params.validate()?;
    let r = residual(params);
    let (p1, p2) = (params.p1, params.p2);
    match preset {
        Preset::T1Case1 | Preset::T1Case4 => {
            if !weak_user2_condition(params) {
                return Err(Error::Precondition(format!(
                    "{preset} needs P1 >= P2((P2+N+E1+E2)/P2)^2 = {}, got P1 = {p1}",
                    p2 * ((p2 + r) / p2).powi(2)
                )));
            }
        }
        Preset::T1Case2 | Preset::T1Case3 => {
            if !weak_user1_condition(params) {
                return Err(Error::Precondition(format!(
                    "{preset} needs P2 >= P1((P1+N+E1+E2)/P1)^2 = {}, got P2 = {p2}",
                    p1 * ((p1 + r) / p1).powi(2)
                )));
            }
        }
        Preset::T2Balanced => {
            if !powers_balanced(p1, p2) {
                return Err(Error::Precondition(format!(
                    "{preset} needs P1 = P2, got P1 = {p1}, P2 = {p2}"
                )));
            }
        }
        Preset::T3Case1 | Preset::T3Case2 => {
            if classify_regime(params) == Regime::Imbalanced {
                return Err(Error::Precondition(format!(
                    "{preset} needs N+E1+E2 >= sqrt(P1 P2) - min(P1, P2) (nearly balanced)"
                )));
            }
            let bracket = |lo: f64, hi: f64| lo <= hi && hi <= lo * ((lo + r) / r).powi(2);
            if !(bracket(p1, p2) || bracket(p2, p1)) {
                return Err(Error::Precondition(format!(
                    "{preset} needs P1 <= P2 <= P1((P1+N+E1+E2)/(N+E1+E2))^2 or its mirror"
                )));
            }
        }
    }
    Ok(())
}

fn assemble(preset: Preset, params: &ChannelParams, a: f64) -> Result<SchemeConfig> {
    let (p1, p2) = (params.p1, params.p2);
    // (α₁, α₂, k₁, k₂, k_r, β, γ, σ² of Λ, V₁, V₂, D₁ = 0, D₂ = 0)
    let (alpha1, alpha2, k1, k2, kr, beta, gamma, base_power, v1, v2, d1z, d2z) = match preset {
        Preset::T1Case1 => (
            1.0,
            a,
            1.0,
            a,
            a,
            1.0,
            a,
            p2 / (a * a),
            false,
            true,
            false,
            false,
        ),
        Preset::T1Case2 => (
            a,
            1.0,
            a,
            1.0,
            a,
            0.0,
            1.0,
            p1 / (a * a),
            false,
            true,
            false,
            true,
        ),
        Preset::T1Case3 => (
            a,
            1.0,
            a,
            1.0,
            a,
            a,
            1.0,
            p1 / (a * a),
            true,
            false,
            false,
            false,
        ),
        Preset::T1Case4 => (
            1.0,
            a,
            1.0,
            a,
            a,
            1.0,
            0.0,
            p2 / (a * a),
            true,
            false,
            true,
            false,
        ),
        Preset::T2Balanced => (
            a,
            a,
            1.0,
            1.0,
            1.0,
            1.0,
            1.0,
            p1.min(p2),
            true,
            true,
            false,
            false,
        ),
        Preset::T3Case1 => {
            let ratio = (p1 / p2).sqrt();
            let a2 = a / ratio;
            (
                a, a2, ratio, 1.0, ratio, ratio, 1.0, p2, true, false, false, false,
            )
        }
        Preset::T3Case2 => {
            let ratio = (p2 / p1).sqrt();
            let a1 = a / ratio;
            (
                a1, a, 1.0, ratio, ratio, 1.0, ratio, p1, true, false, false, false,
            )
        }
    };
    let base = ScalarLattice::for_power(base_power)?;
    Ok(SchemeConfig {
        preset,
        alpha1,
        alpha2,
        alpha_r: a,
        k1,
        k2,
        kr,
        beta,
        gamma,
        base,
        lattice1: base.scaled(k1)?,
        lattice2: base.scaled(k2)?,
        lattice_r: base.scaled(kr)?,
        v1_active: v1,
        v2_active: v2,
        d1_zero: d1z,
        d2_zero: d2z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p1: f64, p2: f64, n: f64, e1: f64, e2: f64) -> ChannelParams {
        ChannelParams::new(p1, p2, n, e1, e2).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn labels_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.label().parse::<Preset>().unwrap(), p);
        }
        assert!("T4-Case9".parse::<Preset>().is_err());
    }

    #[test]
    fn t1_case1_corner_example() {
        // P₂ = 4, residual = 2, P₁ = P₂((P₂+r)/P₂)² = 9
        let p = params(9.0, 4.0, 1.0, 0.5, 0.5);
        let c = build_preset(Preset::T1Case1, &p).unwrap();
        assert!((c.alpha2 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!((c.alpha1, c.beta, c.k1), (1.0, 1.0, 1.0));
        assert_eq!((c.k2, c.kr, c.gamma), (c.alpha2, c.alpha2, c.alpha2));
        assert!(rel(c.lattice1.second_moment(), 9.0) < 1e-9);
        assert!(rel(c.lattice2.second_moment(), 4.0) < 1e-9);
        assert!(ScalarLattice::is_scaled_copy(
            &c.lattice1,
            &c.lattice2,
            c.alpha2
        ));
        assert!(!c.v1_active && c.v2_active);
        assert!(rel(c.analytic_noise_power(&p), 4.0 / 3.0) < 1e-12);
        assert!(rel(c.analytic_sinr(&p), 3.0) < 1e-12);
    }

    #[test]
    fn t1_helper_backs_off_above_corner() {
        let p = params(100.0, 4.0, 1.0, 0.5, 0.5);
        let c = build_preset(Preset::T1Case1, &p).unwrap();
        assert!(rel(c.lattice2.second_moment(), 4.0) < 1e-9);
        assert!(rel(c.lattice1.second_moment(), 9.0) < 1e-9);
        assert!(rel(c.analytic_sinr(&p), 3.0) < 1e-12);
    }

    #[test]
    fn t2_balanced_example() {
        let p = params(10.0, 10.0, 1.0, 2.0, 2.0);
        let c = build_preset(Preset::T2Balanced, &p).unwrap();
        assert!((c.alpha_r - 0.8).abs() < 1e-15);
        assert_eq!(c.alpha1, c.alpha_r);
        assert_eq!(c.alpha2, c.alpha_r);
        assert!(rel(c.lattice1.second_moment(), 10.0) < 1e-12);
        assert!(rel(c.lattice2.second_moment(), 10.0) < 1e-12);
        assert!(rel(c.analytic_noise_power(&p), 4.0) < 1e-12);
    }

    #[test]
    fn t3_case1_example() {
        let p = params(10.0, 5.0, 1.0, 1.0, 1.0);
        let c = build_preset(Preset::T3Case1, &p).unwrap();
        assert!((c.alpha1 - 0.948_392_656_214_748_6).abs() < 1e-12);
        assert!((c.alpha1 / c.alpha2 - 2f64.sqrt()).abs() < 1e-12);
        assert!(rel(c.lattice1.second_moment(), 10.0) < 1e-9);
        assert!(rel(c.lattice2.second_moment(), 5.0) < 1e-9);
        // optimized SINR reproduces the nearly-balanced rate
        let r = 0.5 * c.analytic_sinr(&p).log2();
        assert!((r - 0.696_082_814_085_900_2).abs() < 1e-12);
    }

    #[test]
    fn t3_cases_share_the_same_sinr() {
        let p = params(10.0, 5.0, 1.0, 1.0, 1.0);
        let a = build_preset(Preset::T3Case1, &p).unwrap();
        let b = build_preset(Preset::T3Case2, &p).unwrap();
        assert!(rel(a.analytic_sinr(&p), b.analytic_sinr(&p)) < 1e-12);
        assert!(rel(b.lattice2.second_moment(), 5.0) < 1e-9);
    }

    #[test]
    fn every_corner_preset_hits_the_single_user_rate() {
        let strong1 = params(100.0, 4.0, 1.0, 0.5, 0.5);
        let strong2 = params(4.0, 100.0, 1.0, 0.5, 0.5);
        for (preset, p) in [
            (Preset::T1Case1, strong1),
            (Preset::T1Case4, strong1),
            (Preset::T1Case2, strong2),
            (Preset::T1Case3, strong2),
        ] {
            let c = build_preset(preset, &p).unwrap();
            assert!(rel(c.analytic_sinr(&p), 3.0) < 1e-12, "{preset}");
            c.check_powers(&p).unwrap();
        }
    }

    #[test]
    fn preconditions_name_the_inequality() {
        let p = params(5.0, 4.0, 1.0, 0.5, 0.5);
        match build_preset(Preset::T1Case1, &p) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("P1 >= P2")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(build_preset(Preset::T1Case2, &p).is_err());
        assert!(build_preset(Preset::T2Balanced, &p).is_err());
        assert!(build_preset(Preset::T3Case1, &params(100.0, 4.0, 1.0, 0.5, 0.5)).is_err());
    }

    #[test]
    fn alpha_override_keeps_nesting() {
        let p = params(9.0, 4.0, 1.0, 0.5, 0.5);
        let c = build_preset_with_alpha(Preset::T1Case1, &p, 0.7).unwrap();
        assert_eq!(c.alpha_r, 0.7);
        assert!(rel(c.lattice2.second_moment(), 4.0) < 1e-12);
        c.check_nesting().unwrap();
        assert!(build_preset_with_alpha(Preset::T1Case1, &p, 0.0).is_err());
    }

    #[test]
    fn perturbed_lattice_fails_nesting() {
        let p = params(9.0, 4.0, 1.0, 0.5, 0.5);
        let c = build_preset(Preset::T1Case1, &p).unwrap();
        assert!(c
            .with_perturbed_lattice2(0.01)
            .unwrap()
            .check_nesting()
            .is_err());
    }
}
