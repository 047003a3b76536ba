//! Closed-form achievable rates for the two-user Gaussian doubly dirty MAC
//! when each transmitter only holds an estimate `S̃ᵢ` of its interference,
//! with `E[(Sᵢ - S̃ᵢ)²] = Eᵢ`.
//!
//! All rates are in bits per channel use. The aggregate `E₁ + E₂ + N` (the
//! *residual*) plays the role the noise variance plays with perfect side
//! information, and it splits parameters into two regimes:
//!
//! * imbalanced: `residual ≤ √(P₁P₂) - min(P₁, P₂)`, sum rate
//!   `½·log₂(1 + min(P₁,P₂)/residual)`;
//! * nearly balanced: `residual ≥ √(P₁P₂) - min(P₁, P₂)`, sum rate given by the
//!   upper convex envelope of
//!   `[½·log₂((P₁+P₂+residual)/(2·residual + (√P₁-√P₂)²))]⁺`.
//!
//! The boundary belongs to the imbalanced regime; both formulas agree there.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::envelope::{envelope_along_path, EnvelopePoint, GridSpec, PathEnvelope};
use crate::error::{invalid, Error, Result};

/// Relative tolerance for regime comparisons.
const REGIME_RTOL: f64 = 1e-12;
/// Relative tolerance for deciding `P₁ = P₂`.
const BALANCE_RTOL: f64 = 1e-9;
/// Relative tolerance on the corner-point power relations.
const CONDITION_RTOL: f64 = 1e-12;
/// Interference power used when none is given, relative to `max(P₁, P₂)`.
pub const DEFAULT_INTERFERENCE_FACTOR: f64 = 1e4;

/// Powers of the doubly dirty MAC with estimated side information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub p1: f64,
    pub p2: f64,
    pub noise: f64,
    pub e1: f64,
    pub e2: f64,
    /// Variance of each interference signal. Only the simulator reads it.
    pub interference_power: f64,
}

impl ChannelParams {
    /// Builds validated parameters with interference power
    /// `1e4·max(P₁, P₂)`.
    pub fn new(p1: f64, p2: f64, noise: f64, e1: f64, e2: f64) -> Result<Self> {
        let q = DEFAULT_INTERFERENCE_FACTOR * p1.max(p2);
        Self::with_interference(p1, p2, noise, e1, e2, q)
    }

    pub fn with_interference(
        p1: f64,
        p2: f64,
        noise: f64,
        e1: f64,
        e2: f64,
        interference_power: f64,
    ) -> Result<Self> {
        let p = Self {
            p1,
            p2,
            noise,
            e1,
            e2,
            interference_power,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("p1", self.p1),
            ("p2", self.p2),
            ("noise", self.noise),
            ("interference_power", self.interference_power),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [("e1", self.e1), ("e2", self.e2)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(format!(
                    "{name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Same powers with perfect side information (`E₁ = E₂ = 0`).
    pub fn full_si(&self) -> Self {
        Self {
            e1: 0.0,
            e2: 0.0,
            ..*self
        }
    }

    pub fn with_distortion(&self, e1: f64, e2: f64) -> Result<Self> {
        let p = Self { e1, e2, ..*self };
        p.validate()?;
        Ok(p)
    }

    pub fn with_powers(&self, p1: f64, p2: f64) -> Result<Self> {
        let p = Self { p1, p2, ..*self };
        p.validate()?;
        Ok(p)
    }

    pub fn with_interference_power(&self, q: f64) -> Result<Self> {
        let p = Self {
            interference_power: q,
            ..*self
        };
        p.validate()?;
        Ok(p)
    }

    pub fn min_power(&self) -> f64 {
        self.p1.min(self.p2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Imbalanced,
    NearlyBalanced,
    ExactlyBalanced,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Imbalanced => "Imbalanced",
            Regime::NearlyBalanced => "NearlyBalanced",
            Regime::ExactlyBalanced => "ExactlyBalanced",
        }
    }

    pub fn is_nearly(&self) -> bool {
        matches!(self, Regime::NearlyBalanced | Regime::ExactlyBalanced)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `E₁ + E₂ + N`.
pub fn residual(params: &ChannelParams) -> f64 {
    params.e1 + params.e2 + params.noise
}

/// `√(P₁P₂) - min(P₁, P₂)`, the residual at which the regimes meet.
pub fn imbalance_threshold(p1: f64, p2: f64) -> f64 {
    (p1 * p2).sqrt() - p1.min(p2)
}

fn is_imbalanced(params: &ChannelParams) -> bool {
    let r = residual(params);
    let th = imbalance_threshold(params.p1, params.p2);
    r <= th + REGIME_RTOL * r.max(th.abs())
}

pub fn powers_balanced(p1: f64, p2: f64) -> bool {
    (p1 - p2).abs() <= BALANCE_RTOL * p1.max(p2)
}

pub fn classify_regime(params: &ChannelParams) -> Regime {
    if is_imbalanced(params) {
        Regime::Imbalanced
    } else if powers_balanced(params.p1, params.p2) {
        Regime::ExactlyBalanced
    } else {
        Regime::NearlyBalanced
    }
}

fn regime_error(params: &ChannelParams, expected: Regime) -> Error {
    Error::RegimeViolation {
        expected,
        residual: residual(params),
        threshold: imbalance_threshold(params.p1, params.p2),
    }
}

fn half_log2(x: f64) -> f64 {
    0.5 * x.log2()
}

/// Imbalanced-regime sum rate `½·log₂(1 + min(P₁,P₂)/residual)`.
pub fn sum_rate_imbalanced(params: &ChannelParams) -> Result<f64> {
    if !is_imbalanced(params) {
        return Err(regime_error(params, Regime::Imbalanced));
    }
    Ok(imbalanced_formula(params))
}

/// The imbalanced formula without the regime check.
pub fn imbalanced_formula(params: &ChannelParams) -> f64 {
    half_log2(1.0 + params.min_power() / residual(params))
}

/// Which of the two corner-point power relations holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CornerBranch {
    /// `P₂ ≥ P₁((P₁+residual)/P₁)²`: user 1 is the weak user.
    WeakUser1,
    /// `P₁ ≥ P₂((P₂+residual)/P₂)²`: user 2 is the weak user.
    WeakUser2,
}

/// `P₂ ≥ P₁((P₁ + residual)/P₁)²`.
pub fn weak_user1_condition(params: &ChannelParams) -> bool {
    let r = residual(params);
    let need = params.p1 * ((params.p1 + r) / params.p1).powi(2);
    params.p2 >= need * (1.0 - CONDITION_RTOL)
}

/// `P₁ ≥ P₂((P₂ + residual)/P₂)²`.
pub fn weak_user2_condition(params: &ChannelParams) -> bool {
    let r = residual(params);
    let need = params.p2 * ((params.p2 + r) / params.p2).powi(2);
    params.p1 >= need * (1.0 - CONDITION_RTOL)
}

/// The two single-user corners of the imbalanced region; time sharing
/// between them traces the sum-rate line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerPoints {
    pub branch: CornerBranch,
    pub value: f64,
    /// `(R₁, 0)`.
    pub user1_corner: (f64, f64),
    /// `(0, R₂)`.
    pub user2_corner: (f64, f64),
}

impl CornerPoints {
    /// Rate pair at time-sharing fraction `lambda` on the user-1 corner.
    pub fn time_share(&self, lambda: f64) -> (f64, f64) {
        (
            lambda * self.user1_corner.0,
            (1.0 - lambda) * self.user2_corner.1,
        )
    }
}

pub fn corner_points_imbalanced(params: &ChannelParams) -> Result<CornerPoints> {
    let r = residual(params);
    let (branch, value) = if weak_user1_condition(params) {
        (CornerBranch::WeakUser1, half_log2(1.0 + params.p1 / r))
    } else if weak_user2_condition(params) {
        (CornerBranch::WeakUser2, half_log2(1.0 + params.p2 / r))
    } else {
        return Err(Error::ConditionViolation(format!(
            "neither P2 >= P1((P1+r)/P1)^2 nor P1 >= P2((P2+r)/P2)^2 holds \
             (P1 = {}, P2 = {}, r = {r})",
            params.p1, params.p2
        )));
    };
    Ok(CornerPoints {
        branch,
        value,
        user1_corner: (value, 0.0),
        user2_corner: (0.0, value),
    })
}

/// `[½·log₂(½ + P/residual)]⁺`.
pub fn raw_sum_rate_balanced(p: f64, residual: f64) -> f64 {
    half_log2(0.5 + p / residual).max(0.0)
}

/// `[½·log₂((P₁+P₂+r)/(2r + (√P₁-√P₂)²))]⁺` without a regime check.
pub fn nearly_formula(p1: f64, p2: f64, residual: f64) -> f64 {
    let gap = p1.sqrt() - p2.sqrt();
    half_log2((p1 + p2 + residual) / (2.0 * residual + gap * gap)).max(0.0)
}

pub fn raw_sum_rate_nearly(params: &ChannelParams) -> Result<f64> {
    if is_imbalanced(params) {
        return Err(regime_error(params, Regime::NearlyBalanced));
    }
    Ok(nearly_formula(params.p1, params.p2, residual(params)))
}

/// An enveloped sum rate together with the sampled curve it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumRateEnvelope {
    /// Samples along the power path; `x` is user 1's power `t·P₁`.
    pub points: Vec<EnvelopePoint>,
    pub raw: f64,
    pub value: f64,
}

impl SumRateEnvelope {
    fn from_path(path: PathEnvelope, p1: f64) -> Self {
        let points = path
            .points
            .into_iter()
            .map(|pt| EnvelopePoint { x: pt.x * p1, ..pt })
            .collect();
        Self {
            points,
            raw: path.raw,
            value: path.value,
        }
    }
}

/// Envelope of `[½·log₂(½ + P/residual)]⁺` over power, evaluated at `p`.
pub fn sum_rate_exactly_balanced(
    p: f64,
    residual: f64,
    grid: &GridSpec,
) -> Result<SumRateEnvelope> {
    if !(p.is_finite() && p > 0.0 && residual.is_finite() && residual > 0.0) {
        return Err(invalid("power and residual must be positive and finite"));
    }
    let path = envelope_along_path(|t| raw_sum_rate_balanced(t * p, residual), grid)?;
    Ok(SumRateEnvelope::from_path(path, p))
}

/// Envelope of the nearly-balanced rate along `t ↦ (t·P₁, t·P₂)`, at `t = 1`.
pub fn sum_rate_nearly_balanced(
    params: &ChannelParams,
    grid: &GridSpec,
) -> Result<SumRateEnvelope> {
    if is_imbalanced(params) {
        return Err(regime_error(params, Regime::NearlyBalanced));
    }
    let r = residual(params);
    let (p1, p2) = (params.p1, params.p2);
    let path = envelope_along_path(|t| nearly_formula(t * p1, t * p2, r), grid)?;
    Ok(SumRateEnvelope::from_path(path, p1))
}

/// Sum rate with perfect side information, `½·log₂(1 + min(P₁,P₂)/N)`.
pub fn full_si_imbalanced(p1: f64, p2: f64, noise: f64) -> f64 {
    0.5 * (1.0 + p1.min(p2) / noise).log2()
}

/// Pre-envelope perfect-side-information nearly-balanced rate.
pub fn full_si_nearly_raw(p1: f64, p2: f64, noise: f64) -> f64 {
    let d = (p1.sqrt() - p2.sqrt()).powi(2);
    (0.5 * ((p1 + p2 + noise) / (2.0 * noise + d)).log2()).max(0.0)
}

/// Pre-envelope perfect-side-information balanced rate.
pub fn full_si_balanced_raw(p: f64, noise: f64) -> f64 {
    (0.5 * (0.5 + p / noise).log2()).max(0.0)
}

/// Summary of a dispatched sum-rate evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SumRate {
    pub regime: Regime,
    /// Value before enveloping.
    pub raw: f64,
    pub value: f64,
    /// Present for the balanced regimes.
    pub envelope: Option<SumRateEnvelope>,
}

/// Perfect-side-information sum rate, dispatched on the regime the powers
/// fall into with `E₁ = E₂ = 0`.
pub fn baseline_full_si(params: &ChannelParams, grid: &GridSpec) -> Result<SumRate> {
    let full = params.full_si();
    let (p1, p2, n) = (full.p1, full.p2, full.noise);
    let regime = classify_regime(&full);
    Ok(match regime {
        Regime::Imbalanced => {
            let v = full_si_imbalanced(p1, p2, n);
            SumRate {
                regime,
                raw: v,
                value: v,
                envelope: None,
            }
        }
        Regime::ExactlyBalanced => {
            let path = envelope_along_path(|t| full_si_balanced_raw(t * p1, n), grid)?;
            let env = SumRateEnvelope::from_path(path, p1);
            SumRate {
                regime,
                raw: env.raw,
                value: env.value,
                envelope: Some(env),
            }
        }
        Regime::NearlyBalanced => {
            let path = envelope_along_path(|t| full_si_nearly_raw(t * p1, t * p2, n), grid)?;
            let env = SumRateEnvelope::from_path(path, p1);
            SumRate {
                regime,
                raw: env.raw,
                value: env.value,
                envelope: Some(env),
            }
        }
    })
}

/// Partial-side-information sum rate, dispatched on the regime.
pub fn partial_si_sum_rate(params: &ChannelParams, grid: &GridSpec) -> Result<SumRate> {
    let regime = classify_regime(params);
    Ok(match regime {
        Regime::Imbalanced => {
            let v = sum_rate_imbalanced(params)?;
            SumRate {
                regime,
                raw: v,
                value: v,
                envelope: None,
            }
        }
        Regime::ExactlyBalanced => {
            let env = sum_rate_exactly_balanced(params.p1, residual(params), grid)?;
            SumRate {
                regime,
                raw: env.raw,
                value: env.value,
                envelope: Some(env),
            }
        }
        Regime::NearlyBalanced => {
            let env = sum_rate_nearly_balanced(params, grid)?;
            SumRate {
                regime,
                raw: env.raw,
                value: env.value,
                envelope: Some(env),
            }
        }
    })
}

/// Capacity of the single-user dirty-paper channel when the encoder only
/// knows the interference up to distortion `d`: `½·log₂(1 + Pₓ/(d + N))`.
pub fn dpc_capacity_partial_si(px: f64, d: f64, n: f64) -> f64 {
    half_log2(1.0 + px / (d + n))
}

/// The lattice scheme whose MMSE scaling factor is requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeKind {
    /// User 2 decodes on its own lattice, user 1 helps.
    ImbalancedUser2,
    /// Decoding on user 1's lattice.
    ImbalancedUser1,
    /// `P₁ = P₂ = P`, common lattice.
    Balanced,
    /// Nearly balanced with `α₁/α₂ = √(P₁/P₂)`; returns `α₁`.
    GeneralNearly,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 4] = [
        SchemeKind::ImbalancedUser2,
        SchemeKind::ImbalancedUser1,
        SchemeKind::Balanced,
        SchemeKind::GeneralNearly,
    ];
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ImbalancedUser2" => Ok(SchemeKind::ImbalancedUser2),
            "ImbalancedUser1" => Ok(SchemeKind::ImbalancedUser1),
            "Balanced" => Ok(SchemeKind::Balanced),
            "GeneralNearly" => Ok(SchemeKind::GeneralNearly),
            other => Err(invalid(format!("unknown scheme kind '{other}'"))),
        }
    }
}

/// Scaling factor maximizing the post-modulo SINR of the given scheme.
pub fn mmse_alpha(kind: SchemeKind, params: &ChannelParams) -> f64 {
    let r = residual(params);
    let (p1, p2) = (params.p1, params.p2);
    match kind {
        SchemeKind::ImbalancedUser2 => p2 / (p2 + r),
        SchemeKind::ImbalancedUser1 => p1 / (p1 + r),
        SchemeKind::Balanced => 2.0 * p1 / (2.0 * p1 + r),
        SchemeKind::GeneralNearly => p1.sqrt() * (p1.sqrt() + p2.sqrt()) / (p1 + p2 + r),
    }
}

/// Post-modulo SINR of a scheme as a function of its scaling factor
/// (`α₁` for [`SchemeKind::GeneralNearly`]).
pub fn sinr_objective(kind: SchemeKind, params: &ChannelParams, alpha: f64) -> f64 {
    let r = residual(params);
    let (p1, p2) = (params.p1, params.p2);
    let a2 = alpha * alpha;
    let b = 1.0 - alpha;
    match kind {
        SchemeKind::ImbalancedUser2 => p2 / (b * b * p2 + a2 * r),
        SchemeKind::ImbalancedUser1 => p1 / (b * b * p1 + a2 * r),
        SchemeKind::Balanced => p1 / (2.0 * b * b * p1 + a2 * r),
        SchemeKind::GeneralNearly => {
            let alpha2 = alpha * (p2 / p1).sqrt();
            let ratio_sq = p1 / p2;
            p1 / (b * b * p1 + ratio_sq * (1.0 - alpha2).powi(2) * p2 + a2 * r)
        }
    }
}

/// A polygonal achievable region, vertices counter-clockwise from `(0, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRegion {
    pub vertices: Vec<(f64, f64)>,
    pub regime: Regime,
    pub sum_rate: f64,
}

impl RateRegion {
    /// The time-sharing triangle `{R₁, R₂ ≥ 0, R₁ + R₂ ≤ sum_rate}`.
    pub fn triangle(sum_rate: f64, regime: Regime) -> Self {
        let c = sum_rate.max(0.0);
        Self {
            vertices: vec![(0.0, 0.0), (c, 0.0), (0.0, c)],
            regime,
            sum_rate: c,
        }
    }

    /// Whether `pt` lies in the (convex) region, up to `tol`.
    pub fn contains(&self, pt: (f64, f64), tol: f64) -> bool {
        let v = &self.vertices;
        (0..v.len()).all(|i| {
            let a = v[i];
            let b = v[(i + 1) % v.len()];
            (b.0 - a.0) * (pt.1 - a.1) - (b.1 - a.1) * (pt.0 - a.0) >= -tol
        })
    }
}

/// Partial-side-information region for the given parameters.
pub fn region_boundary(params: &ChannelParams, grid: &GridSpec) -> Result<RateRegion> {
    let s = partial_si_sum_rate(params, grid)?;
    Ok(RateRegion::triangle(s.value, s.regime))
}

/// Perfect-side-information region at the same powers and noise.
pub fn full_si_region(params: &ChannelParams, grid: &GridSpec) -> Result<RateRegion> {
    let s = baseline_full_si(params, grid)?;
    Ok(RateRegion::triangle(s.value, s.regime))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Containment {
    Equal,
    /// `a ⊊ b`.
    FirstInSecond,
    /// `b ⊊ a`.
    SecondInFirst,
    Incomparable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionComparison {
    pub relation: Containment,
    /// `b.sum_rate - a.sum_rate`.
    pub sum_rate_gap: f64,
}

pub fn compare_regions(a: &RateRegion, b: &RateRegion) -> RegionComparison {
    const TOL: f64 = 1e-12;
    let a_in_b = a.vertices.iter().all(|&p| b.contains(p, TOL));
    let b_in_a = b.vertices.iter().all(|&p| a.contains(p, TOL));
    let relation = match (a_in_b, b_in_a) {
        (true, true) => Containment::Equal,
        (true, false) => Containment::FirstInSecond,
        (false, true) => Containment::SecondInFirst,
        (false, false) => Containment::Incomparable,
    };
    RegionComparison {
        relation,
        sum_rate_gap: b.sum_rate - a.sum_rate,
    }
}
