//! One-dimensional lattice primitives.
//!
//! Every scheme in this crate uses scaled copies of a single base lattice,
//! applied independently per dimension, so an `n`-dimensional signal lives on
//! the product lattice `(step·Z)^n`. The quantizer breaks ties toward negative
//! infinity, which makes the fundamental cell the half-open interval
//! `(-step/2, step/2]`.

use std::f64::consts::{E, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Normalized second moment of any one-dimensional lattice.
pub const SCALAR_NSM: f64 = 1.0 / 12.0;

/// Limit of the normalized second moment for lattices that are good for
/// quantization, `1/(2πe)`.
pub const GOOD_LATTICE_NSM: f64 = 1.0 / (2.0 * PI * E);

const SCALED_COPY_RTOL: f64 = 1e-12;

/// The lattice `step·Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarLattice {
    step: f64,
}

impl ScalarLattice {
    pub fn new(step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid(format!(
                "lattice step must be positive and finite, got {step}"
            )));
        }
        Ok(Self { step })
    }

    /// Lattice whose uniform cell has the given second moment, i.e.
    /// `step = sqrt(12·power)`.
    pub fn for_power(target_power: f64) -> Result<Self> {
        if !(target_power.is_finite() && target_power > 0.0) {
            return Err(invalid(format!(
                "target power must be positive and finite, got {target_power}"
            )));
        }
        Self::new((12.0 * target_power).sqrt())
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Second moment per dimension of the uniform distribution on the cell.
    pub fn second_moment(&self) -> f64 {
        self.step * self.step / 12.0
    }

    /// The lattice `factor·self`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.step * factor)
    }

    /// Nearest lattice point to `x`.
    pub fn quantize(&self, x: f64) -> Result<f64> {
        check_finite(x)?;
        Ok(self.nearest(x))
    }

    /// `x mod Λ = x - Q(x)`, a value in `(-step/2, step/2]`.
    pub fn reduce(&self, x: f64) -> Result<f64> {
        check_finite(x)?;
        Ok(self.fold(x))
    }

    /// Unchecked quantizer for inputs already known to be finite.
    #[inline]
    pub fn nearest(&self, x: f64) -> f64 {
        self.nearest_index(x) * self.step
    }

    /// Unchecked modulo reduction for inputs already known to be finite.
    #[inline]
    pub fn fold(&self, x: f64) -> f64 {
        x - self.nearest_index(x) * self.step
    }

    // Candidates are compared on the residual actually computed in floating
    // point, so the result of `fold` is always a fixed point of `fold`.
    #[inline]
    fn nearest_index(&self, x: f64) -> f64 {
        let guess = (x / self.step).round();
        let mut best = guess;
        let mut best_dist = (x - guess * self.step).abs();
        for cand in [guess - 1.0, guess + 1.0] {
            let dist = (x - cand * self.step).abs();
            if dist < best_dist || (dist == best_dist && cand < best) {
                best = cand;
                best_dist = dist;
            }
        }
        best
    }

    /// `G(Λ) = σ²/V²`, which is `1/12` for every scalar lattice.
    pub fn normalized_second_moment(&self) -> f64 {
        self.second_moment() / (self.step * self.step)
    }

    /// Rate lost to the cubic cell relative to a good high-dimensional
    /// quantizer: `½·log₂(2πe·G(Λ))` bits.
    pub fn shaping_penalty_bits(&self) -> f64 {
        shaping_penalty_for_nsm(self.normalized_second_moment())
    }

    /// Differential entropy of the uniform law on the cell, `log₂(step)` bits.
    pub fn entropy_uniform_cell(&self) -> f64 {
        self.step.log2()
    }

    /// Draws a dither uniform on the fundamental cell.
    pub fn sample_dither<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.step * unit_cell_sample(rng)
    }

    /// True when `fine = factor·coarse`, in which case `factor·Q_coarse(x)`
    /// is always a point of `fine`.
    pub fn is_scaled_copy(coarse: &ScalarLattice, fine: &ScalarLattice, factor: f64) -> bool {
        if !(factor.is_finite() && factor > 0.0) {
            return false;
        }
        (coarse.step * factor - fine.step).abs() <= SCALED_COPY_RTOL * fine.step
    }

    /// Probability-preserving index of `x` (already reduced) into one of
    /// `bins` equal slices of the cell.
    pub fn cell_bin(&self, reduced: f64, bins: usize) -> usize {
        let pos = reduced / self.step + 0.5;
        ((pos * bins as f64) as usize).min(bins - 1)
    }
}

/// `½·log₂(2πe·G)` for a lattice with normalized second moment `g`.
pub fn shaping_penalty_for_nsm(g: f64) -> f64 {
    0.5 * (2.0 * PI * E * g).log2()
}

/// Uniform sample on the unit cell `(-1/2, 1/2]`.
#[inline]
pub fn unit_cell_sample<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    0.5 - rng.random::<f64>()
}

fn check_finite(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("lattice input must be finite, got {x}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lat(step: f64) -> ScalarLattice {
        ScalarLattice::new(step).unwrap()
    }

    // Brute force: scan the integer neighbourhood, keep the smallest index
    // among the closest points.
    fn quantize_oracle(step: f64, x: f64) -> f64 {
        let centre = (x / step).floor() as i64;
        let mut best = None::<(f64, i64)>;
        for k in centre - 3..=centre + 3 {
            let d = (x - k as f64 * step).abs();
            match best {
                Some((bd, _)) if d >= bd => {}
                _ => best = Some((d, k)),
            }
        }
        best.unwrap().1 as f64 * step
    }

    #[test]
    fn quantize_examples() {
        let l = lat(2.0);
        assert_eq!(l.quantize(3.5).unwrap(), 4.0);
        assert_eq!(l.quantize(0.0).unwrap(), 0.0);
        assert_eq!(l.quantize(1.0).unwrap(), quantize_oracle(2.0, 1.0));
        assert_eq!(l.quantize(1.0).unwrap(), 0.0);
        assert_eq!(l.quantize(-1.0).unwrap(), -2.0);
    }

    #[test]
    fn reduce_examples() {
        let l = lat(2.0);
        assert_eq!(l.reduce(3.5).unwrap(), 3.5 - quantize_oracle(2.0, 3.5));
        assert_eq!(l.reduce(3.5).unwrap(), -0.5);
        assert_eq!(l.reduce(4.0).unwrap(), 0.0);
        assert_eq!(l.reduce(0.9).unwrap(), 0.9);
        // tie-break puts both cell edges on the upper side
        assert_eq!(l.reduce(1.0).unwrap(), 1.0);
        assert_eq!(l.reduce(-1.0).unwrap(), 1.0);
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let l = lat(1.0);
        assert!(l.quantize(f64::NAN).is_err());
        assert!(l.reduce(f64::INFINITY).is_err());
        assert!(ScalarLattice::new(0.0).is_err());
        assert!(ScalarLattice::new(-1.0).is_err());
        assert!(ScalarLattice::for_power(0.0).is_err());
        assert!(ScalarLattice::for_power(-3.0).is_err());
    }

    #[test]
    fn lattice_for_power_examples() {
        assert!((ScalarLattice::for_power(1.0 / 3.0).unwrap().step() - 2.0).abs() < 1e-15);
        assert_eq!(ScalarLattice::for_power(12.0).unwrap().step(), 12.0);
        for i in 0..12 {
            let p = 10f64.powf(-6.0 + 12.0 * i as f64 / 11.0);
            let l = ScalarLattice::for_power(p).unwrap();
            assert!((l.second_moment() - p).abs() <= 1e-12 * p, "p = {p}");
            let back = ScalarLattice::for_power(l.second_moment()).unwrap();
            assert!((back.step() - l.step()).abs() <= 1e-12 * l.step());
        }
    }

    #[test]
    fn moments_and_penalty() {
        assert_eq!(lat(2.0).normalized_second_moment(), 1.0 / 12.0);
        assert!((lat(7.0).normalized_second_moment() - 1.0 / 12.0).abs() < 1e-16);
        assert!((GOOD_LATTICE_NSM - 0.058_549_831_524_319_16).abs() < 1e-15);
        // high-precision value of ½log₂(2πe/12)
        let expected = 0.254_614_334_820_063;
        for step in [0.1, 1.0, 2.0, 1e4] {
            assert!((lat(step).shaping_penalty_bits() - expected).abs() < 1e-14);
        }
        assert!(shaping_penalty_for_nsm(GOOD_LATTICE_NSM).abs() < 1e-15);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(lat(2.0).entropy_uniform_cell(), 1.0);
        assert_eq!(lat(1.0).entropy_uniform_cell(), 0.0);
        for step in [0.3, 1.7, 40.0] {
            let l = lat(step);
            let gaussian_bound = 0.5 * (2.0 * PI * E * l.second_moment()).log2();
            assert!(
                (l.entropy_uniform_cell() - (gaussian_bound - l.shaping_penalty_bits())).abs()
                    < 1e-12
            );
        }
    }

    #[test]
    fn scaled_copy_detection() {
        let coarse = lat(3.0);
        let fine = lat(1.5);
        assert!(ScalarLattice::is_scaled_copy(&coarse, &fine, 0.5));
        assert!(!ScalarLattice::is_scaled_copy(&coarse, &fine, 0.4));
        assert!(!ScalarLattice::is_scaled_copy(&coarse, &fine, -0.5));
    }

    #[test]
    fn scaled_copy_cancels_after_reduction() {
        let coarse = lat(3.7);
        let factor = 2.0 / 3.0;
        let fine = coarse.scaled(factor).unwrap();
        assert!(ScalarLattice::is_scaled_copy(&coarse, &fine, factor));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let x: f64 = rand::Rng::random_range(&mut rng, -1e3..1e3);
            let point = factor * coarse.nearest(x);
            let r = fine.fold(point);
            // r is either ~0 or ~step when the rounding lands on the upper edge
            let dist = r.abs().min((r - fine.step()).abs());
            assert!(dist < 1e-9 * fine.step(), "x = {x}, residual {r}");
        }
    }

    #[test]
    fn dither_moments_and_support() {
        let l = lat(2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let d = l.sample_dither(&mut rng);
            assert_eq!(l.nearest(d), 0.0);
            sum += d;
            sum_sq += d * d;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 3.0 * (2.0 / 12f64.sqrt()) / 1e3);
        assert!((var - l.second_moment()).abs() < 0.01 * l.second_moment());
    }

    #[test]
    fn dither_is_reproducible() {
        let l = lat(5.0);
        let a: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            (0..100).map(|_| l.sample_dither(&mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            (0..100).map(|_| l.sample_dither(&mut rng)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn cell_bins_cover_range() {
        let l = lat(2.0);
        assert_eq!(l.cell_bin(1.0, 32), 31);
        assert_eq!(l.cell_bin(-0.999_999, 32), 0);
        assert_eq!(l.cell_bin(0.0, 32), 16);
    }

    proptest! {
        #[test]
        fn quantize_matches_oracle(step in 1e-3f64..1e3, x in -1e6f64..1e6) {
            let l = lat(step);
            let q = l.quantize(x).unwrap();
            let o = quantize_oracle(step, x);
            // equal up to floating ties of the two computed distances
            prop_assert!((x - q).abs() <= (x - o).abs() + 1e-9 * step);
        }

        #[test]
        fn reduce_lands_in_cell(step in 1e-3f64..1e3, x in -1e6f64..1e6) {
            let l = lat(step);
            let r = l.reduce(x).unwrap();
            prop_assert!(r > -step / 2.0 && r <= step / 2.0);
            prop_assert_eq!(l.quantize(r).unwrap(), 0.0);
        }

        #[test]
        fn reduce_is_idempotent(step in 1e-3f64..1e3, x in -1e6f64..1e6) {
            let l = lat(step);
            let r = l.fold(x);
            prop_assert_eq!(l.fold(r), r);
        }

        #[test]
        fn reduce_distributes_over_sums(step in 1e-2f64..1e2, x in -1e4f64..1e4, y in -1e4f64..1e4) {
            let l = lat(step);
            let lhs = l.fold(l.fold(x) + y);
            let rhs = l.fold(x + y);
            // compare on the circle: both edges of the cell are the same class
            let d = l.fold(lhs - rhs).abs();
            prop_assert!(d <= 1e-9 * step, "lhs {} rhs {}", lhs, rhs);
        }

        #[test]
        fn reduce_is_scale_equivariant(step in 1e-2f64..1e2, k in 1e-2f64..1e2, x in -1e3f64..1e3) {
            let l = lat(step);
            let lk = l.scaled(k).unwrap();
            let lhs = lk.fold(k * x);
            let rhs = k * l.fold(x);
            let d = lk.fold(lhs - rhs).abs();
            prop_assert!(d <= 1e-12 * lk.step() * (1.0 + (x / step).abs()), "lhs {} rhs {}", lhs, rhs);
        }
    }
}
