//! Small statistics helpers shared by the simulator and its tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// P-value of Pearson's chi-square test of `counts` against the uniform law.
pub fn chi_square_uniform_pvalue(counts: &[u64]) -> f64 {
    let k = counts.len();
    assert!(k >= 2, "need at least two bins");
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return f64::NAN;
    }
    let expected = total as f64 / k as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    ChiSquared::new((k - 1) as f64)
        .expect("positive degrees of freedom")
        .sf(stat)
}

/// Running sums for the sample correlation of two streams.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CrossMoments {
    pub n: u64,
    pub sx: f64,
    pub sy: f64,
    pub sxx: f64,
    pub syy: f64,
    pub sxy: f64,
}

impl CrossMoments {
    #[inline]
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sxy += x * y;
    }

    pub fn merge(&mut self, other: &CrossMoments) {
        self.n += other.n;
        self.sx += other.sx;
        self.sy += other.sy;
        self.sxx += other.sxx;
        self.syy += other.syy;
        self.sxy += other.sxy;
    }

    /// Pearson correlation; NaN when either stream is constant.
    pub fn correlation(&self) -> f64 {
        let n = self.n as f64;
        let cov = self.sxy / n - (self.sx / n) * (self.sy / n);
        let vx = self.sxx / n - (self.sx / n).powi(2);
        let vy = self.syy / n - (self.sy / n).powi(2);
        if vx <= 0.0 || vy <= 0.0 {
            return f64::NAN;
        }
        cov / (vx * vy).sqrt()
    }
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let mut m = CrossMoments::default();
    for (&x, &y) in xs.iter().zip(ys) {
        m.push(x, y);
    }
    m.correlation()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfectly_flat_counts_have_unit_pvalue() {
        assert!((chi_square_uniform_pvalue(&[100; 32]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn skewed_counts_are_rejected() {
        let mut c = [1000u64; 32];
        c[0] = 1500;
        assert!(chi_square_uniform_pvalue(&c) < 1e-6);
    }

    #[test]
    fn pvalue_matches_reference_quantile() {
        // 31 degrees of freedom, upper 1% point 52.1914
        let stat_target = 52.191_395;
        // two bins carry the whole excess: stat = 2·d²/e
        let e = 1000.0;
        let d = (stat_target * e / 2.0f64).sqrt();
        let mut c = [1000u64; 32];
        c[0] = (e + d).round() as u64;
        c[1] = (e - d).round() as u64;
        let p = chi_square_uniform_pvalue(&c);
        assert!((p - 0.01).abs() < 2e-3, "p = {p}");
    }

    #[test]
    fn correlation_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((correlation(&x, &[2.0, 4.0, 6.0, 8.0]) - 1.0).abs() < 1e-12);
        assert!((correlation(&x, &[-1.0, -2.0, -3.0, -4.0]) + 1.0).abs() < 1e-12);
        assert!(correlation(&x, &[1.0; 4]).is_nan());
    }
}
