//! Upper convex envelope (least concave majorant) of sampled rate curves.
//!
//! Rates that are only achievable after time sharing with power control are
//! the envelope of the raw rate-versus-power curve. Curves are sampled along a
//! scaling path `t ↦ t·(P₁, P₂)` and the envelope is read off at `t = 1`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Minimum number of grid points accepted for an envelope evaluation.
pub const MIN_GRID_POINTS: usize = 16;
/// Default number of grid points.
pub const DEFAULT_GRID_POINTS: usize = 1025;

const MAX_SPAN_DOUBLINGS: u32 = 20;
const LOG_GRID_DECADES: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    /// Power coordinate.
    pub x: f64,
    /// Rate before enveloping.
    pub raw: f64,
    /// Envelope value.
    pub enveloped: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Log,
}

/// How a scaling path is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: usize,
    pub spacing: Spacing,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: DEFAULT_GRID_POINTS,
            spacing: Spacing::Linear,
        }
    }
}

impl GridSpec {
    pub fn linear(points: usize) -> Self {
        Self {
            points,
            spacing: Spacing::Linear,
        }
    }

    pub fn log(points: usize) -> Self {
        Self {
            points,
            spacing: Spacing::Log,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points < MIN_GRID_POINTS {
            return Err(invalid(format!(
                "grid needs at least {MIN_GRID_POINTS} points, got {}",
                self.points
            )));
        }
        Ok(())
    }

    /// Sample positions on `[0, span]`; always contains `0` and `1` when
    /// `span >= 1`.
    fn positions(&self, span: f64) -> Vec<f64> {
        let n = self.points;
        let mut t: Vec<f64> = match self.spacing {
            Spacing::Linear => (0..n).map(|i| span * i as f64 / (n - 1) as f64).collect(),
            Spacing::Log => {
                let lo = span * 10f64.powf(-LOG_GRID_DECADES);
                let ratio = (span / lo).ln();
                let mut v = Vec::with_capacity(n + 1);
                v.push(0.0);
                v.extend((0..n - 1).map(|i| lo * (ratio * i as f64 / (n - 2) as f64).exp()));
                v
            }
        };
        if span >= 1.0 && !t.contains(&1.0) {
            let at = t.partition_point(|&v| v < 1.0);
            t.insert(at, 1.0);
        }
        t
    }
}

/// Least concave majorant of `samples`, evaluated at every sample abscissa.
///
/// Samples must have strictly increasing `x`.
pub fn upper_convex_envelope(samples: &[(f64, f64)]) -> Result<Vec<EnvelopePoint>> {
    let hull = upper_hull(samples)?;
    Ok(evaluate_on_hull(samples, &hull))
}

/// Indices of the vertices of the upper hull, left to right.
fn upper_hull(samples: &[(f64, f64)]) -> Result<Vec<usize>> {
    if samples.len() < 2 {
        return Err(invalid("envelope needs at least two samples"));
    }
    for (i, w) in samples.windows(2).enumerate() {
        if w[0].0.partial_cmp(&w[1].0) != Some(std::cmp::Ordering::Less) {
            return Err(invalid(format!(
                "sample abscissae must be strictly increasing (index {})",
                i + 1
            )));
        }
    }
    if samples
        .iter()
        .any(|&(x, y)| !x.is_finite() || !y.is_finite())
    {
        return Err(invalid("samples must be finite"));
    }

    // Andrew's monotone chain, upper half only.
    let mut hull: Vec<usize> = Vec::with_capacity(samples.len());
    for i in 0..samples.len() {
        while hull.len() >= 2 {
            let a = samples[hull[hull.len() - 2]];
            let b = samples[hull[hull.len() - 1]];
            let c = samples[i];
            let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    Ok(hull)
}

fn evaluate_on_hull(samples: &[(f64, f64)], hull: &[usize]) -> Vec<EnvelopePoint> {
    let mut out = Vec::with_capacity(samples.len());
    let mut seg = 0;
    for (i, &(x, raw)) in samples.iter().enumerate() {
        while seg + 1 < hull.len() && hull[seg + 1] < i {
            seg += 1;
        }
        let on_vertex = hull[seg] == i || hull.get(seg + 1) == Some(&i);
        let enveloped = if on_vertex || seg + 1 == hull.len() {
            raw
        } else {
            let (x0, y0) = samples[hull[seg]];
            let (x1, y1) = samples[hull[seg + 1]];
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        };
        out.push(EnvelopePoint {
            x,
            raw,
            enveloped: enveloped.max(raw),
        });
    }
    out
}

/// Result of enveloping a curve along a scaling path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnvelope {
    /// Envelope samples; `x` is the scale factor `t`.
    pub points: Vec<EnvelopePoint>,
    /// Largest scale factor sampled.
    pub span: f64,
    /// Raw value at `t = 1`.
    pub raw: f64,
    /// Envelope value at `t = 1`.
    pub value: f64,
}

/// Envelopes `rate(t)` over `t ∈ [0, span]` and reads it at `t = 1`.
///
/// The span starts at 2 and doubles until the hull vertex at or right of
/// `t = 1` is an interior sample, so the chord through `t = 1` is not
/// truncated by the end of the grid.
pub fn envelope_along_path<F>(rate: F, grid: &GridSpec) -> Result<PathEnvelope>
where
    F: Fn(f64) -> f64,
{
    grid.validate()?;
    let mut span = 2.0;
    for doubling in 0..=MAX_SPAN_DOUBLINGS {
        let t = grid.positions(span);
        let samples: Vec<(f64, f64)> = t.iter().map(|&t| (t, rate(t))).collect();
        let hull = upper_hull(&samples)?;
        let one = t.partition_point(|&v| v < 1.0);
        let right = hull
            .iter()
            .copied()
            .find(|&h| h >= one)
            .unwrap_or(samples.len() - 1);
        if right + 1 < samples.len() || doubling == MAX_SPAN_DOUBLINGS {
            let points = evaluate_on_hull(&samples, &hull);
            let at = points[one];
            return Ok(PathEnvelope {
                raw: at.raw,
                value: at.enveloped,
                points,
                span,
            });
        }
        span *= 2.0;
    }
    unreachable!("loop returns on the final doubling")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Independent of the hull: the envelope at x_i is the best chord value
    // over all pairs straddling x_i.
    fn brute_envelope(samples: &[(f64, f64)]) -> Vec<f64> {
        let n = samples.len();
        (0..n)
            .map(|i| {
                let xi = samples[i].0;
                let mut best = samples[i].1;
                for j in 0..=i {
                    for k in i..n {
                        if k == j {
                            continue;
                        }
                        let (x0, y0) = samples[j];
                        let (x1, y1) = samples[k];
                        best = best.max(y0 + (y1 - y0) * (xi - x0) / (x1 - x0));
                    }
                }
                best
            })
            .collect()
    }

    fn clipped_balanced(p: f64) -> f64 {
        (0.5 * (0.5 + p).log2()).max(0.0)
    }

    #[test]
    fn concave_input_is_its_own_envelope() {
        let s: Vec<(f64, f64)> = (0..201)
            .map(|i| {
                let x = 2.0 * i as f64 / 200.0;
                (x, x - x * x / 4.0)
            })
            .collect();
        for p in upper_convex_envelope(&s).unwrap() {
            assert!((p.enveloped - p.raw).abs() < 1e-12);
        }
    }

    #[test]
    fn three_point_chord() {
        let env = upper_convex_envelope(&[(0.0, 0.0), (1.0, 0.0), (2.0, 1.0)]).unwrap();
        assert!((env[1].enveloped - 0.5).abs() < 1e-15);
        assert_eq!(env[0].enveloped, 0.0);
        assert_eq!(env[2].enveloped, 1.0);
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(upper_convex_envelope(&[(0.0, 1.0)]).is_err());
        assert!(upper_convex_envelope(&[(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(upper_convex_envelope(&[(1.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(upper_convex_envelope(&[(0.0, 1.0), (1.0, f64::NAN)]).is_err());
        assert!(GridSpec::linear(15).validate().is_err());
        assert!(GridSpec::linear(16).validate().is_ok());
    }

    #[test]
    fn matches_brute_force_on_clipped_curve() {
        let s: Vec<(f64, f64)> = (0..201)
            .map(|i| {
                let p = 10.0 * i as f64 / 200.0;
                (p, clipped_balanced(p))
            })
            .collect();
        let env = upper_convex_envelope(&s).unwrap();
        let oracle = brute_envelope(&s);
        for (e, o) in env.iter().zip(&oracle) {
            assert!((e.enveloped - o).abs() < 1e-12, "{} vs {}", e.enveloped, o);
        }
    }

    #[test]
    fn clipped_curve_has_time_sharing_region_then_tangency() {
        let s: Vec<(f64, f64)> = (0..1001)
            .map(|i| {
                let p = 10.0 * i as f64 / 1000.0;
                (p, clipped_balanced(p))
            })
            .collect();
        let env = upper_convex_envelope(&s).unwrap();
        // chord from the origin dominates on an initial interval
        assert!(env[1..50].iter().all(|p| p.enveloped > p.raw));
        let last_gain = env
            .iter()
            .rposition(|p| p.enveloped > p.raw + 1e-12)
            .unwrap();
        assert!(last_gain < 1000);
        assert!(env[last_gain + 1..]
            .iter()
            .all(|p| (p.enveloped - p.raw).abs() <= 1e-12));
        // gain region is contiguous from the origin
        assert!(env[1..=last_gain].iter().all(|p| p.enveloped > p.raw));
    }

    #[test]
    fn path_envelope_reads_value_at_one() {
        let r = envelope_along_path(|t| clipped_balanced(10.0 * t), &GridSpec::default()).unwrap();
        assert!((r.value - 0.5 * 10.5f64.log2()).abs() < 1e-12);
        assert_eq!(r.raw, r.value);

        // deep in the clipped region the chord gives a positive rate
        let r = envelope_along_path(|t| clipped_balanced(0.2 * t), &GridSpec::default()).unwrap();
        assert_eq!(r.raw, 0.0);
        assert!(r.value > 0.0);
        assert!(r.span > 2.0);
    }

    #[test]
    fn path_envelope_converges_with_grid() {
        for p in [0.05, 0.3, 0.8, 2.0, 10.0] {
            let a =
                envelope_along_path(|t| clipped_balanced(p * t), &GridSpec::linear(1025)).unwrap();
            let b =
                envelope_along_path(|t| clipped_balanced(p * t), &GridSpec::linear(2049)).unwrap();
            assert!(
                (a.value - b.value).abs() < 1e-6,
                "p = {p}: {} vs {}",
                a.value,
                b.value
            );
        }
    }

    #[test]
    fn log_grid_contains_anchor_points() {
        let t = GridSpec::log(64).positions(4.0);
        assert_eq!(t[0], 0.0);
        assert!(t.contains(&1.0));
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        let r = envelope_along_path(|t| clipped_balanced(0.2 * t), &GridSpec::log(4097)).unwrap();
        let l =
            envelope_along_path(|t| clipped_balanced(0.2 * t), &GridSpec::linear(4097)).unwrap();
        assert!((r.value - l.value).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn envelope_is_concave_and_dominant(ys in proptest::collection::vec(-5.0f64..5.0, 3..60)) {
            let s: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (i as f64 * 0.5, y)).collect();
            let env = upper_convex_envelope(&s).unwrap();
            for p in &env {
                prop_assert!(p.enveloped >= p.raw - 1e-12);
            }
            for w in env.windows(3) {
                // uniform spacing: second difference is enough
                let d2 = w[2].enveloped - 2.0 * w[1].enveloped + w[0].enveloped;
                prop_assert!(d2 <= 1e-12, "second difference {}", d2);
            }
            let oracle = brute_envelope(&s);
            for (e, o) in env.iter().zip(&oracle) {
                prop_assert!((e.enveloped - o).abs() < 1e-9);
            }
        }
    }
}
