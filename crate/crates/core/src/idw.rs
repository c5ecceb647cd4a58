//! Inverse-distance-weighting surrogates of the feasibility and satisfaction
//! indicators, and the distance-based exploration functions.
//!
//! All inputs are unit-box coordinates. `D` below is the squared Euclidean
//! distance between a query point and an anchor.

use std::f64::consts::FRAC_PI_2;

use crate::domain::sq_dist;
use crate::error::{Error, Result};

/// Lower clamp on `D` when forming weights and inverse distances.
pub const MIN_SQUARED_DISTANCE: f64 = 1e-12;

/// `w(D) = exp(-D) / D`.
pub fn idw_weight(x: &[f64], anchor: &[f64]) -> Result<f64> {
    let d = crate::domain::squared_distance(x, anchor)?;
    if d == 0.0 {
        return Err(Error::Singular);
    }
    Ok(weight_of(d))
}

#[inline]
fn weight_of(d: f64) -> f64 {
    let d = d.max(MIN_SQUARED_DISTANCE);
    (-d).exp() / d
}

/// Convex-combination coefficients `ν(x)`; a unit vector when `x` is an anchor.
pub fn idw_coefficients(x: &[f64], anchors: &[Vec<f64>]) -> Result<Vec<f64>> {
    if anchors.is_empty() {
        return Err(Error::Empty("IDW needs at least one anchor"));
    }
    for a in anchors {
        if a.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                actual: a.len(),
            });
        }
    }
    Ok(coefficients(x, anchors, None))
}

/// Coefficients over `anchors`, optionally ignoring one of them (leave-one-out).
fn coefficients(x: &[f64], anchors: &[Vec<f64>], skip: Option<usize>) -> Vec<f64> {
    let mut nu = vec![0.0; anchors.len()];
    let mut total = 0.0;
    for (i, a) in anchors.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let d = sq_dist(x, a);
        if d == 0.0 {
            nu.iter_mut().for_each(|v| *v = 0.0);
            nu[i] = 1.0;
            return nu;
        }
        let w = weight_of(d);
        nu[i] = w;
        total += w;
    }
    if total > 0.0 {
        nu.iter_mut().for_each(|v| *v /= total);
    } else {
        // every weight underflowed: uniform over the anchors in use
        let used = anchors.len() - usize::from(skip.is_some());
        for (i, v) in nu.iter_mut().enumerate() {
            if Some(i) != skip {
                *v = 1.0 / used as f64;
            }
        }
    }
    nu
}

/// IDW interpolant of binary labels, read as a probability.
#[derive(Debug, Clone, PartialEq)]
pub struct IdwModel {
    anchors: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

impl IdwModel {
    pub fn new(anchors: Vec<Vec<f64>>, labels: &[bool]) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::Empty("IDW model needs at least one anchor"));
        }
        if anchors.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: anchors.len(),
                actual: labels.len(),
            });
        }
        let dim = anchors[0].len();
        for (i, a) in anchors.iter().enumerate() {
            if a.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: a.len(),
                });
            }
            if let Some(j) = anchors[..i].iter().position(|b| sq_dist(a, b) == 0.0) {
                return Err(Error::DuplicateSample { existing: j });
            }
        }
        Ok(Self {
            anchors,
            labels: labels.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        })
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// `Σ ν_i(x) label_i`, always in `[0, 1]`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        weighted_label(x, &self.anchors, &self.labels, None)
    }

    /// Prediction at anchor `i` from the model built without anchor `i`.
    pub fn predict_leave_one_out(&self, i: usize) -> f64 {
        if self.anchors.len() < 2 {
            return self.labels[i];
        }
        weighted_label(&self.anchors[i], &self.anchors, &self.labels, Some(i))
    }

    /// Leave-one-out root-mean-square error with `N − 1` in the denominator,
    /// clipped to at most 1.
    pub fn loo_error(&self) -> f64 {
        let n = self.anchors.len();
        if n < 2 {
            return 0.0;
        }
        let sse: f64 = (0..n)
            .map(|i| (self.predict_leave_one_out(i) - self.labels[i]).powi(2))
            .sum();
        (sse / (n - 1) as f64).sqrt().min(1.0)
    }
}

/// `Σ w_i l_i / Σ w_i`, formed without normalizing the weights first so that
/// constant labels are reproduced exactly.
fn weighted_label(x: &[f64], anchors: &[Vec<f64>], labels: &[f64], skip: Option<usize>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, a) in anchors.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let d = sq_dist(x, a);
        if d == 0.0 {
            return labels[i];
        }
        let w = weight_of(d);
        num += w * labels[i];
        den += w;
    }
    if den > 0.0 {
        return (num / den).clamp(0.0, 1.0);
    }
    let nu = coefficients(x, anchors, skip);
    nu.iter()
        .zip(labels)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// `Σ_i 1/D_i` over the anchors, or `None` when `x` is an anchor.
fn inverse_distance_sum(x: &[f64], anchors: &[Vec<f64>], skip: Option<usize>) -> Option<f64> {
    let mut sum = 0.0;
    for (i, a) in anchors.iter().enumerate() {
        if Some(i) == skip {
            continue;
        }
        let d = sq_dist(x, a);
        if d == 0.0 {
            return None;
        }
        sum += 1.0 / d.max(MIN_SQUARED_DISTANCE);
    }
    Some(sum)
}

/// Pure exploration term: `0` at anchors, `atan(1 / Σ 1/D_i)` elsewhere.
pub fn exploration_z(x: &[f64], anchors: &[Vec<f64>]) -> f64 {
    match inverse_distance_sum(x, anchors, None) {
        None => 0.0,
        Some(0.0) => FRAC_PI_2,
        Some(s) => (1.0 / s).atan(),
    }
}

/// Exploration term blending distance-to-incumbent weighting with
/// [`exploration_z`]; the blend shifts toward the plain term as `n → n_max`.
///
/// The incumbent's own (infinite) term is excluded from the incumbent sum.
pub fn exploration_z_blended(
    x: &[f64],
    anchors: &[Vec<f64>],
    best_index: usize,
    n: usize,
    n_max: usize,
) -> Result<f64> {
    if n == 0 || n > n_max {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= N <= N_max, got N={n}, N_max={n_max}"
        )));
    }
    if best_index >= anchors.len() {
        return Err(Error::InvalidConfig(format!(
            "best index {best_index} out of range for {} anchors",
            anchors.len()
        )));
    }
    let s_best =
        inverse_distance_sum(&anchors[best_index], anchors, Some(best_index)).unwrap_or(0.0);
    Ok(blended(x, anchors, s_best, n as f64 / n_max as f64))
}

/// Incumbent inverse-distance sum, precomputed once per acquisition.
pub(crate) fn incumbent_sum(anchors: &[Vec<f64>], best_index: usize) -> f64 {
    inverse_distance_sum(&anchors[best_index], anchors, Some(best_index)).unwrap_or(0.0)
}

pub(crate) fn blended(x: &[f64], anchors: &[Vec<f64>], s_best: f64, progress: f64) -> f64 {
    let Some(s) = inverse_distance_sum(x, anchors, None) else {
        return 0.0;
    };
    let (near, plain) = if s == 0.0 {
        (if s_best > 0.0 { FRAC_PI_2 } else { 0.0 }, FRAC_PI_2)
    } else {
        ((s_best / s).atan(), (1.0 / s).atan())
    };
    (1.0 - progress) * near + progress * plain
}
