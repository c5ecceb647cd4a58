//! Box search domains and the unit-box scaling all surrogate computations run in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on coordinates slightly outside the box before they are rejected.
pub const BOUNDS_TOLERANCE: f64 = 1e-9;

/// Box-shaped search region `lower[k] <= x[k] <= upper[k]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Deserialize)]
struct RawDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl<'de> Deserialize<'de> for Domain {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawDomain::deserialize(d)?;
        Domain::new(raw.lower, raw.upper).map_err(serde::de::Error::custom)
    }
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidDomain(
                "domain needs at least one dimension".into(),
            ));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidDomain(format!(
                "{} lower bounds but {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidDomain(format!(
                    "dimension {k}: bounds must be finite"
                )));
            }
            if lo >= hi {
                return Err(Error::InvalidDomain(format!(
                    "dimension {k}: lower bound {lo} is not below upper bound {hi}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit box `[0, 1]^n`.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n], vec![1.0; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Fails on the first coordinate outside the box (beyond [`BOUNDS_TOLERANCE`]).
    pub fn check_contains(&self, x: &[f64]) -> Result<()> {
        self.check_dim(x)?;
        for (k, &v) in x.iter().enumerate() {
            let (lo, hi) = (self.lower[k], self.upper[k]);
            if !v.is_finite() || v < lo - BOUNDS_TOLERANCE || v > hi + BOUNDS_TOLERANCE {
                return Err(Error::OutOfBounds {
                    dimension: k,
                    value: v,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.check_contains(x).is_ok()
    }

    /// Maps a point of the domain into `[0, 1]^n`.
    pub fn scale_to_unit(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_contains(x)?;
        Ok(x.iter()
            .enumerate()
            .map(|(k, &v)| (v - self.lower[k]) / (self.upper[k] - self.lower[k]))
            .collect())
    }

    /// Inverse of [`Domain::scale_to_unit`].
    pub fn unscale(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(u)?;
        Ok(u.iter()
            .enumerate()
            .map(|(k, &v)| self.lower[k] + v * (self.upper[k] - self.lower[k]))
            .collect())
    }

    /// Clamps every coordinate into the box.
    pub fn clamp(&self, x: &mut [f64]) {
        for (k, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[k], self.upper[k]);
        }
    }
}

/// Squared Euclidean distance `‖a − b‖²`.
pub fn squared_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(sq_dist(a, b))
}

/// Unchecked variant for hot loops where dimensions are already validated.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scaling_corners_and_midpoint() {
        let d = Domain::new(vec![-2.0, -1.0], vec![2.0, 1.0]).unwrap();
        assert_eq!(d.scale_to_unit(&[-2.0, -1.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(d.scale_to_unit(&[2.0, 1.0]).unwrap(), vec![1.0, 1.0]);
        let d = Domain::new(vec![-10.0, -6.5], vec![-2.0, 0.0]).unwrap();
        assert_eq!(d.scale_to_unit(&[-6.0, -3.25]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn out_of_bounds_names_dimension() {
        let d = Domain::new(vec![-2.0, -1.0], vec![2.0, 1.0]).unwrap();
        match d.scale_to_unit(&[0.0, 1.5]) {
            Err(Error::OutOfBounds { dimension, .. }) => assert_eq!(dimension, 1),
            other => panic!("unexpected {other:?}"),
        }
        // within tolerance is accepted
        assert!(d.scale_to_unit(&[2.0 + 1e-10, 0.0]).is_ok());
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(Domain::new(vec![], vec![]).is_err());
        assert!(Domain::new(vec![1.0], vec![1.0]).is_err());
        assert!(Domain::new(vec![0.0, 0.0], vec![1.0]).is_err());
        assert!(Domain::new(vec![f64::NAN], vec![1.0]).is_err());
        assert!(serde_json::from_str::<Domain>(r#"{"lower":[2],"upper":[1]}"#).is_err());
    }

    #[test]
    fn squared_distance_examples() {
        assert_eq!(squared_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(squared_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
        assert_eq!(squared_distance(&[1.0], &[-1.0]).unwrap(), 4.0);
        assert!(matches!(
            squared_distance(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn unscale_inverts_scale(
            lo in proptest::collection::vec(-100.0f64..100.0, 3),
            width in proptest::collection::vec(0.01f64..50.0, 3),
            t in proptest::collection::vec(0.0f64..=1.0, 3),
        ) {
            let hi: Vec<f64> = lo.iter().zip(&width).map(|(l, w)| l + w).collect();
            let d = Domain::new(lo.clone(), hi).unwrap();
            let x = d.unscale(&t).unwrap();
            let u = d.scale_to_unit(&x).unwrap();
            let back = d.unscale(&u).unwrap();
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn distance_symmetric(a in proptest::collection::vec(-5.0f64..5.0, 4),
                              b in proptest::collection::vec(-5.0f64..5.0, 4)) {
            prop_assert_eq!(squared_distance(&a, &b).unwrap(), squared_distance(&b, &a).unwrap());
            prop_assert_eq!(squared_distance(&a, &a).unwrap(), 0.0);
        }
    }
}
