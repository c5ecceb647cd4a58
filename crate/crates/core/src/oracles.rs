//! Constrained benchmark problems and a synthetic decision-maker that answers
//! queries from their exact function values.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::{Preference, QueryResponse};
use crate::domain::Domain;
use crate::error::{Error, Result};

/// Objective differences at or below this are reported as ties.
pub const PREFERENCE_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkProblem {
    /// Mishra's bird function with a disk-shaped feasible set.
    Mbc,
    /// Six-hump camel with a polytope ∩ disk feasible set.
    Chc,
    /// Six-hump camel with a disk feasible set and a polytope satisfactory set.
    Chsc,
}

/// Exact evaluation of a benchmark at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub f: f64,
    pub feasible: bool,
    pub satisfactory: Option<bool>,
}

impl Evaluation {
    /// Lexicographic comparison: feasibility, then satisfaction, then objective.
    pub fn compare(&self, other: &Evaluation) -> Preference {
        if self.feasible != other.feasible {
            return if self.feasible {
                Preference::Better
            } else {
                Preference::Worse
            };
        }
        if let (Some(a), Some(b)) = (self.satisfactory, other.satisfactory) {
            if a != b {
                return if a {
                    Preference::Better
                } else {
                    Preference::Worse
                };
            }
        }
        let diff = self.f - other.f;
        if diff.abs() <= PREFERENCE_TIE_TOLERANCE {
            Preference::Tie
        } else if diff < 0.0 {
            Preference::Better
        } else {
            Preference::Worse
        }
    }
}

const CHC_POLYTOPE: ([[f64; 2]; 5], [f64; 5]) = (
    [
        [1.6295, 1.0],
        [-1.0, 4.4553],
        [-4.3023, -1.0],
        [-5.6905, -12.1374],
        [17.6198, 1.0],
    ],
    [3.0786, 2.7417, -1.4909, 1.0, 32.5198],
);

const CHSC_POLYTOPE: ([[f64; 2]; 5], [f64; 5]) = (
    [
        [1.6295, 1.0],
        [0.5, 3.875],
        [-4.3023, -4.0],
        [-2.0, 1.0],
        [0.5, -1.0],
    ],
    [3.0786, 3.324, -1.4909, 0.5, 0.5],
);

fn inside_polytope((a, b): &([[f64; 2]; 5], [f64; 5]), x: f64, y: f64) -> bool {
    a.iter()
        .zip(b)
        .all(|(row, rhs)| row[0] * x + row[1] * y < *rhs)
}

/// Mishra's bird function.
pub fn mishra_bird(x: f64, y: f64) -> f64 {
    y.sin() * (1.0 - x.cos()).powi(2).exp()
        + x.cos() * (1.0 - y.sin()).powi(2).exp()
        + (x - y).powi(2)
}

/// Six-hump camel function.
pub fn six_hump_camel(x: f64, y: f64) -> f64 {
    (4.0 - 2.1 * x * x + x.powi(4) / 3.0) * x * x + x * y + (4.0 * y * y - 4.0) * y * y
}

impl BenchmarkProblem {
    pub const ALL: [BenchmarkProblem; 3] = [
        BenchmarkProblem::Mbc,
        BenchmarkProblem::Chc,
        BenchmarkProblem::Chsc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkProblem::Mbc => "mbc",
            BenchmarkProblem::Chc => "chc",
            BenchmarkProblem::Chsc => "chsc",
        }
    }

    pub fn domain(self) -> Domain {
        let (lower, upper) = match self {
            BenchmarkProblem::Mbc => (vec![-10.0, -6.5], vec![-2.0, 0.0]),
            BenchmarkProblem::Chc | BenchmarkProblem::Chsc => (vec![-2.0, -1.0], vec![2.0, 1.0]),
        };
        Domain::new(lower, upper).expect("benchmark domains are valid")
    }

    pub fn has_satisfaction(self) -> bool {
        matches!(self, BenchmarkProblem::Chsc)
    }

    /// Best known constrained objective value, for reporting.
    pub fn reference_optimum(self) -> f64 {
        match self {
            BenchmarkProblem::Mbc => -48.4,
            BenchmarkProblem::Chc => -0.5844,
            BenchmarkProblem::Chsc => -0.9050,
        }
    }

    pub fn objective(self, x: &[f64]) -> f64 {
        match self {
            BenchmarkProblem::Mbc => mishra_bird(x[0], x[1]),
            BenchmarkProblem::Chc | BenchmarkProblem::Chsc => six_hump_camel(x[0], x[1]),
        }
    }

    pub fn is_feasible(self, x: &[f64]) -> bool {
        let (a, b) = (x[0], x[1]);
        match self {
            BenchmarkProblem::Mbc => (a + 9.0).powi(2) + (b + 3.0).powi(2) < 9.0,
            BenchmarkProblem::Chc => {
                inside_polytope(&CHC_POLYTOPE, a, b) && a * a + (b + 0.1).powi(2) < 0.5
            }
            BenchmarkProblem::Chsc => a * a + (b + 0.04).powi(2) < 0.8,
        }
    }

    pub fn is_satisfactory(self, x: &[f64]) -> Option<bool> {
        match self {
            BenchmarkProblem::Chsc => Some(inside_polytope(&CHSC_POLYTOPE, x[0], x[1])),
            _ => None,
        }
    }

    pub fn evaluate(self, x: &[f64]) -> Result<Evaluation> {
        self.domain().check_contains(x)?;
        Ok(Evaluation {
            f: self.objective(x),
            feasible: self.is_feasible(x),
            satisfactory: self.is_satisfactory(x),
        })
    }

    /// Answer of a synthetic decision-maker comparing `candidate` against
    /// `incumbent` (labels only when there is no incumbent yet).
    pub fn synthetic_response(
        self,
        candidate: &[f64],
        incumbent: Option<&[f64]>,
    ) -> Result<QueryResponse> {
        let c = self.evaluate(candidate)?;
        let preference = match incumbent {
            Some(i) => Some(c.compare(&self.evaluate(i)?)),
            None => None,
        };
        Ok(QueryResponse {
            preference,
            feasible: c.feasible,
            satisfactory: c.satisfactory,
        })
    }
}

impl fmt::Display for BenchmarkProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mbc" => Ok(BenchmarkProblem::Mbc),
            "chc" => Ok(BenchmarkProblem::Chc),
            "chsc" => Ok(BenchmarkProblem::Chsc),
            other => Err(Error::InvalidConfig(format!("unknown problem '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn camel_origin() {
        assert_eq!(BenchmarkProblem::Chc.objective(&[0.0, 0.0]), 0.0);
        assert_eq!(BenchmarkProblem::Chsc.objective(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn mbc_disk() {
        let p = BenchmarkProblem::Mbc;
        assert!(p.is_feasible(&[-9.0, -3.0]));
        // boundary of the open disk is infeasible
        assert!(!p.is_feasible(&[-6.0, -3.0]));
        assert!(p.is_feasible(&[-6.0 - 1e-9, -3.0]));
        assert_eq!(p.is_satisfactory(&[-9.0, -3.0]), None);
    }

    #[test]
    fn chc_point_below_origin_is_infeasible() {
        let p = BenchmarkProblem::Chc;
        // disk holds, third polytope row (0.1 < -1.4909) does not
        assert!(0.0f64.powi(2) + (-0.1f64 + 0.1).powi(2) < 0.5);
        assert!(!p.is_feasible(&[0.0, -0.1]));
    }

    #[test]
    fn chsc_labels() {
        let p = BenchmarkProblem::Chsc;
        let e = p.evaluate(&[0.0, 0.0]).unwrap();
        assert!(e.feasible);
        assert_eq!(e.satisfactory, Some(false));
        assert!(p.evaluate(&[3.0, 0.0]).is_err());
    }

    #[test]
    fn preference_rules() {
        let p = BenchmarkProblem::Chsc;
        // find two feasible satisfactory points by scanning
        let mut good = vec![];
        for i in 0..=40 {
            for j in 0..=20 {
                let x = [-2.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64];
                let e = p.evaluate(&x).unwrap();
                if e.feasible && e.satisfactory == Some(true) {
                    good.push((x, e.f));
                }
            }
        }
        assert!(good.len() >= 2);
        good.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (lo, hi) = (good[0].0, good[good.len() - 1].0);
        assert_eq!(
            p.synthetic_response(&lo, Some(&hi)).unwrap().preference,
            Some(Preference::Better)
        );
        assert_eq!(
            p.synthetic_response(&lo, Some(&lo)).unwrap().preference,
            Some(Preference::Tie)
        );

        let q = BenchmarkProblem::Mbc;
        // infeasible point with lower f loses to a feasible one
        let infeasible = [-3.13, -1.58];
        let feasible = [-9.0, -3.0];
        assert!(q.objective(&infeasible) < q.objective(&feasible));
        let r = q.synthetic_response(&infeasible, Some(&feasible)).unwrap();
        assert_eq!(r.preference, Some(Preference::Worse));
        assert!(!r.feasible);
        assert_eq!(
            q.synthetic_response(&feasible, None).unwrap().preference,
            None
        );
    }

    #[test]
    fn names_roundtrip() {
        for p in BenchmarkProblem::ALL {
            assert_eq!(p.name().parse::<BenchmarkProblem>().unwrap(), p);
            assert!(p.domain().dim() == 2);
        }
        assert!("rosenbrock".parse::<BenchmarkProblem>().is_err());
    }
}
