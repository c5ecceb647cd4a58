//! RBF surrogate of the latent objective, fitted so that its differences
//! reproduce the expressed pairwise preferences.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Preference, PreferenceRecord};
use crate::domain::sq_dist;
use crate::error::{Error, Result};
use crate::qp::{self, QpProblem, QpStatus};
use crate::sampling::RngSeed;

/// Radial basis function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RbfKind {
    #[default]
    InverseQuadratic,
    Gaussian,
    ThinPlateSpline,
}

impl std::str::FromStr for RbfKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse-quadratic" => Ok(RbfKind::InverseQuadratic),
            "gaussian" => Ok(RbfKind::Gaussian),
            "thin-plate-spline" => Ok(RbfKind::ThinPlateSpline),
            other => Err(Error::InvalidConfig(format!("unknown RBF kind '{other}'"))),
        }
    }
}

/// `φ(ε·d)` where `d` is a squared distance.
pub fn rbf_value(kind: RbfKind, epsilon: f64, d: f64) -> f64 {
    let t = epsilon * d;
    match kind {
        RbfKind::InverseQuadratic => 1.0 / (1.0 + t * t),
        RbfKind::Gaussian => (-(t * t)).exp(),
        RbfKind::ThinPlateSpline => {
            if t <= 0.0 {
                0.0
            } else {
                t * t * t.ln()
            }
        }
    }
}

/// Weights of the preference-fitting QP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Margin `σ` separating preferred from non-preferred surrogate values.
    pub sigma: f64,
    /// Slack penalty `c_h`, shared by every preference.
    pub c_weight: f64,
    /// Ridge `λ` on the RBF coefficients.
    pub lambda: f64,
}

impl FitConfig {
    pub fn for_budget(n_max: usize) -> Self {
        Self {
            sigma: 1.0 / n_max as f64,
            c_weight: 1.0,
            lambda: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.c_weight > 0.0 && self.c_weight.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "slack weight must be positive, got {}",
                self.c_weight
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// `f̂(x) = Σ_k β_k φ(ε d(x, x_k))` over unit-box centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSurrogate {
    pub kind: RbfKind,
    pub epsilon: f64,
    pub centers: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
}

impl PreferenceSurrogate {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.centers
            .iter()
            .zip(&self.beta)
            .map(|(c, b)| b * rbf_value(self.kind, self.epsilon, sq_dist(x, c)))
            .sum()
    }
}

/// Pairwise squared distances between centers.
fn distance_matrix(centers: &[Vec<f64>]) -> DMatrix<f64> {
    let n = centers.len();
    DMatrix::from_fn(n, n, |i, k| sq_dist(&centers[i], &centers[k]))
}

fn kernel(kind: RbfKind, epsilon: f64, dist: &DMatrix<f64>) -> DMatrix<f64> {
    dist.map(|d| rbf_value(kind, epsilon, d))
}

/// Builds the preference QP over `(β, slacks)`.
///
/// Variables are the `N` coefficients followed by one slack per preference.
pub fn assemble_qp(
    dataset: &Dataset,
    kind: RbfKind,
    epsilon: f64,
    config: &FitConfig,
) -> Result<QpProblem> {
    config.validate()?;
    let centers = dataset.unit_points();
    let phi = kernel(kind, epsilon, &distance_matrix(&centers));
    assemble_from_kernel(&phi, &dataset.preferences, config)
}

fn assemble_from_kernel(
    phi: &DMatrix<f64>,
    preferences: &[PreferenceRecord],
    config: &FitConfig,
) -> Result<QpProblem> {
    let n = phi.nrows();
    let m = preferences.len();
    let rows = preferences
        .iter()
        .map(|p| if p.outcome == Preference::Tie { 2 } else { 1 })
        .sum();
    let mut a = DMatrix::<f64>::zeros(rows, n + m);
    let mut b = Vec::with_capacity(rows);
    let mut r = 0;
    for (h, p) in preferences.iter().enumerate() {
        if p.first >= n || p.second >= n || p.first == p.second {
            return Err(Error::InvalidDataset(format!(
                "preference {h} references ({}, {}) with {n} samples",
                p.first, p.second
            )));
        }
        let diff: Vec<f64> = (0..n)
            .map(|k| phi[(p.first, k)] - phi[(p.second, k)])
            .collect();
        let mut push = |sign: f64, rhs: f64| {
            for k in 0..n {
                a[(r, k)] = sign * diff[k];
            }
            a[(r, n + h)] = -1.0;
            b.push(rhs);
            r += 1;
        };
        match p.outcome {
            Preference::Better => push(1.0, -config.sigma),
            Preference::Worse => push(-1.0, -config.sigma),
            Preference::Tie => {
                push(1.0, config.sigma);
                push(-1.0, config.sigma);
            }
        }
    }
    let mut quadratic_diag = vec![config.lambda; n];
    quadratic_diag.extend(std::iter::repeat_n(0.0, m));
    let mut linear_cost = vec![0.0; n];
    linear_cost.extend(std::iter::repeat_n(config.c_weight, m));
    let mut variable_lower_bounds = vec![f64::NEG_INFINITY; n];
    variable_lower_bounds.extend(std::iter::repeat_n(0.0, m));
    Ok(QpProblem {
        quadratic_diag,
        linear_cost,
        inequality_matrix: a,
        inequality_rhs: b,
        variable_lower_bounds,
    })
}

fn solve_coefficients(
    phi: &DMatrix<f64>,
    preferences: &[PreferenceRecord],
    config: &FitConfig,
) -> Result<Vec<f64>> {
    let n = phi.nrows();
    if preferences.is_empty() {
        return Ok(vec![0.0; n]);
    }
    let problem = assemble_from_kernel(phi, preferences, config)?;
    let sol = qp::solve(&problem, qp::DEFAULT_TOLERANCE, qp::DEFAULT_MAX_ITERATIONS)?;
    // slow convergence still yields a usable surrogate as long as the iterate is feasible
    let usable = sol.status == QpStatus::Optimal
        || (sol.status == QpStatus::MaxIterations && sol.primal_residual <= 1e-6);
    if !usable {
        return Err(Error::Solver {
            status: sol.status,
            iterations: sol.iterations,
            primal_residual: sol.primal_residual,
        });
    }
    Ok(sol.variables[..n].to_vec())
}

/// Fits the surrogate to every preference of `dataset`.
pub fn fit(
    dataset: &Dataset,
    kind: RbfKind,
    epsilon: f64,
    config: &FitConfig,
) -> Result<PreferenceSurrogate> {
    config.validate()?;
    check_epsilon(epsilon)?;
    let centers = dataset.unit_points();
    let phi = kernel(kind, epsilon, &distance_matrix(&centers));
    let beta = solve_coefficients(&phi, &dataset.preferences, config)?;
    Ok(PreferenceSurrogate {
        kind,
        epsilon,
        centers,
        beta,
    })
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "epsilon must be positive, got {epsilon}"
        )))
    }
}

/// Candidate shape parameters around the current one.
pub fn default_epsilon_grid(current: f64) -> Vec<f64> {
    [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|f| f * current)
        .collect()
}

/// Preference implied by surrogate values, with `|Δ| ≤ σ` read as a tie.
fn predicted(delta: f64, sigma: f64) -> Preference {
    if delta < -sigma {
        Preference::Better
    } else if delta > sigma {
        Preference::Worse
    } else {
        Preference::Tie
    }
}

/// Picks the grid value whose surrogates best reconstruct held-out preferences
/// under `k_folds`-fold cross-validation; ties go to the smaller value.
pub fn calibrate_epsilon(
    dataset: &Dataset,
    kind: RbfKind,
    grid: &[f64],
    k_folds: usize,
    config: &FitConfig,
    seed: RngSeed,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::Empty("epsilon grid"));
    }
    for &e in grid {
        check_epsilon(e)?;
    }
    config.validate()?;
    let m = dataset.preferences.len();
    if k_folds < 2 || m < k_folds {
        return Err(Error::InvalidConfig(format!(
            "{k_folds}-fold cross-validation needs at least {k_folds} preferences, have {m}"
        )));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut seed.rng());
    let fold_of: Vec<usize> = {
        let mut f = vec![0; m];
        for (pos, &h) in order.iter().enumerate() {
            f[h] = pos * k_folds / m;
        }
        f
    };
    let dist = distance_matrix(&dataset.unit_points());

    let scores: Vec<Result<usize>> = grid
        .par_iter()
        .map(|&epsilon| {
            let phi = kernel(kind, epsilon, &dist);
            let mut correct = 0;
            for fold in 0..k_folds {
                let train: Vec<PreferenceRecord> = dataset
                    .preferences
                    .iter()
                    .zip(&fold_of)
                    .filter(|(_, &f)| f != fold)
                    .map(|(p, _)| *p)
                    .collect();
                let beta = solve_coefficients(&phi, &train, config)?;
                let value =
                    |i: usize| -> f64 { (0..beta.len()).map(|k| beta[k] * phi[(i, k)]).sum() };
                correct += dataset
                    .preferences
                    .iter()
                    .zip(&fold_of)
                    .filter(|(p, &f)| {
                        f == fold
                            && predicted(value(p.first) - value(p.second), config.sigma)
                                == p.outcome
                    })
                    .count();
            }
            Ok(correct)
        })
        .collect();

    let scores = scores.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(pick_best(grid, &scores))
}

/// Highest score wins; among equal scores the smallest grid value.
fn pick_best(grid: &[f64], scores: &[usize]) -> f64 {
    grid.iter()
        .zip(scores)
        .fold(
            None,
            |best: Option<(usize, f64)>, (&e, &score)| match best {
                Some((s, b)) if s > score || (s == score && b <= e) => Some((s, b)),
                _ => Some((score, e)),
            },
        )
        .map(|(_, e)| e)
        .expect("grid is nonempty")
}
