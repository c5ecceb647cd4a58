//! Dense convex QP solver for the small problems produced by preference fitting.
//!
//! Solves
//!
//! ```text
//! minimize    ½ Σ q_i x_i² + cᵀx
//! subject to  A x ≤ b,   x ≥ lb   (lb_i may be −∞)
//! ```
//!
//! with a Mehrotra predictor-corrector primal-dual interior-point method.
//! Lower bounds are folded into the inequality block; the Newton system is
//! reduced to the normal equations and factored densely.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITERATIONS: usize = 20_000;

/// Ridge added to zero Hessian entries when the problem would otherwise be an LP.
pub const LP_RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub quadratic_diag: Vec<f64>,
    pub linear_cost: Vec<f64>,
    pub inequality_matrix: DMatrix<f64>,
    pub inequality_rhs: Vec<f64>,
    pub variable_lower_bounds: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QpStatus {
    Optimal,
    MaxIterations,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub variables: Vec<f64>,
    pub objective: f64,
    /// Largest violation of `A x ≤ b` or `x ≥ lb`.
    pub primal_residual: f64,
    pub status: QpStatus,
    pub iterations: usize,
    /// Multipliers of the rows of `A x ≤ b`.
    pub constraint_duals: Vec<f64>,
    /// Multipliers of `x ≥ lb` (zero for unbounded variables).
    pub bound_duals: Vec<f64>,
}

impl QpProblem {
    pub fn num_variables(&self) -> usize {
        self.linear_cost.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.inequality_rhs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_variables();
        let m = self.num_constraints();
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.quadratic_diag.len() != n || self.variable_lower_bounds.len() != n {
            return bad(format!(
                "QP with {n} variables has inconsistent vector lengths"
            ));
        }
        if self.inequality_matrix.nrows() != m || (m > 0 && self.inequality_matrix.ncols() != n) {
            return bad(format!(
                "constraint matrix is {}x{}, expected {m}x{n}",
                self.inequality_matrix.nrows(),
                self.inequality_matrix.ncols()
            ));
        }
        if self
            .quadratic_diag
            .iter()
            .any(|&q| !(q.is_finite() && q >= 0.0))
        {
            return bad("Hessian diagonal must be finite and nonnegative".into());
        }
        if self
            .linear_cost
            .iter()
            .chain(&self.inequality_rhs)
            .any(|v| !v.is_finite())
            || self.inequality_matrix.iter().any(|v| !v.is_finite())
            || self
                .variable_lower_bounds
                .iter()
                .any(|v| v.is_nan() || *v == f64::INFINITY)
        {
            return bad("QP data must be finite".into());
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.quadratic_diag)
            .zip(&self.linear_cost)
            .map(|((xi, q), c)| 0.5 * q * xi * xi + c * xi)
            .sum()
    }

    /// Largest violation of the constraints at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let mut worst: f64 = 0.0;
        if self.num_constraints() > 0 {
            let ax = &self.inequality_matrix * &xv;
            for (a, b) in ax.iter().zip(&self.inequality_rhs) {
                worst = worst.max(a - b);
            }
        }
        for (xi, lb) in x.iter().zip(&self.variable_lower_bounds) {
            worst = worst.max(lb - xi);
        }
        worst
    }
}

/// Solves `problem` to `tolerance` on primal, dual and complementarity residuals.
pub fn solve(problem: &QpProblem, tolerance: f64, max_iterations: usize) -> Result<QpSolution> {
    problem.validate()?;
    let n = problem.num_variables();
    let m_rows = problem.num_constraints();
    let bounded: Vec<usize> = (0..n)
        .filter(|&i| problem.variable_lower_bounds[i].is_finite())
        .collect();
    let m = m_rows + bounded.len();

    let mut hess = DVector::from_column_slice(&problem.quadratic_diag);
    if hess.iter().all(|&q| q == 0.0) {
        hess.fill(LP_RIDGE);
    }
    let c = DVector::from_column_slice(&problem.linear_cost);

    // stacked constraints G x ≤ h
    let mut g = DMatrix::<f64>::zeros(m, n);
    let mut h = DVector::<f64>::zeros(m);
    for r in 0..m_rows {
        g.row_mut(r).copy_from(&problem.inequality_matrix.row(r));
        h[r] = problem.inequality_rhs[r];
    }
    for (k, &i) in bounded.iter().enumerate() {
        g[(m_rows + k, i)] = -1.0;
        h[m_rows + k] = -problem.variable_lower_bounds[i];
    }

    if m == 0 {
        let x: Vec<f64> = (0..n).map(|i| -c[i] / hess[i]).collect();
        return Ok(QpSolution {
            objective: problem.objective(&x),
            variables: x,
            primal_residual: 0.0,
            status: QpStatus::Optimal,
            iterations: 0,
            constraint_duals: vec![],
            bound_duals: vec![0.0; n],
        });
    }

    let gt = g.transpose();
    let mut x = DVector::<f64>::zeros(n);
    let mut s = (&h - &g * &x).map(|v| v.max(1.0));
    let mut z = DVector::<f64>::from_element(m, 1.0);

    let scale_d = 1.0 + c.amax();
    let scale_p = 1.0 + h.amax();
    let mut status = QpStatus::MaxIterations;
    let mut iterations = 0;
    let mut stalled = 0;

    while iterations < max_iterations {
        let r_d = hess.component_mul(&x) + &c + &gt * &z;
        let r_p = &g * &x + &s - &h;
        let mu = s.dot(&z) / m as f64;
        let comp = s.component_mul(&z).amax();

        if r_p.amax() <= tolerance * scale_p
            && r_d.amax() <= tolerance * scale_d
            && comp <= tolerance
        {
            status = QpStatus::Optimal;
            break;
        }
        if z.amax() > 1e13 && r_p.amax() > tolerance.sqrt() * scale_p {
            status = QpStatus::Infeasible;
            break;
        }
        iterations += 1;

        let w = z.component_div(&s);
        let mut gw = g.clone();
        for (r, wr) in w.iter().enumerate() {
            gw.row_mut(r).scale_mut(*wr);
        }
        let mut normal = &gt * gw;
        for i in 0..n {
            normal[(i, i)] += hess[i] + 1e-14;
        }
        let factor = NormalFactor::new(normal);

        let newton = |r_c: &DVector<f64>| -> (DVector<f64>, DVector<f64>, DVector<f64>) {
            // (H + Gᵀ W G) dx = −r_d − Gᵀ S⁻¹ (Z r_p − r_c)
            let t = (z.component_mul(&r_p) - r_c).component_div(&s);
            let rhs = -(&r_d) - &gt * &t;
            let dx = factor.solve(&rhs);
            let ds = -(&r_p) - &g * &dx;
            let dz = (-r_c - z.component_mul(&ds)).component_div(&s);
            (dx, ds, dz)
        };

        // predictor
        let r_aff = s.component_mul(&z);
        let (_, ds_a, dz_a) = newton(&r_aff);
        let a_p = max_step(&s, &ds_a);
        let a_d = max_step(&z, &dz_a);
        let mu_aff = (&s + a_p * &ds_a).dot(&(&z + a_d * &dz_a)) / m as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let r_c =
            s.component_mul(&z) + ds_a.component_mul(&dz_a) - DVector::from_element(m, sigma * mu);
        let (dx, ds, dz) = newton(&r_c);
        let alpha = (0.99 * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);
        x += alpha * &dx;
        s += alpha * &ds;
        z += alpha * &dz;
        // keep strictly interior
        s.iter_mut().for_each(|v| *v = v.max(1e-300));
        z.iter_mut().for_each(|v| *v = v.max(1e-300));

        if alpha < 1e-10 {
            stalled += 1;
            if stalled >= 5 {
                break;
            }
        } else {
            stalled = 0;
        }
    }

    let variables: Vec<f64> = x.iter().copied().collect();
    let primal_residual = problem.max_violation(&variables);
    let mut bound_duals = vec![0.0; n];
    for (k, &i) in bounded.iter().enumerate() {
        bound_duals[i] = z[m_rows + k];
    }
    Ok(QpSolution {
        objective: problem.objective(&variables),
        variables,
        primal_residual,
        status,
        iterations,
        constraint_duals: z.rows(0, m_rows).iter().copied().collect(),
        bound_duals,
    })
}

/// Largest `α ∈ (0, 1]` keeping `v + α dv ≥ 0`.
fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut alpha: f64 = 1.0;
    for (vi, di) in v.iter().zip(dv.iter()) {
        if *di < 0.0 {
            alpha = alpha.min(-vi / di);
        }
    }
    alpha
}

enum NormalFactor {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl NormalFactor {
    fn new(m: DMatrix<f64>) -> Self {
        match m.clone().cholesky() {
            Some(ch) => NormalFactor::Cholesky(ch),
            None => NormalFactor::Lu(m.lu()),
        }
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            NormalFactor::Cholesky(ch) => ch.solve(b),
            NormalFactor::Lu(lu) => lu.solve(b).unwrap_or_else(|| DVector::zeros(b.len())),
        }
    }
}
