//! Particle swarm minimization over a box.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::sampling::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsoParams {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: RngSeed,
}

impl PsoParams {
    /// Constriction-coefficient defaults with `20·n` particles (at least 30).
    pub fn for_dimension(n_dims: usize, seed: RngSeed) -> Self {
        Self {
            swarm_size: (20 * n_dims).max(30),
            iterations: 200,
            inertia: 0.729,
            cognitive: 1.494,
            social: 1.494,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 2 || self.iterations == 0 {
            return Err(Error::InvalidConfig(
                "PSO needs at least 2 particles and 1 iteration".into(),
            ));
        }
        if ![self.inertia, self.cognitive, self.social]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidConfig(
                "PSO coefficients must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Best point found and its objective value, with the best value after each iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct PsoResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub trace: Vec<f64>,
}

/// Minimizes `objective` over `domain`. Positions are clamped to the box every
/// step and the velocity of a clamped coordinate is zeroed.
pub fn minimize<F>(objective: F, domain: &Domain, params: &PsoParams) -> Result<PsoResult>
where
    F: Fn(&[f64]) -> f64,
{
    params.validate()?;
    let n = domain.dim();
    let (lo, hi) = (domain.lower(), domain.upper());
    let mut rng = params.seed.rng();

    let mut pos: Vec<Vec<f64>> = (0..params.swarm_size)
        .map(|_| (0..n).map(|k| rng.random_range(lo[k]..=hi[k])).collect())
        .collect();
    let mut vel: Vec<Vec<f64>> = (0..params.swarm_size)
        .map(|_| {
            (0..n)
                .map(|k| {
                    let w = hi[k] - lo[k];
                    rng.random_range(-w..=w) * 0.5
                })
                .collect()
        })
        .collect();
    let eval = |x: &[f64]| {
        let v = objective(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut best_pos = pos.clone();
    let mut best_val: Vec<f64> = pos.iter().map(|p| eval(p)).collect();
    let mut g = argmin(&best_val);
    let mut trace = Vec::with_capacity(params.iterations);

    for _ in 0..params.iterations {
        for i in 0..params.swarm_size {
            for k in 0..n {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                vel[i][k] = params.inertia * vel[i][k]
                    + params.cognitive * r1 * (best_pos[i][k] - pos[i][k])
                    + params.social * r2 * (best_pos[g][k] - pos[i][k]);
                let mut x = pos[i][k] + vel[i][k];
                if x < lo[k] || x > hi[k] {
                    x = x.clamp(lo[k], hi[k]);
                    vel[i][k] = 0.0;
                }
                pos[i][k] = x;
            }
            let v = eval(&pos[i]);
            if v < best_val[i] {
                best_val[i] = v;
                best_pos[i].clone_from(&pos[i]);
                if v < best_val[g] {
                    g = i;
                }
            }
        }
        trace.push(best_val[g]);
    }
    Ok(PsoResult {
        point: best_pos[g].clone(),
        value: best_val[g],
        trace,
    })
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |(bi, bv), (i, &x)| if x < bv { (i, x) } else { (bi, bv) },
        )
        .0
}
