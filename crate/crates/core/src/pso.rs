//! Global-best particle swarm optimization.
//!
//! The search box only seeds the initial positions; particles move freely
//! afterwards. Costs are evaluated in parallel, but every random draw and
//! every best-so-far comparison happens in particle order, so a seed fully
//! determines the result regardless of thread scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwarmConfig {
    pub swarm_size: usize,
    pub max_iterations: usize,
    pub inertia: f64,
    pub cognitive_coeff: f64,
    pub social_coeff: f64,
    pub search_box: Vec<[f64; 2]>,
    pub seed: u64,
    /// Relative improvement of the best cost below which the swarm counts
    /// as stagnated.
    pub tolerance: f64,
    /// Window, in iterations, over which stagnation is measured.
    pub stall_iterations: usize,
}

impl SwarmConfig {
    pub fn new(search_box: Vec<[f64; 2]>, seed: u64) -> Self {
        SwarmConfig {
            swarm_size: 200,
            max_iterations: 300,
            inertia: 0.729,
            cognitive_coeff: 1.49445,
            social_coeff: 1.49445,
            search_box,
            seed,
            tolerance: 1e-10,
            stall_iterations: 50,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.swarm_size < 2 {
            return Err(Error::Config("swarm needs at least two particles".into()));
        }
        if self.search_box.is_empty() {
            return Err(Error::Config("search box has no dimensions".into()));
        }
        for (d, [lo, hi]) in self.search_box.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Config(format!("search box dimension {d} is empty: [{lo}, {hi}]")));
            }
        }
        if self.stall_iterations == 0 {
            return Err(Error::Config("stall window must be at least one iteration".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimResult {
    pub best_point: Vec<f64>,
    pub best_cost: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Global best after initialization and after each iteration.
    pub cost_history: Vec<f64>,
}

fn evaluate<F>(cost: &F, positions: &[Vec<f64>]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let costs: Vec<f64> = positions.par_iter().map(|p| cost(p)).collect();
    if let Some(i) = costs.iter().position(|c| !c.is_finite()) {
        return Err(Error::NonFiniteCost { point: positions[i].clone(), value: costs[i] });
    }
    Ok(costs)
}

pub fn minimize<F>(cost: F, cfg: &SwarmConfig) -> Result<OptimResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.check()?;
    let dim = cfg.search_box.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut x: Vec<Vec<f64>> = (0..cfg.swarm_size)
        .map(|_| cfg.search_box.iter().map(|&[lo, hi]| rng.random_range(lo..hi)).collect())
        .collect();
    let mut v = vec![vec![0.0; dim]; cfg.swarm_size];

    let costs = evaluate(&cost, &x)?;
    let mut evaluations = cfg.swarm_size;
    let mut pbest = x.clone();
    let mut pbest_cost = costs;
    let mut g = 0;
    for i in 1..cfg.swarm_size {
        if pbest_cost[i] < pbest_cost[g] {
            g = i;
        }
    }
    let mut gbest = pbest[g].clone();
    let mut gbest_cost = pbest_cost[g];
    let mut history = vec![gbest_cost];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        for i in 0..cfg.swarm_size {
            for d in 0..dim {
                let r1: f64 = rng.random();
                let r2: f64 = rng.random();
                v[i][d] = cfg.inertia * v[i][d]
                    + cfg.cognitive_coeff * r1 * (pbest[i][d] - x[i][d])
                    + cfg.social_coeff * r2 * (gbest[d] - x[i][d]);
                x[i][d] += v[i][d];
            }
        }
        let costs = evaluate(&cost, &x)?;
        evaluations += cfg.swarm_size;
        for i in 0..cfg.swarm_size {
            if costs[i] < pbest_cost[i] {
                pbest_cost[i] = costs[i];
                pbest[i].clone_from(&x[i]);
            }
            if costs[i] < gbest_cost {
                gbest_cost = costs[i];
                gbest.clone_from(&x[i]);
            }
        }
        history.push(gbest_cost);

        if iterations >= cfg.stall_iterations {
            let before = history[iterations - cfg.stall_iterations];
            if before - gbest_cost <= cfg.tolerance * gbest_cost.abs() {
                converged = true;
                break;
            }
        }
    }

    Ok(OptimResult {
        best_point: gbest,
        best_cost: gbest_cost,
        evaluations,
        iterations,
        converged,
        cost_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn sphere_reaches_target() {
        let mut cfg = SwarmConfig::new(vec![[-5.0, 5.0]; 2], 11);
        cfg.max_iterations = 200;
        let res = minimize(sphere, &cfg).unwrap();
        assert!(res.best_cost <= 1e-6, "best cost {}", res.best_cost);
        assert!(res.iterations <= 200);
    }

    #[test]
    fn rosenbrock_reaches_target() {
        let mut cfg = SwarmConfig::new(vec![[-2.0, 2.0]; 2], 3);
        cfg.max_iterations = 500;
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let res = minimize(rosen, &cfg).unwrap();
        assert!(res.best_cost <= 1e-3, "best cost {}", res.best_cost);
        assert!((res.best_point[0] - 1.0).abs() < 0.05);
    }

    #[test]
    fn constant_cost_stagnates_inside_box() {
        let cfg = SwarmConfig::new(vec![[1.0, 2.0], [-3.0, -1.0]], 5);
        let res = minimize(|_| 4.0, &cfg).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, cfg.stall_iterations);
        assert!((1.0..2.0).contains(&res.best_point[0]));
        assert!((-3.0..-1.0).contains(&res.best_point[1]));
    }

    #[test]
    fn history_is_monotone_and_deterministic() {
        let cfg = SwarmConfig { swarm_size: 30, max_iterations: 60, ..SwarmConfig::new(vec![[-3.0, 3.0]; 3], 9) };
        let f = |x: &[f64]| sphere(x) + (3.0 * x[0]).sin();
        let a = minimize(f, &cfg).unwrap();
        let b = minimize(f, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.cost_history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(a.evaluations, 30 * (a.iterations + 1));
    }

    #[test]
    fn non_finite_cost_aborts_with_point() {
        let cfg = SwarmConfig::new(vec![[0.0, 1.0]], 1);
        match minimize(|x| if x[0] > 0.5 { f64::NAN } else { 0.0 }, &cfg) {
            Err(Error::NonFiniteCost { point, .. }) => assert!(point[0] > 0.5),
            other => panic!("expected abort, got {other:?}"),
        }
    }

    #[test]
    fn empty_box_rejected() {
        let cfg = SwarmConfig::new(vec![[1.0, 1.0]], 1);
        assert!(matches!(minimize(sphere, &cfg), Err(Error::Config(_))));
        let cfg = SwarmConfig { swarm_size: 1, ..SwarmConfig::new(vec![[0.0, 1.0]], 1) };
        assert!(minimize(sphere, &cfg).is_err());
    }
}
