//! The seeded particle swarm on two textbook functions.

use hammerstein_ilc::pso::{minimize, SwarmConfig};

fn main() -> hammerstein_ilc::Result<()> {
    let cfg = SwarmConfig { max_iterations: 200, ..SwarmConfig::new(vec![[-5.0, 5.0]; 3], 7) };
    let res = minimize(|x: &[f64]| x.iter().map(|v| v * v).sum(), &cfg)?;
    println!("sphere: best {:.3e} at {:?} after {} evaluations", res.best_cost, res.best_point, res.evaluations);

    let cfg = SwarmConfig { max_iterations: 500, ..SwarmConfig::new(vec![[-2.0, 2.0]; 2], 3) };
    let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let res = minimize(rosen, &cfg)?;
    println!(
        "rosenbrock: best {:.3e} at {:?}, {} iterations, stagnated: {}",
        res.best_cost, res.best_point, res.iterations, res.converged
    );
    Ok(())
}
