//! Transfer functions, their lifted (Toeplitz) form, and the closed-loop
//! sensitivities of the benchmark servo loop.

use hammerstein_ilc::experiment::ExperimentConfig;
use hammerstein_ilc::lifted_lti::{closed_loop_poles, process_sensitivity, sensitivity, TransferFunction};

fn main() -> hammerstein_ilc::Result<()> {
    let ts = 5e-4;
    // 1 / (1 - 0.5 z^-1)
    let sys = TransferFunction::new(vec![1.0], vec![1.0, -0.5], ts)?;
    println!("impulse response: {:?}", sys.impulse_response(5));
    let lifted = sys.lift(4);
    println!("lifted matrix:{}", lifted.matrix());

    let u = [1.0, 0.0, -1.0, 2.0];
    println!("lift * u   = {:?}", lifted.apply(&u));
    println!("simulate u = {:?}", sys.simulate(&u));

    // a noncausal two-sided FIR lifts to a banded Toeplitz matrix
    let smoother = TransferFunction::fir(vec![0.25, 0.5, 0.25], 1, ts)?;
    println!("centered smoother:{}", smoother.lift(5).matrix());

    let cfg = ExperimentConfig::default_benchmark()?;
    let (p, c) = (&cfg.plant.linear_plant, &cfg.plant.controller);
    let poles = closed_loop_poles(p, c)?;
    let worst = poles.iter().map(|z| z.norm()).fold(0.0, f64::max);
    println!("benchmark loop: {} closed-loop poles, largest modulus {worst:.6}", poles.len());
    let s = sensitivity(p, c)?;
    let sp = process_sensitivity(p, c)?;
    for hz in [1.0, 20.0, 150.0] {
        let w = 2.0 * std::f64::consts::PI * hz * ts;
        println!(
            "{hz:>6} Hz: |S| = {:.4}, |SP| = {:.3e} m/A",
            s.frequency_response(w).norm(),
            sp.frequency_response(w).norm()
        );
    }
    Ok(())
}
