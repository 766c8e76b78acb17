#![allow(dead_code)]

use hammerstein_ilc::experiment::ExperimentConfig;
use hammerstein_ilc::lifted_lti::TransferFunction;
use hammerstein_ilc::plant_sim::PlantConfig;
use nalgebra::{DMatrix, DVector};
use nalgebra::Complex;

pub const TS: f64 = 5e-4;

pub fn benchmark() -> ExperimentConfig {
    ExperimentConfig::default_benchmark().unwrap()
}

/// Roots of `c[0] + c[1] x + ... + c[n] x^n` by Durand-Kerner iteration.
pub fn durand_kerner(c: &[f64]) -> Vec<Complex<f64>> {
    let n = c.len() - 1;
    let lead = c[n];
    let monic: Vec<f64> = c.iter().map(|v| v / lead).collect();
    let eval = |x: Complex<f64>| monic.iter().rev().fold(Complex::new(0.0, 0.0), |acc, &k| acc * x + k);
    let seed = Complex::new(0.4, 0.9);
    let mut z: Vec<Complex<f64>> = (0..n).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..5000 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut den = Complex::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let step = eval(z[i]) / den;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    z
}

/// Minimizes `x^T A x / 2 - b^T x` (A symmetric positive definite) by cyclic
/// exact coordinate minimization.
pub fn coordinate_descent(a: &DMatrix<f64>, b: &DVector<f64>, sweeps: usize) -> DVector<f64> {
    let n = b.len();
    let mut x = DVector::zeros(n);
    for _ in 0..sweeps {
        let mut moved = 0.0f64;
        for i in 0..n {
            let r = b[i] - a.row(i).dot(&x.transpose()) + a[(i, i)] * x[i];
            let xi = r / a[(i, i)];
            moved = moved.max((xi - x[i]).abs());
            x[i] = xi;
        }
        if moved < 1e-16 * x.amax().max(1e-300) {
            break;
        }
    }
    x
}

/// Golden-section minimum of a unimodal function on `[lo, hi]`.
pub fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Rigid-body plant `P = 1 / F(theta)` in the same sample units the
/// feedforward basis uses, so that `f = F(theta) r` is an exact inverse.
pub fn rigid_body_plant(theta: [f64; 2]) -> TransferFunction {
    let [t1, t2] = theta;
    TransferFunction::new(vec![1.0], vec![t1 + t2, -(t1 + 2.0 * t2), t2], TS).unwrap()
}

/// Default loop design with an extra sample of computation delay, which
/// keeps the loop causal around a biproper plant.
pub fn delayed_controller() -> TransferFunction {
    let c = benchmark().plant.controller;
    c.series(&TransferFunction::delay(1, TS).unwrap()).unwrap()
}

pub fn rigid_body_loop(theta: [f64; 2]) -> PlantConfig {
    let mut plant = benchmark().plant.without_noise().without_saturation();
    plant.linear_plant = rigid_body_plant(theta);
    plant.controller = delayed_controller();
    plant
}

/// Causal system with the given numerator, real poles and input delay.
pub fn causal_system(num: &[f64], poles: &[f64], delay: usize) -> TransferFunction {
    let mut den = vec![1.0];
    for &p in poles {
        let mut next = vec![0.0; den.len() + 1];
        for (k, d) in den.iter().enumerate() {
            next[k] += d;
            next[k + 1] -= p * d;
        }
        den = next;
    }
    let mut b = vec![0.0; delay];
    b.extend_from_slice(num);
    TransferFunction::new(b, den, TS).unwrap()
}

pub fn conv(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `max |lift(sys) u - simulate(sys, u)| / max(1, max |y|)`.
pub fn lift_vs_simulate_error(sys: &TransferFunction, u: &[f64]) -> f64 {
    let a = sys.lift(u.len()).apply(u);
    let b = sys.simulate(u);
    max_abs_diff(&a, &b) / max_abs(&b).max(1.0)
}

/// `max |lift(S) + lift(SP) lift(C) - I|`.
pub fn sensitivity_identity_error(p: &TransferFunction, c: &TransferFunction, n: usize) -> Option<f64> {
    use hammerstein_ilc::lifted_lti::{process_sensitivity, sensitivity};
    let s = sensitivity(p, c).ok()?;
    let sp = process_sensitivity(p, c).ok()?;
    let m = s.lift(n).matrix() + sp.lift(n).matrix() * c.lift(n).matrix() - DMatrix::identity(n, n);
    Some(m.amax())
}

pub fn trial_with_error(e: Vec<f64>, f: Vec<f64>) -> hammerstein_ilc::plant_sim::TrialRecord {
    let n = e.len();
    hammerstein_ilc::plant_sim::TrialRecord {
        trial_index: 0,
        r: vec![0.0; n],
        f,
        u: vec![0.0; n],
        x: vec![0.0; n],
        y: vec![0.0; n],
        e,
    }
}

/// Relative gap between `noilc_update` and coordinate-descent minimization
/// of `‖e - J df‖²_W + eps ‖df‖²` on a random instance.
pub fn noilc_oracle_gap(sp: &TransferFunction, n: usize, eps_rel: f64, seed: u64) -> f64 {
    use hammerstein_ilc::ilc::{noilc_update, NoilcLearner, Weight};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let e: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let j = sp.lift(n).into_matrix();
    let wm = DMatrix::from_diagonal(&DVector::from_vec(w));
    let jtwj = j.transpose() * &wm * &j;
    let eps = eps_rel * jtwj.trace() / n as f64;
    let a = &jtwj + DMatrix::identity(n, n) * eps;
    let b = j.transpose() * &wm * DVector::from_vec(e.clone());
    let df = coordinate_descent(&a, &b, 200_000);

    let learner = NoilcLearner::new(sp.lift(n), Weight::Matrix(wm), 1.0, eps_rel).unwrap();
    let got = noilc_update(&learner, &trial_with_error(e, f.clone())).unwrap();
    let expected: Vec<f64> = f.iter().zip(df.iter()).map(|(x, d)| x + d).collect();
    max_abs_diff(&got, &expected) / max_abs(&expected)
}

/// Relative gap between `bfilc_update` and nested golden-section
/// minimization of `‖e - J Psi dtheta‖²`.
pub fn bfilc_oracle_gap(sp: &TransferFunction, r: &[f64], e: &[f64], theta: [f64; 2]) -> f64 {
    use hammerstein_ilc::ilc::{bfilc_update, BasisMatrix, Weight};
    let n = r.len();
    let mut vel = vec![0.0; n];
    let mut acc = vec![0.0; n];
    for k in 0..n {
        let r1 = if k >= 1 { r[k - 1] } else { 0.0 };
        let r2 = if k >= 2 { r[k - 2] } else { 0.0 };
        vel[k] = r[k] - r1;
        acc[k] = r[k] - 2.0 * r1 + r2;
    }
    let m0 = sp.lift(n).apply(&vel);
    let m1 = sp.lift(n).apply(&acc);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let en = norm(e);
    let (s0, s1) = (en / norm(&m0), en / norm(&m1));
    let cost = |x0: f64, x1: f64| -> f64 {
        (0..n).map(|k| (e[k] - s0 * x0 * m0[k] - s1 * x1 * m1[k]).powi(2)).sum()
    };
    let bracket = 1e4;
    let inner = |x0: f64| golden(|x1| cost(x0, x1), -bracket, bracket, 160);
    let x0 = golden(|x0| cost(x0, inner(x0)), -bracket, bracket, 160);
    let x1 = inner(x0);
    let expected = [theta[0] + s0 * x0, theta[1] + s1 * x1];

    let basis = BasisMatrix::from_reference(r);
    let got = bfilc_update(&basis, &sp.lift(n), &trial_with_error(e.to_vec(), vec![0.0; n]), theta, &Weight::Identity).unwrap();
    let step = [expected[0] - theta[0], expected[1] - theta[1]];
    ((got[0] - expected[0]) / step[0]).abs().max(((got[1] - expected[1]) / step[1]).abs())
}
