//! Simulated Hammerstein servo: `u = C e + f`, `x = g(u)`, `y = P x + n`,
//! `e = r - y`, executed sample by sample over one trial.

use std::path::Path;

use nalgebra::Matrix3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lifted_lti::{closed_loop_poles, poly_add, poly_mul, Recursion, TransferFunction, STABILITY_MARGIN};

/// Magnetic saturation `g(u) = i_max * tanh(u / i_max)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaturationModel {
    pub i_max: f64,
}

impl SaturationModel {
    pub fn new(i_max: f64) -> Result<Self> {
        if !(i_max.is_finite() && i_max > 0.0) {
            return Err(Error::Config(format!("i_max must be positive, got {i_max}")));
        }
        Ok(SaturationModel { i_max })
    }

    #[inline]
    pub fn apply(&self, u: f64) -> f64 {
        self.i_max * (u / self.i_max).tanh()
    }
}

pub fn saturate(model: &SaturationModel, u: &[f64]) -> Vec<f64> {
    u.iter().map(|&v| model.apply(v)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub linear_plant: TransferFunction,
    pub controller: TransferFunction,
    /// `None` makes `g` the identity.
    pub saturation: Option<SaturationModel>,
    /// Output noise standard deviation relative to `noise_distance`.
    pub noise_std_rel: f64,
    /// Motion distance [m] the noise level refers to.
    pub noise_distance: f64,
    pub seed: u64,
}

impl PlantConfig {
    pub fn noise_std(&self) -> f64 {
        self.noise_std_rel * self.noise_distance
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        PlantConfig { seed, ..self.clone() }
    }

    pub fn without_noise(&self) -> Self {
        PlantConfig { noise_std_rel: 0.0, ..self.clone() }
    }

    pub fn without_saturation(&self) -> Self {
        PlantConfig { saturation: None, ..self.clone() }
    }

    pub fn ts(&self) -> f64 {
        self.linear_plant.ts()
    }

    /// Structural checks needed before any trial can run.
    pub fn check_loop(&self) -> Result<()> {
        if (self.linear_plant.ts() - self.controller.ts()).abs() > 1e-12 * self.linear_plant.ts() {
            return Err(Error::Config("plant and controller sample times differ".into()));
        }
        if !self.linear_plant.is_causal() || !self.controller.is_causal() {
            return Err(Error::Config("plant and controller must be causal".into()));
        }
        if !self.linear_plant.is_strictly_proper() && !self.controller.is_strictly_proper() {
            return Err(Error::Config(
                "loop has direct feedthrough: P (or C) must be strictly proper for sample-by-sample simulation".into(),
            ));
        }
        if !(self.noise_std_rel >= 0.0 && self.noise_distance >= 0.0) {
            return Err(Error::Config("noise level must be non-negative".into()));
        }
        if let Some(s) = self.saturation {
            SaturationModel::new(s.i_max)?;
        }
        Ok(())
    }

    /// Closed-loop stability of the linearized loop.
    pub fn check_stability(&self) -> Result<()> {
        let poles = closed_loop_poles(&self.linear_plant, &self.controller)?;
        if poles.iter().any(|p| p.norm() >= 1.0 - STABILITY_MARGIN) {
            let mut moduli: Vec<f64> = poles.iter().map(|p| p.norm()).collect();
            moduli.sort_by(|a, b| b.total_cmp(a));
            return Err(Error::Unstable { moduli });
        }
        Ok(())
    }

    fn g(&self, u: f64) -> f64 {
        match self.saturation {
            Some(s) => s.apply(u),
            None => u,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub r: Vec<f64>,
    pub f: Vec<f64>,
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub e: Vec<f64>,
}

impl TrialRecord {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn error_norm(&self) -> f64 {
        norm(&self.e)
    }

    /// Columns `t, r, f, u, x, y, e` at full double precision.
    pub fn write_csv(&self, path: &Path, ts: f64) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "r", "f", "u", "x", "y", "e"])?;
        for k in 0..self.len() {
            let row = [k as f64 * ts, self.r[k], self.f[k], self.u[k], self.x[k], self.y[k], self.e[k]];
            w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One closed-loop trial. Noise for trial `trial_index` comes from its own
/// stream derived from `cfg.seed`, so trials are reproducible in any order.
pub fn run_trial(cfg: &PlantConfig, r: &[f64], f: &[f64], trial_index: usize) -> Result<TrialRecord> {
    cfg.check_loop()?;
    let n = r.len();
    if f.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: f.len() });
    }
    let noise = make_noise(trial_noise_seed(cfg.seed, trial_index), cfg.noise_std().powi(2), n);

    let mut plant = Recursion::new(&cfg.linear_plant, n);
    let mut ctrl = Recursion::new(&cfg.controller, n);
    let (mut u, mut x, mut y, mut e) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let plant_first = cfg.linear_plant.is_strictly_proper();

    for t in 0..n {
        if plant_first {
            // y[t] depends on x[<t] only
            let yc = plant.past();
            y[t] = yc + noise[t];
            e[t] = r[t] - y[t];
            let uc = ctrl.past() + ctrl.b0() * e[t];
            u[t] = uc + f[t];
            x[t] = cfg.g(u[t]);
            plant.push(x[t], yc);
            ctrl.push(e[t], uc);
        } else {
            // controller is strictly proper: u[t] depends on e[<t] only
            let uc = ctrl.past();
            u[t] = uc + f[t];
            x[t] = cfg.g(u[t]);
            let yc = plant.past() + plant.b0() * x[t];
            y[t] = yc + noise[t];
            e[t] = r[t] - y[t];
            plant.push(x[t], yc);
            ctrl.push(e[t], uc);
        }
    }
    Ok(TrialRecord { trial_index, r: r.to_vec(), f: f.to_vec(), u, x, y, e })
}

/// Open-loop response `y = P g(u) + n`, used for the white-noise dataset.
pub fn run_open_loop(cfg: &PlantConfig, u: &[f64], trial_index: usize) -> Vec<f64> {
    let x: Vec<f64> = u.iter().map(|&v| cfg.g(v)).collect();
    let noise = make_noise(trial_noise_seed(cfg.seed, trial_index), cfg.noise_std().powi(2), u.len());
    cfg.linear_plant
        .simulate(&x)
        .into_iter()
        .zip(noise)
        .map(|(a, b)| a + b)
        .collect()
}

/// I.i.d. zero-mean Gaussian samples. The stream is ChaCha8 seeded with
/// `seed` through `SeedableRng::seed_from_u64`, and normals are drawn with
/// `rand_distr`'s ziggurat sampler, so a seed always maps to the same values.
pub fn make_noise(seed: u64, variance: f64, n: usize) -> Vec<f64> {
    assert!(variance >= 0.0, "variance must be non-negative");
    if variance == 0.0 {
        return vec![0.0; n];
    }
    let std = variance.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            std * z
        })
        .collect()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_noise_seed(seed: u64, trial_index: usize) -> u64 {
    splitmix64(splitmix64(seed) ^ (trial_index as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Independent seed for a named purpose, so that adding or removing one
/// consumer never shifts the random numbers seen by another.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    // FNV-1a of the tag
    let h = tag
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    splitmix64(seed ^ splitmix64(h))
}

// ---------------------------------------------------------------------------
// Continuous-time design helpers

/// Zero-order-hold discretization of `k / (s^2 + a1 s + a0)`.
pub fn zoh_second_order(k: f64, a1: f64, a0: f64, ts: f64) -> Result<TransferFunction> {
    let m = Matrix3::new(0.0, 1.0, 0.0, -a0, -a1, 1.0, 0.0, 0.0, 0.0) * ts;
    let e = m.exp();
    let (a11, a12, a21, a22) = (e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]);
    let (b1, b2) = (e[(0, 2)], e[(1, 2)]);
    let den = vec![1.0, -(a11 + a22), a11 * a22 - a12 * a21];
    let h1 = k * b1;
    let h2 = k * (a11 * b1 + a12 * b2);
    TransferFunction::new(vec![0.0, h1, h2 + den[1] * h1], den, ts)
}

/// Bilinear (Tustin) discretization of `num(s)/den(s)`, coefficients in
/// ascending powers of `s`.
pub fn tustin(num_s: &[f64], den_s: &[f64], ts: f64) -> Result<TransferFunction> {
    let n = num_s.len().max(den_s.len()) - 1;
    let k = 2.0 / ts;
    let map = |c: &[f64]| {
        let mut out = vec![0.0; n + 1];
        for (i, &ci) in c.iter().enumerate() {
            // ci (k (1 - q))^i (1 + q)^(n - i), q = z^-1
            let mut term = vec![ci * k.powi(i as i32)];
            for _ in 0..i {
                term = poly_mul(&term, &[1.0, -1.0]);
            }
            for _ in i..n {
                term = poly_mul(&term, &[1.0, 1.0]);
            }
            out = poly_add(&out, &term);
        }
        out
    };
    TransferFunction::new(map(num_s), map(den_s), ts)
}

/// Two-mass servo stage used as the benchmark plant: a rigid-body mode on a
/// weak suspension plus one collocated flexible mode, with the motor constant
/// folded in (input in A, output in m).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ServoSurrogate {
    pub mass: f64,
    pub motor_constant: f64,
    pub suspension_hz: f64,
    pub suspension_damping: f64,
    pub flex_hz: f64,
    pub flex_damping: f64,
    /// Share of the total mass sitting behind the flexible coupling.
    pub flex_mass_fraction: f64,
    pub ts: f64,
}

impl Default for ServoSurrogate {
    fn default() -> Self {
        ServoSurrogate {
            mass: 1.0,
            motor_constant: 1.0,
            suspension_hz: 0.3,
            suspension_damping: 0.05,
            flex_hz: 150.0,
            flex_damping: 0.02,
            flex_mass_fraction: 0.3,
            ts: 1.0 / 2000.0,
        }
    }
}

impl ServoSurrogate {
    pub fn linear_plant(&self) -> Result<TransferFunction> {
        let ws = 2.0 * std::f64::consts::PI * self.suspension_hz;
        let wf = 2.0 * std::f64::consts::PI * self.flex_hz;
        let m1 = self.mass * (1.0 - self.flex_mass_fraction);
        let m2 = self.mass * self.flex_mass_fraction;
        let residue = self.motor_constant * m2 / (m1 * self.mass);
        let rigid = zoh_second_order(
            self.motor_constant / self.mass,
            2.0 * self.suspension_damping * ws,
            ws * ws,
            self.ts,
        )?;
        if self.flex_mass_fraction == 0.0 {
            return Ok(rigid);
        }
        let flex = zoh_second_order(residue, 2.0 * self.flex_damping * wf, wf * wf, self.ts)?;
        rigid.parallel(&flex)
    }
}

/// PID-like loop shaper `k (s/wz + 1)(s + wi) / ((s/wp + 1) s)` with the lead
/// centred on the crossover frequency and the gain set from the rigid-body mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeadLagDesign {
    pub bandwidth_hz: f64,
    pub lead_ratio: f64,
    pub integrator_ratio: f64,
    pub mass: f64,
    pub motor_constant: f64,
    pub ts: f64,
}

impl Default for LeadLagDesign {
    fn default() -> Self {
        LeadLagDesign {
            bandwidth_hz: 20.0,
            lead_ratio: 3.0,
            integrator_ratio: 10.0,
            mass: 1.0,
            motor_constant: 1.0,
            ts: 1.0 / 2000.0,
        }
    }
}

impl LeadLagDesign {
    pub fn controller(&self) -> Result<TransferFunction> {
        let wc = 2.0 * std::f64::consts::PI * self.bandwidth_hz;
        let wz = wc / self.lead_ratio;
        let wp = wc * self.lead_ratio;
        let wi = wc / self.integrator_ratio;
        let k = self.mass / self.motor_constant * wc * wc / self.lead_ratio;
        let num = [k * wi, k * (1.0 + wi / wz), k / wz];
        let den = [0.0, 1.0, 1.0 / wp];
        tustin(&num, &den, self.ts)
    }
}

/// Peak of `|S(e^{jw})|` on a uniform frequency grid up to Nyquist.
pub fn peak_sensitivity(plant: &TransferFunction, controller: &TransferFunction, grid: usize) -> f64 {
    let l = plant.series(controller).expect("matching sample times");
    (1..=grid)
        .map(|i| {
            let w = std::f64::consts::PI * i as f64 / grid as f64;
            1.0 / (nalgebra::Complex::new(1.0, 0.0) + l.frequency_response(w)).norm()
        })
        .fold(0.0, f64::max)
}
