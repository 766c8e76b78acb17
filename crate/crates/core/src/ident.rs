//! Wiener feedforward `f = h(F(theta) r, phi)` with `h = phi atanh(. / phi)`,
//! identified either from converged NOILC feedforward (the proposed path) or
//! from open-loop white-noise data through the forward Hammerstein model (the
//! classical path).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ilc::{noilc_train, BasisMatrix, NoilcLearner, NoilcOutcome, Weight};
use crate::lifted_lti::{lfilter_into, process_sensitivity, LiftedOperator, TransferFunction};
use crate::plant_sim::{derive_seed, make_noise, norm, run_open_loop, PlantConfig};
use crate::pso::{minimize, OptimResult, SwarmConfig};

/// Scale of the cost assigned to points outside the model's domain.
pub const PENALTY: f64 = 1e12;
/// Cost of a forward model whose prediction overflows.
pub const DIVERGENCE_PENALTY: f64 = 1e30;

/// Relative cost change between the fitted `phi` and `phi = inf` below which
/// the data carries no information about the saturation.
pub const PHI_SENSITIVITY_THRESHOLD: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedforwardParams {
    pub theta: [f64; 2],
    pub phi: f64,
}

impl FeedforwardParams {
    fn from_point(p: &[f64]) -> Self {
        FeedforwardParams { theta: [p[0], p[1]], phi: p[2] }
    }
}

/// `phi atanh(v / phi)`, the inverse of `phi tanh(. / phi)`.
#[inline]
pub fn inverse_saturate(phi: f64, v: f64) -> f64 {
    phi * (v / phi).atanh()
}

/// `F(theta) r` with zero initial conditions.
pub fn rigid_body_ff(theta: [f64; 2], r: &[f64]) -> Vec<f64> {
    BasisMatrix::from_reference(r).feedforward(theta)
}

pub fn wiener_ff(params: &FeedforwardParams, r: &[f64]) -> Result<Vec<f64>> {
    if !(params.phi > 0.0) {
        return Err(Error::Config(format!("phi must be positive, got {}", params.phi)));
    }
    let v = rigid_body_ff(params.theta, r);
    if let Some((sample, &value)) = v.iter().enumerate().find(|(_, x)| x.abs() >= params.phi) {
        return Err(Error::Domain { sample, value: value.abs(), phi: params.phi });
    }
    Ok(v.into_iter().map(|x| inverse_saturate(params.phi, x)).collect())
}

#[derive(Clone, Debug)]
pub enum IdDataset {
    /// Open-loop excitation `u` and measured position `y`.
    OpenLoopNoise { u: Vec<f64>, y: Vec<f64>, weight: Weight },
    /// Training reference `r` and the converged NOILC feedforward.
    NoilcFeedforward { r: Vec<f64>, f_target: Vec<f64>, weight: Weight, sp: TransferFunction, lifted_sp: LiftedOperator },
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn domain_penalty(max_v: f64, phi: f64) -> Option<f64> {
    if phi <= 0.0 {
        Some(PENALTY * (1.0 + max_v + phi.abs()))
    } else if max_v >= phi {
        Some(PENALTY * max_v / phi)
    } else {
        None
    }
}

/// `K(theta, phi) = ‖SP (f_NOILC - h(F(theta) r, phi))‖²_W`, evaluated by
/// recursive filtering in O(N) for diagonal weights.
#[derive(Clone, Debug)]
pub struct ProposedCost {
    basis: BasisMatrix,
    target: Vec<f64>,
    sp: TransferFunction,
    weight: Weight,
}

impl ProposedCost {
    pub fn new(r: &[f64], f_target: &[f64], sp: &TransferFunction, weight: Weight) -> Result<Self> {
        if r.len() != f_target.len() {
            return Err(Error::LengthMismatch { expected: r.len(), got: f_target.len() });
        }
        if !sp.is_causal() {
            return Err(Error::MalformedSystem("process sensitivity model must be causal".into()));
        }
        weight.check(r.len())?;
        Ok(ProposedCost {
            basis: BasisMatrix::from_reference(r),
            target: sp.simulate(f_target),
            sp: sp.clone(),
            weight,
        })
    }

    fn residual_cost(&self, h: &[f64]) -> f64 {
        let mut z = vec![0.0; h.len()];
        lfilter_into(self.sp.num(), self.sp.den(), h, &mut z);
        for (zi, ti) in z.iter_mut().zip(&self.target) {
            *zi = ti - *zi;
        }
        self.weight.quadratic(&z)
    }

    pub fn eval(&self, theta: [f64; 2], phi: f64) -> f64 {
        let v = self.basis.feedforward(theta);
        if let Some(p) = domain_penalty(max_abs(&v), phi) {
            return p;
        }
        let h: Vec<f64> = v.iter().map(|&x| inverse_saturate(phi, x)).collect();
        self.residual_cost(&h)
    }

    /// Cost with the saturation inverse removed (`phi -> inf`).
    pub fn eval_linear(&self, theta: [f64; 2]) -> f64 {
        self.residual_cost(&self.basis.feedforward(theta))
    }

    /// `‖SP f_NOILC‖²_W`.
    pub fn scale(&self) -> f64 {
        self.weight.quadratic(&self.target)
    }

    pub fn peak_demand(&self, theta: [f64; 2]) -> f64 {
        max_abs(&self.basis.feedforward(theta))
    }
}

/// `‖y - P~(theta) g~(u, phi)‖²_W` with `P~ = 1 / F(theta)`.
#[derive(Clone, Debug)]
pub struct ClassicalCost {
    u: Vec<f64>,
    y: Vec<f64>,
    weight: Weight,
}

impl ClassicalCost {
    pub fn new(u: &[f64], y: &[f64], weight: Weight) -> Result<Self> {
        if u.len() != y.len() {
            return Err(Error::LengthMismatch { expected: u.len(), got: y.len() });
        }
        weight.check(u.len())?;
        Ok(ClassicalCost { u: u.to_vec(), y: y.to_vec(), weight })
    }

    fn predict_cost(&self, theta: [f64; 2], x: &[f64]) -> f64 {
        // F(q) = (t1 + t2) - (t1 + 2 t2) q + t2 q^2, q = z^-1
        let d0 = theta[0] + theta[1];
        if d0 == 0.0 || !(d0.abs() > 1e-12 * (theta[0].abs() + theta[1].abs())) {
            return DIVERGENCE_PENALTY;
        }
        let a = [1.0, -(theta[0] + 2.0 * theta[1]) / d0, theta[1] / d0];
        let mut yh = vec![0.0; x.len()];
        lfilter_into(&[1.0 / d0], &a, x, &mut yh);
        for (p, yi) in yh.iter_mut().zip(&self.y) {
            *p = yi - *p;
        }
        let c = self.weight.quadratic(&yh);
        if c.is_finite() {
            c
        } else {
            DIVERGENCE_PENALTY
        }
    }

    pub fn eval(&self, theta: [f64; 2], phi: f64) -> f64 {
        if phi <= 0.0 {
            return PENALTY * (1.0 + phi.abs());
        }
        let x: Vec<f64> = self.u.iter().map(|&u| phi * (u / phi).tanh()).collect();
        self.predict_cost(theta, &x)
    }

    pub fn eval_linear(&self, theta: [f64; 2]) -> f64 {
        self.predict_cost(theta, &self.u)
    }

    pub fn scale(&self) -> f64 {
        self.weight.quadratic(&self.y)
    }

    /// Condition number of the equation-error regressor `[Δy, Δ²y]` after
    /// column normalization; huge values mean `theta` is not identifiable.
    pub fn regressor_condition(&self) -> f64 {
        let b = BasisMatrix::from_reference(&self.y);
        let (v, a) = (b.velocity(), b.acceleration());
        let (nv, na) = (norm(v), norm(a));
        if nv == 0.0 || na == 0.0 {
            return f64::INFINITY;
        }
        let c = v.iter().zip(a).map(|(p, q)| p * q).sum::<f64>() / (nv * na);
        // eigenvalues of [[1, c], [c, 1]]
        let c = c.abs().min(1.0);
        if c == 1.0 {
            f64::INFINITY
        } else {
            (1.0 + c) / (1.0 - c)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub initial_best_cost: f64,
    pub final_best_cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub stagnated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub theta: [f64; 2],
    pub phi: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub feasible: bool,
    pub converged: bool,
    pub optimizer_trace_summary: TraceSummary,
    /// `(K(theta*, inf) - K*) / scale`: how much the fitted saturation
    /// matters to the cost.
    pub phi_sensitivity: f64,
    pub phi_identifiable: bool,
    pub warnings: Vec<String>,
    pub cost_history: Vec<f64>,
}

impl FitReport {
    pub fn params(&self) -> FeedforwardParams {
        FeedforwardParams { theta: self.theta, phi: self.phi }
    }

    fn from_optimum(res: OptimResult, feasible: bool, linear_cost: f64, scale: f64) -> Self {
        let params = FeedforwardParams::from_point(&res.best_point);
        let phi_sensitivity = if scale > 0.0 { (linear_cost - res.best_cost) / scale } else { 0.0 };
        let phi_identifiable = phi_sensitivity >= PHI_SENSITIVITY_THRESHOLD;
        let mut warnings = Vec::new();
        if !res.converged {
            warnings.push(format!("optimizer hit the iteration limit ({}) before stagnating", res.iterations));
        }
        if !phi_identifiable {
            warnings.push(format!(
                "cost is nearly flat in phi (relative sensitivity {phi_sensitivity:.2e}); the data does not exercise the saturation"
            ));
        }
        FitReport {
            theta: params.theta,
            phi: params.phi,
            final_cost: res.best_cost,
            iterations: res.iterations,
            feasible,
            converged: res.converged,
            optimizer_trace_summary: TraceSummary {
                initial_best_cost: res.cost_history[0],
                final_best_cost: res.best_cost,
                iterations: res.iterations,
                evaluations: res.evaluations,
                stagnated: res.converged,
            },
            phi_sensitivity,
            phi_identifiable,
            warnings,
            cost_history: res.cost_history,
        }
    }
}

fn check_swarm(swarm: &SwarmConfig) -> Result<()> {
    if swarm.search_box.len() != 3 {
        return Err(Error::Config(format!(
            "search box must have 3 dimensions (theta1, theta2, phi), got {}",
            swarm.search_box.len()
        )));
    }
    Ok(())
}

/// Minimizes the proposed cost over `(theta1, theta2, phi)`.
pub fn fit_proposed(data: &IdDataset, swarm: &SwarmConfig) -> Result<FitReport> {
    let IdDataset::NoilcFeedforward { r, f_target, weight, sp, .. } = data else {
        return Err(Error::Config("proposed fit needs a NOILC feedforward dataset".into()));
    };
    check_swarm(swarm)?;
    let cost = ProposedCost::new(r, f_target, sp, weight.clone())?;
    let res = minimize(|p| cost.eval([p[0], p[1]], p[2]), swarm)?;
    let params = FeedforwardParams::from_point(&res.best_point);
    let peak = cost.peak_demand(params.theta);
    if !(params.phi > 0.0 && peak < params.phi) {
        return Err(Error::Infeasible(format!(
            "best point has phi = {} but the training reference demands |F(theta) r| up to {peak}",
            params.phi
        )));
    }
    let linear = cost.eval_linear(params.theta);
    Ok(FitReport::from_optimum(res, true, linear, cost.scale()))
}

/// Condition number of the equation-error regressor above which the
/// open-loop data is rejected.
pub const MAX_REGRESSOR_CONDITION: f64 = 1e10;

/// Fits the forward Hammerstein model to open-loop data and returns its
/// inverse as feedforward parameters.
pub fn fit_classical(data: &IdDataset, swarm: &SwarmConfig) -> Result<FitReport> {
    let IdDataset::OpenLoopNoise { u, y, weight } = data else {
        return Err(Error::Config("classical fit needs an open-loop dataset".into()));
    };
    check_swarm(swarm)?;
    if max_abs(u) == 0.0 {
        return Err(Error::Excitation("input is identically zero".into()));
    }
    let cost = ClassicalCost::new(u, y, weight.clone())?;
    let cond = cost.regressor_condition();
    if !(cond < MAX_REGRESSOR_CONDITION) {
        return Err(Error::Excitation(format!(
            "velocity/acceleration regressor condition number {cond:.3e} exceeds {MAX_REGRESSOR_CONDITION:.0e}"
        )));
    }
    let res = minimize(|p| cost.eval([p[0], p[1]], p[2]), swarm)?;
    let params = FeedforwardParams::from_point(&res.best_point);
    if !(params.phi > 0.0) {
        return Err(Error::Infeasible(format!("best point has phi = {}", params.phi)));
    }
    let linear = cost.eval_linear(params.theta);
    Ok(FitReport::from_optimum(res, true, linear, cost.scale()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoilcSettings {
    pub alpha: f64,
    /// Tikhonov term relative to `trace(J^T W J) / N`.
    pub eps_rel: f64,
}

impl Default for NoilcSettings {
    fn default() -> Self {
        NoilcSettings { alpha: 1.0, eps_rel: 1e-10 }
    }
}

/// Runs NOILC on `r_train` and packages `(r, f_NOILC, SP, W = I)`.
pub fn build_training_dataset(
    cfg: &PlantConfig,
    r_train: &[f64],
    iterations: usize,
    settings: NoilcSettings,
) -> Result<(IdDataset, NoilcOutcome)> {
    let sp = process_sensitivity(&cfg.linear_plant, &cfg.controller)?;
    let lifted_sp = sp.lift(r_train.len());
    let learner = NoilcLearner::new(lifted_sp.clone(), Weight::Identity, settings.alpha, settings.eps_rel)?;
    let outcome = noilc_train(&learner, cfg, r_train, iterations)?;
    let data = IdDataset::NoilcFeedforward {
        r: r_train.to_vec(),
        f_target: outcome.f.clone(),
        weight: Weight::Identity,
        sp,
        lifted_sp,
    };
    Ok((data, outcome))
}

/// Open-loop experiment with zero-mean Gaussian input of standard deviation
/// `input_std`, measured through the plant's noise channel.
pub fn build_open_loop_dataset(cfg: &PlantConfig, n: usize, input_std: f64) -> IdDataset {
    let u = make_noise(derive_seed(cfg.seed, "open-loop-input"), input_std * input_std, n);
    let y = run_open_loop(cfg, &u, 0);
    IdDataset::OpenLoopNoise { u, y, weight: Weight::Identity }
}

/// Pearson correlation coefficient.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Peak of `|sum_t a[t] b[t + lag]| / (‖a‖ ‖b‖)` over `|lag| <= max_lag`.
pub fn normalized_xcorr_peak(a: &[f64], b: &[f64], max_lag: usize) -> f64 {
    let denom = norm(a) * norm(b);
    if denom == 0.0 {
        return 0.0;
    }
    let n = a.len().min(b.len()) as isize;
    let lag = max_lag as isize;
    (-lag..=lag)
        .map(|l| {
            (0..n)
                .filter(|t| (0..n).contains(&(t + l)))
                .map(|t| a[t as usize] * b[(t + l) as usize])
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max)
        / denom
}
