//! Norm-optimal ILC on the raw feedforward signal and basis-function ILC on
//! the rigid-body parameters, both driven by a lifted model `J` of `SP`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::lifted_lti::LiftedOperator;
use crate::plant_sim::{norm, run_trial, PlantConfig, TrialRecord};

/// Error weighting `W_e` of the quadratic trial cost.
#[derive(Clone, Debug, PartialEq)]
pub enum Weight {
    Identity,
    Scaled(f64),
    Matrix(DMatrix<f64>),
}

impl Weight {
    pub fn check(&self, n: usize) -> Result<()> {
        match self {
            Weight::Identity => Ok(()),
            Weight::Scaled(w) if *w > 0.0 && w.is_finite() => Ok(()),
            Weight::Scaled(w) => Err(Error::Config(format!("weight scale must be positive, got {w}"))),
            Weight::Matrix(m) => {
                if m.nrows() != n || m.ncols() != n {
                    return Err(Error::LengthMismatch { expected: n, got: m.nrows() });
                }
                if (m - m.transpose()).amax() > 1e-12 * m.amax() {
                    return Err(Error::Config("weight matrix is not symmetric".into()));
                }
                if m.clone().cholesky().is_none() {
                    return Err(Error::Config("weight matrix is not positive definite".into()));
                }
                Ok(())
            }
        }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Weight::Identity => v.clone(),
            Weight::Scaled(w) => v * *w,
            Weight::Matrix(m) => m * v,
        }
    }

    fn apply_matrix(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Weight::Identity => a.clone(),
            Weight::Scaled(w) => a * *w,
            Weight::Matrix(m) => m * a,
        }
    }

    /// `v^T W v`.
    pub fn quadratic(&self, v: &[f64]) -> f64 {
        match self {
            Weight::Identity => v.iter().map(|x| x * x).sum(),
            Weight::Scaled(w) => w * v.iter().map(|x| x * x).sum::<f64>(),
            Weight::Matrix(m) => {
                let dv = DVector::from_column_slice(v);
                dv.dot(&(m * &dv))
            }
        }
    }
}

/// `f_{j+1} = f_j + alpha (J^T W J + eps I)^{-1} J^T W e_j`.
#[derive(Clone, Debug)]
pub struct NoilcLearner {
    model_sp: LiftedOperator,
    weight: Weight,
    alpha: f64,
    eps: f64,
    normal: Cholesky<f64, Dyn>,
}

impl NoilcLearner {
    /// Tikhonov term is `eps_rel * trace(J^T W J) / N`.
    pub fn new(model_sp: LiftedOperator, weight: Weight, alpha: f64, eps_rel: f64) -> Result<Self> {
        let n = model_sp.horizon();
        weight.check(n)?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("learning gain must lie in (0, 1], got {alpha}")));
        }
        if !(eps_rel >= 0.0 && eps_rel.is_finite()) {
            return Err(Error::Config(format!("regularization must be non-negative, got {eps_rel}")));
        }
        let j = model_sp.matrix();
        let mut a = j.tr_mul(&weight.apply_matrix(j));
        let eps = eps_rel * a.trace() / n as f64;
        for i in 0..n {
            a[(i, i)] += eps;
        }
        let normal = a.cholesky().ok_or_else(|| {
            Error::Singular("J^T W J + eps I is not positive definite; use eps > 0".into())
        })?;
        let d = normal.l_dirty().diagonal();
        let (lo, hi) = (d.min(), d.max());
        if !(lo > 1e-8 * hi) {
            return Err(Error::Singular(format!(
                "J^T W J + eps I is numerically singular (pivot ratio {:.1e}); use eps > 0",
                lo / hi
            )));
        }
        Ok(NoilcLearner { model_sp, weight, alpha, eps, normal })
    }

    pub fn horizon(&self) -> usize {
        self.model_sp.horizon()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn model_sp(&self) -> &LiftedOperator {
        &self.model_sp
    }

    pub fn weight(&self) -> &Weight {
        &self.weight
    }

    /// Raw step `(J^T W J + eps I)^{-1} J^T W e`, before scaling by alpha.
    pub fn step(&self, e: &[f64]) -> Result<Vec<f64>> {
        let n = self.horizon();
        if e.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: e.len() });
        }
        let we = self.weight.apply(&DVector::from_column_slice(e));
        let rhs = self.model_sp.matrix().tr_mul(&we);
        Ok(self.normal.solve(&rhs).as_slice().to_vec())
    }

    pub fn update(&self, trial: &TrialRecord) -> Result<Vec<f64>> {
        if trial.f.len() != self.horizon() {
            return Err(Error::LengthMismatch { expected: self.horizon(), got: trial.f.len() });
        }
        let step = self.step(&trial.e)?;
        Ok(trial.f.iter().zip(step).map(|(f, d)| f + self.alpha * d).collect())
    }
}

pub fn noilc_update(learner: &NoilcLearner, trial: &TrialRecord) -> Result<Vec<f64>> {
    learner.update(trial)
}

#[derive(Clone, Debug)]
pub struct NoilcOutcome {
    pub f: Vec<f64>,
    /// `‖e_j‖₂` for trials `0..=iterations`; the last entry is the trial run
    /// with the returned feedforward.
    pub error_history: Vec<f64>,
    pub final_trial: TrialRecord,
}

/// Alternates trials and updates from `f_0 = 0`. Trial `j` uses noise stream `j`.
pub fn noilc_train(learner: &NoilcLearner, cfg: &PlantConfig, r: &[f64], iterations: usize) -> Result<NoilcOutcome> {
    if iterations == 0 {
        return Err(Error::Config("NOILC needs at least one iteration".into()));
    }
    if r.len() != learner.horizon() {
        return Err(Error::LengthMismatch { expected: learner.horizon(), got: r.len() });
    }
    let mut f = vec![0.0; r.len()];
    let mut error_history = Vec::with_capacity(iterations + 1);
    for j in 0..iterations {
        let trial = run_trial(cfg, r, &f, j)?;
        error_history.push(trial.error_norm());
        f = learner.update(&trial)?;
    }
    let final_trial = run_trial(cfg, r, &f, iterations)?;
    error_history.push(final_trial.error_norm());
    Ok(NoilcOutcome { f, error_history, final_trial })
}

/// `[(1 - z^-1) r, (1 - z^-1)^2 r]` with zero initial conditions.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisMatrix {
    columns: DMatrix<f64>,
}

impl BasisMatrix {
    pub fn from_reference(r: &[f64]) -> Self {
        let d1 = backward_difference(r);
        let d2 = backward_difference(&d1);
        let n = r.len();
        BasisMatrix { columns: DMatrix::from_fn(n, 2, |i, k| if k == 0 { d1[i] } else { d2[i] }) }
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn horizon(&self) -> usize {
        self.columns.nrows()
    }

    pub fn velocity(&self) -> &[f64] {
        &self.columns.as_slice()[..self.horizon()]
    }

    pub fn acceleration(&self) -> &[f64] {
        &self.columns.as_slice()[self.horizon()..]
    }

    /// `F(theta) r`.
    pub fn feedforward(&self, theta: [f64; 2]) -> Vec<f64> {
        self.velocity()
            .iter()
            .zip(self.acceleration())
            .map(|(v, a)| theta[0] * v + theta[1] * a)
            .collect()
    }
}

pub fn backward_difference(r: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(r.len());
    let mut prev = 0.0;
    for &v in r {
        out.push(v - prev);
        prev = v;
    }
    out
}

/// `theta_{j+1} = theta_j + (M^T W M)^{-1} M^T W e_j` with `M = J Psi`.
pub fn bfilc_update(
    basis: &BasisMatrix,
    model_sp: &LiftedOperator,
    trial: &TrialRecord,
    theta: [f64; 2],
    weight: &Weight,
) -> Result<[f64; 2]> {
    let n = basis.horizon();
    for len in [model_sp.horizon(), trial.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, got: len });
        }
    }
    let m = model_sp.matrix() * basis.columns();
    let wm = weight.apply_matrix(&m);
    let g = m.tr_mul(&wm);
    let b = wm.tr_mul(&DVector::from_column_slice(&trial.e));
    let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
    if !(g[(0, 0)] > 0.0 && g[(1, 1)] > 0.0 && det > 1e-12 * g[(0, 0)] * g[(1, 1)]) {
        return Err(Error::DegenerateBasis(
            "M^T W M is rank deficient; the reference does not excite both basis functions".into(),
        ));
    }
    let d0 = (g[(1, 1)] * b[0] - g[(0, 1)] * b[1]) / det;
    let d1 = (g[(0, 0)] * b[1] - g[(1, 0)] * b[0]) / det;
    Ok([theta[0] + d0, theta[1] + d1])
}

/// `‖e‖_W`.
pub fn weighted_norm(e: &[f64], weight: &Weight) -> f64 {
    match weight {
        Weight::Identity => norm(e),
        w => w.quadratic(e).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifted_lti::TransferFunction;
    use approx::assert_abs_diff_eq;

    fn toy_sp(n: usize) -> LiftedOperator {
        TransferFunction::new(vec![0.5, 0.3], vec![1.0, -0.6], 1e-3).unwrap().lift(n)
    }

    fn record(f: Vec<f64>, e: Vec<f64>) -> TrialRecord {
        let n = f.len();
        TrialRecord { trial_index: 0, r: vec![0.0; n], f, u: vec![0.0; n], x: vec![0.0; n], y: vec![0.0; n], e }
    }

    #[test]
    fn zero_error_is_a_fixed_point() {
        let l = NoilcLearner::new(toy_sp(8), Weight::Identity, 1.0, 1e-10).unwrap();
        let f = vec![1.0, -2.0, 3.0, 0.5, 0.0, 1.0, 2.0, 3.0];
        assert_eq!(l.update(&record(f.clone(), vec![0.0; 8])).unwrap(), f);
        let basis = BasisMatrix::from_reference(&[0.0, 0.1, 0.3, 0.6, 0.8, 0.9, 1.0, 1.0]);
        let th = bfilc_update(&basis, &toy_sp(8), &record(vec![0.0; 8], vec![0.0; 8]), [3.0, 4.0], &Weight::Identity)
            .unwrap();
        assert_eq!(th, [3.0, 4.0]);
    }

    #[test]
    fn singular_normal_matrix_without_regularization() {
        // strictly proper model: last column of J is zero
        let sp = TransferFunction::new(vec![0.0, 1.0], vec![1.0, -0.5], 1e-3).unwrap().lift(6);
        assert!(matches!(NoilcLearner::new(sp, Weight::Identity, 1.0, 0.0), Err(Error::Singular(_))));
    }

    #[test]
    fn invalid_knobs_rejected() {
        assert!(NoilcLearner::new(toy_sp(4), Weight::Identity, 0.0, 0.0).is_err());
        assert!(NoilcLearner::new(toy_sp(4), Weight::Identity, 1.5, 0.0).is_err());
        assert!(NoilcLearner::new(toy_sp(4), Weight::Scaled(-1.0), 1.0, 0.0).is_err());
        let asym = DMatrix::from_fn(4, 4, |i, j| if i <= j { 1.0 + (i + j) as f64 } else { 0.0 });
        assert!(NoilcLearner::new(toy_sp(4), Weight::Matrix(asym), 1.0, 0.0).is_err());
    }

    #[test]
    fn exact_step_zeroes_predicted_error() {
        let sp = toy_sp(16);
        let l = NoilcLearner::new(sp.clone(), Weight::Identity, 1.0, 0.0).unwrap();
        let e: Vec<f64> = (0..16).map(|t| (t as f64 * 0.7).sin()).collect();
        let df = l.step(&e).unwrap();
        let pred = sp.apply(&df);
        for (a, b) in pred.iter().zip(&e) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn basis_columns_are_lifted_differences() {
        let r = [0.0, 1.0, 4.0, 9.0, 16.0];
        let b = BasisMatrix::from_reference(&r);
        assert_eq!(b.velocity(), &[0.0, 1.0, 3.0, 5.0, 7.0]);
        assert_eq!(b.acceleration(), &[0.0, 1.0, 2.0, 2.0, 2.0]);
        let d = TransferFunction::new(vec![1.0, -1.0], vec![1.0], 1.0).unwrap();
        let d2 = d.series(&d).unwrap();
        assert_eq!(d.lift(5).apply(&r), b.velocity());
        assert_eq!(d2.lift(5).apply(&r), b.acceleration());
        assert_eq!(b.feedforward([2.0, -1.0]), vec![0.0, 1.0, 4.0, 8.0, 12.0]);
    }

    #[test]
    fn constant_reference_is_degenerate() {
        let r = vec![0.0; 10];
        let err = bfilc_update(
            &BasisMatrix::from_reference(&r),
            &toy_sp(10),
            &record(vec![0.0; 10], vec![1.0; 10]),
            [0.0, 0.0],
            &Weight::Identity,
        );
        assert!(matches!(err, Err(Error::DegenerateBasis(_))));
    }

    #[test]
    fn weighted_norm_matches_quadratic_form() {
        let e = [1.0, 2.0, -2.0];
        assert_abs_diff_eq!(weighted_norm(&e, &Weight::Identity), 3.0);
        assert_abs_diff_eq!(weighted_norm(&e, &Weight::Scaled(4.0)), 6.0);
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 1.0]));
        assert_abs_diff_eq!(weighted_norm(&e, &Weight::Matrix(m)), 5f64.sqrt());
    }
}
