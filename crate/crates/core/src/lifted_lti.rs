//! Discrete-time SISO transfer functions and their lifted (finite-horizon
//! convolution matrix) form.
//!
//! Coefficients are stored in ascending powers of `z^-1`, so `1 - z^-1` is
//! `[1.0, -1.0]`, and the denominator is kept monic. A system may carry a
//! `lead` of `k` samples, which multiplies it by `z^k` and makes it noncausal.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Poles must satisfy `|p| < 1 - STABILITY_MARGIN` to count as stable.
pub const STABILITY_MARGIN: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TfRepr", into = "TfRepr")]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
    ts: f64,
    lead: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TfRepr {
    num: Vec<f64>,
    den: Vec<f64>,
    ts: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    lead: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

impl TryFrom<TfRepr> for TransferFunction {
    type Error = Error;

    fn try_from(r: TfRepr) -> Result<Self> {
        TransferFunction::with_lead(r.num, r.den, r.ts, r.lead)
    }
}

impl From<TransferFunction> for TfRepr {
    fn from(tf: TransferFunction) -> Self {
        TfRepr { num: tf.num, den: tf.den, ts: tf.ts, lead: tf.lead }
    }
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>, ts: f64) -> Result<Self> {
        Self::with_lead(num, den, ts, 0)
    }

    /// `z^lead * num / den`.
    pub fn with_lead(mut num: Vec<f64>, mut den: Vec<f64>, ts: f64, mut lead: usize) -> Result<Self> {
        if !(ts.is_finite() && ts > 0.0) {
            return Err(Error::MalformedSystem(format!("sample time must be positive, got {ts}")));
        }
        if den.is_empty() || den[0] == 0.0 {
            return Err(Error::MalformedSystem("den[0] must be nonzero".into()));
        }
        if num.iter().chain(&den).any(|c| !c.is_finite()) {
            return Err(Error::MalformedSystem("non-finite coefficient".into()));
        }
        let d0 = den[0];
        for c in num.iter_mut().chain(den.iter_mut()) {
            *c /= d0;
        }
        trim_trailing_zeros(&mut den);
        trim_trailing_zeros(&mut num);
        if num.iter().all(|&c| c == 0.0) {
            return Ok(TransferFunction { num: vec![0.0], den: vec![1.0], ts, lead: 0 });
        }
        // z^lead * z^-k cancels
        while lead > 0 && num[0] == 0.0 {
            num.remove(0);
            lead -= 1;
        }
        Ok(TransferFunction { num, den, ts, lead })
    }

    pub fn gain(k: f64, ts: f64) -> Result<Self> {
        Self::new(vec![k], vec![1.0], ts)
    }

    /// Pure delay `z^-n`.
    pub fn delay(n: usize, ts: f64) -> Result<Self> {
        let mut num = vec![0.0; n + 1];
        num[n] = 1.0;
        Self::new(num, vec![1.0], ts)
    }

    /// Two-sided FIR: `taps[i]` multiplies `z^(lead - i)`.
    pub fn fir(taps: Vec<f64>, lead: usize, ts: f64) -> Result<Self> {
        Self::with_lead(taps, vec![1.0], ts, lead)
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn ts(&self) -> f64 {
        self.ts
    }

    pub fn lead(&self) -> usize {
        self.lead
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(|&c| c == 0.0)
    }

    /// Delay of the first nonzero Markov parameter, negative for noncausal
    /// systems. `None` for the zero system.
    pub fn relative_degree(&self) -> Option<isize> {
        let first = self.num.iter().position(|&c| c != 0.0)?;
        Some(first as isize - self.lead as isize)
    }

    pub fn is_causal(&self) -> bool {
        self.relative_degree().is_none_or(|d| d >= 0)
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.relative_degree().is_none_or(|d| d >= 1)
    }

    /// Direct feedthrough `h(0)` of a causal system.
    pub fn feedthrough(&self) -> f64 {
        if self.lead == 0 {
            self.num[0]
        } else {
            self.impulse_response(1)[0]
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        let num = self.num.iter().map(|c| c * k).collect();
        Self::with_lead(num, self.den.clone(), self.ts, self.lead).expect("scaling keeps a valid system")
    }

    /// Cascade `self * other`.
    pub fn series(&self, other: &Self) -> Result<Self> {
        self.check_ts(other)?;
        Self::with_lead(
            poly_mul(&self.num, &other.num),
            poly_mul(&self.den, &other.den),
            self.ts,
            self.lead + other.lead,
        )
    }

    /// Sum `self + other`.
    pub fn parallel(&self, other: &Self) -> Result<Self> {
        self.check_ts(other)?;
        let lead = self.lead.max(other.lead);
        let a = poly_mul(&shift(&self.num, lead - self.lead), &other.den);
        let b = poly_mul(&shift(&other.num, lead - other.lead), &self.den);
        Self::with_lead(poly_add(&a, &b), poly_mul(&self.den, &other.den), self.ts, lead)
    }

    fn check_ts(&self, other: &Self) -> Result<()> {
        if (self.ts - other.ts).abs() > 1e-12 * self.ts.max(other.ts) {
            return Err(Error::MalformedSystem(format!(
                "sample time mismatch: {} vs {}",
                self.ts, other.ts
            )));
        }
        Ok(())
    }

    /// Roots of the denominator in the z-plane.
    pub fn poles(&self) -> Vec<Complex<f64>> {
        poly_roots(&self.den)
    }

    pub fn max_pole_modulus(&self) -> f64 {
        self.poles().iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn is_stable(&self) -> bool {
        self.max_pole_modulus() < 1.0 - STABILITY_MARGIN
    }

    /// `H(e^{j omega})` for `omega` in rad/sample.
    pub fn frequency_response(&self, omega: f64) -> Complex<f64> {
        let eval = |c: &[f64]| {
            c.iter()
                .enumerate()
                .map(|(k, &ck)| Complex::from_polar(ck, -omega * k as f64))
                .sum::<Complex<f64>>()
        };
        Complex::from_polar(1.0, omega * self.lead as f64) * eval(&self.num) / eval(&self.den)
    }

    /// Causal Markov parameters `h(0..n)` of `num/den`, ignoring the lead.
    fn causal_impulse(&self, n: usize) -> Vec<f64> {
        let mut delta = vec![0.0; n];
        if n > 0 {
            delta[0] = 1.0;
        }
        lfilter(&self.num, &self.den, &delta)
    }

    /// First `n` Markov parameters `h(0), ..., h(n-1)`.
    pub fn impulse_response(&self, n: usize) -> Vec<f64> {
        let hc = self.causal_impulse(n + self.lead);
        hc[self.lead..].to_vec()
    }

    /// Zero-initial-condition response. For a noncausal system the input is
    /// taken as zero beyond the horizon.
    pub fn simulate(&self, u: &[f64]) -> Vec<f64> {
        if self.lead == 0 {
            return lfilter(&self.num, &self.den, u);
        }
        let mut padded = u.to_vec();
        padded.resize(u.len() + self.lead, 0.0);
        lfilter(&self.num, &self.den, &padded)[self.lead..].to_vec()
    }

    pub fn lift(&self, n: usize) -> LiftedOperator {
        let hc = self.causal_impulse(n + self.lead);
        // h(t) = hc(t + lead), needed for t in 1-n ..= n-1
        let h = |t: isize| -> f64 {
            let k = t + self.lead as isize;
            if k >= 0 && (k as usize) < hc.len() {
                hc[k as usize]
            } else {
                0.0
            }
        };
        LiftedOperator { matrix: DMatrix::from_fn(n, n, |i, j| h(i as isize - j as isize)) }
    }
}

fn trim_trailing_zeros(c: &mut Vec<f64>) {
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
}

fn shift(c: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k];
    out.extend_from_slice(c);
    out
}

pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

pub(crate) fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, &ai) in a.iter().enumerate() {
        out[i] += ai;
    }
    for (i, &bi) in b.iter().enumerate() {
        out[i] += bi;
    }
    out
}

/// Roots in `z` of `c[0] + c[1] z^-1 + ... + c[n] z^-n`, via the eigenvalues
/// of the companion matrix.
pub fn poly_roots(c: &[f64]) -> Vec<Complex<f64>> {
    let mut c = c.to_vec();
    trim_trailing_zeros(&mut c);
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let mut comp = DMatrix::zeros(n, n);
    for j in 0..n {
        comp[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    comp.complex_eigenvalues().iter().copied().collect()
}

/// Direct-form difference equation with monic `a` and zero initial conditions.
pub fn lfilter(b: &[f64], a: &[f64], u: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; u.len()];
    lfilter_into(b, a, u, &mut y);
    y
}

pub(crate) fn lfilter_into(b: &[f64], a: &[f64], u: &[f64], y: &mut [f64]) {
    debug_assert_eq!(a[0], 1.0);
    for t in 0..u.len() {
        let mut acc = 0.0;
        for (k, &bk) in b.iter().enumerate().take(t + 1) {
            acc += bk * u[t - k];
        }
        for (k, &ak) in a.iter().enumerate().take(t + 1).skip(1) {
            acc -= ak * y[t - k];
        }
        y[t] = acc;
    }
}

/// Sample-by-sample evaluation of a causal system, for loops where the input
/// at time t is only known after part of the output has been computed.
#[derive(Clone, Debug)]
pub(crate) struct Recursion<'a> {
    b: &'a [f64],
    a: &'a [f64],
    u: Vec<f64>,
    y: Vec<f64>,
}

impl<'a> Recursion<'a> {
    pub(crate) fn new(sys: &'a TransferFunction, capacity: usize) -> Self {
        debug_assert_eq!(sys.lead, 0);
        Recursion {
            b: &sys.num,
            a: &sys.den,
            u: Vec::with_capacity(capacity),
            y: Vec::with_capacity(capacity),
        }
    }

    /// Output contribution of all past samples (everything except `b0 * u[t]`).
    pub(crate) fn past(&self) -> f64 {
        let t = self.u.len();
        let mut acc = 0.0;
        for (k, &bk) in self.b.iter().enumerate().skip(1).take(t) {
            acc += bk * self.u[t - k];
        }
        for (k, &ak) in self.a.iter().enumerate().skip(1).take(t) {
            acc -= ak * self.y[t - k];
        }
        acc
    }

    pub(crate) fn b0(&self) -> f64 {
        self.b[0]
    }

    pub(crate) fn push(&mut self, u: f64, y: f64) {
        self.u.push(u);
        self.y.push(y);
    }
}

/// Finite-horizon convolution matrix, `matrix[(i, j)] = h(i - j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedOperator {
    matrix: DMatrix<f64>,
}

impl LiftedOperator {
    pub fn identity(n: usize) -> Self {
        LiftedOperator { matrix: DMatrix::identity(n, n) }
    }

    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::MalformedSystem(format!(
                "lifted operator must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(LiftedOperator { matrix })
    }

    pub fn horizon(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.horizon(), "signal length must match the horizon");
        let v = &self.matrix * nalgebra::DVector::from_column_slice(u);
        v.as_slice().to_vec()
    }

    pub fn compose(&self, other: &Self) -> Self {
        LiftedOperator { matrix: &self.matrix * &other.matrix }
    }

    pub fn is_toeplitz(&self, tol: f64) -> bool {
        let n = self.horizon();
        (1..n).all(|i| (1..n).all(|j| (self.matrix[(i, j)] - self.matrix[(i - 1, j - 1)]).abs() <= tol))
    }

    pub fn is_lower_triangular(&self, tol: f64) -> bool {
        let n = self.horizon();
        (0..n).all(|i| (i + 1..n).all(|j| self.matrix[(i, j)].abs() <= tol))
    }
}

pub fn impulse_response(sys: &TransferFunction, n: usize) -> Vec<f64> {
    sys.impulse_response(n)
}

pub fn lift(sys: &TransferFunction, n: usize) -> LiftedOperator {
    sys.lift(n)
}

pub fn simulate(sys: &TransferFunction, u: &[f64]) -> Vec<f64> {
    sys.simulate(u)
}

/// Characteristic polynomial `A_P A_C + B_P B_C` of the loop.
fn closed_loop_den(plant: &TransferFunction, controller: &TransferFunction) -> Result<Vec<f64>> {
    plant.check_ts(controller)?;
    if !plant.is_causal() || !controller.is_causal() {
        return Err(Error::MalformedSystem("feedback loop requires causal P and C".into()));
    }
    Ok(poly_add(
        &poly_mul(plant.den(), controller.den()),
        &poly_mul(plant.num(), controller.num()),
    ))
}

pub fn closed_loop_poles(plant: &TransferFunction, controller: &TransferFunction) -> Result<Vec<Complex<f64>>> {
    let d = closed_loop_den(plant, controller)?;
    if d[0] == 0.0 {
        return Err(Error::MalformedSystem("algebraic loop: 1 + P(inf)C(inf) = 0".into()));
    }
    Ok(poly_roots(&d))
}

fn stable_loop_den(plant: &TransferFunction, controller: &TransferFunction) -> Result<Vec<f64>> {
    let poles = closed_loop_poles(plant, controller)?;
    if poles.iter().any(|p| p.norm() >= 1.0 - STABILITY_MARGIN) {
        let mut moduli: Vec<f64> = poles.iter().map(|p| p.norm()).collect();
        moduli.sort_by(|a, b| b.total_cmp(a));
        return Err(Error::Unstable { moduli });
    }
    closed_loop_den(plant, controller)
}

/// `S = 1 / (1 + PC)`.
pub fn sensitivity(plant: &TransferFunction, controller: &TransferFunction) -> Result<TransferFunction> {
    if plant.is_zero() {
        // no loop: controller poles cancel exactly
        return TransferFunction::gain(1.0, plant.ts());
    }
    let d = stable_loop_den(plant, controller)?;
    TransferFunction::new(poly_mul(plant.den(), controller.den()), d, plant.ts())
}

/// `SP = P / (1 + PC)`.
pub fn process_sensitivity(plant: &TransferFunction, controller: &TransferFunction) -> Result<TransferFunction> {
    if plant.is_zero() {
        return TransferFunction::gain(0.0, plant.ts());
    }
    let d = stable_loop_den(plant, controller)?;
    TransferFunction::new(poly_mul(plant.num(), controller.den()), d, plant.ts())
}
