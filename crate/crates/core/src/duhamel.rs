//! Forced problems `ψ' = −Bψ + f` on the slab and the half-space.
//!
//! In eigen-coordinates each mode obeys `u' = −λu + g(x)`. Positive modes are
//! integrated forward from `u(0) = 0`, negative modes backward from `u(τ) = 0`
//! (or from infinity), giving the particular solutions `ψ₁⁺` and `ψ₁⁻`. With `g`
//! piecewise linear the convolution over each segment is exact:
//! `∫₀^h e^{−λs}(g_b − Δs/h) ds = g_b φ₁ − Δ h ψ(λh)`.

use std::fmt::Write as _;
use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::halfrange::{self, BoundaryData, HalfRangeError, HalfRangeSolution, Slab, SolveOptions};
use crate::krein::KreinDecomposition;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DuhamelError {
    #[error("forcing tail is not integrable on the half-space: {0}")]
    TailNotIntegrable(String),
    #[error("invalid forcing samples: {0}")]
    BadSamples(String),
    #[error("forcing was written for model {found}, expected {expected}")]
    HashMismatch { expected: String, found: String },
    #[error(transparent)]
    HalfRange(#[from] HalfRangeError),
}

/// Behaviour of `f` beyond its last sample `x_L`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailModel {
    /// `f(x) = f(x_L)`; no decay declared.
    #[default]
    Hold,
    /// `f(x) = 0`.
    Zero,
    /// `f(x) = f(x_L) e^{−rate (x − x_L)}`.
    Exponential { rate: f64 },
}

/// Optional Hölder data `‖f(x) − f(y)‖ ≤ K|x − y|^k`, carried as metadata.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Holder {
    pub constant: f64,
    pub exponent: f64,
}

/// Piecewise-linear `f: [0, x_L] → H` with a declared tail.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingFunction {
    xs: Vec<f64>,
    values: Vec<DVector<f64>>,
    tail: TailModel,
    holder: Option<Holder>,
}

impl ForcingFunction {
    pub fn new(xs: Vec<f64>, values: Vec<DVector<f64>>, tail: TailModel) -> Result<Self, DuhamelError> {
        if xs.is_empty() || xs.len() != values.len() {
            return Err(DuhamelError::BadSamples(format!(
                "{} positions, {} values",
                xs.len(),
                values.len()
            )));
        }
        if xs[0] != 0.0 {
            return Err(DuhamelError::BadSamples(format!("first sample at {} instead of 0", xs[0])));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().any(|x| !x.is_finite()) {
            return Err(DuhamelError::BadSamples("positions must be finite and strictly increasing".into()));
        }
        let n = values[0].len();
        if values.iter().any(|v| v.len() != n || v.iter().any(|x| !x.is_finite())) {
            return Err(DuhamelError::BadSamples("values must be finite vectors of one length".into()));
        }
        if let TailModel::Exponential { rate } = tail {
            if !rate.is_finite() {
                return Err(DuhamelError::BadSamples(format!("tail rate {rate} is not finite")));
            }
        }
        Ok(Self {
            xs,
            values,
            tail,
            holder: None,
        })
    }

    pub fn zero(n: usize) -> Self {
        Self::constant(DVector::zeros(n))
    }

    /// `f(x) = c` for all `x ≥ 0`.
    pub fn constant(c: DVector<f64>) -> Self {
        Self {
            xs: vec![0.0],
            values: vec![c],
            tail: TailModel::Hold,
            holder: None,
        }
    }

    /// Samples `f` at the given positions.
    pub fn sampled(xs: Vec<f64>, f: impl Fn(f64) -> DVector<f64>, tail: TailModel) -> Result<Self, DuhamelError> {
        let values = xs.iter().map(|&x| f(x)).collect();
        Self::new(xs, values, tail)
    }

    pub fn with_holder(mut self, holder: Holder) -> Self {
        self.holder = Some(holder);
        self
    }

    pub fn holder(&self) -> Option<Holder> {
        self.holder
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn positions(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn tail(&self) -> TailModel {
        self.tail
    }

    fn last_x(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    /// Tail amplitude `c` and rate `r` with `f = c e^{−r(x − x_L)}` beyond `x_L`.
    fn tail_form(&self) -> (DVector<f64>, f64) {
        let last = self.values[self.values.len() - 1].clone();
        match self.tail {
            TailModel::Hold => (last, 0.0),
            TailModel::Zero => (last * 0.0, 0.0),
            TailModel::Exponential { rate } => (last, rate),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|&x| x == 0.0))
    }

    /// `f(x)`; right-continuous at `x_L` when the tail jumps.
    pub fn value(&self, x: f64) -> DVector<f64> {
        let xl = self.last_x();
        if x >= xl && (x > xl || self.xs.len() == 1) {
            let (c, r) = self.tail_form();
            return c * (-r * (x - xl)).exp();
        }
        if x <= 0.0 {
            return self.values[0].clone();
        }
        let j = self.xs.partition_point(|&v| v <= x) - 1;
        if j + 1 >= self.xs.len() {
            return self.values[j].clone();
        }
        let t = (x - self.xs[j]) / (self.xs[j + 1] - self.xs[j]);
        &self.values[j] * (1.0 - t) + &self.values[j + 1] * t
    }

    /// `∫ ‖f‖ dx < ∞` on the half-space, judged from the declared tail.
    pub fn check_integrable(&self) -> Result<(), DuhamelError> {
        let last = &self.values[self.values.len() - 1];
        match self.tail {
            TailModel::Zero => Ok(()),
            TailModel::Hold if last.iter().all(|&v| v == 0.0) => Ok(()),
            TailModel::Hold => Err(DuhamelError::TailNotIntegrable(
                "forcing holds a nonzero value beyond its last sample and declares no decay".into(),
            )),
            TailModel::Exponential { rate } if rate > 0.0 || last.iter().all(|&v| v == 0.0) => Ok(()),
            TailModel::Exponential { rate } => Err(DuhamelError::TailNotIntegrable(format!(
                "exponential tail rate {rate} is not positive"
            ))),
        }
    }

    /// Reads `x, f_1, …, f_n` rows after an optional `# model_hash=` comment and
    /// a header row. A hash present in the file must equal `expected_hash`.
    pub fn from_csv(
        mut reader: impl Read,
        expected_hash: Option<&str>,
        tail: TailModel,
    ) -> Result<Self, DuhamelError> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| DuhamelError::BadSamples(e.to_string()))?;
        let mut header_seen = false;
        let mut xs = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(found) = comment.trim().strip_prefix("model_hash=") {
                    if let Some(expected) = expected_hash {
                        if found.trim() != expected {
                            return Err(DuhamelError::HashMismatch {
                                expected: expected.to_string(),
                                found: found.trim().to_string(),
                            });
                        }
                    }
                }
                continue;
            }
            if !header_seen {
                header_seen = true;
                if line.split(',').next().is_some_and(|s| s.trim().parse::<f64>().is_err()) {
                    continue;
                }
            }
            let row: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let row = row.map_err(|e| DuhamelError::BadSamples(format!("line {}: {e}", lineno + 1)))?;
            if row.len() < 2 {
                return Err(DuhamelError::BadSamples(format!("line {}: no values", lineno + 1)));
            }
            xs.push(row[0]);
            values.push(DVector::from_column_slice(&row[1..]));
        }
        Self::new(xs, values, tail)
    }

    pub fn to_csv(&self, model_hash: &str) -> String {
        let mut out = format!("# model_hash={model_hash}\nx");
        for i in 0..self.dim() {
            let _ = write!(out, ",f_{}", i + 1);
        }
        out.push('\n');
        for (x, v) in self.xs.iter().zip(&self.values) {
            let _ = write!(out, "{x:e}");
            for y in v.iter() {
                let _ = write!(out, ",{y:e}");
            }
            out.push('\n');
        }
        out
    }
}

/// `φ₁(κ, d) = ∫₀^d e^{−κs} ds`, finite for `d = ∞` when `κ > 0`.
fn phi1(kappa: f64, d: f64) -> f64 {
    if kappa == 0.0 {
        d
    } else if d.is_infinite() {
        1.0 / kappa
    } else {
        -(-kappa * d).exp_m1() / kappa
    }
}

/// `ψ(z) = ∫₀¹ t e^{−zt} dt`.
fn psi_unit(z: f64) -> f64 {
    if z.abs() < 0.1 {
        let mut term = 1.0;
        let mut sum = 0.5;
        for k in 1..16 {
            term *= -z / k as f64;
            sum += term / (k + 2) as f64;
        }
        sum
    } else {
        (-(-z).exp_m1() - z * (-z).exp()) / (z * z)
    }
}

/// `∫₀^h e^{−κs}(g_far + (g_near − g_far)(1 − s/h)) ds` where `s` runs away
/// from the evaluation end (`g_near` at `s = 0`).
fn segment(kappa: f64, h: f64, g_near: f64, g_far: f64) -> f64 {
    g_near * phi1(kappa, h) - (g_near - g_far) * h * psi_unit(kappa * h)
}

/// `∫₀^d e^{−a(d−s)} e^{−bs} ds` for `a, b ≥ 0`.
fn mixed(a: f64, b: f64, d: f64) -> f64 {
    (-a.min(b) * d).exp() * phi1((a - b).abs(), d)
}

/// `ψ₁⁺` and `ψ₁⁻` for one forcing, tabulated at the breakpoints.
#[derive(Debug, Clone)]
pub struct ParticularSolutions<'a> {
    k: &'a KreinDecomposition,
    f: ForcingFunction,
    slab: Slab,
    /// Sample positions inside the domain, and `τ` for a finite slab.
    nodes: Vec<f64>,
    /// Modal forcing at `nodes` (left limits at the last sample for a jumping tail).
    g_plus: DMatrix<f64>,
    g_minus: DMatrix<f64>,
    /// Positive-mode amplitudes of `ψ₁⁺` at `nodes`.
    u_plus: DMatrix<f64>,
    /// `w` with `ψ₁⁻ = −V₋w` at `nodes`.
    w_minus: DMatrix<f64>,
    /// Modal tail amplitudes and rate.
    tail_plus: DVector<f64>,
    tail_minus: DVector<f64>,
    tail_rate: f64,
    /// Value of `w` at the tail start (`x_L`), when the tail lies inside the domain.
    w_tail_start: DVector<f64>,
}

/// Precomputes `ψ₁^±` for `f` on the slab `slab`.
pub fn particular_solutions<'a>(
    k: &'a KreinDecomposition,
    f: &ForcingFunction,
    slab: Slab,
) -> Result<ParticularSolutions<'a>, DuhamelError> {
    if f.dim() != k.dim() {
        return Err(DuhamelError::BadSamples(format!(
            "forcing has dimension {}, model has {}",
            f.dim(),
            k.dim()
        )));
    }
    let end = match slab {
        Slab::Finite(tau) => tau,
        Slab::HalfSpace => {
            f.check_integrable()?;
            f64::INFINITY
        }
    };
    let xl = f.last_x();
    let mut nodes: Vec<f64> = f.xs.iter().copied().filter(|&x| x < end).collect();
    if end.is_finite() {
        nodes.push(end);
    }
    let p = k.n_plus();
    let q = k.n_minus();
    let nb = nodes.len();
    // modal values: left limits at the breakpoints up to x_L, tail values after
    let mut g_plus = DMatrix::zeros(p, nb);
    let mut g_minus = DMatrix::zeros(q, nb);
    for (j, &x) in nodes.iter().enumerate() {
        let v = if x <= xl {
            let idx = f.xs.partition_point(|&s| s < x);
            if idx < f.xs.len() && f.xs[idx] == x {
                f.values[idx].clone()
            } else {
                f.value(x)
            }
        } else {
            f.value(x)
        };
        g_plus.set_column(j, &k.coords_plus(&v));
        g_minus.set_column(j, &k.coords_minus(&v));
    }
    let (tc, tail_rate) = f.tail_form();
    let tail_plus = k.coords_plus(&tc);
    let tail_minus = k.coords_minus(&tc);
    let lp = k.eigenvalues_plus();
    let mu: Vec<f64> = k.eigenvalues_minus().iter().map(|l| -l).collect();

    // right-limit of g at the segment start: differs from the node value only at x_L
    let seg_start = |gm: &DMatrix<f64>, tail: &DVector<f64>, j: usize, i: usize| -> f64 {
        if nodes[j] >= xl {
            tail[i] * (-tail_rate * (nodes[j] - xl)).exp()
        } else {
            gm[(i, j)]
        }
    };
    let seg_end = |gm: &DMatrix<f64>, tail: &DVector<f64>, j: usize, i: usize| -> f64 {
        if nodes[j] > xl {
            tail[i] * (-tail_rate * (nodes[j] - xl)).exp()
        } else {
            gm[(i, j)]
        }
    };

    let mut u_plus = DMatrix::zeros(p, nb);
    for j in 1..nb {
        let h = nodes[j] - nodes[j - 1];
        for i in 0..p {
            let decay = (-lp[i] * h).exp();
            let add = if nodes[j - 1] >= xl {
                tail_plus[i] * (-tail_rate * (nodes[j - 1] - xl)).exp() * mixed(lp[i], tail_rate, h)
            } else {
                segment(lp[i], h, seg_end(&g_plus, &tail_plus, j, i), seg_start(&g_plus, &tail_plus, j - 1, i))
            };
            u_plus[(i, j)] = decay * u_plus[(i, j - 1)] + add;
        }
    }

    // backward sweep; the tail start value covers [x_L, end)
    let mut w_tail_start = DVector::zeros(q);
    if xl < end {
        for i in 0..q {
            w_tail_start[i] = tail_minus[i] * phi1(mu[i] + tail_rate, end - xl);
        }
    }
    let mut w_minus = DMatrix::zeros(q, nb);
    if nb > 0 {
        let last = nb - 1;
        for i in 0..q {
            w_minus[(i, last)] = if nodes[last] >= xl && nodes[last] < end {
                tail_minus[i]
                    * (-tail_rate * (nodes[last] - xl)).exp()
                    * phi1(mu[i] + tail_rate, end - nodes[last])
            } else {
                0.0
            };
        }
    }
    for j in (0..nb.saturating_sub(1)).rev() {
        let h = nodes[j + 1] - nodes[j];
        for i in 0..q {
            let decay = (-mu[i] * h).exp();
            let add = if nodes[j] >= xl {
                tail_minus[i] * (-tail_rate * (nodes[j] - xl)).exp() * phi1(mu[i] + tail_rate, h)
            } else {
                segment(mu[i], h, seg_start(&g_minus, &tail_minus, j, i), seg_end(&g_minus, &tail_minus, j + 1, i))
            };
            w_minus[(i, j)] = decay * w_minus[(i, j + 1)] + add;
        }
    }
    Ok(ParticularSolutions {
        k,
        f: f.clone(),
        slab,
        nodes,
        g_plus,
        g_minus,
        u_plus,
        w_minus,
        tail_plus,
        tail_minus,
        tail_rate,
        w_tail_start,
    })
}

impl<'a> ParticularSolutions<'a> {
    fn end(&self) -> f64 {
        self.slab.tau().unwrap_or(f64::INFINITY)
    }

    fn check_x(&self, x: f64) -> Result<(), DuhamelError> {
        if x >= 0.0 && x <= self.end() && x.is_finite() {
            Ok(())
        } else {
            Err(HalfRangeError::OutOfSlab { x, tau: self.end() }.into())
        }
    }

    /// Modal forcing value on the segment containing `x`, at `x`.
    fn g_at(&self, x: f64) -> (DVector<f64>, DVector<f64>) {
        let v = self.f.value(x);
        (self.k.coords_plus(&v), self.k.coords_minus(&v))
    }

    /// Positive-mode amplitudes of `ψ₁⁺(x)`.
    pub fn modes_plus(&self, x: f64) -> Result<DVector<f64>, DuhamelError> {
        self.check_x(x)?;
        let lp = self.k.eigenvalues_plus();
        let xl = self.f.last_x();
        let j = self.nodes.partition_point(|&s| s <= x).saturating_sub(1);
        let a = self.nodes[j];
        let d = x - a;
        let mut out = DVector::zeros(lp.len());
        if d == 0.0 {
            out.copy_from(&self.u_plus.column(j));
            return Ok(out);
        }
        let gx = self.g_at(x).0;
        for i in 0..lp.len() {
            let base = (-lp[i] * d).exp() * self.u_plus[(i, j)];
            let add = if a >= xl {
                self.tail_plus[i] * (-self.tail_rate * (a - xl)).exp() * mixed(lp[i], self.tail_rate, d)
            } else {
                segment(lp[i], d, gx[i], self.g_plus[(i, j)])
            };
            out[i] = base + add;
        }
        Ok(out)
    }

    /// `w(x)` with `ψ₁⁻(x) = −V₋ w(x)`.
    fn w_at(&self, x: f64) -> Result<DVector<f64>, DuhamelError> {
        self.check_x(x)?;
        let mu: Vec<f64> = self.k.eigenvalues_minus().iter().map(|l| -l).collect();
        let q = mu.len();
        let xl = self.f.last_x();
        let end = self.end();
        let mut out = DVector::zeros(q);
        if x >= end {
            return Ok(out);
        }
        if x >= xl {
            for i in 0..q {
                out[i] = self.tail_minus[i] * (-self.tail_rate * (x - xl)).exp() * phi1(mu[i] + self.tail_rate, end - x);
            }
            return Ok(out);
        }
        let j = self.nodes.partition_point(|&s| s <= x) - 1;
        let b = self.nodes[j + 1];
        let h = b - x;
        let gx = self.g_at(x).1;
        let g_b = |i: usize| -> f64 {
            if b > xl {
                self.tail_minus[i] * (-self.tail_rate * (b - xl)).exp()
            } else {
                self.g_minus[(i, j + 1)]
            }
        };
        for i in 0..q {
            let w_b = if b == xl && xl < end { self.w_tail_start[i] } else { self.w_minus[(i, j + 1)] };
            out[i] = (-mu[i] * h).exp() * w_b + segment(mu[i], h, gx[i], g_b(i));
        }
        Ok(out)
    }

    /// Negative-mode amplitudes of `ψ₁⁻(x)`.
    pub fn modes_minus(&self, x: f64) -> Result<DVector<f64>, DuhamelError> {
        Ok(-self.w_at(x)?)
    }

    /// `ψ₁⁺(x) = ∫₀ˣ e^{−(x−y)B⁺} P^B_+ f(y) dy`.
    pub fn evaluate_plus(&self, x: f64) -> Result<DVector<f64>, DuhamelError> {
        Ok(self.k.vectors_plus() * self.modes_plus(x)?)
    }

    /// `ψ₁⁻(x) = −∫ₓ^τ e^{(y−x)B⁻} P^B_− f(y) dy`.
    pub fn evaluate_minus(&self, x: f64) -> Result<DVector<f64>, DuhamelError> {
        Ok(self.k.vectors_minus() * self.modes_minus(x)?)
    }

    pub fn evaluate(&self, x: f64) -> Result<DVector<f64>, DuhamelError> {
        Ok(self.evaluate_plus(x)? + self.evaluate_minus(x)?)
    }

    /// `(ψ₁⁺ + ψ₁⁻)'(x) = −B(ψ₁⁺ + ψ₁⁻)(x) + f(x)`, mode by mode.
    pub fn derivative(&self, x: f64) -> Result<DVector<f64>, DuhamelError> {
        let (gp, gm) = self.g_at(x);
        let lp = DVector::from_column_slice(self.k.eigenvalues_plus());
        let lm = DVector::from_column_slice(self.k.eigenvalues_minus());
        let dp = gp - self.modes_plus(x)?.component_mul(&lp);
        let dm = gm - self.modes_minus(x)?.component_mul(&lm);
        Ok(self.k.vectors_plus() * dp + self.k.vectors_minus() * dm)
    }
}

/// `ψ = ψ₁⁺ + ψ₁⁻ + ψ₀` with `ψ₀` solving the homogeneous problem for the
/// adjusted data.
#[derive(Debug, Clone)]
pub struct ForcedSolution<'a> {
    pub particular: ParticularSolutions<'a>,
    pub homogeneous: HalfRangeSolution<'a>,
}

impl<'a> ForcedSolution<'a> {
    pub fn slab(&self) -> Slab {
        self.particular.slab
    }

    pub fn evaluate(&self, x: f64) -> Result<DVector<f64>, DuhamelError> {
        Ok(self.particular.evaluate(x)? + self.homogeneous.evaluate(x)?)
    }

    pub fn derivative(&self, x: f64) -> Result<DVector<f64>, DuhamelError> {
        Ok(self.particular.derivative(x)? + self.homogeneous.derivative(x)?)
    }

    pub fn forcing(&self, x: f64) -> DVector<f64> {
        self.particular.f.value(x)
    }

    /// `‖ψ' + Bψ − f‖ / (‖B‖‖ψ‖ + ‖f‖)` at `x`, W-norms.
    pub fn relative_residual(&self, x: f64) -> Result<f64, DuhamelError> {
        let k = self.particular.k;
        let m = k.model();
        let psi = self.evaluate(x)?;
        let f = self.forcing(x);
        let r = self.derivative(x)? + m.apply_b(&psi) - &f;
        let scale = k.w_norm(&m.b_matrix()) * m.norm(&psi) + m.norm(&f);
        Ok(if scale == 0.0 { m.norm(&r) } else { m.norm(&r) / scale })
    }
}

/// Finite slab: solves with `φ₊ − P₊ψ₁⁻(0)` and `φ₋ − P₋ψ₁⁺(τ)`.
pub fn solve_nonhomogeneous<'a>(
    k: &'a KreinDecomposition,
    bd: &BoundaryData,
    f: &ForcingFunction,
    opts: &SolveOptions,
) -> Result<ForcedSolution<'a>, DuhamelError> {
    let tau = bd
        .slab()
        .tau()
        .ok_or_else(|| DuhamelError::BadSamples("finite-slab solver called with a half-space".into()))?;
    let particular = particular_solutions(k, f, bd.slab())?;
    let m = k.model();
    let phi_minus = bd.phi_minus().expect("finite boundary data carries φ₋");
    let adj_plus = bd.phi_plus() - m.project_plus(&particular.evaluate_minus(0.0)?);
    let adj_minus = phi_minus - m.project_minus(&particular.evaluate_plus(tau)?);
    let adjusted = bd.with_data(adj_plus, Some(adj_minus));
    let mut homogeneous = halfrange::solve(k, &adjusted, opts)?;
    let forced = |x: f64| -> Result<DVector<f64>, DuhamelError> {
        Ok(particular.evaluate(x)? + homogeneous.evaluate(x)?)
    };
    let (rp, rm) = halfrange::boundary_residuals(m, &forced(0.0)?, Some(&forced(tau)?), bd);
    homogeneous.diagnostics.residual_plus = rp;
    homogeneous.diagnostics.residual_minus = rm;
    Ok(ForcedSolution {
        particular,
        homogeneous,
    })
}

/// Half-space: `ψ = ψ₁⁺ + ψ₁⁻ + e^{−xB⁺}R₊(φ₊ − P₊ψ₁⁻(0))`.
pub fn solve_nonhomogeneous_halfspace<'a>(
    k: &'a KreinDecomposition,
    phi_plus: &DVector<f64>,
    f: &ForcingFunction,
) -> Result<ForcedSolution<'a>, DuhamelError> {
    let particular = particular_solutions(k, f, Slab::HalfSpace)?;
    let m = k.model();
    let adj = phi_plus - m.project_plus(&particular.evaluate_minus(0.0)?);
    let mut homogeneous = halfrange::solve_halfspace(k, &adj)?;
    let psi0 = particular.evaluate(0.0)? + homogeneous.evaluate(0.0)?;
    let bd = BoundaryData::halfspace(m, phi_plus.clone())?;
    homogeneous.diagnostics.residual_plus = halfrange::boundary_residuals(m, &psi0, None, &bd).0;
    Ok(ForcedSolution {
        particular,
        homogeneous,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{random_jpositive_instance, DiscreteModel};
    use crate::krein::decompose;

    fn scalar(l: f64, j: f64) -> KreinDecomposition {
        let m = DiscreteModel::new(
            DVector::from_element(1, 1.0),
            DMatrix::from_element(1, 1, l),
            DVector::from_element(1, j),
            None,
        )
        .unwrap();
        decompose(&m).unwrap()
    }

    #[test]
    fn series_matches_closed_form() {
        for z in [0.099f64, 0.05, 1e-3, -0.05] {
            let closed = (-(-z).exp_m1() - z * (-z).exp()) / (z * z);
            assert!((psi_unit(z) - closed).abs() < 1e-12, "{z}");
        }
        assert!((psi_unit(0.0) - 0.5).abs() < 1e-16);
    }

    #[test]
    fn zero_forcing_gives_zero() {
        let k = decompose(&random_jpositive_instance(4, 1, 0.5)).unwrap();
        let p = particular_solutions(&k, &ForcingFunction::zero(4), Slab::Finite(2.0)).unwrap();
        for x in [0.0, 0.4, 2.0] {
            assert_eq!(p.evaluate(x).unwrap().amax(), 0.0);
        }
    }

    #[test]
    fn constant_forcing_single_mode() {
        let lambda = 2.5;
        let k = scalar(lambda, 1.0);
        let c = 0.7;
        let f = ForcingFunction::constant(DVector::from_element(1, c));
        let p = particular_solutions(&k, &f, Slab::Finite(3.0)).unwrap();
        for x in [0.0, 1e-9, 0.3, 1.7, 3.0] {
            let want = -(-lambda * x).exp_m1() / lambda * c;
            let got = p.evaluate(x).unwrap()[0];
            assert!((got - want).abs() <= 4.0 * f64::EPSILON * want.abs().max(1e-300), "{x}: {got} vs {want}");
        }
    }

    #[test]
    fn negative_mode_carries_minus_sign() {
        let k = scalar(1.5, -1.0);
        let f = ForcingFunction::constant(DVector::from_element(1, 1.0));
        let p = particular_solutions(&k, &f, Slab::Finite(2.0)).unwrap();
        for x in [0.0_f64, 0.5, 2.0] {
            let want = -(1.0 - (-1.5 * (2.0_f64 - x)).exp()) / 1.5;
            assert!((p.evaluate(x).unwrap()[0] - want).abs() < 1e-15);
        }
    }

    fn trapezoid_oracle(lambda: f64, f: &ForcingFunction, x: f64, tau: f64, steps: usize) -> f64 {
        // independent: plain composite trapezoid of the scalar convolution
        let (a, b) = if lambda > 0.0 { (0.0, x) } else { (x, tau) };
        let kern = |y: f64| if lambda > 0.0 { (-(x - y) * lambda).exp() } else { -((y - x) * lambda).exp() };
        let h = (b - a) / steps as f64;
        let mut s = 0.5 * (kern(a) * f.value(a)[0] + kern(b) * f.value(b)[0]);
        for i in 1..steps {
            let y = a + i as f64 * h;
            s += kern(y) * f.value(y)[0];
        }
        s * h
    }

    #[test]
    fn piecewise_linear_against_refined_quadrature() {
        let xs = vec![0.0, 0.2, 0.5, 0.9, 1.4, 2.0];
        let vals = [0.3, -1.0, 0.8, 2.0, -0.4, 0.1];
        let f = ForcingFunction::new(xs.clone(), vals.iter().map(|&v| DVector::from_element(1, v)).collect(), TailModel::Hold)
            .unwrap();
        for (l, j) in [(3.0, 1.0), (0.4, -1.0)] {
            let k = scalar(l, j);
            let p = particular_solutions(&k, &f, Slab::Finite(2.0)).unwrap();
            for x in [0.1, 0.5, 1.13, 1.9] {
                // every 1/10 of the finest segment, then 10× finer again
                let q = trapezoid_oracle(l * j, &f, x, 2.0, 200_000);
                let got = p.evaluate(x).unwrap()[0];
                assert!((got - q).abs() < 1e-8, "λ={} x={x}: {got} vs {q}", l * j);
            }
        }
    }

    #[test]
    fn halfspace_tail_rules() {
        let k = scalar(1.0, -1.0);
        let f = ForcingFunction::constant(DVector::from_element(1, 2.0));
        assert!(matches!(
            particular_solutions(&k, &f, Slab::HalfSpace),
            Err(DuhamelError::TailNotIntegrable(_))
        ));
        let f = ForcingFunction::new(vec![0.0, 1.0], vec![DVector::from_element(1, 1.0); 2], TailModel::Exponential { rate: -0.1 })
            .unwrap();
        assert!(particular_solutions(&k, &f, Slab::HalfSpace).is_err());
    }

    #[test]
    fn exponential_tail_negative_mode() {
        // ψ₁⁻(x) = −∫ₓ^∞ e^{−μ(y−x)} e^{−r y} dy = −e^{−rx}/(μ + r)
        let mu = 0.8;
        let r = 1.3;
        let k = scalar(mu, -1.0);
        let f = ForcingFunction::new(vec![0.0], vec![DVector::from_element(1, 1.0)], TailModel::Exponential { rate: r }).unwrap();
        let p = particular_solutions(&k, &f, Slab::HalfSpace).unwrap();
        for x in [0.0, 0.5, 4.0] {
            let want = -(-r * x).exp() / (mu + r);
            assert!((p.evaluate(x).unwrap()[0] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn exponential_tail_positive_mode() {
        let lambda = 0.8;
        let r = 1.3;
        let k = scalar(lambda, 1.0);
        let f = ForcingFunction::new(vec![0.0], vec![DVector::from_element(1, 1.0)], TailModel::Exponential { rate: r }).unwrap();
        let p = particular_solutions(&k, &f, Slab::HalfSpace).unwrap();
        for x in [0.0, 0.5, 4.0] {
            let want = ((-r * x).exp() - (-lambda * x).exp()) / (lambda - r);
            assert!((p.evaluate(x).unwrap()[0] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn csv_round_trip_and_hash_guard() {
        let f = ForcingFunction::new(
            vec![0.0, 0.5, 1.0],
            vec![DVector::from_column_slice(&[1.0, 2.0]), DVector::from_column_slice(&[0.5, -1.0]), DVector::from_column_slice(&[0.0, 0.25])],
            TailModel::Zero,
        )
        .unwrap();
        let text = f.to_csv("abc");
        let g = ForcingFunction::from_csv(text.as_bytes(), Some("abc"), TailModel::Zero).unwrap();
        assert_eq!(f, g);
        assert!(matches!(
            ForcingFunction::from_csv(text.as_bytes(), Some("xyz"), TailModel::Zero),
            Err(DuhamelError::HashMismatch { .. })
        ));
    }
}
