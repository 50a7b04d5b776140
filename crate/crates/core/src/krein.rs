//! Spectral decomposition of `B = JL` in the Krein space `(H, [·,·])`,
//! `[x, y] = (Jx, y)_W`.
//!
//! The eigenproblem is symmetrised: with `D = W^{1/2}` and `L̃ = D L D⁻¹`,
//! `S = L̃^{1/2}` and `M = S J S` is symmetric, so `M = U Λ Uᵀ` has real
//! spectrum and `ṽ_i = |λ_i|^{1/2} S⁻¹ u_i` are eigenvectors of `J L̃` with
//! `[ṽ_i, ṽ_j] = sgn(λ_i) δ_ij`. Mapping back by `D⁻¹` gives the `v_i`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::DiscreteModel;
use crate::linalg::{condition_number, select_rows, sorted_symmetric_eigen, spectral_norm, symmetrize};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KreinError {
    #[error("L is not positive in the W-inner product (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("eigenvalue of B too close to zero: min |λ| = {min_abs:e}, max |λ| = {max_abs:e}")]
    NearZeroEigenvalue { min_abs: f64, max_abs: f64 },
    #[error("interval endpoint {endpoint} lies on the eigenvalue {eigenvalue}")]
    EndpointOnSpectrum { endpoint: f64, eigenvalue: f64 },
    #[error("inconsistent eigenpairs: {0}")]
    Inconsistent(String),
}

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const POSITIVE: Interval = Interval {
        lo: 0.0,
        hi: f64::INFINITY,
    };
    pub const NEGATIVE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: 0.0,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then_some(Interval { lo, hi })
    }
}

/// Pairwise intersection of two unions of intervals.
pub fn intersect_sets(a: &[Interval], b: &[Interval]) -> Vec<Interval> {
    a.iter().flat_map(|x| b.iter().filter_map(move |y| x.intersect(y))).collect()
}

fn in_set(set: &[Interval], x: f64) -> bool {
    set.iter().any(|i| i.contains(x))
}

/// Finite-dimensional defects of the spectral-function properties for a pair of
/// Borel sets `Δ, Δ′` (each a union of open intervals). All are relative
/// max-norm or 2-norm quantities in `D = W^{1/2}` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDefects {
    /// `‖E(Δ)² − E(Δ)‖`
    pub idempotence: f64,
    /// `‖E(Δ∩Δ′) − E(Δ)E(Δ′)‖`
    pub multiplicativity: f64,
    /// `‖E(Δ∪Δ′) − E(Δ) − E(Δ′) + E(Δ∩Δ′)‖`
    pub additivity: f64,
    /// Largest deviation of the Krein Gram matrix on `ran E(Δ∩ℝ±)` from `±I`;
    /// infinite if the form is not definite there.
    pub sign_definiteness: f64,
    /// `‖E(Δ)B − BE(Δ)‖ / ‖B‖`
    pub commutation: f64,
    /// `‖B E(Δ)‖ / (sup_{λ∈σ(B)∩Δ}|λ| · ‖E(Δ)‖)`; finite exactly when `B` is
    /// bounded on the range.
    pub boundedness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KreinDecomposition {
    model: DiscreteModel,
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
    signs: Vec<f64>,
    n_minus: usize,
    p_plus: DMatrix<f64>,
    p_minus: DMatrix<f64>,
    gamma_plus: f64,
    gamma_minus: f64,
    beta_plus: f64,
    beta_minus: f64,
}

/// Computes the decomposition through the symmetric route described in the
/// module docs.
pub fn decompose(m: &DiscreteModel) -> Result<KreinDecomposition, KreinError> {
    let n = m.dim();
    let d = m.weights().map(f64::sqrt);
    let (mu, q) = sorted_symmetric_eigen(m.symmetrized_operator());
    if let Some(&lo) = mu.first() {
        if !(lo > 0.0) {
            return Err(KreinError::NotPositive { min_eigenvalue: lo });
        }
    }
    let root = DVector::from_iterator(n, mu.iter().map(|v| v.sqrt()));
    let s = &q * DMatrix::from_diagonal(&root) * q.transpose();
    let s_inv = &q * DMatrix::from_diagonal(&root.map(|v| 1.0 / v)) * q.transpose();
    let mut js = s.clone();
    for (i, mut row) in js.row_iter_mut().enumerate() {
        row *= m.signature()[i];
    }
    let mut mm = &s * js;
    symmetrize(&mut mm);
    let (lambda, u) = sorted_symmetric_eigen(mm);
    check_spectrum(&lambda)?;
    let mut v = &s_inv * u;
    for (i, mut col) in v.column_iter_mut().enumerate() {
        let scale = lambda[i].abs().sqrt();
        for (r, x) in col.iter_mut().enumerate() {
            *x *= scale / d[r];
        }
    }
    fix_signs(&mut v);
    from_eigenpairs(m.clone(), lambda, v)
}

fn check_spectrum(lambda: &[f64]) -> Result<(), KreinError> {
    if lambda.is_empty() {
        return Ok(());
    }
    let min_abs = lambda.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
    let max_abs = lambda.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
    if !(min_abs >= 1e-12 * max_abs) || min_abs == 0.0 {
        return Err(KreinError::NearZeroEigenvalue { min_abs, max_abs });
    }
    Ok(())
}

/// Makes the largest-magnitude entry of every column positive.
fn fix_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best: f64 = 0.0;
        for &x in col.iter() {
            if x.abs() > best.abs() {
                best = x;
            }
        }
        if best < 0.0 {
            col.neg_mut();
        }
    }
}

/// Builds a decomposition from given eigenpairs of `B` (eigenvalues ascending,
/// columns Krein-normalised). Used by [`decompose`] and to restore cached data.
pub fn from_eigenpairs(
    model: DiscreteModel,
    eigenvalues: Vec<f64>,
    vectors: DMatrix<f64>,
) -> Result<KreinDecomposition, KreinError> {
    let n = model.dim();
    if eigenvalues.len() != n || vectors.nrows() != n || vectors.ncols() != n {
        return Err(KreinError::Inconsistent(format!(
            "model dimension {n}, {} eigenvalues, {}x{} vectors",
            eigenvalues.len(),
            vectors.nrows(),
            vectors.ncols()
        )));
    }
    if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
        return Err(KreinError::Inconsistent("eigenvalues not ascending".into()));
    }
    check_spectrum(&eigenvalues)?;
    let n_minus = eigenvalues.iter().take_while(|&&l| l < 0.0).count();
    let n_plus = n - n_minus;
    let j_plus = model.plus_indices().len();
    if j_plus != n_plus {
        return Err(KreinError::Inconsistent(format!(
            "{n_plus} positive eigenvalues but J has {j_plus} positive entries"
        )));
    }
    let jw = model.signature().component_mul(model.weights());
    let signs: Vec<f64> = (0..n)
        .map(|i| {
            let c = vectors.column(i);
            c.iter().zip(jw.iter()).map(|(a, b)| a * a * b).sum::<f64>().signum()
        })
        .collect();
    let vp = vectors.columns(n_minus, n_plus).into_owned();
    let vm = vectors.columns(0, n_minus).into_owned();
    let projector = |v: &DMatrix<f64>, sign: f64| {
        let mut vt = v.transpose();
        for (j, mut col) in vt.column_iter_mut().enumerate() {
            col *= sign * jw[j];
        }
        v * vt
    };
    let p_plus = projector(&vp, 1.0);
    let p_minus = projector(&vm, -1.0);
    let gamma_side = |v: &DMatrix<f64>| {
        if v.ncols() == 0 {
            return 1.0;
        }
        let mut wv = v.clone();
        for (r, mut row) in wv.row_iter_mut().enumerate() {
            row *= model.weights()[r];
        }
        let mut gram = v.transpose() * wv;
        symmetrize(&mut gram);
        let (ev, _) = sorted_symmetric_eigen(gram);
        1.0 / ev[ev.len() - 1].sqrt()
    };
    let gamma_plus = gamma_side(&vp).min(1.0);
    let gamma_minus = gamma_side(&vm).min(1.0);
    let plus = model.plus_indices();
    let minus = model.minus_indices();
    // coordinates of P^B_± g for g supported on the given coordinates
    let coords = |v: &DMatrix<f64>, cols: &[usize]| {
        DMatrix::from_fn(v.ncols(), cols.len(), |i, k| v[(cols[k], i)] * jw[cols[k]])
    };
    let beta_side = |own: &DMatrix<f64>, other: &DMatrix<f64>, cols: &[usize]| -> f64 {
        if cols.is_empty() || other.ncols() == 0 {
            return 0.0;
        }
        let c_own = coords(own, cols);
        let c_other = coords(other, cols);
        match c_own.try_inverse() {
            Some(inv) => spectral_norm(&(c_other * inv)),
            None => f64::INFINITY,
        }
    };
    let beta_plus = beta_side(&vp, &vm, &plus);
    let beta_minus = beta_side(&vm, &vp, &minus);
    Ok(KreinDecomposition {
        model,
        eigenvalues,
        vectors,
        signs,
        n_minus,
        p_plus,
        p_minus,
        gamma_plus,
        gamma_minus,
        beta_plus,
        beta_minus,
    })
}

impl KreinDecomposition {
    pub fn model(&self) -> &DiscreteModel {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Ascending: the negative eigenvalues first.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are the eigenvectors, in the order of [`Self::eigenvalues`].
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    /// `κ_i = sgn[v_i, v_i]`.
    pub fn krein_signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn n_plus(&self) -> usize {
        self.dim() - self.n_minus
    }

    pub fn n_minus(&self) -> usize {
        self.n_minus
    }

    pub fn eigenvalues_plus(&self) -> &[f64] {
        &self.eigenvalues[self.n_minus..]
    }

    pub fn eigenvalues_minus(&self) -> &[f64] {
        &self.eigenvalues[..self.n_minus]
    }

    /// Basis of `H^B_+`.
    pub fn vectors_plus(&self) -> DMatrix<f64> {
        self.vectors.columns(self.n_minus, self.n_plus()).into_owned()
    }

    /// Basis of `H^B_−`.
    pub fn vectors_minus(&self) -> DMatrix<f64> {
        self.vectors.columns(0, self.n_minus).into_owned()
    }

    /// `P^B_+ = E(ℝ₊)`.
    pub fn p_plus(&self) -> &DMatrix<f64> {
        &self.p_plus
    }

    /// `P^B_− = E(ℝ₋)`.
    pub fn p_minus(&self) -> &DMatrix<f64> {
        &self.p_minus
    }

    /// Coordinates of `P^B_+ h` in the basis of [`Self::vectors_plus`].
    pub fn coords_plus(&self, h: &DVector<f64>) -> DVector<f64> {
        let jwh = self.jw_apply(h);
        self.vectors_plus().tr_mul(&jwh)
    }

    /// Coordinates of `P^B_− h` in the basis of [`Self::vectors_minus`].
    pub fn coords_minus(&self, h: &DVector<f64>) -> DVector<f64> {
        let jwh = self.jw_apply(h);
        -self.vectors_minus().tr_mul(&jwh)
    }

    fn jw_apply(&self, h: &DVector<f64>) -> DVector<f64> {
        h.component_mul(self.model.signature()).component_mul(self.model.weights())
    }

    /// Intrinsic norm `|[h, h]|^{1/2}`.
    pub fn intrinsic_norm(&self, h: &DVector<f64>) -> f64 {
        self.model.krein(h, h).abs().sqrt()
    }

    /// Smaller of the two one-sided constants in `γ‖h‖ ≤ |[h,h]|^{1/2}`.
    pub fn gamma(&self) -> f64 {
        self.gamma_plus.min(self.gamma_minus)
    }

    /// `(γ₊, γ₋)`.
    pub fn gamma_sides(&self) -> (f64, f64) {
        (self.gamma_plus, self.gamma_minus)
    }

    /// Larger of the two one-sided projection constants.
    pub fn beta_proj(&self) -> f64 {
        self.beta_plus.max(self.beta_minus)
    }

    /// `(β₊, β₋)`: `‖P^B_∓ g‖ ≤ β_± ‖P^B_± g‖` for `g ∈ H_±`, intrinsic norms.
    pub fn beta_sides(&self) -> (f64, f64) {
        (self.beta_plus, self.beta_minus)
    }

    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()))
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0, |a: f64, v| a.max(v.abs()))
    }

    /// `E(Δ) = Σ_{λ_i ∈ Δ} κ_i v_i [·, v_i]` for a union of open intervals.
    pub fn spectral_projection(&self, set: &[Interval]) -> Result<DMatrix<f64>, KreinError> {
        let window = 1e-12 * self.max_abs_eigenvalue();
        for iv in set {
            for endpoint in [iv.lo, iv.hi] {
                if !endpoint.is_finite() {
                    continue;
                }
                if let Some(&l) = self.eigenvalues.iter().find(|&&l| (l - endpoint).abs() <= window) {
                    return Err(KreinError::EndpointOnSpectrum {
                        endpoint,
                        eigenvalue: l,
                    });
                }
            }
        }
        let n = self.dim();
        let jw = self.model.signature().component_mul(self.model.weights());
        let mut e = DMatrix::zeros(n, n);
        for i in (0..n).filter(|&i| in_set(set, self.eigenvalues[i])) {
            let v = self.vectors.column(i);
            let row = v.component_mul(&jw) * self.signs[i];
            e.ger(1.0, &v, &row, 1.0);
        }
        Ok(e)
    }

    /// Spectral-function property defects for the sets `a` and `b`.
    pub fn spectral_defects(&self, a: &[Interval], b: &[Interval]) -> Result<SpectralDefects, KreinError> {
        let ea = self.spectral_projection(a)?;
        let eb = self.spectral_projection(b)?;
        let cap = intersect_sets(a, b);
        let eab = self.spectral_projection(&cap)?;
        let cup: Vec<Interval> = a.iter().chain(b.iter()).copied().collect();
        let eu = self.spectral_projection(&cup)?;
        let bm = self.model.b_matrix();
        let b_norm = self.w_norm(&bm);
        let rel = |m: &DMatrix<f64>, scale: f64| self.w_norm(m) / scale.max(f64::MIN_POSITIVE);
        let scale_a = self.w_norm(&ea).max(1.0);
        let idempotence = rel(&(&ea * &ea - &ea), scale_a);
        let multiplicativity = rel(&(&eab - &ea * &eb), scale_a.max(self.w_norm(&eb)));
        let additivity = rel(&(&eu - &ea - &eb + &eab), scale_a.max(self.w_norm(&eu)));
        let commutation = rel(&(&ea * &bm - &bm * &ea), b_norm * scale_a);
        let sup = self
            .eigenvalues
            .iter()
            .filter(|&&l| in_set(a, l))
            .fold(0.0, |m: f64, l| m.max(l.abs()));
        let be = self.w_norm(&(&bm * &ea));
        let boundedness = if sup == 0.0 { 0.0 } else { be / (sup * self.w_norm(&ea)) };
        let sign_definiteness = self
            .gram_defect(&intersect_sets(a, &[Interval::POSITIVE]), 1.0)
            .max(self.gram_defect(&intersect_sets(a, &[Interval::NEGATIVE]), -1.0));
        Ok(SpectralDefects {
            idempotence,
            multiplicativity,
            additivity,
            sign_definiteness,
            commutation,
            boundedness,
        })
    }

    /// Deviation of `[v_i, v_j]` on the modes in `set` from `sign·I`, or
    /// infinity if the form is not `sign`-definite there.
    fn gram_defect(&self, set: &[Interval], sign: f64) -> f64 {
        let idx: Vec<usize> = (0..self.dim()).filter(|&i| in_set(set, self.eigenvalues[i])).collect();
        if idx.is_empty() {
            return 0.0;
        }
        let vs = DMatrix::from_fn(self.dim(), idx.len(), |r, c| self.vectors[(r, idx[c])]);
        let jw = self.model.signature().component_mul(self.model.weights());
        let mut scaled = vs.clone();
        for (r, mut row) in scaled.row_iter_mut().enumerate() {
            row *= jw[r];
        }
        let mut gram = vs.transpose() * scaled * sign;
        symmetrize(&mut gram);
        let (ev, _) = sorted_symmetric_eigen(gram.clone());
        if !(ev[0] > 0.0) {
            return f64::INFINITY;
        }
        let id = DMatrix::<f64>::identity(idx.len(), idx.len());
        (gram - id).amax()
    }

    /// Operator 2-norm with respect to `(·,·)_W`.
    pub fn w_norm(&self, a: &DMatrix<f64>) -> f64 {
        let d = self.model.weights().map(f64::sqrt);
        let n = a.nrows();
        spectral_norm(&DMatrix::from_fn(n, a.ncols(), |i, j| d[i] * a[(i, j)] / d[j]))
    }

    /// `max_i ‖B v_i − λ_i v_i‖ / (‖B‖ ‖v_i‖)`, W-norms.
    pub fn eigen_residual(&self) -> f64 {
        let bm = self.model.b_matrix();
        let b_norm = self.w_norm(&bm);
        (0..self.dim())
            .map(|i| {
                let v = self.vectors.column(i).into_owned();
                let r = &bm * &v - &v * self.eigenvalues[i];
                self.model.norm(&r) / (b_norm * self.model.norm(&v))
            })
            .fold(0.0, f64::max)
    }

    /// `max_ij |[v_i, v_j] − κ_i δ_ij|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let jw = self.model.signature().component_mul(self.model.weights());
        let mut scaled = self.vectors.clone();
        for (r, mut row) in scaled.row_iter_mut().enumerate() {
            row *= jw[r];
        }
        let gram = self.vectors.transpose() * scaled;
        let kappa = DMatrix::from_diagonal(&DVector::from_column_slice(&self.signs));
        (gram - kappa).amax()
    }

    /// Condition numbers of `P₊|H^B_+ → H₊` and `P₋|H^B_− → H₋` in
    /// eigen-coordinates.
    pub fn restriction_conditions(&self) -> (f64, f64) {
        let m = &self.model;
        (
            condition_number(&select_rows(&self.vectors_plus(), &m.plus_indices())),
            condition_number(&select_rows(&self.vectors_minus(), &m.minus_indices())),
        )
    }
}
