//! Homogeneous half-range problem `ψ' = −Bψ`, `P₊ψ(0) = φ₊`, `P₋ψ(τ) = φ₋`
//! on a slab, and the half-space version with `ψ` bounded at infinity.
//!
//! Everything is carried in Krein eigen-coordinates: `ψ₊(0) = V₊a₊`,
//! `ψ₋(τ) = V₋a₋`. In those coordinates the intrinsic norm is the Euclidean
//! norm, so operator norms of `G±` are plain largest singular values.

use nalgebra::{DMatrix, DVector, LU};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::DiscreteModel;
use crate::krein::KreinDecomposition;
use crate::linalg::{condition_number, select_rows, spectral_norm};

pub const RESTRICTION_COND_LIMIT: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HalfRangeError {
    #[error("restriction of P{side} to the spectral subspace is ill-conditioned (cond = {cond:e})")]
    IllConditionedRestriction { side: char, cond: f64 },
    #[error("contraction violated: ‖G{side}‖ = {norm}")]
    ContractionViolated { side: char, norm: f64 },
    #[error("Neumann iteration did not converge within {iterations} steps (ρ = {rho})")]
    NeumannStall { iterations: usize, rho: f64 },
    #[error("direct and Neumann solutions differ by {relative:e} (relative)")]
    NeumannDisagreement { relative: f64 },
    #[error("x = {x} lies outside the slab [0, {tau}]")]
    OutOfSlab { x: f64, tau: f64 },
    #[error("invalid boundary data: {0}")]
    InvalidBoundary(String),
    #[error("singular boundary system")]
    Singular,
}

/// Slab length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Slab {
    Finite(f64),
    HalfSpace,
}

impl Slab {
    pub fn tau(&self) -> Option<f64> {
        match *self {
            Slab::Finite(t) => Some(t),
            Slab::HalfSpace => None,
        }
    }
}

/// `φ₊` supported where `J = +1`, `φ₋` where `J = −1`, both as full-length
/// vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    phi_plus: DVector<f64>,
    phi_minus: Option<DVector<f64>>,
    slab: Slab,
}

impl BoundaryData {
    pub fn finite(
        m: &DiscreteModel,
        phi_plus: DVector<f64>,
        phi_minus: DVector<f64>,
        tau: f64,
    ) -> Result<Self, HalfRangeError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(HalfRangeError::InvalidBoundary(format!("slab length {tau} must be positive and finite")));
        }
        check_support(m, &phi_plus, 1.0, "φ₊")?;
        check_support(m, &phi_minus, -1.0, "φ₋")?;
        Ok(Self {
            phi_plus,
            phi_minus: Some(phi_minus),
            slab: Slab::Finite(tau),
        })
    }

    pub fn halfspace(m: &DiscreteModel, phi_plus: DVector<f64>) -> Result<Self, HalfRangeError> {
        check_support(m, &phi_plus, 1.0, "φ₊")?;
        Ok(Self {
            phi_plus,
            phi_minus: None,
            slab: Slab::HalfSpace,
        })
    }

    /// Splits full vectors by the signature: `φ₊ = P₊ a`, `φ₋ = P₋ b`.
    pub fn from_profiles(m: &DiscreteModel, a: &DVector<f64>, b: &DVector<f64>, slab: Slab) -> Result<Self, HalfRangeError> {
        match slab {
            Slab::Finite(tau) => Self::finite(m, m.project_plus(a), m.project_minus(b), tau),
            Slab::HalfSpace => Self::halfspace(m, m.project_plus(a)),
        }
    }

    pub fn phi_plus(&self) -> &DVector<f64> {
        &self.phi_plus
    }

    pub fn phi_minus(&self) -> Option<&DVector<f64>> {
        self.phi_minus.as_ref()
    }

    pub fn slab(&self) -> Slab {
        self.slab
    }

    /// Same data with `φ₊, φ₋` replaced; used for the adjusted data of forced problems.
    pub(crate) fn with_data(&self, phi_plus: DVector<f64>, phi_minus: Option<DVector<f64>>) -> Self {
        Self {
            phi_plus,
            phi_minus,
            slab: self.slab,
        }
    }
}

fn check_support(m: &DiscreteModel, v: &DVector<f64>, sign: f64, name: &str) -> Result<(), HalfRangeError> {
    if v.len() != m.dim() {
        return Err(HalfRangeError::InvalidBoundary(format!(
            "{name} has length {}, model has dimension {}",
            v.len(),
            m.dim()
        )));
    }
    for (i, (&x, &s)) in v.iter().zip(m.signature().iter()).enumerate() {
        if !x.is_finite() {
            return Err(HalfRangeError::InvalidBoundary(format!("{name}[{i}] is not finite")));
        }
        if s != sign && x != 0.0 {
            return Err(HalfRangeError::InvalidBoundary(format!(
                "{name}[{i}] = {x} lies outside its half-range support"
            )));
        }
    }
    Ok(())
}

/// `R± = (P±|H^B_±)⁻¹` as the square blocks `E±ᵀV±` (rows of `V±` where `J = ±1`).
#[derive(Debug, Clone)]
pub struct Restrictions {
    plus_rows: Vec<usize>,
    minus_rows: Vec<usize>,
    plus: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    minus: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    pub cond_plus: f64,
    pub cond_minus: f64,
}

pub fn build_r(k: &KreinDecomposition) -> Result<Restrictions, HalfRangeError> {
    let m = k.model();
    let plus_rows = m.plus_indices();
    let minus_rows = m.minus_indices();
    let bp = select_rows(&k.vectors_plus(), &plus_rows);
    let bm = select_rows(&k.vectors_minus(), &minus_rows);
    let cond_plus = condition_number(&bp);
    let cond_minus = condition_number(&bm);
    if !(cond_plus <= RESTRICTION_COND_LIMIT) {
        return Err(HalfRangeError::IllConditionedRestriction {
            side: '+',
            cond: cond_plus,
        });
    }
    if !(cond_minus <= RESTRICTION_COND_LIMIT) {
        return Err(HalfRangeError::IllConditionedRestriction {
            side: '−',
            cond: cond_minus,
        });
    }
    Ok(Restrictions {
        plus_rows,
        minus_rows,
        plus: bp.lu(),
        minus: bm.lu(),
        cond_plus,
        cond_minus,
    })
}

impl Restrictions {
    /// Eigen-coordinates of `R₊φ` (only the `J = +1` entries of `φ` are read).
    pub fn coords_plus(&self, phi: &DVector<f64>) -> DVector<f64> {
        solve_or_empty(&self.plus, DVector::from_iterator(self.plus_rows.len(), self.plus_rows.iter().map(|&i| phi[i])))
    }

    /// Eigen-coordinates of `R₋φ` (only the `J = −1` entries of `φ` are read).
    pub fn coords_minus(&self, phi: &DVector<f64>) -> DVector<f64> {
        solve_or_empty(&self.minus, DVector::from_iterator(self.minus_rows.len(), self.minus_rows.iter().map(|&i| phi[i])))
    }

    /// `R₊φ` as a vector of `H`.
    pub fn apply_plus(&self, k: &KreinDecomposition, phi: &DVector<f64>) -> DVector<f64> {
        k.vectors_plus() * self.coords_plus(phi)
    }

    /// `R₋φ` as a vector of `H`.
    pub fn apply_minus(&self, k: &KreinDecomposition, phi: &DVector<f64>) -> DVector<f64> {
        k.vectors_minus() * self.coords_minus(phi)
    }

    fn solve_plus_matrix(&self, rhs: DMatrix<f64>) -> DMatrix<f64> {
        solve_matrix_or_empty(&self.plus, rhs)
    }

    fn solve_minus_matrix(&self, rhs: DMatrix<f64>) -> DMatrix<f64> {
        solve_matrix_or_empty(&self.minus, rhs)
    }
}

fn solve_or_empty(lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>, rhs: DVector<f64>) -> DVector<f64> {
    if rhs.is_empty() {
        return rhs;
    }
    lu.solve(&rhs).expect("restriction block checked invertible")
}

fn solve_matrix_or_empty(lu: &LU<f64, nalgebra::Dyn, nalgebra::Dyn>, rhs: DMatrix<f64>) -> DMatrix<f64> {
    if rhs.is_empty() {
        return rhs;
    }
    lu.solve(&rhs).expect("restriction block checked invertible")
}

/// `G₊ = R₋P₋e^{−τB⁺}` (maps `H^B_+ → H^B_−`) and `G₋ = R₊P₊e^{τB⁻}`
/// (maps `H^B_− → H^B_+`), as coordinate matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Contractions {
    pub tau: f64,
    pub g_plus: DMatrix<f64>,
    pub g_minus: DMatrix<f64>,
    pub norm_plus: f64,
    pub norm_minus: f64,
}

pub fn build_g(k: &KreinDecomposition, r: &Restrictions, tau: f64) -> Result<Contractions, HalfRangeError> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(HalfRangeError::InvalidBoundary(format!("slab length {tau} must be positive and finite")));
    }
    let mut vp = select_rows(&k.vectors_plus(), &r.minus_rows);
    for (j, mut col) in vp.column_iter_mut().enumerate() {
        col *= (-tau * k.eigenvalues_plus()[j]).exp();
    }
    let mut vm = select_rows(&k.vectors_minus(), &r.plus_rows);
    for (j, mut col) in vm.column_iter_mut().enumerate() {
        col *= (tau * k.eigenvalues_minus()[j]).exp();
    }
    let g_plus = r.solve_minus_matrix(vp);
    let g_minus = r.solve_plus_matrix(vm);
    let norm_plus = spectral_norm(&g_plus);
    let norm_minus = spectral_norm(&g_minus);
    if !(norm_plus < 1.0) {
        return Err(HalfRangeError::ContractionViolated {
            side: '+',
            norm: norm_plus,
        });
    }
    if !(norm_minus < 1.0) {
        return Err(HalfRangeError::ContractionViolated {
            side: '−',
            norm: norm_minus,
        });
    }
    Ok(Contractions {
        tau,
        g_plus,
        g_minus,
        norm_plus,
        norm_minus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Also run the Neumann series and compare.
    pub neumann_check: bool,
    /// Relative agreement required between the two paths.
    pub agreement_tol: f64,
    /// Relative size of the last Neumann term at which iteration stops.
    pub neumann_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            neumann_check: cfg!(debug_assertions),
            agreement_tol: 1e-8,
            neumann_tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub norm_g_plus: f64,
    pub norm_g_minus: f64,
    pub cond_r_plus: f64,
    pub cond_r_minus: f64,
    pub neumann_iterations: Option<usize>,
    pub neumann_discrepancy: Option<f64>,
    /// `‖P₊ψ(0) − φ₊‖ / ‖φ₊‖`, W-norm.
    pub residual_plus: f64,
    /// `‖P₋ψ(τ) − φ₋‖ / ‖φ₋‖`, W-norm (0 for the half-space).
    pub residual_minus: f64,
}

/// Solution of the boundary system in eigen-coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCoefficients {
    pub plus: DVector<f64>,
    pub minus: DVector<f64>,
    pub neumann_iterations: Option<usize>,
    pub neumann_discrepancy: Option<f64>,
}

/// `a₊ = (I − G₋G₊)⁻¹(R₊φ₊ − G₋R₋φ₋)`, `a₋ = (I − G₊G₋)⁻¹(R₋φ₋ − G₊R₊φ₊)`.
pub fn solve_boundary_system(
    r: &Restrictions,
    g: &Contractions,
    bd: &BoundaryData,
    opts: &SolveOptions,
) -> Result<BoundaryCoefficients, HalfRangeError> {
    let phi_minus = bd
        .phi_minus()
        .ok_or_else(|| HalfRangeError::InvalidBoundary("finite slab needs φ₋".into()))?;
    let rp = r.coords_plus(bd.phi_plus());
    let rm = r.coords_minus(phi_minus);
    let rhs_plus = &rp - &g.g_minus * &rm;
    let rhs_minus = &rm - &g.g_plus * &rp;
    let gpg = &g.g_minus * &g.g_plus;
    let gmg = &g.g_plus * &g.g_minus;
    let plus = solve_shifted(&gpg, rhs_plus.clone())?;
    let minus = solve_shifted(&gmg, rhs_minus.clone())?;
    let mut out = BoundaryCoefficients {
        plus,
        minus,
        neumann_iterations: None,
        neumann_discrepancy: None,
    };
    if opts.neumann_check {
        let rho = g.norm_plus * g.norm_minus;
        let (np, ip) = neumann(&gpg, &rhs_plus, rho, opts.neumann_tol)?;
        let (nm, im) = neumann(&gmg, &rhs_minus, rho, opts.neumann_tol)?;
        let scale = (out.plus.norm_squared() + out.minus.norm_squared()).sqrt();
        let diff = ((&np - &out.plus).norm_squared() + (&nm - &out.minus).norm_squared()).sqrt();
        let rel = if scale == 0.0 { diff } else { diff / scale };
        out.neumann_iterations = Some(ip.max(im));
        out.neumann_discrepancy = Some(rel);
        if !(rel <= opts.agreement_tol) {
            return Err(HalfRangeError::NeumannDisagreement { relative: rel });
        }
    }
    Ok(out)
}

fn solve_shifted(a: &DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>, HalfRangeError> {
    if rhs.is_empty() {
        return Ok(rhs);
    }
    let n = a.nrows();
    (DMatrix::identity(n, n) - a).lu().solve(&rhs).ok_or(HalfRangeError::Singular)
}

/// `Σ_k A^k b`, stopping when a term is below `tol` relative to the sum.
fn neumann(a: &DMatrix<f64>, b: &DVector<f64>, rho: f64, tol: f64) -> Result<(DVector<f64>, usize), HalfRangeError> {
    let mut sum = b.clone();
    let mut term = b.clone();
    if b.is_empty() || b.norm() == 0.0 {
        return Ok((sum, 0));
    }
    let bound = if rho <= 0.0 {
        1
    } else if rho < 1.0 {
        ((tol * (1.0 - rho)).ln() / rho.ln()).ceil().max(1.0) as usize + 10
    } else {
        return Err(HalfRangeError::NeumannStall { iterations: 0, rho });
    };
    for it in 1..=bound {
        term = a * term;
        sum += &term;
        if term.norm() <= tol * sum.norm() {
            return Ok((sum, it));
        }
    }
    Err(HalfRangeError::NeumannStall { iterations: bound, rho })
}

/// `ψ(x) = V₊e^{−xΛ₊}a₊ + V₋e^{(τ−x)Λ₋}a₋`; for the half-space `a₋` is empty.
#[derive(Debug, Clone)]
pub struct HalfRangeSolution<'a> {
    k: &'a KreinDecomposition,
    coeff_plus: DVector<f64>,
    coeff_minus: DVector<f64>,
    slab: Slab,
    pub diagnostics: Diagnostics,
}

impl<'a> HalfRangeSolution<'a> {
    pub(crate) fn from_coefficients(
        k: &'a KreinDecomposition,
        coeff_plus: DVector<f64>,
        coeff_minus: DVector<f64>,
        slab: Slab,
    ) -> Self {
        Self {
            k,
            coeff_plus,
            coeff_minus,
            slab,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn decomposition(&self) -> &'a KreinDecomposition {
        self.k
    }

    /// Coordinates of `ψ₊(0)` in the basis of `H^B_+`.
    pub fn coeff_plus(&self) -> &DVector<f64> {
        &self.coeff_plus
    }

    /// Coordinates of `ψ₋(τ)` in the basis of `H^B_−` (empty for the half-space).
    pub fn coeff_minus(&self) -> &DVector<f64> {
        &self.coeff_minus
    }

    pub fn slab(&self) -> Slab {
        self.slab
    }

    fn check_x(&self, x: f64) -> Result<(), HalfRangeError> {
        let ok = match self.slab {
            Slab::Finite(tau) => (0.0..=tau).contains(&x),
            Slab::HalfSpace => (0.0..f64::INFINITY).contains(&x),
        };
        if ok {
            Ok(())
        } else {
            Err(HalfRangeError::OutOfSlab {
                x,
                tau: self.slab.tau().unwrap_or(f64::INFINITY),
            })
        }
    }

    /// Modal amplitudes of `ψ₊(x)` (intrinsic norm = Euclidean norm).
    pub fn modes_plus(&self, x: f64) -> Result<DVector<f64>, HalfRangeError> {
        self.check_x(x)?;
        let lp = self.k.eigenvalues_plus();
        Ok(DVector::from_fn(self.coeff_plus.len(), |i, _| (-x * lp[i]).exp() * self.coeff_plus[i]))
    }

    /// Modal amplitudes of `ψ₋(x)`.
    pub fn modes_minus(&self, x: f64) -> Result<DVector<f64>, HalfRangeError> {
        self.check_x(x)?;
        let lm = self.k.eigenvalues_minus();
        Ok(match self.slab {
            Slab::Finite(tau) => {
                DVector::from_fn(self.coeff_minus.len(), |i, _| ((tau - x) * lm[i]).exp() * self.coeff_minus[i])
            }
            Slab::HalfSpace => DVector::zeros(self.k.n_minus()),
        })
    }

    /// `ψ₊(x) = P^B_+ ψ(x)`.
    pub fn evaluate_plus(&self, x: f64) -> Result<DVector<f64>, HalfRangeError> {
        Ok(self.k.vectors_plus() * self.modes_plus(x)?)
    }

    /// `ψ₋(x) = P^B_− ψ(x)`.
    pub fn evaluate_minus(&self, x: f64) -> Result<DVector<f64>, HalfRangeError> {
        Ok(self.k.vectors_minus() * self.modes_minus(x)?)
    }

    pub fn evaluate(&self, x: f64) -> Result<DVector<f64>, HalfRangeError> {
        Ok(self.evaluate_plus(x)? + self.evaluate_minus(x)?)
    }

    /// `ψ'(x) = −Bψ(x)`, computed mode-wise.
    pub fn derivative(&self, x: f64) -> Result<DVector<f64>, HalfRangeError> {
        let mp = self.modes_plus(x)?.component_mul(&DVector::from_column_slice(self.k.eigenvalues_plus()));
        let mm = self.modes_minus(x)?.component_mul(&DVector::from_column_slice(self.k.eigenvalues_minus()));
        Ok(-(self.k.vectors_plus() * mp + self.k.vectors_minus() * mm))
    }
}

/// Relative boundary residuals of `ψ` against `bd`, recomputed from `ψ(0)` and `ψ(τ)`.
pub fn boundary_residuals(
    m: &DiscreteModel,
    psi0: &DVector<f64>,
    psi_tau: Option<&DVector<f64>>,
    bd: &BoundaryData,
) -> (f64, f64) {
    let rel = |a: DVector<f64>, b: &DVector<f64>| {
        let d = m.norm(&(a - b));
        let s = m.norm(b);
        if s == 0.0 {
            d
        } else {
            d / s
        }
    };
    let plus = rel(m.project_plus(psi0), bd.phi_plus());
    let minus = match (psi_tau, bd.phi_minus()) {
        (Some(p), Some(phi)) => rel(m.project_minus(p), phi),
        _ => 0.0,
    };
    (plus, minus)
}

/// Builds `R±`, `G±`, solves the boundary system and packages the solution.
pub fn solve<'a>(
    k: &'a KreinDecomposition,
    bd: &BoundaryData,
    opts: &SolveOptions,
) -> Result<HalfRangeSolution<'a>, HalfRangeError> {
    let tau = match bd.slab() {
        Slab::Finite(t) => t,
        Slab::HalfSpace => return solve_halfspace(k, bd.phi_plus()),
    };
    let r = build_r(k)?;
    let g = build_g(k, &r, tau)?;
    let c = solve_boundary_system(&r, &g, bd, opts)?;
    let mut s = HalfRangeSolution::from_coefficients(k, c.plus, c.minus, bd.slab());
    let (rp, rm) = boundary_residuals(k.model(), &s.evaluate(0.0)?, Some(&s.evaluate(tau)?), bd);
    s.diagnostics = Diagnostics {
        norm_g_plus: g.norm_plus,
        norm_g_minus: g.norm_minus,
        cond_r_plus: r.cond_plus,
        cond_r_minus: r.cond_minus,
        neumann_iterations: c.neumann_iterations,
        neumann_discrepancy: c.neumann_discrepancy,
        residual_plus: rp,
        residual_minus: rm,
    };
    Ok(s)
}

/// `ψ(x) = e^{−xB⁺}R₊φ₊`.
pub fn solve_halfspace<'a>(
    k: &'a KreinDecomposition,
    phi_plus: &DVector<f64>,
) -> Result<HalfRangeSolution<'a>, HalfRangeError> {
    let m = k.model();
    check_support(m, phi_plus, 1.0, "φ₊")?;
    let r = build_r(k)?;
    let mut s = HalfRangeSolution::from_coefficients(k, r.coords_plus(phi_plus), DVector::zeros(0), Slab::HalfSpace);
    let bd = BoundaryData::halfspace(m, phi_plus.clone())?;
    let (rp, _) = boundary_residuals(m, &s.evaluate(0.0)?, None, &bd);
    s.diagnostics = Diagnostics {
        cond_r_plus: r.cond_plus,
        cond_r_minus: r.cond_minus,
        residual_plus: rp,
        ..Diagnostics::default()
    };
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::random_jpositive_instance;
    use crate::krein::decompose;

    fn two_by_two() -> KreinDecomposition {
        let m = DiscreteModel::new(
            DVector::from_element(2, 1.0),
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]),
            DVector::from_column_slice(&[1.0, -1.0]),
            None,
        )
        .unwrap();
        decompose(&m).unwrap()
    }

    fn uncoupled() -> KreinDecomposition {
        let m = DiscreteModel::new(
            DVector::from_element(3, 1.0),
            DMatrix::from_diagonal(&DVector::from_column_slice(&[1.0, 2.0, 3.0])),
            DVector::from_column_slice(&[1.0, -1.0, 1.0]),
            None,
        )
        .unwrap();
        decompose(&m).unwrap()
    }

    #[test]
    fn r_plus_on_coupled_example() {
        let k = two_by_two();
        let r = build_r(&k).unwrap();
        let v = r.apply_plus(&k, &DVector::from_column_slice(&[1.0, 0.0]));
        assert!((v[0] - 1.0).abs() < 1e-14);
        assert!((v[1] - (3f64.sqrt() - 2.0)).abs() < 1e-14);
    }

    #[test]
    fn uncoupled_operators_are_trivial() {
        let k = uncoupled();
        let r = build_r(&k).unwrap();
        let phi = DVector::from_column_slice(&[0.3, 0.0, -1.2]);
        assert!((r.apply_plus(&k, &phi) - &phi).amax() < 1e-14);
        let g = build_g(&k, &r, 1.0).unwrap();
        assert_eq!(g.norm_plus, 0.0);
        assert_eq!(g.norm_minus, 0.0);
    }

    #[test]
    fn g_plus_norm_on_coupled_example() {
        let k = two_by_two();
        let r = build_r(&k).unwrap();
        let s3 = 3f64.sqrt();
        for tau in [0.5, 1.0, 2.0] {
            let g = build_g(&k, &r, tau).unwrap();
            let want = (2.0 - s3) * (-s3 * tau).exp();
            assert!((g.norm_plus - want).abs() < 1e-14, "{} vs {want}", g.norm_plus);
            assert!((g.norm_minus - want).abs() < 1e-14);
        }
        let g = build_g(&k, &r, 50.0).unwrap();
        assert!(g.norm_plus < 1e-20 && g.norm_minus < 1e-20);
    }

    #[test]
    fn coupled_example_closed_form() {
        // scalar system: a₊ + g a₋ = r₊, a₋ + g a₊ = r₋
        let k = two_by_two();
        let m = k.model().clone();
        let bd = BoundaryData::finite(
            &m,
            DVector::from_column_slice(&[1.0, 0.0]),
            DVector::from_column_slice(&[0.0, 1.0]),
            1.0,
        )
        .unwrap();
        let opts = SolveOptions {
            neumann_check: true,
            ..SolveOptions::default()
        };
        let s = solve(&k, &bd, &opts).unwrap();
        let s3 = 3f64.sqrt();
        let vp = k.vectors_plus();
        let vm = k.vectors_minus();
        let rp = 1.0 / vp[(0, 0)];
        let rm = 1.0 / vm[(1, 0)];
        let gp = vp[(1, 0)] * (-s3).exp() / vm[(1, 0)];
        let gm = vm[(0, 0)] * (-s3).exp() / vp[(0, 0)];
        let ap = (rp - gm * rm) / (1.0 - gm * gp);
        let am = (rm - gp * rp) / (1.0 - gp * gm);
        assert!((s.coeff_plus()[0] - ap).abs() < 1e-12 * ap.abs());
        assert!((s.coeff_minus()[0] - am).abs() < 1e-12 * am.abs());
        assert!(s.diagnostics.neumann_discrepancy.unwrap() < 1e-12);
        assert!(s.diagnostics.residual_plus < 1e-12 && s.diagnostics.residual_minus < 1e-12);
    }

    #[test]
    fn heat_case_eigenmode() {
        let m = random_jpositive_instance(5, 11, 0.5);
        let m = DiscreteModel::new(
            m.weights().clone(),
            m.operator().clone(),
            DVector::from_element(5, 1.0),
            None,
        )
        .unwrap();
        let k = decompose(&m).unwrap();
        let v = k.vectors().column(2).into_owned();
        let lambda = k.eigenvalues()[2];
        let bd = BoundaryData::finite(&m, v.clone(), DVector::zeros(5), 1.0).unwrap();
        let s = solve(&k, &bd, &SolveOptions::default()).unwrap();
        for x in [0.0, 0.3, 1.0] {
            let want = &v * (-lambda * x).exp();
            assert!((s.evaluate(x).unwrap() - want).amax() < 1e-13);
        }
    }

    #[test]
    fn out_of_slab_and_bad_support() {
        let k = two_by_two();
        let m = k.model().clone();
        let bd = BoundaryData::finite(&m, DVector::from_column_slice(&[1.0, 0.0]), DVector::zeros(2), 1.0).unwrap();
        let s = solve(&k, &bd, &SolveOptions::default()).unwrap();
        assert!(matches!(s.evaluate(1.5), Err(HalfRangeError::OutOfSlab { .. })));
        assert!(matches!(s.evaluate(-0.1), Err(HalfRangeError::OutOfSlab { .. })));
        assert!(BoundaryData::finite(&m, DVector::from_column_slice(&[1.0, 1.0]), DVector::zeros(2), 1.0).is_err());
    }

    #[test]
    fn halfspace_coupled_example() {
        let k = two_by_two();
        let s = solve_halfspace(&k, &DVector::from_column_slice(&[1.0, 0.0])).unwrap();
        let s3 = 3f64.sqrt();
        for x in [0.0, 0.7, 3.0] {
            let psi = s.evaluate(x).unwrap();
            let e = (-s3 * x).exp();
            assert!((psi[0] - e).abs() < 1e-14);
            assert!((psi[1] - e * (s3 - 2.0)).abs() < 1e-14);
            assert_eq!(s.evaluate_minus(x).unwrap().amax(), 0.0);
        }
    }
}
