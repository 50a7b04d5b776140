//! Kinetic form `T ψ' = −Aψ + f` with `T` diagonal, injective and sign-indefinite.
//!
//! `H_T` carries the norm `‖|T|^{1/2}h‖` and `H_T′` the norm `‖|T|^{−1/2}g‖`;
//! the plain inner product pairs them. Reduction sets `W = |T|`, `J = sgn T`,
//! `L = |T|⁻¹A`, so `B = JL = T⁻¹A` and `⟨Lh, g⟩_T = ⟨Ah, g⟩`.

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::{DiscreteModel, DiscretizeError};
use crate::duhamel::{self, DuhamelError, ForcedSolution, ForcingFunction};
use crate::halfrange::{BoundaryData, Slab, SolveOptions};
use crate::krein::{decompose, KreinDecomposition, KreinError};
use crate::linalg::sorted_symmetric_eigen;

/// Relative tolerance of the symmetry check on `A`.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticError {
    #[error("T has a zero entry at index {0}")]
    ZeroTEntry(usize),
    #[error("collision operator is not positive (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositive { min_eigenvalue: f64 },
    #[error("collision operator is not symmetric (relative defect {defect:e})")]
    NotSymmetric { defect: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid kinetic model input: {0}")]
    Parse(String),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Krein(#[from] KreinError),
    #[error(transparent)]
    Duhamel(#[from] DuhamelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TModel {
    t: Vec<f64>,
    a: Vec<Vec<f64>>,
}

impl TModel {
    pub fn new(t: Vec<f64>, a: DMatrix<f64>) -> Result<Self, KineticError> {
        let n = t.len();
        if a.nrows() != n || a.ncols() != n {
            return Err(KineticError::Dimension(format!(
                "T has {n} entries, A is {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if let Some(i) = t.iter().position(|&v| v == 0.0 || !v.is_finite()) {
            return Err(KineticError::ZeroTEntry(i));
        }
        let rows = a.row_iter().map(|r| r.iter().copied().collect()).collect();
        Ok(Self { t, a: rows })
    }

    /// JSON object `{"t": [...], "a": [[...], ...]}`.
    pub fn from_value(t: Vec<f64>, a: Vec<Vec<f64>>) -> Result<Self, KineticError> {
        let n = t.len();
        if a.len() != n || a.iter().any(|r| r.len() != n) {
            return Err(KineticError::Dimension("A must be square with the size of T".into()));
        }
        Self::new(t, DMatrix::from_fn(n, n, |i, j| a[i][j]))
    }

    /// CSV rows `t_i, a_i1, …, a_in`; lines starting with `#` and a non-numeric
    /// header row are skipped.
    pub fn from_csv(mut reader: impl Read) -> Result<Self, KineticError> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| KineticError::Parse(e.to_string()))?;
        let mut t = Vec::new();
        let mut a = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            match row {
                Ok(r) if !r.is_empty() => {
                    t.push(r[0]);
                    a.push(r[1..].to_vec());
                }
                _ if t.is_empty() => continue,
                _ => return Err(KineticError::Parse(format!("line {}", i + 1))),
            }
        }
        Self::from_value(t, a)
    }

    pub fn dim(&self) -> usize {
        self.t.len()
    }

    pub fn t(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.t)
    }

    pub fn a(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.a[i][j])
    }

    /// `(cT, cA)`.
    pub fn scaled(&self, c: f64) -> Result<Self, KineticError> {
        Self::new(self.t.iter().map(|v| c * v).collect(), self.a() * c)
    }
}

/// Diagonal metrics of `H_T` and `H_T′` and the masks `Q±`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spaces {
    pub t_abs: DVector<f64>,
    pub q_plus: DVector<f64>,
    pub q_minus: DVector<f64>,
}

impl Spaces {
    /// `‖h‖_T = ‖|T|^{1/2}h‖`.
    pub fn norm_t(&self, h: &DVector<f64>) -> f64 {
        h.iter().zip(self.t_abs.iter()).map(|(x, t)| x * x * t).sum::<f64>().sqrt()
    }

    /// `‖g‖_T′ = ‖|T|^{−1/2}g‖`.
    pub fn norm_t_dual(&self, g: &DVector<f64>) -> f64 {
        g.iter().zip(self.t_abs.iter()).map(|(x, t)| x * x / t).sum::<f64>().sqrt()
    }

    /// The pairing `⟨h, g⟩` inherited from the base space.
    pub fn pairing(&self, h: &DVector<f64>, g: &DVector<f64>) -> f64 {
        h.dot(g)
    }

    /// Largest `|⟨h,g⟩| / (‖h‖_T ‖g‖_T′)` over `samples` random pairs.
    pub fn duality_ratio(&self, samples: usize, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.t_abs.len();
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let h = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let g = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            worst = worst.max(self.pairing(&h, &g).abs() / (self.norm_t(&h) * self.norm_t_dual(&g)));
        }
        worst
    }
}

pub fn build_spaces(t: &TModel) -> Result<Spaces, KineticError> {
    if let Some(i) = t.t.iter().position(|&v| v == 0.0) {
        return Err(KineticError::ZeroTEntry(i));
    }
    let td = t.t();
    Ok(Spaces {
        t_abs: td.map(f64::abs),
        q_plus: td.map(|v| if v > 0.0 { 1.0 } else { 0.0 }),
        q_minus: td.map(|v| if v < 0.0 { 1.0 } else { 0.0 }),
    })
}

/// `W = |T|`, `J = sgn T`, `L = |T|⁻¹A`, after checking symmetry and positivity of `A`.
pub fn reduce(t: &TModel) -> Result<DiscreteModel, KineticError> {
    let spaces = build_spaces(t)?;
    let a = t.a();
    let scale = a.amax();
    let defect = (&a - a.transpose()).amax();
    if !(defect <= SYMMETRY_TOL * scale) {
        return Err(KineticError::NotSymmetric {
            defect: if scale > 0.0 { defect / scale } else { defect },
        });
    }
    let (ev, _) = sorted_symmetric_eigen(a.clone());
    if let Some(&lo) = ev.first() {
        if !(lo > 0.0) {
            return Err(KineticError::NotPositive { min_eigenvalue: lo });
        }
    }
    let mut l = a;
    for (i, mut row) in l.row_iter_mut().enumerate() {
        row /= spaces.t_abs[i];
    }
    let j = t.t().map(f64::signum);
    Ok(DiscreteModel::new(spaces.t_abs, l, j, None)?)
}

/// `max |⟨Lh, g⟩_T − ⟨Ah, g⟩| / (‖Ah‖‖g‖)` over `samples` random pairs.
pub fn pairing_defect(t: &TModel, m: &DiscreteModel, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = t.dim();
    let a = t.a();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let h = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let g = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let lhs = m.inner(&(m.operator() * &h), &g);
        let ah = &a * &h;
        let rhs = ah.dot(&g);
        worst = worst.max((lhs - rhs).abs() / (ah.norm() * g.norm()));
    }
    worst
}

/// A reduced kinetic model with its decomposition.
#[derive(Debug, Clone)]
pub struct KineticProblem {
    pub model: TModel,
    pub reduced: DiscreteModel,
    pub decomposition: KreinDecomposition,
}

impl KineticProblem {
    pub fn new(t: TModel) -> Result<Self, KineticError> {
        let reduced = reduce(&t)?;
        let decomposition = decompose(&reduced)?;
        Ok(Self {
            model: t,
            reduced,
            decomposition,
        })
    }

    /// Boundary data `Q₊ψ(0) = Q₊φ`, `Q₋ψ(τ) = Q₋φ′` (`φ′` ignored on the half-space).
    pub fn boundary(&self, phi: &DVector<f64>, phi_tau: &DVector<f64>, slab: Slab) -> Result<BoundaryData, KineticError> {
        BoundaryData::from_profiles(&self.reduced, phi, phi_tau, slab)
            .map_err(|e| KineticError::Duhamel(DuhamelError::HalfRange(e)))
    }

    /// Solves `Tψ' = −Aψ + f` as `ψ' = −T⁻¹Aψ + T⁻¹f`. Norms of the result are
    /// `H_T` norms because the reduced model's weight is `|T|`.
    pub fn solve(
        &self,
        bd: &BoundaryData,
        f: Option<&ForcingFunction>,
        opts: &SolveOptions,
    ) -> Result<ForcedSolution<'_>, KineticError> {
        let n = self.model.dim();
        let g = match f {
            Some(f) => {
                let t = self.model.t();
                let values = f.values().iter().map(|v| v.component_div(&t)).collect();
                ForcingFunction::new(f.positions().to_vec(), values, f.tail())?
            }
            None => ForcingFunction::zero(n),
        };
        let k = &self.decomposition;
        Ok(match bd.slab() {
            Slab::Finite(_) => duhamel::solve_nonhomogeneous(k, bd, &g, opts)?,
            Slab::HalfSpace => duhamel::solve_nonhomogeneous_halfspace(k, bd.phi_plus(), &g)?,
        })
    }
}

/// Reduces and decomposes `t` and splits the boundary profiles by `Q±`;
/// solve with [`KineticProblem::solve`].
pub fn solve_kinetic(
    t: &TModel,
    phi: &DVector<f64>,
    phi_tau: &DVector<f64>,
    slab: Slab,
) -> Result<(KineticProblem, BoundaryData), KineticError> {
    let p = KineticProblem::new(t.clone())?;
    let bd = p.boundary(phi, phi_tau, slab)?;
    Ok((p, bd))
}
