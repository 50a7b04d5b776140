//! Finite-dimensional weighted Hilbert space and the operator pair (L, J).
//!
//! A [`DiscreteModel`] stores the diagonal mass matrix `W` of the discrete
//! measure `|w(μ)| dμ`, the matrix `L` of `y ↦ (1/|w|)(−(p y')' + q y)` and the
//! signature `J = diag(sgn w(μ_i))`. All adjoints are taken in the weighted
//! inner product `(x, y)_W = Σ x_i y_i W_ii`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::problem::CoefficientSet;

/// Absolute floor below which a sampled weight counts as zero.
pub const WEIGHT_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiscretizeError {
    #[error("grading exponent must be positive, got {0}")]
    BadGrading(f64),
    #[error("half-width must be positive and finite, got {0}")]
    BadHalfWidth(f64),
    #[error("at least 4 nodes are required, got {0}")]
    TooFewNodes(usize),
    #[error("turning points are not symmetric about 0 but a symmetric grid was requested")]
    AsymmetricTurningPoints,
    #[error("|w| = {value:e} at node {index} (μ = {mu}) is below the weight floor")]
    SingularWeight { index: usize, mu: f64, value: f64 },
    #[error("diffusion coefficient p({mu}) = {value} is not positive")]
    NonPositiveDiffusion { mu: f64, value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("weight masses must be positive and finite (entry {0})")]
    BadMass(usize),
    #[error("signature entries must be +1 or -1 (entry {0})")]
    BadSignature(usize),
}

/// Cell-centred grid on `(−M, M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    faces: Vec<f64>,
    nodes: Vec<f64>,
    masses: Vec<f64>,
}

impl Grid {
    /// Builds a grid from strictly increasing cell faces; nodes are cell midpoints.
    pub fn from_faces(faces: Vec<f64>) -> Result<Self, DiscretizeError> {
        if faces.len() < 2 {
            return Err(DiscretizeError::TooFewNodes(faces.len().saturating_sub(1)));
        }
        let nodes: Vec<f64> = faces.windows(2).map(|f| 0.5 * (f[0] + f[1])).collect();
        let masses: Vec<f64> = faces.windows(2).map(|f| f[1] - f[0]).collect();
        if let Some(i) = masses.iter().position(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(DiscretizeError::BadMass(i));
        }
        let half_width = faces[0].abs().max(faces[faces.len() - 1].abs());
        Ok(Self {
            half_width,
            faces,
            nodes,
            masses,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }
}

/// Parameters of [`build_grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub nodes: usize,
    /// Clustering exponent; 1 is uniform, larger values pack cells towards turning points.
    pub grading: f64,
    pub turning_points: Vec<f64>,
    pub symmetric: bool,
}

impl GridSpec {
    pub fn uniform(half_width: f64, nodes: usize) -> Self {
        Self {
            half_width,
            nodes,
            grading: 1.0,
            turning_points: Vec::new(),
            symmetric: false,
        }
    }
}

/// Builds a cell-centred grid whose cell faces include every turning point.
///
/// Within each segment between breakpoints the faces follow `u ↦ u^g` towards
/// the turning-point end(s). With `symmetric` set an odd node count is raised
/// by one so that no node lands on the origin, and the negative half is the
/// exact mirror image of the positive half.
pub fn build_grid(spec: &GridSpec) -> Result<Grid, DiscretizeError> {
    let m = spec.half_width;
    if !(m > 0.0 && m.is_finite()) {
        return Err(DiscretizeError::BadHalfWidth(m));
    }
    if !(spec.grading > 0.0 && spec.grading.is_finite()) {
        return Err(DiscretizeError::BadGrading(spec.grading));
    }
    let mut n = spec.nodes;
    if spec.symmetric && n % 2 == 1 {
        n += 1;
    }
    if n < 4 {
        return Err(DiscretizeError::TooFewNodes(n));
    }
    let mut tps: Vec<f64> = spec
        .turning_points
        .iter()
        .copied()
        .filter(|t| t.abs() < m)
        .collect();
    tps.sort_by(f64::total_cmp);
    tps.dedup();

    if spec.symmetric {
        let positive: Vec<f64> = tps.iter().copied().filter(|&t| t > 0.0).collect();
        let negative: Vec<f64> = tps.iter().copied().filter(|&t| t < 0.0).collect();
        let mirrored = negative.len() == positive.len()
            && negative
                .iter()
                .rev()
                .zip(&positive)
                .all(|(a, b)| (a + b).abs() <= 1e-12 * m);
        if !mirrored {
            return Err(DiscretizeError::AsymmetricTurningPoints);
        }
        let origin_is_turning = tps.contains(&0.0);
        let mut breaks = vec![(0.0, origin_is_turning)];
        breaks.extend(positive.iter().map(|&t| (t, true)));
        breaks.push((m, false));
        let half = segment_faces(&breaks, n / 2, spec.grading);
        let mut faces: Vec<f64> = half.iter().rev().map(|f| -f).collect();
        faces.extend_from_slice(&half[1..]);
        return Grid::from_faces(faces);
    }

    let mut breaks = vec![(-m, false)];
    breaks.extend(tps.iter().map(|&t| (t, true)));
    breaks.push((m, false));
    Grid::from_faces(segment_faces(&breaks, n, spec.grading))
}

/// Faces over consecutive breakpoints `(location, clustered)` using `cells` cells in total.
fn segment_faces(breaks: &[(f64, bool)], cells: usize, grading: f64) -> Vec<f64> {
    let lengths: Vec<f64> = breaks.windows(2).map(|b| b[1].0 - b[0].0).collect();
    let counts = apportion(&lengths, cells);
    let mut faces = vec![breaks[0].0];
    for (seg, pair) in breaks.windows(2).enumerate() {
        let (a, cluster_a) = pair[0];
        let (b, cluster_b) = pair[1];
        let m = counts[seg];
        for j in 1..=m {
            let u = j as f64 / m as f64;
            let s = if j == m {
                1.0
            } else {
                graded(u, grading, cluster_a, cluster_b)
            };
            faces.push(if j == m { b } else { a + (b - a) * s });
        }
    }
    faces
}

fn graded(u: f64, g: f64, at_start: bool, at_end: bool) -> f64 {
    match (at_start, at_end) {
        (true, true) => {
            if u <= 0.5 {
                0.5 * (2.0 * u).powf(g)
            } else {
                1.0 - 0.5 * (2.0 * (1.0 - u)).powf(g)
            }
        }
        (true, false) => u.powf(g),
        (false, true) => 1.0 - (1.0 - u).powf(g),
        (false, false) => u,
    }
}

/// Largest-remainder split of `total` cells over segments, at least one each.
fn apportion(lengths: &[f64], total: usize) -> Vec<usize> {
    let k = lengths.len();
    let total = total.max(k);
    let sum: f64 = lengths.iter().sum();
    let spare = total - k;
    let exact: Vec<f64> = lengths.iter().map(|l| l / sum * spare as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| 1 + e.floor() as usize).collect();
    let mut left = total - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Finite-dimensional surrogate of `H = L²(|w| dμ)` with the operators `L` and `J`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteModel {
    grid: Option<Grid>,
    weights: DVector<f64>,
    operator: DMatrix<f64>,
    signature: DVector<f64>,
    #[serde(skip)]
    delta: OnceLock<f64>,
}

impl PartialEq for DiscreteModel {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid
            && self.weights == other.weights
            && self.operator == other.operator
            && self.signature == other.signature
    }
}

impl DiscreteModel {
    /// Checks shapes, positivity of the masses and the ±1 signature.
    /// W-symmetry and positivity of `L` are reported by [`Self::symmetry_defect`]
    /// and [`Self::delta`].
    pub fn new(
        weights: DVector<f64>,
        operator: DMatrix<f64>,
        signature: DVector<f64>,
        grid: Option<Grid>,
    ) -> Result<Self, DiscretizeError> {
        let n = weights.len();
        if operator.nrows() != n || operator.ncols() != n || signature.len() != n {
            return Err(DiscretizeError::Dimension(format!(
                "weights {n}, operator {}x{}, signature {}",
                operator.nrows(),
                operator.ncols(),
                signature.len()
            )));
        }
        if let Some(g) = &grid {
            if g.len() != n {
                return Err(DiscretizeError::Dimension(format!(
                    "grid has {} nodes, model has {n}",
                    g.len()
                )));
            }
        }
        if let Some(i) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(DiscretizeError::BadMass(i));
        }
        if let Some(i) = signature.iter().position(|&s| s != 1.0 && s != -1.0) {
            return Err(DiscretizeError::BadSignature(i));
        }
        Ok(Self {
            grid,
            weights,
            operator,
            signature,
            delta: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn grid(&self) -> Option<&Grid> {
        self.grid.as_ref()
    }

    /// Diagonal of `W`.
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// The matrix of `L`.
    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    /// Diagonal of `J`.
    pub fn signature(&self) -> &DVector<f64> {
        &self.signature
    }

    pub fn plus_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.signature[i] > 0.0).collect()
    }

    pub fn minus_indices(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.signature[i] < 0.0).collect()
    }

    /// `P₊ x`: zero the coordinates where `J = −1`.
    pub fn project_plus(&self, x: &DVector<f64>) -> DVector<f64> {
        x.zip_map(&self.signature, |v, s| if s > 0.0 { v } else { 0.0 })
    }

    /// `P₋ x`: zero the coordinates where `J = +1`.
    pub fn project_minus(&self, x: &DVector<f64>) -> DVector<f64> {
        x.zip_map(&self.signature, |v, s| if s < 0.0 { v } else { 0.0 })
    }

    /// `B = J L`.
    pub fn b_matrix(&self) -> DMatrix<f64> {
        let mut b = self.operator.clone();
        for (i, mut row) in b.row_iter_mut().enumerate() {
            row *= self.signature[i];
        }
        b
    }

    pub fn apply_b(&self, x: &DVector<f64>) -> DVector<f64> {
        (&self.operator * x).component_mul(&self.signature)
    }

    /// `(x, y)_W`.
    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.iter()
            .zip(y.iter())
            .zip(self.weights.iter())
            .map(|((a, b), w)| a * b * w)
            .sum()
    }

    pub fn norm(&self, x: &DVector<f64>) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    /// Krein form `[x, y] = (J x, y)_W`.
    pub fn krein(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.iter()
            .zip(y.iter())
            .zip(self.weights.iter().zip(self.signature.iter()))
            .map(|((a, b), (w, s))| a * b * w * s)
            .sum()
    }

    /// `max |WL − (WL)ᵀ| / max |WL|`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim();
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = self.weights[i] * self.operator[(i, j)];
                let b = self.weights[j] * self.operator[(j, i)];
                num = num.max((a - b).abs());
                den = den.max(a.abs());
            }
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// `W^{1/2} L W^{-1/2}`, symmetrised.
    pub fn symmetrized_operator(&self) -> DMatrix<f64> {
        let d = self.weights.map(f64::sqrt);
        let n = self.dim();
        let mut m = DMatrix::from_fn(n, n, |i, j| d[i] * self.operator[(i, j)] / d[j]);
        let t = m.transpose();
        m += t;
        m *= 0.5;
        m
    }

    /// Eigenvalues of `L` in the W-inner product, ascending.
    pub fn w_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.symmetrized_operator())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Smallest W-eigenvalue of `L`; computed on first use.
    pub fn delta(&self) -> f64 {
        *self.delta.get_or_init(|| {
            self.w_eigenvalues()
                .first()
                .copied()
                .unwrap_or(f64::INFINITY)
        })
    }

    /// SHA-256 over the dimension, masses, operator and signature bit patterns.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim() as u64).to_le_bytes());
        for v in self
            .weights
            .iter()
            .chain(self.operator.iter())
            .chain(self.signature.iter())
        {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Conservative three-point scheme for `(1/|w|)(−(p y')' + q y)` with Dirichlet
/// data outside `[−M, M]`.
///
/// Face conductances use the harmonic mean of `p` at the adjacent nodes. The
/// boundary ghost node sits one cell width beyond the first and last node, so a
/// uniform grid with `p ≡ 1, q ≡ 0, |w| ≡ 1` gives `(1/h²) tridiag(−1, 2, −1)`.
pub fn assemble_operators(c: &CoefficientSet, g: &Grid) -> Result<DiscreteModel, DiscretizeError> {
    let n = g.len();
    let mu = g.nodes();
    let h = g.masses();
    let mut abs_w = Vec::with_capacity(n);
    let mut signs = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    for (i, &mu_i) in mu.iter().enumerate() {
        let w = c.w(mu_i);
        if !(w.abs() >= WEIGHT_FLOOR) || !w.is_finite() {
            return Err(DiscretizeError::SingularWeight {
                index: i,
                mu: mu_i,
                value: w.abs(),
            });
        }
        abs_w.push(w.abs());
        signs.push(if w > 0.0 { 1.0 } else { -1.0 });
        let pi = c.p(mu_i);
        if !(pi > 0.0 && pi.is_finite()) {
            return Err(DiscretizeError::NonPositiveDiffusion { mu: mu_i, value: pi });
        }
        p.push(pi);
    }

    // conductance[j] couples node j-1 and node j; index 0 and n are the boundary faces
    let mut conductance = vec![0.0; n + 1];
    conductance[0] = p[0] / h[0];
    conductance[n] = p[n - 1] / h[n - 1];
    for j in 1..n {
        let face_p = 2.0 * p[j - 1] * p[j] / (p[j - 1] + p[j]);
        conductance[j] = face_p / (mu[j] - mu[j - 1]);
    }

    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        let scale = 1.0 / (abs_w[i] * h[i]);
        let diag = conductance[i] + conductance[i + 1] + c.q(mu[i]) * h[i];
        l[(i, i)] = diag * scale;
        if i > 0 {
            l[(i, i - 1)] = -conductance[i] * scale;
        }
        if i + 1 < n {
            l[(i, i + 1)] = -conductance[i + 1] * scale;
        }
    }
    let weights = DVector::from_iterator(n, abs_w.iter().zip(h).map(|(w, h)| w * h));
    DiscreteModel::new(weights, l, DVector::from_vec(signs), Some(g.clone()))
}

/// Synthetic model with `W = I`, `L = Qᵀ D Q` (random orthogonal `Q`, `D ≥ gap`)
/// and a random signature containing both signs when `n ≥ 2`.
pub fn random_jpositive_instance(n: usize, seed: u64, gap: f64) -> DiscreteModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let q = g.qr().q();
    let d = DVector::from_fn(n, |_, _| gap + 4.0 * rng.random::<f64>());
    let mut l = q.transpose() * DMatrix::from_diagonal(&d) * &q;
    let lt = l.transpose();
    l += lt;
    l *= 0.5;
    let mut signature = DVector::from_fn(n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
    if n >= 2 {
        let s0 = signature[0];
        if signature.iter().all(|&s| s == s0) {
            let k = rng.random_range(0..n);
            signature[k] = -s0;
        }
    }
    DiscreteModel::new(DVector::from_element(n, 1.0), l, signature, None)
        .expect("synthetic model is well-formed")
}
