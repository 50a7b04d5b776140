//! Independent solvers for cross-checking the spectral route.
//!
//! [`brute_force_bvp`] discretises `ψ' + Bψ = f` on an end-clustered x-grid with the
//! midpoint box scheme
//! `(ψ_{k+1} − ψ_k)/Δx + B(ψ_k + ψ_{k+1})/2 = (f_k + f_{k+1})/2`,
//! closes it with `P₊ψ_0 = φ₊` and `P₋ψ_N = φ₋`, and solves the whole
//! space-time system with a banded LU. It reads only the [`DiscreteModel`].
//!
//! [`direct_block_solve`] solves the two-block boundary system for
//! `(ψ₊(0), ψ₋(τ))` in one dense solve instead of the factored form.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::banded::BandMatrix;
use crate::discretize::DiscreteModel;
use crate::halfrange::BoundaryData;
use crate::krein::KreinDecomposition;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("singular system ({0})")]
    SingularSystem(String),
    #[error("invalid oracle input: {0}")]
    BadInput(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyDiagnostics {
    pub unknowns: usize,
    pub nonzeros: usize,
    pub lower_bandwidth: usize,
    pub upper_bandwidth: usize,
    /// `‖Ax − b‖∞ / (‖A‖∞‖x‖∞ + ‖b‖∞)`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeSolution {
    pub xs: Vec<f64>,
    /// Row `k` is `ψ(x_k)`.
    pub values: Vec<DVector<f64>>,
    pub diagnostics: AssemblyDiagnostics,
}

impl SpaceTimeSolution {
    /// Same schema as the CLI solution output.
    pub fn to_csv(&self, m: &DiscreteModel) -> String {
        crate::export::solution_csv(m, &self.xs, &self.values)
    }
}

/// `nx` nodes on `[0, τ]` clustered quadratically towards both ends,
/// `x = τ t²/(t² + (1 − t)²)` for equispaced `t`. Stiff modes live in thin
/// layers at the faces; a uniform grid leaves them unresolved as `n` grows.
pub fn graded_nodes(nx: usize, tau: f64) -> Vec<f64> {
    let last = nx.saturating_sub(1).max(1) as f64;
    (0..nx)
        .map(|k| {
            if k + 1 == nx {
                return tau;
            }
            let t = k as f64 / last;
            let (u, v) = (t * t, (1.0 - t) * (1.0 - t));
            tau * u / (u + v)
        })
        .collect()
}

/// Solves the box-scheme space-time system on [`graded_nodes`]`(nx, τ)`.
pub fn brute_force_bvp(
    m: &DiscreteModel,
    bd: &BoundaryData,
    f: &dyn Fn(f64) -> DVector<f64>,
    nx: usize,
) -> Result<SpaceTimeSolution, OracleError> {
    let tau = bd
        .slab()
        .tau()
        .ok_or_else(|| OracleError::BadInput("the space-time oracle needs a finite slab".into()))?;
    if nx < 3 {
        return Err(OracleError::BadInput(format!("nx = {nx} < 3")));
    }
    brute_force_bvp_on(m, bd, f, &graded_nodes(nx, tau))
}

/// Richardson extrapolation `(4ψ_fine − ψ_coarse)/3` of [`brute_force_bvp`] on
/// `nx` and `2nx − 1` graded nodes; the coarse nodes are a subset of the fine
/// ones, so the result lives on `graded_nodes(nx, τ)`. Diagnostics are those of
/// the fine solve.
pub fn brute_force_bvp_extrapolated(
    m: &DiscreteModel,
    bd: &BoundaryData,
    f: &dyn Fn(f64) -> DVector<f64>,
    nx: usize,
) -> Result<SpaceTimeSolution, OracleError> {
    let coarse = brute_force_bvp(m, bd, f, nx)?;
    let fine = brute_force_bvp(m, bd, f, 2 * nx - 1)?;
    let values = coarse
        .values
        .iter()
        .enumerate()
        .map(|(k, c)| (&fine.values[2 * k] * 4.0 - c) / 3.0)
        .collect();
    Ok(SpaceTimeSolution {
        xs: coarse.xs,
        values,
        diagnostics: fine.diagnostics,
    })
}

/// Richardson extrapolation of [`brute_force_bvp_on`] between `xs` and `xs`
/// with every interval bisected. Lives on `xs`; diagnostics are those of the
/// fine solve.
pub fn brute_force_bvp_extrapolated_on(
    m: &DiscreteModel,
    bd: &BoundaryData,
    f: &dyn Fn(f64) -> DVector<f64>,
    xs: &[f64],
) -> Result<SpaceTimeSolution, OracleError> {
    let coarse = brute_force_bvp_on(m, bd, f, xs)?;
    let mut fine_xs = Vec::with_capacity(2 * xs.len());
    for w in xs.windows(2) {
        fine_xs.push(w[0]);
        fine_xs.push(0.5 * (w[0] + w[1]));
    }
    fine_xs.extend(xs.last());
    let fine = brute_force_bvp_on(m, bd, f, &fine_xs)?;
    let values = coarse
        .values
        .iter()
        .enumerate()
        .map(|(k, c)| (&fine.values[2 * k] * 4.0 - c) / 3.0)
        .collect();
    Ok(SpaceTimeSolution {
        xs: coarse.xs,
        values,
        diagnostics: fine.diagnostics,
    })
}

/// Same scheme on caller-supplied nodes `0 = x_0 < … < x_N = τ`.
pub fn brute_force_bvp_on(
    m: &DiscreteModel,
    bd: &BoundaryData,
    f: &dyn Fn(f64) -> DVector<f64>,
    xs: &[f64],
) -> Result<SpaceTimeSolution, OracleError> {
    let tau = bd
        .slab()
        .tau()
        .ok_or_else(|| OracleError::BadInput("the space-time oracle needs a finite slab".into()))?;
    let nx = xs.len();
    if nx < 3 || xs[0] != 0.0 || xs[nx - 1] != tau || xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(OracleError::BadInput("x nodes must increase strictly from 0 to τ (at least 3)".into()));
    }
    let xs = xs.to_vec();
    let n = m.dim();
    let phi_plus = bd.phi_plus();
    let phi_minus = bd.phi_minus().expect("finite boundary data carries φ₋");
    let b: DMatrix<f64> = {
        let mut b = m.operator().clone();
        for (i, mut row) in b.row_iter_mut().enumerate() {
            row *= m.signature()[i];
        }
        b
    };
    let b_rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| (0..n).filter(|&j| b[(i, j)] != 0.0).map(|j| (j, b[(i, j)])).collect())
        .collect();
    let fs: Vec<DVector<f64>> = xs.iter().map(|&x| f(x)).collect();
    if fs.iter().any(|v| v.len() != n) {
        return Err(OracleError::BadInput("forcing has the wrong dimension".into()));
    }

    let total = nx * n;
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(total);
    let mut rhs: Vec<f64> = Vec::with_capacity(total);
    for i in (0..n).filter(|&i| m.signature()[i] > 0.0) {
        rows.push(vec![(i, 1.0)]);
        rhs.push(phi_plus[i]);
    }
    for k in 0..nx - 1 {
        let dx = xs[k + 1] - xs[k];
        let left = k * n;
        let right = (k + 1) * n;
        for i in 0..n {
            let mut row = Vec::with_capacity(2 * b_rows[i].len() + 2);
            let mut diag_seen = false;
            for &(j, v) in &b_rows[i] {
                let d = if j == i {
                    diag_seen = true;
                    1.0 / dx
                } else {
                    0.0
                };
                row.push((left + j, 0.5 * v - d));
                row.push((right + j, 0.5 * v + d));
            }
            if !diag_seen {
                row.push((left + i, -1.0 / dx));
                row.push((right + i, 1.0 / dx));
            }
            rows.push(row);
            rhs.push(0.5 * (fs[k][i] + fs[k + 1][i]));
        }
    }
    let last = (nx - 1) * n;
    for i in (0..n).filter(|&i| m.signature()[i] < 0.0) {
        rows.push(vec![(last + i, 1.0)]);
        rhs.push(phi_minus[i]);
    }
    debug_assert_eq!(rows.len(), total);

    // order rows by the centre of their column range to keep the band narrow
    let mut order: Vec<usize> = (0..total).collect();
    let centre = |r: &Vec<(usize, f64)>| {
        let lo = r.iter().map(|e| e.0).min().unwrap_or(0);
        let hi = r.iter().map(|e| e.0).max().unwrap_or(0);
        lo + hi
    };
    let centres: Vec<usize> = rows.iter().map(centre).collect();
    order.sort_by_key(|&r| centres[r]);
    let mut kl = 0usize;
    let mut ku = 0usize;
    let mut nonzeros = 0usize;
    for (new, &old) in order.iter().enumerate() {
        for &(c, _) in &rows[old] {
            nonzeros += 1;
            if new > c {
                kl = kl.max(new - c);
            } else {
                ku = ku.max(c - new);
            }
        }
    }
    let mut band = BandMatrix::zeros(total, kl, ku);
    let mut b_vec = vec![0.0; total];
    for (new, &old) in order.iter().enumerate() {
        for &(c, v) in &rows[old] {
            band.add(new, c, v);
        }
        b_vec[new] = rhs[old];
    }
    let lu = band
        .factor()
        .map_err(|p| OracleError::SingularSystem(format!("zero pivot in column {} of {total}", p.0)))?;
    let mut sol = b_vec.clone();
    lu.solve(&mut sol);

    let mut resid: f64 = 0.0;
    let mut a_norm: f64 = 0.0;
    for (new, &old) in order.iter().enumerate() {
        let mut acc = -b_vec[new];
        let mut row_sum = 0.0;
        for &(c, v) in &rows[old] {
            acc += v * sol[c];
            row_sum += v.abs();
        }
        resid = resid.max(acc.abs());
        a_norm = a_norm.max(row_sum);
    }
    let x_norm = sol.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let b_norm = b_vec.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let denom = a_norm * x_norm + b_norm;
    let residual = if denom == 0.0 { resid } else { resid / denom };
    let values = (0..nx).map(|k| DVector::from_column_slice(&sol[k * n..(k + 1) * n])).collect();
    Ok(SpaceTimeSolution {
        xs,
        values,
        diagnostics: AssemblyDiagnostics {
            unknowns: total,
            nonzeros,
            lower_bandwidth: kl,
            upper_bandwidth: ku,
            residual,
        },
    })
}

/// Solves
/// `[E₊ᵀV₊, E₊ᵀV₋e^{τΛ₋}; E₋ᵀV₊e^{−τΛ₊}, E₋ᵀV₋] (a₊; a₋) = (φ₊; φ₋)`
/// by one LU with full pivoting; returns the eigen-coordinates `(a₊, a₋)`.
pub fn direct_block_solve(k: &KreinDecomposition, bd: &BoundaryData) -> Result<(DVector<f64>, DVector<f64>), OracleError> {
    let tau = bd
        .slab()
        .tau()
        .ok_or_else(|| OracleError::BadInput("the block solve needs a finite slab".into()))?;
    let m = k.model();
    let n = m.dim();
    let p = k.n_plus();
    let q = k.n_minus();
    let plus = m.plus_indices();
    let minus = m.minus_indices();
    let rows: Vec<usize> = plus.iter().chain(minus.iter()).copied().collect();
    let vp = k.vectors_plus();
    let vm = k.vectors_minus();
    let lp = k.eigenvalues_plus();
    let lm = k.eigenvalues_minus();
    let a = DMatrix::from_fn(n, n, |r, c| {
        let at_zero = r < plus.len();
        let row = rows[r];
        if c < p {
            let decay = if at_zero { 1.0 } else { (-tau * lp[c]).exp() };
            vp[(row, c)] * decay
        } else {
            let j = c - p;
            let decay = if at_zero { (tau * lm[j]).exp() } else { 1.0 };
            vm[(row, j)] * decay
        }
    });
    let phi_minus = bd.phi_minus().expect("finite boundary data carries φ₋");
    let rhs = DVector::from_fn(n, |r, _| {
        if r < plus.len() {
            bd.phi_plus()[rows[r]]
        } else {
            phi_minus[rows[r]]
        }
    });
    let lu = a.full_piv_lu();
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| OracleError::SingularSystem("boundary block system".into()))?;
    Ok((x.rows(0, p).into_owned(), x.rows(p, q).into_owned()))
}

/// Relative `L²(0, τ; H)` distance between two sampled solutions, trapezoid rule in x.
pub fn relative_l2_difference(m: &DiscreteModel, xs: &[f64], a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..xs.len() {
        let w = match (k, xs.len()) {
            (_, 1) => 1.0,
            (0, _) => 0.5 * (xs[1] - xs[0]),
            (k, l) if k == l - 1 => 0.5 * (xs[k] - xs[k - 1]),
            (k, _) => 0.5 * (xs[k + 1] - xs[k - 1]),
        };
        let d = &a[k] - &b[k];
        num += w * m.inner(&d, &d);
        den += w * m.inner(&b[k], &b[k]);
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halfrange::{solve, SolveOptions};
    use crate::krein::decompose;

    fn two_by_two() -> DiscreteModel {
        DiscreteModel::new(
            DVector::from_element(2, 1.0),
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]),
            DVector::from_column_slice(&[1.0, -1.0]),
            None,
        )
        .unwrap()
    }

    #[test]
    fn scalar_decay_is_second_order() {
        let lambda = 2.0;
        let m = DiscreteModel::new(
            DVector::from_element(1, 1.0),
            DMatrix::from_element(1, 1, lambda),
            DVector::from_element(1, 1.0),
            None,
        )
        .unwrap();
        let bd = BoundaryData::finite(&m, DVector::from_element(1, 1.0), DVector::zeros(1), 1.0).unwrap();
        let zero = |_: f64| DVector::zeros(1);
        let err = |nx: usize| {
            let s = brute_force_bvp(&m, &bd, &zero, nx).unwrap();
            s.xs.iter()
                .zip(&s.values)
                .map(|(x, v)| (v[0] - (-lambda * x).exp()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(41) / err(81);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn coupled_example_against_spectral() {
        let m = two_by_two();
        let k = decompose(&m).unwrap();
        let bd = BoundaryData::finite(&m, DVector::from_column_slice(&[1.0, 0.0]), DVector::from_column_slice(&[0.0, 1.0]), 1.0)
            .unwrap();
        let s = solve(&k, &bd, &SolveOptions::default()).unwrap();
        let o = brute_force_bvp(&m, &bd, &|_| DVector::zeros(2), 400).unwrap();
        assert!(o.diagnostics.residual < 1e-12);
        let spectral: Vec<DVector<f64>> = o.xs.iter().map(|&x| s.evaluate(x).unwrap()).collect();
        let d = relative_l2_difference(&m, &o.xs, &o.values, &spectral);
        assert!(d < 1e-2, "{d}");
        assert!(d < 1e-4, "box scheme should be far inside the bound: {d}");
    }

    #[test]
    fn extrapolation_is_fourth_order_on_scalar_decay() {
        let m = DiscreteModel::new(
            DVector::from_element(1, 1.0),
            DMatrix::from_element(1, 1, 2.0),
            DVector::from_element(1, 1.0),
            None,
        )
        .unwrap();
        let bd = BoundaryData::finite(&m, DVector::from_element(1, 1.0), DVector::zeros(1), 1.0).unwrap();
        let err = |nx: usize| {
            let s = brute_force_bvp_extrapolated(&m, &bd, &|_| DVector::zeros(1), nx).unwrap();
            s.xs.iter()
                .zip(&s.values)
                .map(|(x, v)| (v[0] - (-2.0 * x).exp()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(21) / err(41);
        assert!(ratio > 12.0, "ratio {ratio}");
    }

    #[test]
    fn bisection_extrapolation_on_irregular_nodes() {
        let m = two_by_two();
        let k = decompose(&m).unwrap();
        let bd = BoundaryData::finite(&m, DVector::from_column_slice(&[1.0, 0.0]), DVector::from_column_slice(&[0.0, 1.0]), 1.0)
            .unwrap();
        let s = solve(&k, &bd, &SolveOptions::default()).unwrap();
        let mut xs = graded_nodes(60, 1.0);
        xs.extend([0.25, 0.5, 0.75]);
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let err = |o: SpaceTimeSolution| {
            o.xs.iter()
                .zip(&o.values)
                .map(|(&x, v)| (v - s.evaluate(x).unwrap()).amax())
                .fold(0.0, f64::max)
        };
        let plain = err(brute_force_bvp_on(&m, &bd, &|_| DVector::zeros(2), &xs).unwrap());
        let extrapolated = err(brute_force_bvp_extrapolated_on(&m, &bd, &|_| DVector::zeros(2), &xs).unwrap());
        assert!(extrapolated < 1e-2 * plain, "{extrapolated} vs {plain}");
    }

    #[test]
    fn block_solve_matches_factored_route() {
        let m = two_by_two();
        let k = decompose(&m).unwrap();
        let bd = BoundaryData::finite(&m, DVector::from_column_slice(&[1.0, 0.0]), DVector::from_column_slice(&[0.0, 1.0]), 1.0)
            .unwrap();
        let s = solve(&k, &bd, &SolveOptions::default()).unwrap();
        let (ap, am) = direct_block_solve(&k, &bd).unwrap();
        assert!((ap - s.coeff_plus()).amax() < 1e-12);
        assert!((am - s.coeff_minus()).amax() < 1e-12);
    }

    #[test]
    fn rejects_half_space() {
        let m = two_by_two();
        let bd = BoundaryData::halfspace(&m, DVector::from_column_slice(&[1.0, 0.0])).unwrap();
        assert!(matches!(
            brute_force_bvp(&m, &bd, &|_| DVector::zeros(2), 10),
            Err(OracleError::BadInput(_))
        ));
    }
}
