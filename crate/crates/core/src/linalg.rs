use nalgebra::{DMatrix, SymmetricEigen};

/// Largest singular value; 0 for an empty matrix.
pub(crate) fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .singular_values_unordered()
        .iter()
        .fold(0.0, |m: f64, &s| m.max(s))
}

/// 2-norm condition number; 1 for an empty matrix.
pub(crate) fn condition_number(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let s = a.clone().singular_values_unordered();
    let max = s.iter().fold(0.0, |m: f64, &v| m.max(v));
    let min = s.iter().fold(f64::INFINITY, |m: f64, &v| m.min(v));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Eigenpairs of a symmetric matrix with eigenvalues in ascending order.
pub(crate) fn sorted_symmetric_eigen(a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Rows `rows` of `a`.
pub(crate) fn select_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

pub(crate) fn symmetrize(a: &mut DMatrix<f64>) {
    let t = a.transpose();
    *a += t;
    *a *= 0.5;
}
