//! Dense linear-algebra helpers on top of nalgebra: ordered singular values,
//! numerical rank, Moore-Penrose pseudoinverse and leftmost column-basis
//! selection.

use nalgebra::{DMatrix, DVector};

/// Default relative tolerance for rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Relative tolerance for invertibility checks.
pub const INVERTIBILITY_TOL: f64 = 1e-10;

/// Singular values sorted in decreasing order. Empty matrices have none.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Number of singular values strictly above `tol_rel * sigma_max`.
pub fn rank_from_singular_values(sv: &[f64], tol_rel: f64) -> usize {
    let smax = sv.first().copied().unwrap_or(0.0);
    if smax <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol_rel * smax).count()
}

pub fn numerical_rank(m: &DMatrix<f64>, tol_rel: f64) -> usize {
    rank_from_singular_values(&singular_values(m), tol_rel)
}

/// Induced 2-norm.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Smallest singular value strictly above `INVERTIBILITY_TOL * sigma_max`.
pub fn is_invertible(m: &DMatrix<f64>) -> bool {
    if !m.is_square() {
        return false;
    }
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&smax), Some(&smin)) => smax > 0.0 && smin > INVERTIBILITY_TOL * smax,
        _ => false,
    }
}

/// Moore-Penrose pseudoinverse through the SVD, inverting only singular
/// values above `tol_rel * sigma_max`.
pub fn pseudoinverse(m: &DMatrix<f64>, tol_rel: f64) -> DMatrix<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    if smax <= 0.0 {
        return DMatrix::zeros(cols, rows);
    }
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut out = DMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol_rel * smax {
            // out += v_k * u_k^T / s
            out += (v_t.row(k).transpose() / s) * u.column(k).transpose();
        }
    }
    out
}

/// Greedy leftmost-independent column selection.
///
/// Scans columns left to right and keeps a column when its component
/// orthogonal to the already kept ones has norm above `tol_abs`. Stops once
/// `target` columns are kept. If the scan ends early, the remaining slots are
/// filled by the columns with the largest orthogonal residual. The returned
/// indices are 0-based and ascending.
pub fn leftmost_basis(m: &DMatrix<f64>, target: usize, tol_abs: f64) -> Vec<usize> {
    let target = target.min(m.ncols()).min(m.nrows());
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(target);
    let mut chosen: Vec<usize> = Vec::with_capacity(target);

    for j in 0..m.ncols() {
        if chosen.len() == target {
            break;
        }
        let r = orthogonal_residual(&basis, m.column(j).into_owned());
        let norm = r.norm();
        if norm > tol_abs {
            basis.push(r / norm);
            chosen.push(j);
        }
    }

    while chosen.len() < target {
        let best = (0..m.ncols())
            .filter(|j| !chosen.contains(j))
            .map(|j| {
                let r = orthogonal_residual(&basis, m.column(j).into_owned());
                (j, r.norm(), r)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match best {
            Some((j, norm, r)) if norm > 0.0 => {
                basis.push(r / norm);
                chosen.push(j);
            }
            _ => break,
        }
    }
    chosen.sort_unstable();
    chosen
}

// Two passes of modified Gram-Schmidt.
fn orthogonal_residual(basis: &[DVector<f64>], mut v: DVector<f64>) -> DVector<f64> {
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&v);
            v.axpy(-c, b, 1.0);
        }
    }
    v
}

/// Largest absolute entry (0 for an empty matrix).
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, &b| a.max(b.abs()))
}

/// Row-major nested vectors, the layout used by the JSON formats.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Builds a matrix from row-major nested vectors with an expected shape.
pub fn from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Option<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
