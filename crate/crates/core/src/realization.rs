//! Minimal realization from a finite Hankel sub-matrix `H_{f,N,N+1}`.
//!
//! 1. Pick `n = rank H` linearly independent columns (leftmost first) as
//!    `O`, and let `R` hold the coordinates of every column of `H` in that
//!    basis, so `H = O R`.
//! 2. `R̄` is the first `J_N` columns of `R`.
//! 3. `R_q` gathers the columns `r(i)` of `R` that correspond to extending
//!    the column word `v_r` by the letter `q`.
//! 4. `[B_1 … B_D]` is the first `mD` columns of `R`, `[C_1; …; C_D]` the
//!    first `pD` rows of `O`, and `A_q = R_q R̄⁺`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hankel::HankelSubMatrix;
use crate::linalg;
use crate::system::SwitchedLinearSystem;
use crate::words::{count_words_up_to, index_of_word, word_at_index, words_up_to};

pub use crate::linalg::pseudoinverse;

#[derive(Debug, Clone, PartialEq)]
pub struct RankFactorization {
    /// `I_N x n`: the selected columns of `H`.
    pub o: DMatrix<f64>,
    /// `n x J_{N+1}`: coordinates of every column of `H` in the basis `O`.
    pub r: DMatrix<f64>,
    /// 1-based, ascending.
    pub basis_columns: Vec<usize>,
    pub tol_rel: f64,
    /// Singular values of `H`, decreasing.
    pub singular_values: Vec<f64>,
}

impl RankFactorization {
    pub fn rank(&self) -> usize {
        self.basis_columns.len()
    }
}

/// Factorizes `H = O R` with `n` equal to the numerical rank at `tol_rel`.
pub fn rank_factorize(h: &HankelSubMatrix, tol_rel: f64) -> RankFactorization {
    let sv = linalg::singular_values(&h.h);
    let n = linalg::rank_from_singular_values(&sv, tol_rel);
    factorize(h, n, tol_rel, sv)
}

/// Same, but with the rank forced to `n` (the fixed-basis variant used for
/// estimated Hankel matrices).
pub fn rank_factorize_with_rank(h: &HankelSubMatrix, n: usize, tol_rel: f64) -> RankFactorization {
    let sv = linalg::singular_values(&h.h);
    factorize(h, n, tol_rel, sv)
}

fn factorize(h: &HankelSubMatrix, n: usize, tol_rel: f64, sv: Vec<f64>) -> RankFactorization {
    let smax = sv.first().copied().unwrap_or(0.0);
    let cols = if n == 0 { Vec::new() } else { linalg::leftmost_basis(&h.h, n, tol_rel * smax) };
    let o = h.h.select_columns(cols.iter());
    // Least-squares coordinates; O has full column rank by construction.
    let r = if cols.is_empty() {
        DMatrix::zeros(0, h.h.ncols())
    } else {
        linalg::pseudoinverse(&o, f64::EPSILON * o.nrows().max(o.ncols()) as f64) * &h.h
    };
    RankFactorization {
        o,
        r,
        basis_columns: cols.into_iter().map(|c| c + 1).collect(),
        tol_rel,
        singular_values: sv,
    }
}

/// Column of `H_{f,N,N+1}` obtained by extending the column word of column
/// `i` of `H_{f,N,N}` by the letter `q`. Both indices are 1-based.
pub fn shift_column_selector(i: usize, q: usize, n_depth: usize, m: usize, d: usize) -> Result<usize> {
    let block = m * d;
    let j_n = count_words_up_to(n_depth, d)?
        .checked_mul(block)
        .ok_or_else(|| Error::Overflow("sizing J_N".into()))?;
    if i == 0 || i > j_n {
        return Err(Error::IndexOutOfRange(format!("column {i} outside 1..={j_n}")));
    }
    if q == 0 || q > d {
        return Err(Error::InvalidWord(format!("mode {q} outside 1..={d}")));
    }
    let r = (i - 1) / block + 1;
    let z = (i - 1) % block + 1;
    let extended = word_at_index(r, d)?.push(q);
    let dd = index_of_word(&extended, d)?;
    Ok((dd - 1) * block + z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizationResult {
    pub system: SwitchedLinearSystem,
    /// Depth `N` of the input `H_{f,N,N+1}`.
    pub depth: usize,
    pub rank: usize,
    pub factorization: RankFactorization,
}

/// JSON report accompanying a realized model.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RealizationReport {
    #[serde(rename = "N")]
    pub depth: usize,
    pub rank: usize,
    pub basis_columns: Vec<usize>,
    pub singular_values: Vec<f64>,
    pub tol_rel: f64,
    /// `sigma_n / sigma_{n+1}`, when both exist: a model-order diagnostic.
    pub singular_value_gap: Option<f64>,
}

impl RealizationResult {
    pub fn report(&self) -> RealizationReport {
        let sv = &self.factorization.singular_values;
        let gap = match (self.rank.checked_sub(1).and_then(|k| sv.get(k)), sv.get(self.rank)) {
            (Some(&a), Some(&b)) if b > 0.0 => Some(a / b),
            _ => None,
        };
        RealizationReport {
            depth: self.depth,
            rank: self.rank,
            basis_columns: self.factorization.basis_columns.clone(),
            singular_values: sv.clone(),
            tol_rel: self.factorization.tol_rel,
            singular_value_gap: gap,
        }
    }
}

/// Runs the realization algorithm on `H_{f,N,N+1}`.
pub fn realize(h: &HankelSubMatrix, tol_rel: f64) -> Result<RealizationResult> {
    check_shape(h)?;
    realize_from(h, rank_factorize(h, tol_rel), tol_rel)
}

/// Realization with the state dimension forced to `n`.
pub fn realize_with_rank(h: &HankelSubMatrix, n: usize, tol_rel: f64) -> Result<RealizationResult> {
    check_shape(h)?;
    if linalg::max_abs(&h.h) == 0.0 {
        return Err(Error::DegenerateSystem);
    }
    realize_from(h, rank_factorize_with_rank(h, n, tol_rel), tol_rel)
}

fn check_shape(h: &HankelSubMatrix) -> Result<()> {
    if h.k != h.l + 1 {
        return Err(Error::DimensionMismatch(format!(
            "realization needs H_(N,N+1); got L={}, K={}",
            h.l, h.k
        )));
    }
    Ok(())
}

fn realize_from(h: &HankelSubMatrix, fac: RankFactorization, tol_rel: f64) -> Result<RealizationResult> {
    let n = fac.rank();
    if n == 0 {
        return Err(Error::DegenerateSystem);
    }
    let (p, m, d) = (h.p, h.m, h.d);
    let depth = h.l;
    let j_n = HankelSubMatrix::cols_for(depth, m, d)?;

    let b: Vec<DMatrix<f64>> = (0..d).map(|q| fac.r.columns(q * m, m).into_owned()).collect();
    let c: Vec<DMatrix<f64>> = (0..d).map(|q| fac.o.rows(q * p, p).into_owned()).collect();

    let r_bar = fac.r.columns(0, j_n).into_owned();
    let r_bar_pinv = linalg::pseudoinverse(&r_bar, tol_rel);
    let mut a = Vec::with_capacity(d);
    for q in 1..=d {
        let mut r_q = DMatrix::zeros(n, j_n);
        for i in 1..=j_n {
            let src = shift_column_selector(i, q, depth, m, d)?;
            r_q.set_column(i - 1, &fac.r.column(src - 1));
        }
        a.push(r_q * &r_bar_pinv);
    }

    let system = SwitchedLinearSystem::new(a, b, c)?;
    Ok(RealizationResult { system, depth, rank: n, factorization: fac })
}

/// Rank of `[A_v B_q e_j]` over `|v| <= n-1`, all modes and input columns.
pub fn span_reachability_rank(sys: &SwitchedLinearSystem, tol_rel: f64) -> usize {
    let words = words_up_to(sys.n().saturating_sub(1), sys.d()).expect("small word count");
    let mut blocks = Vec::with_capacity(words.len() * sys.d());
    for v in &words {
        let av = sys.matrix_product_along_word(v).expect("valid word");
        for q in 1..=sys.d() {
            blocks.push(&av * sys.b(q));
        }
    }
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut mat = DMatrix::zeros(sys.n(), cols);
    let mut at = 0;
    for blk in blocks {
        mat.columns_mut(at, blk.ncols()).copy_from(&blk);
        at += blk.ncols();
    }
    linalg::numerical_rank(&mat, tol_rel)
}

/// Rank of the stacked `C_q A_v` over `|v| <= n-1` and all modes.
pub fn observability_rank(sys: &SwitchedLinearSystem, tol_rel: f64) -> usize {
    let words = words_up_to(sys.n().saturating_sub(1), sys.d()).expect("small word count");
    let rows = words.len() * sys.d() * sys.p();
    let mut mat = DMatrix::zeros(rows, sys.n());
    let mut at = 0;
    for v in &words {
        let av = sys.matrix_product_along_word(v).expect("valid word");
        for q in 1..=sys.d() {
            mat.rows_mut(at, sys.p()).copy_from(&(sys.c(q) * &av));
            at += sys.p();
        }
    }
    linalg::numerical_rank(&mat, tol_rel)
}

/// Span-reachable and observable.
pub fn is_minimal(sys: &SwitchedLinearSystem, tol_rel: f64) -> bool {
    span_reachability_rank(sys, tol_rel) == sys.n() && observability_rank(sys, tol_rel) == sys.n()
}
