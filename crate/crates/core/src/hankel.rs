//! Finite Hankel sub-matrices `H_{f,L,K}`.
//!
//! Block (i, j) (1-based, each block `pD x mD`) is the combined Markov
//! parameter `M(v_j v_i)`: the COLUMN word comes first in the
//! concatenation, the row word second. Here `v_1, v_2, ...` is the
//! lexicographic enumeration of mode words, block rows run over
//! `i = 1..=N(L)` and block columns over `j = 1..=N(K)`.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::linalg;
use crate::markov::MarkovSource;
use crate::words::{count_words_up_to, words_up_to};

#[derive(Debug, Clone, PartialEq)]
pub struct HankelSubMatrix {
    pub l: usize,
    pub k: usize,
    pub p: usize,
    pub m: usize,
    pub d: usize,
    pub h: DMatrix<f64>,
}

/// JSON sidecar written next to a dense Hankel CSV.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct HankelMeta {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub p: usize,
    pub m: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub tol: f64,
}

impl HankelSubMatrix {
    /// Number of rows `I_L = N(L) p D`.
    pub fn rows_for(l: usize, p: usize, d: usize) -> Result<usize> {
        count_words_up_to(l, d)?
            .checked_mul(p * d)
            .ok_or_else(|| Error::Overflow("sizing Hankel rows".into()))
    }

    /// Number of columns `J_K = N(K) m D`.
    pub fn cols_for(k: usize, m: usize, d: usize) -> Result<usize> {
        count_words_up_to(k, d)?
            .checked_mul(m * d)
            .ok_or_else(|| Error::Overflow("sizing Hankel columns".into()))
    }

    /// Wraps a dense matrix, checking its shape against `(L, K, p, m, D)`.
    pub fn from_matrix(h: DMatrix<f64>, l: usize, k: usize, p: usize, m: usize, d: usize) -> Result<Self> {
        let expected = (Self::rows_for(l, p, d)?, Self::cols_for(k, m, d)?);
        if h.shape() != expected {
            return Err(Error::DimensionMismatch(format!(
                "Hankel matrix is {:?}, expected {:?} for L={l}, K={k}",
                h.shape(),
                expected
            )));
        }
        Ok(HankelSubMatrix { l, k, p, m, d, h })
    }

    /// Block (i, j), 1-based.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let (bp, bm) = (self.p * self.d, self.m * self.d);
        self.h.view(((i - 1) * bp, (j - 1) * bm), (bp, bm)).into_owned()
    }

    pub fn meta(&self, tol: f64) -> HankelMeta {
        HankelMeta { l: self.l, k: self.k, p: self.p, m: self.m, d: self.d, tol }
    }

    /// Dense CSV, one matrix row per line, shortest round-trip decimals.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for i in 0..self.h.nrows() {
            wtr.write_record(self.h.row(i).iter().map(|x| x.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, meta: &HankelMeta) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let h = linalg::from_rows(&rows, nrows, ncols)
            .ok_or_else(|| Error::Parse("ragged Hankel CSV".into()))?;
        Self::from_matrix(h, meta.l, meta.k, meta.p, meta.m, meta.d)
    }

    /// Writes `<path>` (CSV) and `<path>.json` (sidecar).
    pub fn save(&self, path: &Path, tol: f64) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        let meta = serde_json::to_string_pretty(&self.meta(tol))?;
        std::fs::write(sidecar_path(path), meta + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta: HankelMeta = serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
        Self::read_csv(std::fs::File::open(path)?, &meta)
    }
}

/// `foo.csv` -> `foo.csv.json`.
pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

pub fn build_hankel(src: &MarkovSource, l: usize, k: usize) -> Result<HankelSubMatrix> {
    build_hankel_with(src, l, k, Execution::default())
}

/// Assembles `H_{f,L,K}`; block rows are evaluated independently, so the
/// result does not depend on `exec`.
pub fn build_hankel_with(src: &MarkovSource, l: usize, k: usize, exec: Execution) -> Result<HankelSubMatrix> {
    let (p, m, d) = (src.p(), src.m(), src.d());
    let row_words = words_up_to(l, d)?;
    let col_words = words_up_to(k, d)?;
    let rows = HankelSubMatrix::rows_for(l, p, d)?;
    let cols = HankelSubMatrix::cols_for(k, m, d)?;
    let (bp, bm) = (p * d, m * d);

    let strips = exec.try_map(row_words.len(), |i| {
        let mut strip = DMatrix::zeros(bp, cols);
        for (j, vj) in col_words.iter().enumerate() {
            let word = vj.concat(&row_words[i]);
            for q in 1..=d {
                for q0 in 1..=d {
                    let s = src.markov(q0, &word, q)?;
                    strip
                        .view_mut(((q - 1) * p, j * bm + (q0 - 1) * m), (p, m))
                        .copy_from(&s);
                }
            }
        }
        Ok::<_, Error>(strip)
    })?;

    let mut h = DMatrix::zeros(rows, cols);
    for (i, strip) in strips.into_iter().enumerate() {
        h.view_mut((i * bp, 0), (bp, cols)).copy_from(&strip);
    }
    Ok(HankelSubMatrix { l, k, p, m, d, h })
}

/// Numerical rank: singular values above `tol_rel * sigma_max`.
pub fn hankel_rank(h: &HankelSubMatrix, tol_rel: f64) -> usize {
    linalg::numerical_rank(&h.h, tol_rel)
}
