//! Finite persistently exciting inputs.
//!
//! A single input `w = s_1 s_1⁻¹ s_2 s_2⁻¹ ⋯ s_d` is built from the probe
//! words `s_k = (q0, e_j)(σ_1, 0) ⋯ (σ_k, 0)(q, 0)`, where each `s_k⁻¹`
//! returns the system to the zero state. The response of the system at the
//! last letter of each `s_k` then equals the response to `s_k` alone, i.e.
//! column `j` of `S(q0 v q)`.
//!
//! The resets come either from a model ([`find_zeroing_input`]) or from a
//! letterwise inverse map ([`InverseMap`]) for maps that are reversible with
//! respect to it.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::markov::{probe_word, MarkovSource, Origin};
use crate::system::{HybridWord, OutputSeries, SwitchedLinearSystem};
use crate::words::{count_words_up_to, words_up_to, ModeWord};

/// Default tolerance on the state norm after a reset.
pub const DEFAULT_RESET_TOL: f64 = 1e-9;

/// Identifies one probe: column `j` (1-based) of `S(q0 v q)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProbeKey {
    pub q0: usize,
    pub v: ModeWord,
    pub q: usize,
    pub j: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeWord {
    pub key: ProbeKey,
    pub word: HybridWord,
}

/// All probes for `|v_i|` with `i <= N(2 n_bound - 1)`: ordered by `v`, then
/// `q0`, `q`, `j`.
pub fn enumerate_probe_set(n_bound: usize, d: usize, m: usize) -> Result<Vec<ProbeWord>> {
    if n_bound == 0 {
        return Err(Error::Config("n_bound must be at least 1".into()));
    }
    let words = words_up_to(2 * n_bound - 1, d)?;
    let mut out = Vec::with_capacity(words.len() * d * d * m);
    for v in words {
        for q0 in 1..=d {
            for q in 1..=d {
                for j in 1..=m {
                    out.push(ProbeWord {
                        key: ProbeKey { q0, v: v.clone(), q, j },
                        word: probe_word(q0, &v, q, j, m),
                    });
                }
            }
        }
    }
    Ok(out)
}

/// A single input word together with where each probe response is read.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistentInput {
    pub w: HybridWord,
    /// Probe -> time index `t` (0-based) whose output `y_t`, the response
    /// to the prefix of length `t + 1`, equals the probe response.
    pub probe_index: BTreeMap<ProbeKey, usize>,
    pub n_bound: usize,
    /// Number of modes the probes range over.
    pub d: usize,
    /// State norms left after each model-based reset (empty for map-based
    /// inputs).
    pub reset_residuals: Vec<f64>,
}

impl PersistentInput {
    /// Sum of reset residuals; extraction errors are bounded by this times
    /// the size of the output and state-transition maps.
    pub fn accumulated_residual(&self) -> f64 {
        self.reset_residuals.iter().sum()
    }

    pub fn sidecar(&self) -> ProbeIndexFile {
        ProbeIndexFile {
            n_bound: self.n_bound,
            d: self.d,
            m: self.w.m(),
            len: self.w.len(),
            accumulated_reset_residual: self.accumulated_residual(),
            probes: self
                .probe_index
                .iter()
                .map(|(k, &t)| ProbeIndexEntry { q0: k.q0, v: k.v.to_string(), q: k.q, j: k.j, t })
                .collect(),
        }
    }

    /// Writes the word as hybrid CSV and the probe index as JSON.
    pub fn save(&self, csv_path: &Path, index_path: &Path) -> Result<()> {
        crate::io::save_hybrid_csv(&self.w, csv_path)?;
        std::fs::write(index_path, serde_json::to_string_pretty(&self.sidecar())? + "\n")?;
        Ok(())
    }

    pub fn load(csv_path: &Path, index_path: &Path) -> Result<Self> {
        let w = crate::io::load_hybrid_csv(csv_path)?;
        let file: ProbeIndexFile = serde_json::from_str(&std::fs::read_to_string(index_path)?)?;
        Self::from_parts(w, file)
    }

    pub fn from_parts(w: HybridWord, file: ProbeIndexFile) -> Result<Self> {
        if file.m != w.m() || file.len != w.len() {
            return Err(Error::IncompleteData(format!(
                "probe index describes a word of width {} and length {}, got {} and {}",
                file.m,
                file.len,
                w.m(),
                w.len()
            )));
        }
        let mut probe_index = BTreeMap::new();
        for e in file.probes {
            if e.t >= w.len() {
                return Err(Error::IncompleteData(format!("probe position {} past the word end", e.t)));
            }
            probe_index.insert(ProbeKey { q0: e.q0, v: e.v.parse()?, q: e.q, j: e.j }, e.t);
        }
        Ok(PersistentInput { w, probe_index, n_bound: file.n_bound, d: file.d, reset_residuals: Vec::new() })
    }
}

/// JSON sidecar for a persistent input.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProbeIndexFile {
    pub n_bound: usize,
    #[serde(rename = "D")]
    pub d: usize,
    pub m: usize,
    pub len: usize,
    pub accumulated_reset_residual: f64,
    pub probes: Vec<ProbeIndexEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProbeIndexEntry {
    pub q0: usize,
    pub v: String,
    pub q: usize,
    pub j: usize,
    pub t: usize,
}

/// Searches switching words in enumeration order (length 1, 2, ...,
/// `max_len`) and, for each, the least-squares input that steers `x` toward
/// zero; returns the first word whose simulated terminal state has norm
/// `<= tol`.
pub fn find_zeroing_input(
    sys: &SwitchedLinearSystem,
    x: &DVector<f64>,
    max_len: usize,
    tol: f64,
) -> Result<HybridWord> {
    if x.len() != sys.n() {
        return Err(Error::DimensionMismatch(format!("state of length {} for n={}", x.len(), sys.n())));
    }
    if x.norm() <= tol {
        return Ok(HybridWord::new(sys.m()));
    }
    let (n, m, d) = (sys.n(), sys.m(), sys.d());
    let mut best = f64::INFINITY;
    for len in 1..=max_len {
        let mut letters = vec![1usize; len];
        loop {
            // Free response A_v x and input map Γ with column block k equal to
            // A_{σ_len} ⋯ A_{σ_{k+2}} B_{σ_{k+1}}.
            let mut free = x.clone();
            let mut gamma = DMatrix::zeros(n, len * m);
            for (k, &q) in letters.iter().enumerate() {
                free = sys.a(q) * free;
                if k > 0 {
                    let prev = gamma.columns(0, k * m).into_owned();
                    gamma.columns_mut(0, k * m).copy_from(&(sys.a(q) * prev));
                }
                gamma.columns_mut(k * m, m).copy_from(sys.b(q));
            }
            let u = -linalg::pseudoinverse(&gamma, 1e-12) * &free;
            let word = HybridWord::from_parts(m, letters.clone(), u.as_slice().to_vec())?;
            let residual = sys.simulate(&word, x)?.final_state().norm();
            if residual <= tol {
                return Ok(word);
            }
            best = best.min(residual);
            if !next_letters(&mut letters, d) {
                break;
            }
        }
    }
    Err(Error::NoZeroingInputFound { max_len, tol, best })
}

// Advances to the next word of the same length; false after the last one.
fn next_letters(letters: &mut [usize], d: usize) -> bool {
    for pos in (0..letters.len()).rev() {
        if letters[pos] < d {
            letters[pos] += 1;
            return true;
        }
        letters[pos] = 1;
    }
    false
}

/// Default search length for resets: `2 n D`.
pub fn default_max_len(sys: &SwitchedLinearSystem) -> usize {
    2 * sys.n() * sys.d()
}

/// Model-based construction; each reset is a zeroing input computed from the
/// state actually reached.
pub fn build_pe_input_model_based(
    sys: &SwitchedLinearSystem,
    n_bound: usize,
    max_len: usize,
    tol: f64,
) -> Result<PersistentInput> {
    let probes = enumerate_probe_set(n_bound, sys.d(), sys.m())?;
    let mut w = HybridWord::with_capacity(sys.m(), probes.len() * 4);
    let mut probe_index = BTreeMap::new();
    let mut residuals = Vec::with_capacity(probes.len());
    let mut x = DVector::zeros(sys.n());
    let last = probes.len() - 1;
    for (k, probe) in probes.into_iter().enumerate() {
        w.extend(&probe.word);
        probe_index.insert(probe.key, w.len() - 1);
        x = sys.simulate(&probe.word, &x)?.final_state();
        if k == last {
            break;
        }
        let reset = find_zeroing_input(sys, &x, max_len, tol)?;
        x = sys.simulate(&reset, &x)?.final_state();
        residuals.push(x.norm());
        w.extend(&reset);
    }
    Ok(PersistentInput { w, probe_index, n_bound, d: sys.d(), reset_residuals: residuals })
}

type LetterMap = dyn Fn(usize, &[f64]) -> (usize, Vec<f64>) + Send + Sync;

/// A letterwise map `(q, u) -> (q', u')` meant to undo the letter's effect.
pub struct InverseMap {
    f: Box<LetterMap>,
}

impl std::fmt::Debug for InverseMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("InverseMap")
    }
}

impl InverseMap {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(usize, &[f64]) -> (usize, Vec<f64>) + Send + Sync + 'static,
    {
        InverseMap { f: Box::new(f) }
    }

    /// Modes `q` and `q + k` undo each other with negated input:
    /// `(q, u) -> (q + k, -u)` for `q <= k` and `(q, u) -> (q - k, -u)`
    /// otherwise.
    pub fn paired_modes(k: usize) -> Self {
        InverseMap::new(move |q, u| {
            let q2 = if q <= k { q + k } else { q - k };
            (q2, u.iter().map(|x| -x).collect())
        })
    }

    pub fn apply(&self, q: usize, u: &[f64]) -> (usize, Vec<f64>) {
        (self.f)(q, u)
    }
}

/// Reverses `s` and maps every letter through `inv`.
pub fn elementwise_inverse_word(s: &HybridWord, inv: &InverseMap) -> HybridWord {
    let mut out = HybridWord::with_capacity(s.m(), s.len());
    for t in (0..s.len()).rev() {
        let (q, u) = inv.apply(s.mode(t), s.input(t));
        out.push(q, &u);
    }
    out
}

/// Model-free construction with `s⁻¹ = elementwise_inverse_word(s)`.
pub fn build_pe_input_map_based(inv: &InverseMap, n_bound: usize, d: usize, m: usize) -> Result<PersistentInput> {
    let probes = enumerate_probe_set(n_bound, d, m)?;
    let mut w = HybridWord::with_capacity(m, probes.len() * 8);
    let mut probe_index = BTreeMap::new();
    let last = probes.len() - 1;
    for (k, probe) in probes.into_iter().enumerate() {
        w.extend(&probe.word);
        probe_index.insert(probe.key, w.len() - 1);
        if k < last {
            w.extend(&elementwise_inverse_word(&probe.word, inv));
        }
    }
    Ok(PersistentInput { w, probe_index, n_bound, d, reset_residuals: Vec::new() })
}

/// Reads every `S(q0 v q)` with `|v| <= depth` off the response to `pe.w`.
pub fn extract_markov_from_response(pe: &PersistentInput, outputs: &OutputSeries, depth: usize) -> Result<MarkovSource> {
    if outputs.len() != pe.w.len() {
        return Err(Error::IncompleteData(format!(
            "{} outputs for an input of length {}",
            outputs.len(),
            pe.w.len()
        )));
    }
    if depth + 1 > 2 * pe.n_bound {
        return Err(Error::IncompleteData(format!(
            "depth {depth} exceeds 2*n_bound-1 = {}",
            2 * pe.n_bound - 1
        )));
    }
    let (p, m, d) = (outputs.p(), pe.w.m(), pe.d);
    let expected = count_words_up_to(depth, d)? * d * d * m;
    let mut table: BTreeMap<Vec<usize>, DMatrix<f64>> = BTreeMap::new();
    let mut filled = 0usize;
    for v in words_up_to(depth, d)? {
        for q0 in 1..=d {
            for q in 1..=d {
                let mut s = DMatrix::zeros(p, m);
                for j in 1..=m {
                    let key = ProbeKey { q0, v: v.clone(), q, j };
                    let t = *pe.probe_index.get(&key).ok_or_else(|| {
                        Error::IncompleteData(format!("no probe for q0={q0}, v={v}, q={q}, j={j}"))
                    })?;
                    s.set_column(j - 1, &DVector::from_column_slice(outputs.get(t)));
                    filled += 1;
                }
                let mut word = vec![q0];
                word.extend_from_slice(v.letters());
                word.push(q);
                table.insert(word, s);
            }
        }
    }
    debug_assert_eq!(filled, expected);
    MarkovSource::tabulated(p, m, d, Origin::Tabulated, table)
}
