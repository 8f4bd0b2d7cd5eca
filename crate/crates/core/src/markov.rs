//! Markov parameters `S(q0 v q)` of an input-output map, from a state-space
//! model, from a black-box response oracle, or from a table, plus combined
//! Markov parameters and the convolution representation built on them.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::system::{HybridWord, SwitchedLinearSystem};
use crate::words::{words_up_to, ModeWord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Model,
    Oracle,
    Empirical,
    Tabulated,
}

type Evaluator = dyn Fn(usize, &ModeWord, usize) -> Result<DMatrix<f64>> + Send + Sync;

/// Memoizing map from words `q0 v q` (length >= 2) to `p x m` matrices.
///
/// Lookups are cached per word behind a read-write lock, so a source can be
/// shared between threads and every word is computed at most once (modulo
/// two threads racing on the same miss, which compute identical values).
pub struct MarkovSource {
    p: usize,
    m: usize,
    d: usize,
    origin: Origin,
    eval: Option<Box<Evaluator>>,
    cache: RwLock<HashMap<Vec<usize>, DMatrix<f64>>>,
}

impl fmt::Debug for MarkovSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MarkovSource")
            .field("p", &self.p)
            .field("m", &self.m)
            .field("d", &self.d)
            .field("origin", &self.origin)
            .field("cached", &self.cache.read().map(|c| c.len()).unwrap_or(0))
            .finish()
    }
}

impl MarkovSource {
    /// Markov parameters `C_q A_v B_{q0}` of a model.
    pub fn from_model(sys: Arc<SwitchedLinearSystem>) -> Self {
        let (p, m, d) = (sys.p(), sys.m(), sys.d());
        let eval = move |q0: usize, v: &ModeWord, q: usize| markov_from_model(&sys, q0, v, q);
        Self::with_evaluator(p, m, d, Origin::Model, Box::new(eval))
    }

    /// Markov parameters probed from a black-box map `HybridWord -> R^p`.
    pub fn from_oracle<F>(p: usize, m: usize, d: usize, oracle: F) -> Self
    where
        F: Fn(&HybridWord) -> Result<DVector<f64>> + Send + Sync + 'static,
    {
        let eval = move |q0: usize, v: &ModeWord, q: usize| {
            let s = markov_from_oracle(&oracle, q0, v, q, m)?;
            if s.nrows() != p {
                return Err(Error::Oracle(format!("oracle returned {} outputs, expected {p}", s.nrows())));
            }
            Ok(s)
        };
        Self::with_evaluator(p, m, d, Origin::Oracle, Box::new(eval))
    }

    /// Oracle source backed by simulating `sys` from the zero state.
    pub fn from_simulator(sys: Arc<SwitchedLinearSystem>) -> Self {
        let (p, m, d) = (sys.p(), sys.m(), sys.d());
        Self::from_oracle(p, m, d, move |w| {
            sys.response(w)?
                .ok_or_else(|| Error::Oracle("empty probe word".into()))
        })
    }

    /// A finite table keyed by full words `q0 v q`. Lookups outside the
    /// table fail with [`Error::NotTabulated`].
    pub fn tabulated(
        p: usize,
        m: usize,
        d: usize,
        origin: Origin,
        entries: impl IntoIterator<Item = (Vec<usize>, DMatrix<f64>)>,
    ) -> Result<Self> {
        let mut cache = HashMap::new();
        for (word, s) in entries {
            if word.len() < 2 {
                return Err(Error::MarkovDomain(word.len()));
            }
            ModeWord::from_letters(word.clone()).validate(d)?;
            if s.shape() != (p, m) {
                return Err(Error::DimensionMismatch(format!(
                    "tabulated Markov parameter has shape {:?}, expected ({p}, {m})",
                    s.shape()
                )));
            }
            cache.insert(word, s);
        }
        Ok(MarkovSource { p, m, d, origin, eval: None, cache: RwLock::new(cache) })
    }

    fn with_evaluator(p: usize, m: usize, d: usize, origin: Origin, eval: Box<Evaluator>) -> Self {
        MarkovSource { p, m, d, origin, eval: Some(eval), cache: RwLock::new(HashMap::new()) }
    }

    pub fn p(&self) -> usize {
        self.p
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn origin(&self) -> Origin {
        self.origin
    }

    /// `S(q0 v q)`.
    pub fn markov(&self, q0: usize, v: &ModeWord, q: usize) -> Result<DMatrix<f64>> {
        let mut key = Vec::with_capacity(v.len() + 2);
        key.push(q0);
        key.extend_from_slice(v.letters());
        key.push(q);
        self.lookup(key, q0, v, q)
    }

    /// `S(w)` for a full word `w = q0 v q`. Words shorter than 2 are outside
    /// the domain.
    pub fn markov_word(&self, w: &[usize]) -> Result<DMatrix<f64>> {
        if w.len() < 2 {
            return Err(Error::MarkovDomain(w.len()));
        }
        let v = ModeWord::from_letters(w[1..w.len() - 1].to_vec());
        self.lookup(w.to_vec(), w[0], &v, w[w.len() - 1])
    }

    fn lookup(&self, key: Vec<usize>, q0: usize, v: &ModeWord, q: usize) -> Result<DMatrix<f64>> {
        ModeWord::from_letters(key.clone()).validate(self.d)?;
        if let Some(s) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(s.clone());
        }
        let eval = self
            .eval
            .as_ref()
            .ok_or_else(|| Error::NotTabulated(ModeWord::from_letters(key.clone()).to_string()))?;
        let s = eval(q0, v, q)?;
        self.cache.write().expect("cache lock").insert(key, s.clone());
        Ok(s)
    }

    /// Number of memoized words.
    pub fn cached_len(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    /// All entries `q0 v q` with `|v| <= depth`, ordered by `v`
    /// (enumeration order), then `q0`, then `q`.
    pub fn table(&self, depth: usize) -> Result<Vec<MarkovEntry>> {
        let mut out = Vec::new();
        for v in words_up_to(depth, self.d)? {
            for q0 in 1..=self.d {
                for q in 1..=self.d {
                    let s = self.markov(q0, &v, q)?;
                    out.push(MarkovEntry {
                        q0,
                        v: v.to_string(),
                        q,
                        s: crate::linalg::to_rows(&s),
                    });
                }
            }
        }
        Ok(out)
    }
}

/// One serialized Markov parameter.
#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct MarkovEntry {
    pub q0: usize,
    pub v: String,
    pub q: usize,
    pub s: Vec<Vec<f64>>,
}

/// `C_q A_v B_{q0}`.
pub fn markov_from_model(
    sys: &SwitchedLinearSystem,
    q0: usize,
    v: &ModeWord,
    q: usize,
) -> Result<DMatrix<f64>> {
    sys.check_mode(q0)?;
    sys.check_mode(q)?;
    let av = sys.matrix_product_along_word(v)?;
    Ok(sys.c(q) * av * sys.b(q0))
}

/// The probe `(q0, e_j)(σ_1, 0) ⋯ (σ_k, 0)(q, 0)` for `v = σ_1 ⋯ σ_k`;
/// `j` is 1-based.
pub fn probe_word(q0: usize, v: &ModeWord, q: usize, j: usize, m: usize) -> HybridWord {
    let mut w = HybridWord::with_capacity(m, v.len() + 2);
    let mut e = vec![0.0; m];
    e[j - 1] = 1.0;
    w.push(q0, &e);
    for &s in v.letters() {
        w.push_zero(s);
    }
    w.push_zero(q);
    w
}

/// Column `j` is the oracle's response to the probe word for `(q0, v, q, j)`.
pub fn markov_from_oracle<F>(oracle: &F, q0: usize, v: &ModeWord, q: usize, m: usize) -> Result<DMatrix<f64>>
where
    F: Fn(&HybridWord) -> Result<DVector<f64>> + ?Sized,
{
    let mut cols = Vec::with_capacity(m);
    for j in 1..=m {
        cols.push(oracle(&probe_word(q0, v, q, j, m))?);
    }
    let p = cols[0].len();
    if cols.iter().any(|c| c.len() != p) {
        return Err(Error::Oracle("oracle returned outputs of varying length".into()));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// The `pD x mD` block matrix whose block (q, q0) is `S(q0 v q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedMarkov {
    pub v: ModeWord,
    pub m: DMatrix<f64>,
}

pub fn combined_markov(src: &MarkovSource, v: &ModeWord) -> Result<CombinedMarkov> {
    let (p, m, d) = (src.p, src.m, src.d);
    let mut out = DMatrix::zeros(p * d, m * d);
    for q in 1..=d {
        for q0 in 1..=d {
            let s = src.markov(q0, v, q)?;
            out.view_mut(((q - 1) * p, (q0 - 1) * m), (p, m)).copy_from(&s);
        }
    }
    Ok(CombinedMarkov { v: v.clone(), m: out })
}

/// Convolution representation
/// `f(w) = Σ_{k=0}^{t-1} S(q_k q_{k+1} ⋯ q_{t-1} q_t) u_k`, `t = |w| - 1`.
/// The sum is empty (zero) for single-letter words.
pub fn gcr_evaluate(src: &MarkovSource, w: &HybridWord) -> Result<DVector<f64>> {
    if w.is_empty() {
        return Err(Error::InvalidWord("convolution representation needs a non-empty word".into()));
    }
    if w.m() != src.m {
        return Err(Error::DimensionMismatch(format!("input width {} but source has m={}", w.m(), src.m)));
    }
    let t = w.len() - 1;
    let modes = w.modes();
    let mut y = DVector::zeros(src.p);
    for k in 0..t {
        let s = src.markov_word(&modes[k..=t])?;
        let u = nalgebra::DVectorView::from_slice(w.input(k), src.m);
        y.gemv(1.0, &s, &u, 1.0);
    }
    Ok(y)
}

/// Max over words `q0 v q` with `|v| <= depth` of the largest absolute
/// entry difference.
pub fn markov_distance(a: &MarkovSource, b: &MarkovSource, depth: usize) -> Result<f64> {
    markov_distance_with(a, b, depth, Execution::default())
}

pub fn markov_distance_with(a: &MarkovSource, b: &MarkovSource, depth: usize, exec: Execution) -> Result<f64> {
    if (a.p, a.m, a.d) != (b.p, b.m, b.d) {
        return Err(Error::DimensionMismatch(format!(
            "sources have (p, m, D) = {:?} and {:?}",
            (a.p, a.m, a.d),
            (b.p, b.m, b.d)
        )));
    }
    let words = words_up_to(depth, a.d)?;
    let d = a.d;
    let per_word = exec.try_map(words.len(), |i| {
        let mut worst = 0.0f64;
        for q0 in 1..=d {
            for q in 1..=d {
                let diff = a.markov(q0, &words[i], q)? - b.markov(q0, &words[i], q)?;
                worst = worst.max(crate::linalg::max_abs(&diff));
            }
        }
        Ok::<f64, Error>(worst)
    })?;
    Ok(per_word.into_iter().fold(0.0, f64::max))
}

/// Largest absolute Markov entry over `|v| <= depth`.
pub fn markov_scale(src: &MarkovSource, depth: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for v in words_up_to(depth, src.d)? {
        for q0 in 1..=src.d {
            for q in 1..=src.d {
                worst = worst.max(crate::linalg::max_abs(&src.markov(q0, &v, q)?));
            }
        }
    }
    Ok(worst)
}

/// Table keyed by full word, for building tabulated sources.
pub type MarkovTable = BTreeMap<Vec<usize>, DMatrix<f64>>;
