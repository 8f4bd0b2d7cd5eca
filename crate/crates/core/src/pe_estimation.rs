//! Asymptotic Markov-parameter estimation from one long trajectory driven by
//! a random input satisfying the persistence-of-excitation limits.
//!
//! For a word `rvq` the estimator is
//!
//! ```text
//! S_N(rvq) = ( (1/N) Σ_t y_{t+|v|+1} u_tᵀ χ(t, rvq) ) R⁻¹ / π_{rvq}
//! ```
//!
//! where `χ(t, s) = 1` iff the modes starting at time `t` spell `s`. All
//! long-horizon sums are split into fixed chunks of [`CHUNK_LEN`] samples and
//! reduced in chunk order, so results do not depend on the thread count.
//!
//! [`CHUNK_LEN`]: crate::exec::CHUNK_LEN

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::hankel::build_hankel_with;
use crate::linalg::{self, max_abs, to_rows};
use crate::markov::{MarkovSource, Origin};
use crate::realization::{realize_with_rank, RealizationResult};
use crate::system::{HybridWord, OutputSeries, SwitchedLinearSystem};
use crate::words::{words_up_to, ModeWord};

/// Distribution of the i.i.d. switching signal.
#[derive(Debug, Clone, PartialEq)]
pub enum SwitchingLaw {
    Uniform,
    /// Probability of each mode `1..=D`, strictly positive, summing to 1.
    Probabilities(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeSignalConfig {
    pub d: usize,
    pub m: usize,
    /// Input covariance (symmetric positive definite, `m x m`).
    pub r: DMatrix<f64>,
    pub switching: SwitchingLaw,
    pub seed: u64,
    pub horizon: usize,
}

impl PeSignalConfig {
    /// White Gaussian input with covariance `I_m` and uniform switching.
    pub fn white(d: usize, m: usize, seed: u64, horizon: usize) -> Self {
        PeSignalConfig { d, m, r: DMatrix::identity(m, m), switching: SwitchingLaw::Uniform, seed, horizon }
    }

    pub fn mode_probabilities(&self) -> Vec<f64> {
        match &self.switching {
            SwitchingLaw::Uniform => vec![1.0 / self.d as f64; self.d],
            SwitchingLaw::Probabilities(p) => p.clone(),
        }
    }

    /// Checks the configuration and returns the Cholesky factor of `R`.
    pub fn validate(&self) -> Result<DMatrix<f64>> {
        if self.d == 0 || self.m == 0 {
            return Err(Error::Config("D and m must be positive".into()));
        }
        if self.r.shape() != (self.m, self.m) {
            return Err(Error::Config(format!("R is {:?}, expected {}x{}", self.r.shape(), self.m, self.m)));
        }
        let asym = max_abs(&(&self.r - self.r.transpose()));
        if asym > 1e-12 * max_abs(&self.r).max(1.0) {
            return Err(Error::Config("R is not symmetric".into()));
        }
        let chol = self
            .r
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Config("R is not positive definite".into()))?;
        let min_eig = self.r.clone().symmetric_eigen().eigenvalues.min();
        if min_eig <= 0.0 {
            return Err(Error::Config("R is not positive definite".into()));
        }
        if let SwitchingLaw::Probabilities(p) = &self.switching {
            if p.len() != self.d {
                return Err(Error::Config(format!("{} mode probabilities for D={}", p.len(), self.d)));
            }
            if p.iter().any(|&x| x.is_nan() || x <= 0.0) {
                return Err(Error::Config("mode probabilities must be strictly positive".into()));
            }
            if (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::Config("mode probabilities must sum to 1".into()));
            }
        }
        Ok(chol.l())
    }
}

/// Length-`horizon` word with i.i.d. modes from the switching law and i.i.d.
/// `N(0, R)` inputs; reproducible from the seed.
pub fn generate_pe_input(cfg: &PeSignalConfig) -> Result<HybridWord> {
    let l = cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cumulative: Vec<f64> = cfg
        .mode_probabilities()
        .iter()
        .scan(0.0, |acc, &p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let mut w = HybridWord::with_capacity(cfg.m, cfg.horizon);
    let mut z = DVector::zeros(cfg.m);
    let mut u = DVector::zeros(cfg.m);
    for _ in 0..cfg.horizon {
        let q = match cfg.switching {
            SwitchingLaw::Uniform => rng.random_range(1..=cfg.d),
            SwitchingLaw::Probabilities(_) => {
                let x: f64 = rng.random();
                cumulative.iter().position(|&c| x < c).unwrap_or(cfg.d - 1) + 1
            }
        };
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        u.gemv(1.0, &l, &z, 0.0);
        w.push(q, u.as_slice());
    }
    Ok(w)
}

/// Fraction of start positions `t` (out of `N - |v| + 1`) where `v` occurs.
pub fn empirical_mode_freq(w: &HybridWord, v: &ModeWord) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::InvalidWord("frequency of the empty word is not defined".into()));
    }
    let n = w.len();
    if v.len() > n {
        return Err(Error::ZeroSamples(format!("word {v} longer than the horizon {n}")));
    }
    let modes = w.modes();
    let starts = n - v.len() + 1;
    let hits = modes.windows(v.len()).filter(|win| *win == v.letters()).count();
    Ok(hits as f64 / starts as f64)
}

// 0-based code of modes[t..t+len] in base D; this is also the position of
// the word among the words of that length in enumeration order.
fn window_code(modes: &[usize], t: usize, len: usize, d: usize) -> usize {
    modes[t..t + len].iter().fold(0, |acc, &q| acc * d + (q - 1))
}

fn decode(mut code: usize, len: usize, d: usize) -> Vec<usize> {
    let mut letters = vec![0; len];
    for slot in letters.iter_mut().rev() {
        *slot = code % d + 1;
        code /= d;
    }
    letters
}

fn add_into(mut a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    if a.is_empty() {
        return b;
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

// acc[off..off + rows*cols] += x yᵀ, column-major.
fn add_outer(acc: &mut [f64], x: &[f64], y: &[f64]) {
    let rows = x.len();
    for (c, &yc) in y.iter().enumerate() {
        let col = &mut acc[c * rows..(c + 1) * rows];
        for (a, &xr) in col.iter_mut().zip(x) {
            *a += xr * yc;
        }
    }
}

fn mat_from(slice: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, slice)
}

/// `(1/N) Σ_t u_t u_tᵀ`.
pub fn empirical_input_covariance(w: &HybridWord, exec: Execution) -> DMatrix<f64> {
    let m = w.m();
    let n = w.len();
    if n == 0 {
        return DMatrix::zeros(m, m);
    }
    let sum = exec.chunked_reduce(
        n,
        Vec::new(),
        |range| {
            let mut acc = vec![0.0; m * m];
            for t in range {
                add_outer(&mut acc, w.input(t), w.input(t));
            }
            acc
        },
        add_into,
    );
    mat_from(&sum, m, m) / n as f64
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct WordStat {
    pub word: String,
    pub pi_hat: f64,
    /// Largest normalized cross-covariance residual over the lags checked.
    pub cross_residual: f64,
    /// `max |R̂_v - R̂| / max|R̂|` with `R̂_v = (1/N) Σ u_t u_tᵀ χ(t,v) / π̂_v`.
    pub r_deviation: f64,
}

/// Empirical check of the three persistence-of-excitation limits at the
/// available horizon. Residuals are normalized by `max|R̂|`.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct PeConditionReport {
    pub horizon: usize,
    pub max_word_len: usize,
    pub max_lag: usize,
    pub tol: f64,
    pub max_cross_residual: f64,
    pub min_pi_hat: f64,
    pub min_pi_word: String,
    pub r_hat: Vec<Vec<f64>>,
    pub r_hat_min_eigenvalue: f64,
    pub r_spread: f64,
    pub words: Vec<WordStat>,
    pub passed: bool,
}

/// Evaluates, for every `v` with `1 <= |v| <= max_word_len` and every lag
/// `j = 1..=max_lag`,
///
/// ```text
/// (1/N) Σ_t u_{t+j} u_tᵀ χ(t, v),   (1/N) Σ_{t>=j} u_{t-j} u_tᵀ χ(t-j, v),
/// (1/N) Σ_t u_t u_tᵀ χ(t, v)  (compared with π̂_v R̂)
/// ```
pub fn check_pe_conditions(
    w: &HybridWord,
    d: usize,
    max_word_len: usize,
    max_lag: usize,
    tol: f64,
    exec: Execution,
) -> Result<PeConditionReport> {
    let (n, m) = (w.len(), w.m());
    if n == 0 {
        return Err(Error::ZeroSamples("empty input word".into()));
    }
    w.validate_modes(d)?;
    let modes = w.modes();
    let mm = m * m;
    // Layout per word: [count | uu (mm) | lag-forward (max_lag * mm) | lag-backward (max_lag * mm)]
    let per_word = 1 + mm * (1 + 2 * max_lag);
    let mut offsets = Vec::with_capacity(max_word_len + 1);
    let mut total_words = 0usize;
    for len in 1..=max_word_len {
        offsets.push(total_words);
        total_words += d.pow(len as u32);
    }
    let size = total_words * per_word;

    let sums = exec.chunked_reduce(
        n,
        Vec::new(),
        |range| {
            let mut acc = vec![0.0; size];
            for t in range {
                for len in 1..=max_word_len {
                    if t + len > n {
                        break;
                    }
                    let word = offsets[len - 1] + window_code(modes, t, len, d);
                    let base = word * per_word;
                    acc[base] += 1.0;
                    add_outer(&mut acc[base + 1..base + 1 + mm], w.input(t), w.input(t));
                    for j in 1..=max_lag {
                        if t + j >= n {
                            break;
                        }
                        // forward: u_{t+j} u_tᵀ with the word starting at t
                        let f = base + 1 + mm * j;
                        add_outer(&mut acc[f..f + mm], w.input(t + j), w.input(t));
                        // backward: u_{s-j} u_sᵀ with s = t + j, word starting at s - j = t
                        let b = base + 1 + mm * (max_lag + j);
                        add_outer(&mut acc[b..b + mm], w.input(t), w.input(t + j));
                    }
                }
            }
            acc
        },
        add_into,
    );
    let sums = if sums.is_empty() { vec![0.0; size] } else { sums };

    let r_hat = empirical_input_covariance(w, exec);
    let r_scale = max_abs(&r_hat);
    let norm = if r_scale > 0.0 { r_scale } else { 1.0 };
    let nf = n as f64;

    let mut stats = Vec::with_capacity(total_words);
    let mut max_cross = 0.0f64;
    let mut min_pi = f64::INFINITY;
    let mut min_pi_word = String::new();
    let mut spread = 0.0f64;
    for len in 1..=max_word_len {
        let starts = (n + 1).saturating_sub(len);
        for code in 0..d.pow(len as u32) {
            let base = (offsets[len - 1] + code) * per_word;
            let word = ModeWord::from_letters(decode(code, len, d)).to_string();
            let pi_hat = if starts > 0 { sums[base] / starts as f64 } else { 0.0 };
            let mut cross = 0.0f64;
            for k in 1..=2 * max_lag {
                let s = base + 1 + mm * k;
                cross = cross.max(sums[s..s + mm].iter().fold(0.0f64, |a, &x| a.max(x.abs())) / nf);
            }
            let cross = cross / norm;
            let r_dev = if pi_hat > 0.0 {
                let rv = mat_from(&sums[base + 1..base + 1 + mm], m, m) / (nf * pi_hat);
                max_abs(&(rv - &r_hat)) / norm
            } else {
                f64::INFINITY
            };
            max_cross = max_cross.max(cross);
            spread = spread.max(r_dev);
            if pi_hat < min_pi {
                min_pi = pi_hat;
                min_pi_word = word.clone();
            }
            stats.push(WordStat { word, pi_hat, cross_residual: cross, r_deviation: r_dev });
        }
    }
    let min_eig = r_hat.clone().symmetric_eigen().eigenvalues.min();
    let passed = r_scale > 0.0 && min_eig > 0.0 && min_pi > 0.0 && max_cross <= tol && spread <= tol;
    Ok(PeConditionReport {
        horizon: n,
        max_word_len,
        max_lag,
        tol,
        max_cross_residual: max_cross,
        min_pi_hat: if min_pi.is_finite() { min_pi } else { 0.0 },
        min_pi_word,
        r_hat: to_rows(&r_hat),
        r_hat_min_eigenvalue: min_eig,
        r_spread: spread,
        words: stats,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalEstimate {
    pub r: usize,
    pub v: ModeWord,
    pub q: usize,
    pub s_hat: DMatrix<f64>,
    /// Occurrences of `rvq` with the output `y_{t+|v|+1}` available.
    pub count: usize,
    pub pi_hat: f64,
    pub horizon: usize,
    /// Set when `rvq` never occurs; `s_hat` is then zero.
    pub zero_count: bool,
}

fn check_series(w: &HybridWord, outputs: &OutputSeries) -> Result<()> {
    if outputs.len() != w.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} outputs for an input of length {}",
            outputs.len(),
            w.len()
        )));
    }
    Ok(())
}

/// Estimate of `S(rvq)` for a single word with given `R` and `π`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_markov(
    w: &HybridWord,
    outputs: &OutputSeries,
    r: usize,
    v: &ModeWord,
    q: usize,
    cov: &DMatrix<f64>,
    pi: f64,
) -> Result<EmpiricalEstimate> {
    check_series(w, outputs)?;
    if pi.is_nan() || pi <= 0.0 {
        return Err(Error::NotIdentifiable(format!("π = {pi} for word {r}{v}{q}")));
    }
    let r_inv = cov
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotIdentifiable("R is singular".into()))?;
    let (n, m, p) = (w.len(), w.m(), outputs.p());
    let mut word = vec![r];
    word.extend_from_slice(v.letters());
    word.push(q);
    let len = word.len();
    let modes = w.modes();
    let mut acc = vec![0.0; p * m];
    let mut count = 0usize;
    for t in 0..n.saturating_sub(len - 1) {
        if modes[t..t + len] == word[..] {
            add_outer(&mut acc, outputs.get(t + len - 1), w.input(t));
            count += 1;
        }
    }
    let starts = (n + 1).saturating_sub(len);
    let pi_hat = if starts > 0 { count as f64 / starts as f64 } else { 0.0 };
    let s_hat = mat_from(&acc, p, m) / n.max(1) as f64 * r_inv / pi;
    Ok(EmpiricalEstimate { r, v: v.clone(), q, s_hat, count, pi_hat, horizon: n, zero_count: count == 0 })
}

/// How `π` and `R` enter the estimator.
#[derive(Debug, Clone, PartialEq)]
pub enum PlugIn {
    /// Known mode probabilities (`π_word` is their product) and covariance.
    Theoretical { mode_probs: Vec<f64>, r: DMatrix<f64> },
    /// Empirical frequencies `π̂` and covariance `R̂`.
    Empirical,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Checkpoint {
    #[serde(rename = "N")]
    pub horizon: usize,
    /// Max-abs error of all estimates against the reference (if any).
    pub max_abs_error: Option<f64>,
    /// `max_abs_error / max |reference|`.
    pub max_rel_error: Option<f64>,
    /// `max |π̂ - π|` over the words used, when `π` is known.
    pub max_freq_error: Option<f64>,
    /// `max |R̂ - R|`, when `R` is known.
    pub cov_error: Option<f64>,
    /// Largest lag-1..5 input cross-covariance `|(1/N) Σ u_{t+j} u_tᵀ|`.
    pub cross_residual: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ConvergenceReport {
    pub depth: usize,
    pub checkpoints: Vec<Checkpoint>,
}

impl ConvergenceReport {
    /// Error-vs-N table for plotting.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["N", "max_abs_error", "max_rel_error", "max_freq_error", "cov_error", "cross_residual"])?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for c in &self.checkpoints {
            wtr.write_record([
                c.horizon.to_string(),
                opt(c.max_abs_error),
                opt(c.max_rel_error),
                opt(c.max_freq_error),
                opt(c.cov_error),
                c.cross_residual.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Geometric checkpoints `N, N/4, N/16, ...` down to `min`, ascending.
pub fn geometric_checkpoints(horizon: usize, min: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut n = horizon;
    while n >= min.max(1) && n > 0 {
        out.push(n);
        n /= 4;
    }
    out.reverse();
    out
}

#[derive(Debug, Clone)]
pub struct EstimateOptions {
    pub depth: usize,
    pub plug_in: PlugIn,
    /// Horizons at which errors are recorded (must be increasing and
    /// `<= N`). Only used when a reference source is supplied.
    pub checkpoints: Vec<usize>,
    pub exec: Execution,
}

impl EstimateOptions {
    pub fn new(depth: usize) -> Self {
        EstimateOptions { depth, plug_in: PlugIn::Empirical, checkpoints: Vec::new(), exec: Execution::default() }
    }
}

/// All estimates `S_N(rvq)` with `|v| <= depth`.
#[derive(Debug)]
pub struct MarkovEstimates {
    pub source: MarkovSource,
    pub estimates: Vec<EmpiricalEstimate>,
    pub r_used: DMatrix<f64>,
    pub horizon: usize,
}

// Sums Σ y_{t+k+1} u_tᵀ χ(t, word) and occurrence counts for every word
// `rvq` with |v| = k <= depth, in one pass over t.
struct WordSums {
    d: usize,
    p: usize,
    m: usize,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl WordSums {
    fn per_word(&self) -> usize {
        1 + self.p * self.m
    }

    fn collect(w: &HybridWord, outputs: &OutputSeries, d: usize, depth: usize, exec: Execution) -> Self {
        let (n, m, p) = (w.len(), w.m(), outputs.p());
        let per_word = 1 + p * m;
        let mut offsets = Vec::with_capacity(depth + 1);
        let mut total = 0usize;
        for k in 0..=depth {
            offsets.push(total);
            total += d.pow(k as u32 + 2);
        }
        let size = total * per_word;
        let modes = w.modes();
        let values = exec.chunked_reduce(
            n,
            Vec::new(),
            |range| {
                let mut acc = vec![0.0; size];
                for t in range {
                    let mut code = modes[t] - 1;
                    for (k, &offset) in offsets.iter().enumerate() {
                        let end = t + k + 1;
                        if end >= n {
                            break;
                        }
                        code = code * d + (modes[end] - 1);
                        let base = (offset + code) * per_word;
                        acc[base] += 1.0;
                        add_outer(&mut acc[base + 1..base + per_word], outputs.get(end), w.input(t));
                    }
                }
                acc
            },
            add_into,
        );
        let values = if values.is_empty() { vec![0.0; size] } else { values };
        WordSums { d, p, m, offsets, values }
    }

    fn get(&self, k: usize, code: usize) -> (f64, DMatrix<f64>) {
        let base = (self.offsets[k] + code) * self.per_word();
        (self.values[base], mat_from(&self.values[base + 1..base + self.per_word()], self.p, self.m))
    }

    fn code_of(&self, word: &[usize]) -> usize {
        word.iter().fold(0, |acc, &q| acc * self.d + (q - 1))
    }
}

fn estimate_table(
    w: &HybridWord,
    outputs: &OutputSeries,
    d: usize,
    depth: usize,
    plug_in: &PlugIn,
    exec: Execution,
) -> Result<MarkovEstimates> {
    check_series(w, outputs)?;
    w.validate_modes(d)?;
    let n = w.len();
    if n == 0 {
        return Err(Error::ZeroSamples("empty trajectory".into()));
    }
    let (cov, probs) = match plug_in {
        PlugIn::Theoretical { mode_probs, r } => {
            if mode_probs.len() != d {
                return Err(Error::Config(format!("{} mode probabilities for D={d}", mode_probs.len())));
            }
            (r.clone(), Some(mode_probs.clone()))
        }
        PlugIn::Empirical => (empirical_input_covariance(w, exec), None),
    };
    if cov.shape() != (w.m(), w.m()) {
        return Err(Error::Config(format!("R is {:?}, expected {}x{}", cov.shape(), w.m(), w.m())));
    }
    let r_inv = cov
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NotIdentifiable("input covariance is singular".into()))?;
    let sums = WordSums::collect(w, outputs, d, depth, exec);
    let nf = n as f64;

    let mut estimates = Vec::new();
    let mut table = Vec::new();
    for v in words_up_to(depth, d)? {
        let k = v.len();
        for r in 1..=d {
            for q in 1..=d {
                let mut word = vec![r];
                word.extend_from_slice(v.letters());
                word.push(q);
                let (count, acc) = sums.get(k, sums.code_of(&word));
                let starts = (n + 1).saturating_sub(word.len());
                let pi_hat = if starts > 0 { count / starts as f64 } else { 0.0 };
                if count == 0.0 {
                    return Err(Error::NotIdentifiable(format!(
                        "word {} never occurs in the switching signal",
                        ModeWord::from_letters(word)
                    )));
                }
                let pi = match &probs {
                    Some(p) => word.iter().map(|&q| p[q - 1]).product(),
                    None => pi_hat,
                };
                let s_hat = acc / nf * &r_inv / pi;
                table.push((word, s_hat.clone()));
                estimates.push(EmpiricalEstimate {
                    r,
                    v: v.clone(),
                    q,
                    s_hat,
                    count: count as usize,
                    pi_hat,
                    horizon: n,
                    zero_count: false,
                });
            }
        }
    }
    let source = MarkovSource::tabulated(outputs.p(), w.m(), d, Origin::Empirical, table)?;
    Ok(MarkovEstimates { source, estimates, r_used: cov, horizon: n })
}

/// Estimates every `M_N(v)` with `|v| <= depth`; when `reference` is given,
/// errors are recorded at each checkpoint horizon (estimating from the
/// corresponding prefix of the data).
pub fn estimate_all_markov(
    w: &HybridWord,
    outputs: &OutputSeries,
    d: usize,
    opts: &EstimateOptions,
    reference: Option<&MarkovSource>,
) -> Result<(MarkovEstimates, ConvergenceReport)> {
    let full = estimate_table(w, outputs, d, opts.depth, &opts.plug_in, opts.exec)?;
    let mut checkpoints = Vec::new();
    if let Some(reference) = reference {
        let mut last = 0;
        for &cp in &opts.checkpoints {
            if cp <= last || cp > w.len() {
                return Err(Error::Config(format!(
                    "checkpoints must increase and not exceed the horizon {} (got {cp})",
                    w.len()
                )));
            }
            last = cp;
            let est = if cp == w.len() {
                None
            } else {
                Some(estimate_table(&w.prefix(cp), &outputs.prefix(cp), d, opts.depth, &opts.plug_in, opts.exec)?)
            };
            let est = est.as_ref().unwrap_or(&full);
            checkpoints.push(checkpoint(&w.prefix(cp), est, reference, &opts.plug_in, opts.depth, opts.exec)?);
        }
    }
    Ok((full, ConvergenceReport { depth: opts.depth, checkpoints }))
}

fn checkpoint(
    w: &HybridWord,
    est: &MarkovEstimates,
    reference: &MarkovSource,
    plug_in: &PlugIn,
    depth: usize,
    exec: Execution,
) -> Result<Checkpoint> {
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    let mut freq_err: Option<f64> = None;
    for e in &est.estimates {
        let truth = reference.markov(e.r, &e.v, e.q)?;
        err = err.max(max_abs(&(&e.s_hat - &truth)));
        scale = scale.max(max_abs(&truth));
        if let PlugIn::Theoretical { mode_probs, .. } = plug_in {
            let pi: f64 = std::iter::once(e.r)
                .chain(e.v.letters().iter().copied())
                .chain(std::iter::once(e.q))
                .map(|q| mode_probs[q - 1])
                .product();
            freq_err = Some(freq_err.unwrap_or(0.0).max((e.pi_hat - pi).abs()));
        }
    }
    let cov_error = match plug_in {
        PlugIn::Theoretical { r, .. } => Some(max_abs(&(empirical_input_covariance(w, exec) - r))),
        PlugIn::Empirical => None,
    };
    let _ = depth;
    Ok(Checkpoint {
        horizon: w.len(),
        max_abs_error: Some(err),
        max_rel_error: Some(if scale > 0.0 { err / scale } else { err }),
        max_freq_error: freq_err,
        cov_error,
        cross_residual: lag_cross_residual(w, 5, exec),
    })
}

/// `max_{j=1..max_lag} max|(1/N) Σ_t u_{t+j} u_tᵀ|`.
pub fn lag_cross_residual(w: &HybridWord, max_lag: usize, exec: Execution) -> f64 {
    let (n, m) = (w.len(), w.m());
    if n == 0 {
        return 0.0;
    }
    let mm = m * m;
    let sums = exec.chunked_reduce(
        n,
        Vec::new(),
        |range| {
            let mut acc = vec![0.0; mm * max_lag];
            for t in range {
                for j in 1..=max_lag {
                    if t + j >= n {
                        break;
                    }
                    add_outer(&mut acc[(j - 1) * mm..j * mm], w.input(t + j), w.input(t));
                }
            }
            acc
        },
        add_into,
    );
    sums.iter().fold(0.0f64, |a, &x| a.max(x.abs())) / n as f64
}

#[derive(Debug, Clone)]
pub struct IdentifyOptions {
    pub n_guess: usize,
    pub depth: usize,
    pub tol_rel: f64,
    pub plug_in: PlugIn,
    pub exec: Execution,
}

impl IdentifyOptions {
    /// Depth `2 n - 1`, rank tolerance 1e-9, empirical plug-in.
    pub fn new(n_guess: usize) -> Self {
        IdentifyOptions {
            n_guess,
            depth: (2 * n_guess).saturating_sub(1),
            tol_rel: linalg::DEFAULT_RANK_TOL,
            plug_in: PlugIn::Empirical,
            exec: Execution::default(),
        }
    }
}

/// Estimates Markov parameters, assembles `H_{n-1,n}` from them and runs the
/// realization algorithm with the state dimension fixed to `n_guess` and
/// the leftmost column basis.
pub fn identify(
    w: &HybridWord,
    outputs: &OutputSeries,
    d: usize,
    opts: &IdentifyOptions,
) -> Result<RealizationResult> {
    if opts.n_guess == 0 {
        return Err(Error::Config("n_guess must be at least 1".into()));
    }
    if opts.depth + 1 < 2 * opts.n_guess {
        return Err(Error::Config(format!(
            "depth {} is below 2*n_guess-1 = {}",
            opts.depth,
            2 * opts.n_guess - 1
        )));
    }
    let est = estimate_table(w, outputs, d, opts.depth, &opts.plug_in, opts.exec)?;
    let h = build_hankel_with(&est.source, opts.n_guess - 1, opts.n_guess, opts.exec)?;
    realize_with_rank(&h, opts.n_guess, opts.tol_rel)
}

/// One `(r, v, q, β)` tuple for [`state_correlation_check`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrelationWord {
    pub r: usize,
    pub v: ModeWord,
    pub q: usize,
    pub beta: ModeWord,
}

impl CorrelationWord {
    pub fn letters(&self) -> Vec<usize> {
        let mut s = vec![self.r];
        s.extend_from_slice(self.v.letters());
        s.push(self.q);
        s.extend_from_slice(self.beta.letters());
        s
    }
}

/// All tuples with `|r v q β| <= max_len`.
pub fn correlation_words_up_to(max_len: usize, d: usize) -> Result<Vec<CorrelationWord>> {
    let mut out = Vec::new();
    if max_len < 2 {
        return Ok(out);
    }
    let rest = words_up_to(max_len - 2, d)?;
    for v in &rest {
        for beta in &rest {
            if v.len() + beta.len() + 2 > max_len {
                continue;
            }
            for r in 1..=d {
                for q in 1..=d {
                    out.push(CorrelationWord { r, v: v.clone(), q, beta: beta.clone() });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CorrelationEntry {
    pub word: String,
    pub pi_hat: f64,
    pub state_residual: f64,
    pub output_residual: f64,
    pub state_input_residual: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StateCorrelationReport {
    pub horizon: usize,
    pub stability_certified: bool,
    pub max_state_residual: f64,
    pub max_output_residual: f64,
    pub max_state_input_residual: f64,
    /// Largest entry of the limits `π̂ A_v B_r R̂` and `π̂ C_q A_v B_r R̂`.
    pub scale: f64,
    pub entries: Vec<CorrelationEntry>,
}

impl StateCorrelationReport {
    pub fn max_residual(&self) -> f64 {
        self.max_state_residual.max(self.max_output_residual).max(self.max_state_input_residual)
    }
}

/// Simulates `sys` under `w` and compares, for each tuple with
/// `s = r v q β`,
///
/// ```text
/// (1/N) Σ x_{t+|v|+1} u_tᵀ χ(t, s)   with  π̂_s A_v B_r R̂
/// (1/N) Σ y_{t+|v|+1} u_tᵀ χ(t, s)   with  π̂_s C_q A_v B_r R̂
/// (1/N) Σ x_t u_tᵀ χ(t, s)           with  0
/// ```
pub fn state_correlation_check(
    sys: &SwitchedLinearSystem,
    w: &HybridWord,
    words: &[CorrelationWord],
    exec: Execution,
) -> Result<StateCorrelationReport> {
    let traj = sys.simulate(w, &DVector::zeros(sys.n()))?;
    let (n, m, p, nx) = (w.len(), sys.m(), sys.p(), sys.n());
    if n == 0 {
        return Err(Error::ZeroSamples("empty input word".into()));
    }
    let nf = n as f64;
    let r_hat = empirical_input_covariance(w, exec);
    let modes = w.modes();

    let entries = exec.try_map(words.len(), |i| {
        let cw = &words[i];
        let s = cw.letters();
        let k = cw.v.len();
        let mut xs = vec![0.0; nx * m];
        let mut ys = vec![0.0; p * m];
        let mut zs = vec![0.0; nx * m];
        let mut count = 0usize;
        for t in 0..(n + 1).saturating_sub(s.len()) {
            if modes[t..t + s.len()] != s[..] {
                continue;
            }
            count += 1;
            let u = w.input(t);
            add_outer(&mut xs, traj.state(t + k + 1), u);
            add_outer(&mut ys, traj.output(t + k + 1), u);
            add_outer(&mut zs, traj.state(t), u);
        }
        let starts = (n + 1).saturating_sub(s.len());
        let pi_hat = if starts > 0 { count as f64 / starts as f64 } else { 0.0 };
        let avb = sys.matrix_product_along_word(&cw.v)? * sys.b(cw.r);
        let x_limit = &avb * &r_hat * pi_hat;
        let y_limit = sys.c(cw.q) * &x_limit;
        let x_res = max_abs(&(mat_from(&xs, nx, m) / nf - &x_limit));
        let y_res = max_abs(&(mat_from(&ys, p, m) / nf - &y_limit));
        let z_res = max_abs(&(mat_from(&zs, nx, m) / nf));
        Ok::<_, Error>((
            CorrelationEntry {
                word: ModeWord::from_letters(s).to_string(),
                pi_hat,
                state_residual: x_res,
                output_residual: y_res,
                state_input_residual: z_res,
            },
            max_abs(&x_limit).max(max_abs(&y_limit)),
        ))
    })?;

    let scale = entries.iter().fold(0.0f64, |a, e| a.max(e.1));
    let entries: Vec<CorrelationEntry> = entries.into_iter().map(|e| e.0).collect();
    let fold = |f: fn(&CorrelationEntry) -> f64| entries.iter().map(f).fold(0.0f64, f64::max);
    Ok(StateCorrelationReport {
        horizon: n,
        stability_certified: sys.check_l1_stability_sufficient(),
        max_state_residual: fold(|e| e.state_residual),
        max_output_residual: fold(|e| e.output_residual),
        max_state_input_residual: fold(|e| e.state_input_residual),
        scale,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::occurs_at;
    use std::sync::Arc;

    fn example() -> SwitchedLinearSystem {
        SwitchedLinearSystem::scalar(&[0.4, 0.3], &[1.0, 2.0], &[1.0, 3.0]).unwrap()
    }

    fn constant_modes(modes: &[usize], u: f64) -> HybridWord {
        let mut w = HybridWord::new(1);
        for &q in modes {
            w.push(q, &[u]);
        }
        w
    }

    #[test]
    fn generator_statistics() {
        let w = generate_pe_input(&PeSignalConfig::white(2, 1, 7, 100_000)).unwrap();
        let n = w.len() as f64;
        let mean = w.inputs_flat().iter().sum::<f64>() / n;
        let var = w.inputs_flat().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() <= 0.02, "mean {mean}");
        assert!((0.98..=1.02).contains(&var), "var {var}");
        let f1 = empirical_mode_freq(&w, &"1".parse().unwrap()).unwrap();
        assert!((f1 - 0.5).abs() <= 0.01);
    }

    #[test]
    fn generator_empty_and_invalid() {
        assert!(generate_pe_input(&PeSignalConfig::white(2, 1, 1, 0)).unwrap().is_empty());
        let mut cfg = PeSignalConfig::white(2, 2, 1, 10);
        cfg.r = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(generate_pe_input(&cfg), Err(Error::Config(_))));
        cfg.r = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(generate_pe_input(&cfg), Err(Error::Config(_))));
        let mut cfg = PeSignalConfig::white(2, 1, 1, 10);
        cfg.switching = SwitchingLaw::Probabilities(vec![0.0, 1.0]);
        assert!(generate_pe_input(&cfg).is_err());
    }

    #[test]
    fn generator_respects_covariance_and_probabilities() {
        let mut cfg = PeSignalConfig::white(3, 2, 11, 200_000);
        cfg.r = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        cfg.switching = SwitchingLaw::Probabilities(vec![0.2, 0.3, 0.5]);
        let w = generate_pe_input(&cfg).unwrap();
        let r_hat = empirical_input_covariance(&w, Execution::Sequential);
        assert!(max_abs(&(r_hat - &cfg.r)) < 0.03);
        let f3 = empirical_mode_freq(&w, &"3".parse().unwrap()).unwrap();
        assert!((f3 - 0.5).abs() < 0.01);
    }

    #[test]
    fn frequencies_deterministic_patterns() {
        let w = constant_modes(&[1; 10], 1.0);
        assert_eq!(empirical_mode_freq(&w, &"1".parse().unwrap()).unwrap(), 1.0);
        let alt: Vec<usize> = (0..11).map(|t| 1 + t % 2).collect();
        let w = constant_modes(&alt, 1.0);
        // N = 11, N - 1 = 10 start positions, "12" starts at t = 0, 2, ..., 8
        assert_eq!(empirical_mode_freq(&w, &"12".parse().unwrap()).unwrap(), 0.5);
        assert!(matches!(
            empirical_mode_freq(&constant_modes(&[1, 2], 0.0), &"121".parse().unwrap()),
            Err(Error::ZeroSamples(_))
        ));
    }

    #[test]
    fn pe_condition_examples() {
        let w = generate_pe_input(&PeSignalConfig::white(2, 1, 3, 200_000)).unwrap();
        let rep = check_pe_conditions(&w, 2, 3, 3, 0.05, Execution::default()).unwrap();
        assert!(rep.passed, "{rep:?}");

        let constant = {
            let mut c = HybridWord::new(1);
            for &q in w.modes() {
                c.push(q, &[1.0]);
            }
            c
        };
        let rep = check_pe_conditions(&constant, 2, 3, 3, 0.05, Execution::default()).unwrap();
        assert!(!rep.passed);
        assert!(rep.max_cross_residual > 0.4);

        let stuck = {
            let mut c = HybridWord::new(1);
            for t in 0..w.len() {
                c.push(1, w.input(t));
            }
            c
        };
        let rep = check_pe_conditions(&stuck, 2, 3, 3, 0.05, Execution::default()).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.min_pi_hat, 0.0);
    }

    #[test]
    fn single_word_estimates() {
        let sys = example();
        let w = generate_pe_input(&PeSignalConfig::white(2, 1, 5, 200_000)).unwrap();
        let y = sys.simulate(&w, &DVector::zeros(1)).unwrap().into_outputs();
        let r = DMatrix::identity(1, 1);
        let est = estimate_markov(&w, &y, 1, &ModeWord::empty(), 2, &r, 0.25).unwrap();
        assert!((est.s_hat[(0, 0)] - 3.0).abs() <= 0.05 * 3.0, "{}", est.s_hat);
        let r_hat = empirical_input_covariance(&w, Execution::Sequential);
        let est2 = estimate_markov(&w, &y, 1, &ModeWord::empty(), 2, &r_hat, est.pi_hat).unwrap();
        assert!((est2.s_hat[(0, 0)] - 3.0).abs() <= 0.05 * 3.0);
        assert!(matches!(
            estimate_markov(&w, &y, 1, &ModeWord::empty(), 2, &r, 0.0),
            Err(Error::NotIdentifiable(_))
        ));
    }

    #[test]
    fn zero_system_and_missing_words() {
        let zero = SwitchedLinearSystem::zero(1, 1, 1, 2).unwrap();
        let w = generate_pe_input(&PeSignalConfig::white(2, 1, 9, 5_000)).unwrap();
        let y = zero.simulate(&w, &DVector::zeros(1)).unwrap().into_outputs();
        let (est, _) = estimate_all_markov(&w, &y, 2, &EstimateOptions::new(0), None).unwrap();
        assert_eq!(max_abs(&crate::markov::combined_markov(&est.source, &ModeWord::empty()).unwrap().m), 0.0);

        let stuck = constant_modes(&[1; 100], 1.0);
        let y = zero.simulate(&stuck, &DVector::zeros(1)).unwrap().into_outputs();
        let err = estimate_all_markov(&stuck, &y, 2, &EstimateOptions::new(0), None).unwrap_err();
        assert!(matches!(err, Error::NotIdentifiable(msg) if msg.contains("12")));
        let e = estimate_markov(&stuck, &y, 1, &ModeWord::empty(), 2, &DMatrix::identity(1, 1), 0.25).unwrap();
        assert!(e.zero_count);
    }

    #[test]
    fn one_pass_sums_match_direct_indicator() {
        let sys = example();
        let w = generate_pe_input(&PeSignalConfig::white(2, 1, 21, 3_000)).unwrap();
        let y = sys.simulate(&w, &DVector::zeros(1)).unwrap().into_outputs();
        let r = DMatrix::identity(1, 1);
        let plug = PlugIn::Theoretical { mode_probs: vec![0.5, 0.5], r: r.clone() };
        let opts = EstimateOptions { plug_in: plug, ..EstimateOptions::new(2) };
        let (all, _) = estimate_all_markov(&w, &y, 2, &opts, None).unwrap();
        for e in &all.estimates {
            let single = estimate_markov(&w, &y, e.r, &e.v, e.q, &r, 0.5f64.powi(e.v.len() as i32 + 2)).unwrap();
            assert!(max_abs(&(&single.s_hat - &e.s_hat)) < 1e-12);
            assert_eq!(single.count, e.count);
            let mut word = vec![e.r];
            word.extend_from_slice(e.v.letters());
            word.push(e.q);
            let direct = (0..w.len()).filter(|&t| occurs_at(w.modes(), t, &word)).count();
            assert_eq!(direct, e.count);
        }
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let sys = example();
        let w = generate_pe_input(&PeSignalConfig::white(2, 1, 2, 50_000)).unwrap();
        let y = sys.simulate(&w, &DVector::zeros(1)).unwrap().into_outputs();
        let run = |exec| {
            let opts = EstimateOptions { exec, ..EstimateOptions::new(2) };
            let (est, _) = estimate_all_markov(&w, &y, 2, &opts, None).unwrap();
            est.estimates.iter().map(|e| e.s_hat[(0, 0)].to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
    }

    #[test]
    fn convergence_report_checkpoints() {
        let sys = Arc::new(example());
        let w = generate_pe_input(&PeSignalConfig::white(2, 1, 4, 64_000)).unwrap();
        let y = sys.simulate(&w, &DVector::zeros(1)).unwrap().into_outputs();
        let reference = MarkovSource::from_model(sys);
        let opts = EstimateOptions {
            checkpoints: geometric_checkpoints(64_000, 4_000),
            plug_in: PlugIn::Theoretical { mode_probs: vec![0.5, 0.5], r: DMatrix::identity(1, 1) },
            ..EstimateOptions::new(1)
        };
        let (_, report) = estimate_all_markov(&w, &y, 2, &opts, Some(&reference)).unwrap();
        let ns: Vec<usize> = report.checkpoints.iter().map(|c| c.horizon).collect();
        assert_eq!(ns, vec![4_000, 16_000, 64_000]);
        assert!(report.checkpoints.iter().all(|c| c.max_freq_error.is_some()));
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
        let bad = EstimateOptions { checkpoints: vec![10, 5], ..EstimateOptions::new(1) };
        assert!(estimate_all_markov(&w, &y, 2, &bad, Some(&reference)).is_err());
    }

    #[test]
    fn identify_zero_system_is_degenerate() {
        let zero = SwitchedLinearSystem::zero(1, 1, 1, 2).unwrap();
        let w = generate_pe_input(&PeSignalConfig::white(2, 1, 1, 2_000)).unwrap();
        let y = zero.simulate(&w, &DVector::zeros(1)).unwrap().into_outputs();
        assert!(matches!(identify(&w, &y, 2, &IdentifyOptions::new(1)), Err(Error::DegenerateSystem)));
        let mut opts = IdentifyOptions::new(2);
        opts.depth = 2;
        assert!(matches!(identify(&w, &y, 2, &opts), Err(Error::Config(_))));
    }

    #[test]
    fn correlation_words() {
        let ws = correlation_words_up_to(3, 2).unwrap();
        // |v|+|β| = 0: 4 tuples; = 1: 2 choices of which × 2 letters × 4
        assert_eq!(ws.len(), 4 + 16);
        assert!(ws.iter().all(|w| w.letters().len() <= 3));
    }

    #[test]
    fn zero_system_correlations_vanish() {
        let zero = SwitchedLinearSystem::zero(2, 1, 1, 2).unwrap();
        let w = generate_pe_input(&PeSignalConfig::white(2, 1, 1, 5_000)).unwrap();
        let rep = state_correlation_check(&zero, &w, &correlation_words_up_to(3, 2).unwrap(), Execution::default())
            .unwrap();
        assert_eq!(rep.max_residual(), 0.0);
        assert_eq!(rep.scale, 0.0);
    }
}
