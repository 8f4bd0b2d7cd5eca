//! Discrete-time linear switched systems
//!
//! ```text
//! x_{t+1} = A_{q_t} x_t + B_{q_t} u_t
//! y_t     = C_{q_t} x_t
//! ```
//!
//! with modes `q_t ∈ {1, ..., D}`, and the hybrid input words that drive
//! them.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::words::ModeWord;

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchedLinearSystem {
    n: usize,
    m: usize,
    p: usize,
    a: Vec<DMatrix<f64>>,
    b: Vec<DMatrix<f64>>,
    c: Vec<DMatrix<f64>>,
}

impl SwitchedLinearSystem {
    /// Validates shapes and finiteness; dimensions are taken from the first
    /// mode.
    pub fn new(a: Vec<DMatrix<f64>>, b: Vec<DMatrix<f64>>, c: Vec<DMatrix<f64>>) -> Result<Self> {
        let d = a.len();
        if d == 0 {
            return Err(Error::InvalidSystem("at least one mode is required".into()));
        }
        if b.len() != d || c.len() != d {
            return Err(Error::InvalidSystem(format!(
                "mode counts differ: {} A, {} B, {} C matrices",
                d,
                b.len(),
                c.len()
            )));
        }
        let n = a[0].nrows();
        let m = b[0].ncols();
        let p = c[0].nrows();
        if n == 0 || m == 0 || p == 0 {
            return Err(Error::InvalidSystem(format!(
                "dimensions must be positive (n={n}, m={m}, p={p})"
            )));
        }
        let check = |family: &str, mats: &[DMatrix<f64>], rows: usize, cols: usize| {
            for (q, mat) in mats.iter().enumerate() {
                if mat.shape() != (rows, cols) {
                    return Err(Error::InvalidSystem(format!(
                        "{family}_{} has shape {:?}, expected ({rows}, {cols})",
                        q + 1,
                        mat.shape()
                    )));
                }
                if mat.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidSystem(format!(
                        "{family}_{} has non-finite entries",
                        q + 1
                    )));
                }
            }
            Ok(())
        };
        check("A", &a, n, n)?;
        check("B", &b, n, m)?;
        check("C", &c, p, n)?;
        Ok(SwitchedLinearSystem { n, m, p, a, b, c })
    }

    /// Single-state, single-input, single-output system with one scalar
    /// triple per mode.
    pub fn scalar(a: &[f64], b: &[f64], c: &[f64]) -> Result<Self> {
        let one = |xs: &[f64]| xs.iter().map(|&x| DMatrix::from_element(1, 1, x)).collect();
        Self::new(one(a), one(b), one(c))
    }

    /// The system with every matrix zero.
    pub fn zero(n: usize, m: usize, p: usize, d: usize) -> Result<Self> {
        Self::new(
            vec![DMatrix::zeros(n, n); d],
            vec![DMatrix::zeros(n, m); d],
            vec![DMatrix::zeros(p, n); d],
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn p(&self) -> usize {
        self.p
    }
    /// Number of discrete modes.
    pub fn d(&self) -> usize {
        self.a.len()
    }

    /// `A_q` for a 1-based mode. Panics on an out-of-range mode.
    pub fn a(&self, q: usize) -> &DMatrix<f64> {
        &self.a[q - 1]
    }
    pub fn b(&self, q: usize) -> &DMatrix<f64> {
        &self.b[q - 1]
    }
    pub fn c(&self, q: usize) -> &DMatrix<f64> {
        &self.c[q - 1]
    }

    pub fn a_all(&self) -> &[DMatrix<f64>] {
        &self.a
    }
    pub fn b_all(&self) -> &[DMatrix<f64>] {
        &self.b
    }
    pub fn c_all(&self) -> &[DMatrix<f64>] {
        &self.c
    }

    pub fn check_mode(&self, q: usize) -> Result<()> {
        if q == 0 || q > self.d() {
            return Err(Error::InvalidWord(format!("mode {q} outside 1..={}", self.d())));
        }
        Ok(())
    }

    /// `A_v = A_{σ_k} ⋯ A_{σ_1}` for `v = σ_1 ⋯ σ_k`; the identity for the
    /// empty word. The first letter acts first, so it is the rightmost
    /// factor.
    pub fn matrix_product_along_word(&self, v: &ModeWord) -> Result<DMatrix<f64>> {
        v.validate(self.d())?;
        let mut acc = DMatrix::identity(self.n, self.n);
        for &q in v.letters() {
            acc = self.a(q) * acc;
        }
        Ok(acc)
    }

    /// Sufficient condition for l1-stability: `||A_q||_2 < 1/D` for every
    /// mode. `false` does not certify instability.
    pub fn check_l1_stability_sufficient(&self) -> bool {
        let bound = 1.0 / self.d() as f64;
        self.a.iter().all(|a| linalg::spectral_norm(a) < bound)
    }

    /// Every `A_q` numerically invertible.
    pub fn check_reversible(&self) -> bool {
        self.a.iter().all(linalg::is_invertible)
    }

    /// Runs the recursion from `x_init`. Outputs are read before each
    /// transition, so `y_t = C_{q_t} x_t`.
    pub fn simulate(&self, w: &HybridWord, x_init: &DVector<f64>) -> Result<Trajectory> {
        if w.m() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "input width {} but system has m={}",
                w.m(),
                self.m
            )));
        }
        if x_init.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "initial state has length {} but system has n={}",
                x_init.len(),
                self.n
            )));
        }
        w.validate_modes(self.d())?;

        let (n, p) = (self.n, self.p);
        let len = w.len();
        let mut states = Vec::with_capacity((len + 1) * n);
        let mut outputs = Vec::with_capacity(len * p);
        let mut x = x_init.clone();
        let mut next = DVector::zeros(n);
        let mut y = DVector::zeros(p);
        states.extend_from_slice(x.as_slice());
        for t in 0..len {
            let q = w.mode(t);
            let u = nalgebra::DVectorView::from_slice(w.input(t), self.m);
            y.gemv(1.0, self.c(q), &x, 0.0);
            outputs.extend_from_slice(y.as_slice());
            next.gemv(1.0, self.a(q), &x, 0.0);
            next.gemv(1.0, self.b(q), &u, 1.0);
            std::mem::swap(&mut x, &mut next);
            states.extend_from_slice(x.as_slice());
        }
        Ok(Trajectory { n, p, states, outputs })
    }

    /// Response of the input-output map to `w` (zero initial state): the
    /// output at the last letter. `None` for the empty word.
    pub fn response(&self, w: &HybridWord) -> Result<Option<DVector<f64>>> {
        let traj = self.simulate(w, &DVector::zeros(self.n))?;
        Ok(traj.last_output())
    }

    /// Reads a model file in the JSON model format.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        file.into_system()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from(self)).expect("model serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

/// On-disk model layout; matrices are arrays of rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    #[serde(rename = "D")]
    pub d: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<Vec<f64>>>,
}

impl ModelFile {
    pub fn into_system(self) -> Result<SwitchedLinearSystem> {
        let ModelFile { n, m, p, d, a, b, c } = self;
        if a.len() != d || b.len() != d || c.len() != d {
            return Err(Error::InvalidSystem(format!(
                "D={d} but got {} A, {} B, {} C matrices",
                a.len(),
                b.len(),
                c.len()
            )));
        }
        let convert = |name: &str, mats: Vec<Vec<Vec<f64>>>, rows: usize, cols: usize| {
            mats.iter()
                .enumerate()
                .map(|(q, rows_data)| {
                    linalg::from_rows(rows_data, rows, cols).ok_or_else(|| {
                        Error::InvalidSystem(format!("{name}_{} is not {rows}x{cols}", q + 1))
                    })
                })
                .collect::<Result<Vec<_>>>()
        };
        SwitchedLinearSystem::new(convert("A", a, n, n)?, convert("B", b, n, m)?, convert("C", c, p, n)?)
    }
}

impl From<&SwitchedLinearSystem> for ModelFile {
    fn from(sys: &SwitchedLinearSystem) -> Self {
        ModelFile {
            n: sys.n,
            m: sys.m,
            p: sys.p,
            d: sys.d(),
            a: sys.a.iter().map(linalg::to_rows).collect(),
            b: sys.b.iter().map(linalg::to_rows).collect(),
            c: sys.c.iter().map(linalg::to_rows).collect(),
        }
    }
}

/// A finite sequence of (mode, input) letters. Inputs are stored flat with
/// stride `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridWord {
    m: usize,
    modes: Vec<usize>,
    inputs: Vec<f64>,
}

impl HybridWord {
    pub fn new(m: usize) -> Self {
        HybridWord { m, modes: Vec::new(), inputs: Vec::new() }
    }

    pub fn with_capacity(m: usize, len: usize) -> Self {
        HybridWord { m, modes: Vec::with_capacity(len), inputs: Vec::with_capacity(len * m) }
    }

    pub fn from_parts(m: usize, modes: Vec<usize>, inputs: Vec<f64>) -> Result<Self> {
        if inputs.len() != modes.len() * m {
            return Err(Error::DimensionMismatch(format!(
                "{} input values for {} letters of width {m}",
                inputs.len(),
                modes.len()
            )));
        }
        Ok(HybridWord { m, modes, inputs })
    }

    /// Builds a word from `(mode, input)` pairs.
    pub fn from_letters(m: usize, letters: &[(usize, Vec<f64>)]) -> Result<Self> {
        let mut w = HybridWord::with_capacity(m, letters.len());
        for (q, u) in letters {
            w.try_push(*q, u)?;
        }
        Ok(w)
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn len(&self) -> usize {
        self.modes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
    pub fn mode(&self, t: usize) -> usize {
        self.modes[t]
    }
    pub fn modes(&self) -> &[usize] {
        &self.modes
    }
    pub fn input(&self, t: usize) -> &[f64] {
        &self.inputs[t * self.m..(t + 1) * self.m]
    }
    pub fn inputs_flat(&self) -> &[f64] {
        &self.inputs
    }

    pub fn try_push(&mut self, q: usize, u: &[f64]) -> Result<()> {
        if u.len() != self.m {
            return Err(Error::DimensionMismatch(format!(
                "input of length {} in a word of width {}",
                u.len(),
                self.m
            )));
        }
        self.modes.push(q);
        self.inputs.extend_from_slice(u);
        Ok(())
    }

    /// Appends a letter; panics if `u` has the wrong width.
    pub fn push(&mut self, q: usize, u: &[f64]) {
        self.try_push(q, u).expect("input width matches word");
    }

    /// Appends `(q, 0)`.
    pub fn push_zero(&mut self, q: usize) {
        self.modes.push(q);
        self.inputs.extend(std::iter::repeat_n(0.0, self.m));
    }

    pub fn extend(&mut self, other: &HybridWord) {
        assert_eq!(self.m, other.m, "input widths differ");
        self.modes.extend_from_slice(&other.modes);
        self.inputs.extend_from_slice(&other.inputs);
    }

    pub fn concat(&self, other: &HybridWord) -> HybridWord {
        let mut w = self.clone();
        w.extend(other);
        w
    }

    /// The first `len` letters.
    pub fn prefix(&self, len: usize) -> HybridWord {
        let len = len.min(self.len());
        HybridWord {
            m: self.m,
            modes: self.modes[..len].to_vec(),
            inputs: self.inputs[..len * self.m].to_vec(),
        }
    }

    /// Same switching, inputs multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> HybridWord {
        HybridWord {
            m: self.m,
            modes: self.modes.clone(),
            inputs: self.inputs.iter().map(|x| alpha * x).collect(),
        }
    }

    pub fn validate_modes(&self, d: usize) -> Result<()> {
        match self.modes.iter().position(|&q| q == 0 || q > d) {
            Some(t) => Err(Error::InvalidWord(format!(
                "mode {} at t={t} outside 1..={d}",
                self.modes[t]
            ))),
            None => Ok(()),
        }
    }

    /// The switching sequence as a mode word.
    pub fn mode_word(&self) -> ModeWord {
        ModeWord::from_letters(self.modes.clone())
    }
}

/// States `x_0 .. x_{T+1}` and outputs `y_0 .. y_T`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n: usize,
    p: usize,
    states: Vec<f64>,
    outputs: Vec<f64>,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> usize {
        self.p
    }
    /// Number of outputs (= length of the driving word).
    pub fn len(&self) -> usize {
        self.outputs.len() / self.p
    }
    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t * self.n..(t + 1) * self.n]
    }
    pub fn output(&self, t: usize) -> &[f64] {
        &self.outputs[t * self.p..(t + 1) * self.p]
    }
    pub fn states_flat(&self) -> &[f64] {
        &self.states
    }
    pub fn outputs_flat(&self) -> &[f64] {
        &self.outputs
    }
    pub fn final_state(&self) -> DVector<f64> {
        DVector::from_column_slice(self.state(self.len()))
    }
    pub fn last_output(&self) -> Option<DVector<f64>> {
        if self.is_empty() {
            None
        } else {
            Some(DVector::from_column_slice(self.output(self.len() - 1)))
        }
    }
    pub fn into_outputs(self) -> OutputSeries {
        OutputSeries { p: self.p, values: self.outputs }
    }
}

/// An output time series `y_0, ..., y_T`, one vector per prefix of the
/// driving word.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSeries {
    p: usize,
    values: Vec<f64>,
}

impl OutputSeries {
    pub fn from_flat(p: usize, values: Vec<f64>) -> Result<Self> {
        if p == 0 || !values.len().is_multiple_of(p) {
            return Err(Error::DimensionMismatch(format!(
                "{} output values do not split into vectors of length {p}",
                values.len()
            )));
        }
        Ok(OutputSeries { p, values })
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn len(&self) -> usize {
        self.values.len() / self.p
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn get(&self, t: usize) -> &[f64] {
        &self.values[t * self.p..(t + 1) * self.p]
    }
    pub fn flat(&self) -> &[f64] {
        &self.values
    }
    pub fn prefix(&self, len: usize) -> OutputSeries {
        let len = len.min(self.len());
        OutputSeries { p: self.p, values: self.values[..len * self.p].to_vec() }
    }
}
