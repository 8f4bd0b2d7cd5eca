//! Fixed example systems and random system generators used by the tests,
//! the acceptance suite, the benches and the CLI.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg;
use crate::system::SwitchedLinearSystem;

/// Scalar two-mode system `A = (0.4, 0.3)`, `B = (1, 2)`, `C = (1, 3)`.
pub fn scalar_example() -> SwitchedLinearSystem {
    SwitchedLinearSystem::scalar(&[0.4, 0.3], &[1.0, 2.0], &[1.0, 3.0]).expect("valid example")
}

/// Two-state, two-mode, single-input single-output system with
/// non-commuting `A_q` and `||A_q||_2 <= 0.45`.
pub fn planar_example() -> SwitchedLinearSystem {
    let a1 = DMatrix::from_row_slice(2, 2, &[0.3, 0.2, -0.1, 0.25]);
    let a2 = DMatrix::from_row_slice(2, 2, &[0.1, -0.3, 0.2, 0.2]);
    let b1 = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
    let b2 = DMatrix::from_row_slice(2, 1, &[0.5, 1.0]);
    let c1 = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
    let c2 = DMatrix::from_row_slice(1, 2, &[0.0, 2.0]);
    SwitchedLinearSystem::new(vec![a1, a2], vec![b1, b2], vec![c1, c2]).expect("valid example")
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// I.i.d. standard normal entries, `A_q` rescaled to spectral norm 0.9 so
/// long words stay bounded.
pub fn random_system<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize, p: usize, d: usize) -> SwitchedLinearSystem {
    random_with_norm(rng, n, m, p, d, 0.9)
}

/// Every `A_q` scaled to spectral norm `norm`; with `norm < 1/D` the system
/// is l1-stable.
pub fn random_with_norm<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
    p: usize,
    d: usize,
    norm: f64,
) -> SwitchedLinearSystem {
    let mut a = Vec::with_capacity(d);
    let mut b = Vec::with_capacity(d);
    let mut c = Vec::with_capacity(d);
    for _ in 0..d {
        let raw = gaussian_matrix(rng, n, n);
        let s = linalg::spectral_norm(&raw);
        a.push(if s > 0.0 { raw * (norm / s) } else { raw });
        b.push(gaussian_matrix(rng, n, m));
        c.push(gaussian_matrix(rng, p, n));
    }
    SwitchedLinearSystem::new(a, b, c).expect("consistent dimensions")
}

/// l1-stable: `||A_q||_2 = 0.9 / D`.
pub fn random_stable_system<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
    p: usize,
    d: usize,
) -> SwitchedLinearSystem {
    random_with_norm(rng, n, m, p, d, 0.9 / d as f64)
}

// Orthogonal factor times a diagonal with entries in [0.5, 1.5].
fn well_conditioned<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let q = gaussian_matrix(rng, n, n).qr().q();
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| rng.random_range(0.5..1.5)));
    let q2 = gaussian_matrix(rng, n, n).qr().q();
    q * diag * q2
}

/// Every `A_q` invertible with singular values in `[0.5, 1.5]`.
pub fn random_reversible_system<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
    p: usize,
    d: usize,
) -> SwitchedLinearSystem {
    let a = (0..d).map(|_| well_conditioned(rng, n)).collect();
    let b = (0..d).map(|_| gaussian_matrix(rng, n, m)).collect();
    let c = (0..d).map(|_| gaussian_matrix(rng, p, n)).collect();
    SwitchedLinearSystem::new(a, b, c).expect("consistent dimensions")
}

/// `2K` modes where mode `q + K` undoes mode `q` under the input `-u`:
/// `A_{q+K} = A_q⁻¹` and `B_{q+K} = A_{q+K} B_q`.
pub fn random_paired_system<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    m: usize,
    p: usize,
    k: usize,
) -> SwitchedLinearSystem {
    let mut a = Vec::with_capacity(2 * k);
    let mut b = Vec::with_capacity(2 * k);
    for _ in 0..k {
        a.push(well_conditioned(rng, n));
        b.push(gaussian_matrix(rng, n, m));
    }
    for q in 0..k {
        let inv = a[q].clone().try_inverse().expect("well conditioned");
        b.push(&inv * &b[q]);
        a.push(inv);
    }
    let c = (0..2 * k).map(|_| gaussian_matrix(rng, p, n)).collect();
    SwitchedLinearSystem::new(a, b, c).expect("consistent dimensions")
}
