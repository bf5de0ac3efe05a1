//! Small dense helpers shared by the state, measurement and discord code.
//!
//! Subsystems are laid out in row-major order: the first subsystem is the most
//! significant digit of a basis index.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Eigenvalues in `[-NEG_EIG_TOL, 0)` are treated as zero.
pub const NEG_EIG_TOL: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut out = vec![1; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        out[i] = out[i + 1] * dims[i + 1];
    }
    out
}

/// Maps each full basis index to `(index within targets, index within the rest)`.
pub(crate) fn split_indices(dims: &[usize], targets: &[usize]) -> Vec<(usize, usize)> {
    let total: usize = dims.iter().product();
    let st = strides(dims);
    let rest: Vec<usize> = (0..dims.len()).filter(|i| !targets.contains(i)).collect();
    (0..total)
        .map(|idx| {
            let mut t = 0;
            for &p in targets {
                t = t * dims[p] + (idx / st[p]) % dims[p];
            }
            let mut r = 0;
            for &p in &rest {
                r = r * dims[p] + (idx / st[p]) % dims[p];
            }
            (t, r)
        })
        .collect()
}

/// Largest entrywise deviation `|m - m^dagger|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues of a Hermitian matrix (only the lower triangle and diagonal are read
/// for sizes above two). Closed forms for 1x1 and 2x2.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    match m.nrows() {
        0 => Vec::new(),
        1 => vec![m[(0, 0)].re],
        2 => {
            let a = m[(0, 0)].re;
            let d = m[(1, 1)].re;
            let b = m[(1, 0)].norm_sqr();
            let mean = 0.5 * (a + d);
            let half = 0.5 * (a - d);
            let r = (half * half + b).sqrt();
            vec![mean - r, mean + r]
        }
        _ => m.clone().symmetric_eigenvalues().iter().copied().collect(),
    }
}

/// `-sum x log2 x` over eigenvalues, without normalization; clamps tiny negatives.
pub(crate) fn entropy_terms(eigs: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &x in eigs {
        if x < -NEG_EIG_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {x:e}")));
        }
        if x > 0.0 {
            s -= x * x.log2();
        }
    }
    Ok(s)
}

/// Shannon entropy in bits of a (possibly unnormalized) weight vector, `0 log 0 = 0`.
pub fn shannon_bits(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum()
}

/// `p * S(m / p)` for a positive matrix `m` of trace `p`. Negative round-off
/// eigenvalues are dropped. Used on hot optimization paths.
pub(crate) fn weighted_entropy(m: &CMatrix) -> f64 {
    let eigs = hermitian_eigenvalues(m);
    let p: f64 = eigs.iter().sum();
    if p <= 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for &x in &eigs {
        if x > 0.0 {
            s -= x * x.log2();
        }
    }
    s + p * p.log2()
}

/// Entropy in bits of a unit-trace matrix, checking Hermiticity and positivity.
pub fn entropy_checked(m: &CMatrix) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidState("matrix is not square".into()));
    }
    let dev = hermitian_deviation(m);
    if dev > 1e-10 {
        return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:e})")));
    }
    entropy_terms(&hermitian_eigenvalues(m))
}

/// Partial trace keeping the subsystems at `keep` (any order is accepted; the
/// result follows the ascending order of the positions).
pub fn partial_trace_raw(m: &CMatrix, dims: &[usize], keep: &[usize]) -> CMatrix {
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    let dk: usize = keep.iter().map(|&i| dims[i]).product();
    let total: usize = dims.iter().product();
    let dt = total / dk;
    let split = split_indices(dims, &keep);
    let mut full = vec![0usize; total];
    for (idx, &(k, t)) in split.iter().enumerate() {
        full[k * dt + t] = idx;
    }
    let mut out = CMatrix::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = ZERO;
            for t in 0..dt {
                acc += m[(full[i * dt + t], full[j * dt + t])];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Partial trace over everything except the leading factor of dimension `d0`.
pub(crate) fn trace_out_tail(m: &CMatrix, d0: usize) -> CMatrix {
    let rest = m.nrows() / d0;
    if rest == 1 {
        return m.clone();
    }
    CMatrix::from_fn(d0, d0, |i, j| {
        (0..rest).map(|t| m[(i * rest + t, j * rest + t)]).sum()
    })
}

/// `(<v| (x) I) m (|v> (x) I)` where `v` acts on the leading factor of dimension `v.len()`.
pub(crate) fn contract_leading(m: &CMatrix, v: &[C64]) -> CMatrix {
    let d = v.len();
    let rest = m.nrows() / d;
    let mut out = CMatrix::zeros(rest, rest);
    for a in 0..d {
        let ca = v[a].conj();
        if ca == ZERO {
            continue;
        }
        for b in 0..d {
            let w = ca * v[b];
            if w == ZERO {
                continue;
            }
            for r in 0..rest {
                for c in 0..rest {
                    out[(r, c)] += w * m[(a * rest + r, b * rest + c)];
                }
            }
        }
    }
    out
}

/// Lifts `op` acting on the subsystems `targets` (in the given order) to the full space.
pub fn embed_operator(op: &CMatrix, dims: &[usize], targets: &[usize]) -> CMatrix {
    let total: usize = dims.iter().product();
    let split = split_indices(dims, targets);
    let dt = op.nrows();
    let mut by_key = vec![0usize; total];
    let dr = total / dt;
    for (idx, &(t, r)) in split.iter().enumerate() {
        by_key[t * dr + r] = idx;
    }
    let mut out = CMatrix::zeros(total, total);
    for (col, &(tc, rc)) in split.iter().enumerate() {
        for tr in 0..dt {
            let v = op[(tr, tc)];
            if v != ZERO {
                out[(by_key[tr * dr + rc], col)] = v;
            }
        }
    }
    out
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub(crate) fn real_trace(m: &CMatrix) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn two_by_two_eigenvalues_match_general_path() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[c(0.7), C64::new(0.1, -0.2), C64::new(0.1, 0.2), c(0.3)],
        );
        let mut fast = hermitian_eigenvalues(&m);
        let mut slow: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
        fast.sort_by(f64::total_cmp);
        slow.sort_by(f64::total_cmp);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn embed_on_second_of_three() {
        let x = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let full = embed_operator(&x, &[2, 2, 2], &[1]);
        let id = CMatrix::identity(2, 2);
        let expected = id.kronecker(&x).kronecker(&id);
        assert!(max_abs_diff(&full, &expected) < 1e-15);
    }

    #[test]
    fn negative_eigenvalue_rejected() {
        assert!(entropy_terms(&[0.5, 0.5 + 1e-3, -1e-3]).is_err());
        assert!(entropy_terms(&[1.0, -1e-12]).is_ok());
    }
}
