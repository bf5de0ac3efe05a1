use std::f64::consts::FRAC_1_SQRT_2;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::DensityMatrix;
use crate::error::{invalid_arg, Error, Result};
use crate::linalg::{CMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NamedState {
    Ghz,
    W,
    Bell,
    /// `(|000><000| + |1+1><1+1|) / 2`
    PaperCx1p11,
    /// `(|000><000| + |+11><+11|) / 2`
    PaperCxP11,
    ClassicalRandom,
    ProductRandom,
}

impl NamedState {
    pub const ALL: [NamedState; 7] = [
        NamedState::Ghz,
        NamedState::W,
        NamedState::Bell,
        NamedState::PaperCx1p11,
        NamedState::PaperCxP11,
        NamedState::ClassicalRandom,
        NamedState::ProductRandom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NamedState::Ghz => "ghz",
            NamedState::W => "w",
            NamedState::Bell => "bell",
            NamedState::PaperCx1p11 => "paper_cx_1p11",
            NamedState::PaperCxP11 => "paper_cx_p11",
            NamedState::ClassicalRandom => "classical_random",
            NamedState::ProductRandom => "product_random",
        }
    }
}

impl FromStr for NamedState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NamedState::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| invalid_arg(format!("unknown named state {s:?}")))
    }
}

fn qubit_ket(bits: &[Amp]) -> Vec<C64> {
    let mut v = vec![C64::new(1.0, 0.0)];
    for b in bits {
        let (a0, a1) = match b {
            Amp::Zero => (1.0, 0.0),
            Amp::One => (0.0, 1.0),
            Amp::Plus => (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        };
        v = v
            .iter()
            .flat_map(|&x| [x * a0, x * a1])
            .collect();
    }
    v
}

#[derive(Clone, Copy)]
enum Amp {
    Zero,
    One,
    Plus,
}

fn equal_mixture(dims: &[usize], kets: &[Vec<C64>]) -> Result<DensityMatrix> {
    let d: usize = dims.iter().product();
    let mut m = CMatrix::zeros(d, d);
    for k in kets {
        let v = DVector::from_column_slice(k);
        m += &v * v.adjoint();
    }
    DensityMatrix::from_unnormalized(dims, m)
}

fn count_param(params: &[f64], i: usize, default: usize, what: &str) -> Result<usize> {
    match params.get(i) {
        None => Ok(default),
        Some(&x) if x >= 0.0 && x.fract() == 0.0 => Ok(x as usize),
        Some(&x) => Err(invalid_arg(format!("{what} must be a non-negative integer, got {x}"))),
    }
}

/// Builds one of the named states. Parameters:
/// `ghz`/`w`: `[n_qubits = 3]`; `classical_random`/`product_random`:
/// `[n_qubits = 3, seed = 0]`; the others take none.
pub fn make_named_state(name: &str, params: &[f64]) -> Result<DensityMatrix> {
    let kind: NamedState = name.parse()?;
    match kind {
        NamedState::Bell => {
            let s = FRAC_1_SQRT_2;
            let amp = [s, 0.0, 0.0, s].map(|x| C64::new(x, 0.0));
            DensityMatrix::from_pure(&[2, 2], &amp)
        }
        NamedState::Ghz | NamedState::W => {
            let n = count_param(params, 0, 3, "qubit count")?;
            if !(2..=10).contains(&n) {
                return Err(invalid_arg("ghz/w need between 2 and 10 qubits"));
            }
            let d = 1usize << n;
            let mut amp = vec![C64::new(0.0, 0.0); d];
            if kind == NamedState::Ghz {
                amp[0] = C64::new(1.0, 0.0);
                amp[d - 1] = C64::new(1.0, 0.0);
            } else {
                for k in 0..n {
                    amp[1 << k] = C64::new(1.0, 0.0);
                }
            }
            DensityMatrix::from_pure(&vec![2; n], &amp)
        }
        NamedState::PaperCx1p11 => {
            use Amp::*;
            equal_mixture(&[2, 2, 2], &[qubit_ket(&[Zero, Zero, Zero]), qubit_ket(&[One, Plus, One])])
        }
        NamedState::PaperCxP11 => {
            use Amp::*;
            equal_mixture(&[2, 2, 2], &[qubit_ket(&[Zero, Zero, Zero]), qubit_ket(&[Plus, One, One])])
        }
        NamedState::ClassicalRandom => {
            let n = count_param(params, 0, 3, "qubit count")?;
            let seed = count_param(params, 1, 0, "seed")? as u64;
            if !(1..=10).contains(&n) {
                return Err(invalid_arg("classical_random needs between 1 and 10 qubits"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w: Vec<f64> = (0..1usize << n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
            let diag = DVector::from_iterator(w.len(), w.iter().map(|&x| C64::new(x, 0.0)));
            DensityMatrix::from_unnormalized(&vec![2; n], CMatrix::from_diagonal(&diag))
        }
        NamedState::ProductRandom => {
            let n = count_param(params, 0, 3, "qubit count")?;
            let seed = count_param(params, 1, 0, "seed")? as u64;
            if !(1..=10).contains(&n) {
                return Err(invalid_arg("product_random needs between 1 and 10 qubits"));
            }
            let mut m = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
            for k in 0..n {
                let one = sample_random_state(&[2], 2, seed.wrapping_mul(1_000_003).wrapping_add(k as u64))?;
                m = m.kronecker(one.matrix());
            }
            DensityMatrix::from_unnormalized(&vec![2; n], m)
        }
    }
}

/// Ginibre-ensemble mixed state `G G^dagger / tr(G G^dagger)` with `G` a
/// `dim x rank` matrix of standard complex normals. Deterministic per seed.
pub fn sample_random_state(dims: &[usize], rank: usize, seed: u64) -> Result<DensityMatrix> {
    let d: usize = dims.iter().product();
    if dims.iter().any(|&x| x < 2) {
        return Err(invalid_arg("subsystem dimensions must be at least 2"));
    }
    if rank == 0 || rank > d {
        return Err(invalid_arg(format!("rank must be in 1..={d}, got {rank}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = CMatrix::from_fn(d, rank, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    DensityMatrix::from_unnormalized(dims, &g * g.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_is_pure() {
        let b = make_named_state("bell", &[]).unwrap();
        assert!(b.entropy().abs() < 1e-12);
    }

    #[test]
    fn counterexample_states_are_rank_two() {
        for name in ["paper_cx_1p11", "paper_cx_p11"] {
            let r = make_named_state(name, &[]).unwrap();
            let rank = r.eigenvalues().iter().filter(|&&x| x > 1e-12).count();
            assert_eq!(rank, 2, "{name}");
            assert!((r.entropy() - 1.0).abs() < 1e-12);
        }
        // |1+1> component: amplitude on |101> and |111>
        let r = make_named_state("paper_cx_1p11", &[]).unwrap();
        assert!((r.matrix()[(5, 7)].re - 0.25).abs() < 1e-15);
        assert!((r.matrix()[(0, 0)].re - 0.5).abs() < 1e-15);
        let r = make_named_state("paper_cx_p11", &[]).unwrap();
        // |+11> = (|011> + |111>)/sqrt2
        assert!((r.matrix()[(3, 7)].re - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ghz_marginals_maximally_mixed() {
        let g = make_named_state("ghz", &[3.0]).unwrap();
        for k in 0..3 {
            let m = g.partial_trace(&[k]).unwrap();
            assert!((m.entropy() - 1.0).abs() < 1e-12);
            assert!(m.matrix()[(0, 1)].norm() < 1e-15);
        }
    }

    #[test]
    fn unknown_name_rejected() {
        assert!(make_named_state("werner", &[]).is_err());
    }

    #[test]
    fn random_states() {
        let pure = sample_random_state(&[2, 2], 1, 3).unwrap();
        assert!(pure.entropy().abs() < 1e-9);
        let a = sample_random_state(&[2, 2], 4, 11).unwrap();
        let b = sample_random_state(&[2, 2], 4, 11).unwrap();
        assert_eq!(a.max_abs_diff(&b), 0.0);
        let eigs = a.eigenvalues();
        assert!(eigs.iter().all(|&x| x > 0.0));
        assert!(a.entropy() > 0.0);
        assert!(sample_random_state(&[2, 2], 5, 0).is_err());
        assert!(sample_random_state(&[2, 2], 0, 0).is_err());
    }

    #[test]
    fn product_and_classical_samplers() {
        let p = make_named_state("product_random", &[3.0, 9.0]).unwrap();
        let parts: f64 = (0..3).map(|k| p.partial_trace(&[k]).unwrap().entropy()).sum();
        assert!((parts - p.entropy()).abs() < 1e-9);
        let c = make_named_state("classical_random", &[3.0, 2.0]).unwrap();
        let m = c.matrix();
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    assert_eq!(m[(i, j)].norm(), 0.0);
                }
            }
        }
    }
}
