//! Dense multipartite density operators.

mod file;
mod named;

pub use file::{load_state, parse_state, save_state, write_state, STATE_FILE_VERSION};
pub use named::{make_named_state, sample_random_state, NamedState};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::linalg::{self, CMatrix, NEG_EIG_TOL};
use crate::partition::Partition;

/// Tolerance on `max |rho - rho^dagger|`.
pub const TOL_HERMITIAN: f64 = 1e-10;
/// Tolerance on `|tr rho - 1|`.
pub const TOL_TRACE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubsystemLabel {
    pub name: String,
    /// Position in the owning state's ordering.
    pub index: usize,
    pub dim: usize,
}

/// Default subsystem names: `A`, `B`, ..., `Z`.
pub fn default_name(i: usize) -> String {
    assert!(i < 26, "at most 26 default subsystem names");
    char::from(b'A' + i as u8).to_string()
}

/// A Hermitian, positive semidefinite, unit-trace operator on a labeled tensor
/// product. Immutable once built.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    labels: Vec<SubsystemLabel>,
    data: CMatrix,
}

impl DensityMatrix {
    /// Builds a state, checking every invariant.
    pub fn new(labels: Vec<SubsystemLabel>, data: CMatrix) -> Result<Self> {
        check_labels(&labels)?;
        let dim: usize = labels.iter().map(|l| l.dim).product();
        if data.nrows() != dim || data.ncols() != dim {
            return Err(Error::InvalidState(format!(
                "matrix is {}x{} but labels require {dim}x{dim}",
                data.nrows(),
                data.ncols()
            )));
        }
        let dev = linalg::hermitian_deviation(&data);
        if dev > TOL_HERMITIAN {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:e})")));
        }
        let tr = linalg::real_trace(&data);
        if (tr - 1.0).abs() > TOL_TRACE {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let min = linalg::hermitian_eigenvalues(&data)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < -NEG_EIG_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        Ok(Self { labels, data })
    }

    /// Builds a state with default names `A`, `B`, ... for the given dimensions.
    pub fn from_dims(dims: &[usize], data: CMatrix) -> Result<Self> {
        Self::new(labels_for(dims), data)
    }

    /// Skips validation. Only for results of operations that preserve the invariants.
    pub(crate) fn from_trusted(labels: Vec<SubsystemLabel>, data: CMatrix) -> Self {
        debug_assert!(check_labels(&labels).is_ok());
        Self { labels, data }
    }

    /// Normalizes and symmetrizes a positive matrix, then validates.
    pub fn from_unnormalized(dims: &[usize], m: CMatrix) -> Result<Self> {
        let tr = linalg::real_trace(&m);
        if tr <= 0.0 {
            return Err(Error::InvalidState("zero trace".into()));
        }
        let herm = (&m + m.adjoint()) * linalg::C64::new(0.5 / tr, 0.0);
        Self::from_dims(dims, herm)
    }

    /// Pure state `|psi><psi|` from an (unnormalized) amplitude vector.
    pub fn from_pure(dims: &[usize], amplitudes: &[linalg::C64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(amplitudes);
        Self::from_unnormalized(dims, &v * v.adjoint())
    }

    pub fn labels(&self) -> &[SubsystemLabel] {
        &self.labels
    }

    pub fn dims(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l.dim).collect()
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_subsystems(&self) -> usize {
        self.labels.len()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn names(&self) -> Vec<&str> {
        self.labels.iter().map(|l| l.name.as_str()).collect()
    }

    pub fn position_of(&self, name: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.name == name)
    }

    /// Von Neumann entropy in bits.
    pub fn entropy(&self) -> f64 {
        let eigs = linalg::hermitian_eigenvalues(&self.data);
        linalg::shannon_bits(&eigs)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::hermitian_eigenvalues(&self.data)
    }

    /// Reduced state on the subsystems at `keep`, preserving their relative order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.is_empty() {
            return Err(invalid_arg("partial trace needs at least one kept subsystem"));
        }
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != keep.len() {
            return Err(invalid_arg("repeated subsystem in partial trace"));
        }
        if let Some(&bad) = sorted.iter().find(|&&i| i >= self.labels.len()) {
            return Err(invalid_arg(format!("unknown subsystem position {bad}")));
        }
        if sorted.len() == self.labels.len() {
            return Ok(self.clone());
        }
        let data = linalg::partial_trace_raw(&self.data, &self.dims(), &sorted);
        let labels = sorted
            .iter()
            .enumerate()
            .map(|(i, &p)| SubsystemLabel {
                name: self.labels[p].name.clone(),
                index: i,
                dim: self.labels[p].dim,
            })
            .collect();
        Ok(Self::from_trusted(labels, data))
    }

    /// Reduced state on the named subsystems.
    pub fn partial_trace_names(&self, keep: &[&str]) -> Result<Self> {
        let positions = keep
            .iter()
            .map(|n| {
                self.position_of(n)
                    .ok_or_else(|| invalid_arg(format!("unknown subsystem {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.partial_trace(&positions)
    }

    /// Kronecker product with concatenated labels.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        for l in &other.labels {
            if self.position_of(&l.name).is_some() {
                return Err(invalid_arg(format!("label {} appears in both factors", l.name)));
            }
        }
        let n = self.labels.len();
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().map(|l| SubsystemLabel {
            name: l.name.clone(),
            index: l.index + n,
            dim: l.dim,
        }));
        Ok(Self::from_trusted(labels, self.data.kronecker(&other.data)))
    }

    /// Same state with the subsystem order changed: new position `i` holds old
    /// subsystem `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let n = self.labels.len();
        let mut seen = vec![false; n];
        if order.len() != n {
            return Err(invalid_arg("permutation has the wrong length"));
        }
        for &o in order {
            if o >= n || seen[o] {
                return Err(invalid_arg("not a permutation"));
            }
            seen[o] = true;
        }
        let old_dims = self.dims();
        let old_strides = linalg::strides(&old_dims);
        let new_dims: Vec<usize> = order.iter().map(|&o| old_dims[o]).collect();
        let new_strides = linalg::strides(&new_dims);
        let total = self.dim();
        let map: Vec<usize> = (0..total)
            .map(|idx| {
                (0..n)
                    .map(|i| ((idx / new_strides[i]) % new_dims[i]) * old_strides[order[i]])
                    .sum()
            })
            .collect();
        let data = CMatrix::from_fn(total, total, |r, c| self.data[(map[r], map[c])]);
        let labels = order
            .iter()
            .enumerate()
            .map(|(i, &o)| SubsystemLabel {
                name: self.labels[o].name.clone(),
                index: i,
                dim: self.labels[o].dim,
            })
            .collect();
        Ok(Self::from_trusted(labels, data))
    }

    /// Same matrix under new names (e.g. to tensor two states that both use `A`).
    pub fn renamed(&self, names: &[&str]) -> Result<Self> {
        if names.len() != self.labels.len() {
            return Err(invalid_arg("wrong number of names"));
        }
        let labels = self
            .labels
            .iter()
            .zip(names)
            .map(|(l, n)| SubsystemLabel {
                name: (*n).to_string(),
                index: l.index,
                dim: l.dim,
            })
            .collect::<Vec<_>>();
        check_labels(&labels)?;
        Ok(Self::from_trusted(labels, self.data.clone()))
    }

    /// Largest entrywise deviation from another state's matrix.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        linalg::max_abs_diff(&self.data, &other.data)
    }
}

impl fmt::Display for DensityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self
            .labels
            .iter()
            .map(|l| format!("{}:{}", l.name, l.dim))
            .collect();
        write!(f, "DensityMatrix[{}]", names.join(" "))
    }
}

pub fn labels_for(dims: &[usize]) -> Vec<SubsystemLabel> {
    dims.iter()
        .enumerate()
        .map(|(i, &dim)| SubsystemLabel {
            name: default_name(i),
            index: i,
            dim,
        })
        .collect()
}

fn check_labels(labels: &[SubsystemLabel]) -> Result<()> {
    if labels.is_empty() {
        return Err(invalid_arg("a state needs at least one subsystem"));
    }
    for (i, l) in labels.iter().enumerate() {
        if l.index != i {
            return Err(invalid_arg(format!("label {} has index {}, expected {i}", l.name, l.index)));
        }
        if l.dim < 2 {
            return Err(invalid_arg(format!("label {} has dimension {} < 2", l.name, l.dim)));
        }
        if l.name.is_empty() || l.name.contains(|c: char| c.is_whitespace() || c == '|' || c == ':') {
            return Err(invalid_arg(format!("bad label name {:?}", l.name)));
        }
        if labels[..i].iter().any(|o| o.name == l.name) {
            return Err(invalid_arg(format!("duplicate label {}", l.name)));
        }
    }
    Ok(())
}

/// Von Neumann entropy in bits of a raw matrix, rejecting non-Hermitian input.
pub fn von_neumann_entropy(m: &CMatrix) -> Result<f64> {
    linalg::entropy_checked(m)
}

/// Relative entropy `S(rho || sigma)` in bits; `+inf` when the support of `rho`
/// is not contained in that of `sigma`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dims() != sigma.dims() {
        return Err(invalid_arg("relative entropy needs matching dimensions"));
    }
    let eig = sigma.matrix().clone().symmetric_eigen();
    let mut cross = 0.0;
    for (k, &mu) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let w = (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
        if w <= 1e-12 {
            continue;
        }
        if mu <= 1e-15 {
            return Ok(f64::INFINITY);
        }
        cross += w * mu.log2();
    }
    Ok((-rho.entropy() - cross).max(0.0))
}

/// Multipartite mutual information `sum_k S(block_k) - S(rho)` over a partition
/// covering every subsystem of `rho`.
pub fn mutual_information(rho: &DensityMatrix, blocks: &Partition) -> Result<f64> {
    let mut covered = blocks.labels();
    covered.sort_unstable();
    if covered != (0..rho.n_subsystems()).collect::<Vec<_>>() {
        return Err(invalid_arg(format!(
            "partition {blocks} does not cover all {} subsystems",
            rho.n_subsystems()
        )));
    }
    let mut total = -rho.entropy();
    for block in blocks.blocks() {
        total += rho.partial_trace(block)?.entropy();
    }
    Ok(total)
}

/// Product of the block marginals, `rho^{X1} (x) rho^{X2} (x) ...`, in the
/// order of the original subsystems (blocks must be contiguous runs).
pub fn product_of_marginals(rho: &DensityMatrix, blocks: &[Vec<usize>]) -> Result<DensityMatrix> {
    let mut flat: Vec<usize> = blocks.iter().flatten().copied().collect();
    let order = flat.clone();
    flat.sort_unstable();
    if flat != (0..rho.n_subsystems()).collect::<Vec<_>>() {
        return Err(invalid_arg("blocks must cover every subsystem exactly once"));
    }
    let mut data = CMatrix::from_element(1, 1, linalg::ONE);
    for block in blocks {
        data = data.kronecker(rho.partial_trace(block)?.matrix());
    }
    let dims = rho.dims();
    let labels = order
        .iter()
        .enumerate()
        .map(|(i, &p)| SubsystemLabel {
            name: rho.labels()[p].name.clone(),
            index: i,
            dim: dims[p],
        })
        .collect();
    let prod = DensityMatrix::from_trusted(labels, data);
    // back to the original subsystem order
    let inverse: Vec<usize> = (0..order.len())
        .map(|p| order.iter().position(|&o| o == p).expect("covered"))
        .collect();
    prod.permuted(&inverse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn ket(bits: &[f64]) -> Vec<C64> {
        bits.iter().map(|&b| C64::new(b, 0.0)).collect()
    }

    fn basis(dims: &[usize], idx: usize) -> DensityMatrix {
        let d: usize = dims.iter().product();
        let mut v = vec![C64::new(0.0, 0.0); d];
        v[idx] = C64::new(1.0, 0.0);
        DensityMatrix::from_pure(dims, &v).unwrap()
    }

    fn bell() -> DensityMatrix {
        DensityMatrix::from_pure(&[2, 2], &ket(&[1.0, 0.0, 0.0, 1.0])).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert!(basis(&[2], 0).entropy().abs() < 1e-12);
        let mixed = DensityMatrix::from_dims(&[2], CMatrix::identity(2, 2) * C64::new(0.5, 0.0)).unwrap();
        assert!((mixed.entropy() - 1.0).abs() < 1e-12);
        let cx = make_named_state("paper_cx_1p11", &[]).unwrap();
        assert!((cx.entropy() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut m = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        m[(0, 1)] = C64::new(0.1, 0.0);
        assert!(matches!(von_neumann_entropy(&m), Err(Error::InvalidState(_))));
        assert!(DensityMatrix::from_dims(&[2], m).is_err());
    }

    #[test]
    fn construction_checks() {
        let m = CMatrix::identity(2, 2);
        assert!(DensityMatrix::from_dims(&[2], m).is_err(), "trace 2");
        let neg = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.1, 0.0),
            C64::new(-0.1, 0.0),
        ]));
        assert!(DensityMatrix::from_dims(&[2], neg).is_err());
        let one = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
        assert!(DensityMatrix::from_dims(&[1], one).is_err(), "dim < 2");
    }

    #[test]
    fn partial_trace_examples() {
        let r = basis(&[2, 2], 0).partial_trace(&[0]).unwrap();
        assert!(r.max_abs_diff(&basis(&[2], 0)) < 1e-15);
        let a = bell().partial_trace(&[0]).unwrap();
        let half = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        assert!(crate::linalg::max_abs_diff(a.matrix(), &half) < 1e-15);
        assert!(bell().partial_trace(&[]).is_err());
        assert!(bell().partial_trace(&[2]).is_err());
    }

    #[test]
    fn partial_trace_by_index_summation() {
        // keep {A,B} of (|000><000| + |1+1><1+1|)/2, checked by explicit summation
        let cx = make_named_state("paper_cx_1p11", &[]).unwrap();
        let ab = cx.partial_trace(&[0, 1]).unwrap();
        let m = cx.matrix();
        for i in 0..4 {
            for j in 0..4 {
                let expect = m[(2 * i, 2 * j)] + m[(2 * i + 1, 2 * j + 1)];
                assert!((ab.matrix()[(i, j)] - expect).norm() < 1e-15);
            }
        }
        // and against the closed form (|00><00| + |1+><1+|)/2
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let p0 = DensityMatrix::from_pure(&[2, 2], &ket(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        let p1 = DensityMatrix::from_pure(&[2, 2], &ket(&[0.0, 0.0, s, s])).unwrap();
        let expected = (p0.matrix() + p1.matrix()) * C64::new(0.5, 0.0);
        assert!(crate::linalg::max_abs_diff(ab.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn tensor_examples() {
        let t = basis(&[2], 0).tensor(&basis(&[2], 1).renamed(&["B"]).unwrap()).unwrap();
        assert!(t.max_abs_diff(&basis(&[2, 2], 1)) < 1e-15);
        assert_eq!(t.names(), vec!["A", "B"]);
        assert!(basis(&[2], 0).tensor(&basis(&[2], 1)).is_err(), "label collision");
        let half = DensityMatrix::from_dims(&[2], CMatrix::identity(2, 2) * C64::new(0.5, 0.0))
            .unwrap()
            .renamed(&["C"])
            .unwrap();
        let big = bell().tensor(&half).unwrap();
        assert_eq!(big.dim(), 8);
        assert!((big.entropy() - (bell().entropy() + half.entropy())).abs() < 1e-9);
        assert!((big.entropy() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn relative_entropy_examples() {
        let b = bell();
        assert!(relative_entropy(&b, &b).unwrap().abs() < 1e-9);
        let half = DensityMatrix::from_dims(&[2], CMatrix::identity(2, 2) * C64::new(0.5, 0.0)).unwrap();
        assert!((relative_entropy(&basis(&[2], 0), &half).unwrap() - 1.0).abs() < 1e-12);
        let prod = product_of_marginals(&b, &[vec![0], vec![1]]).unwrap();
        let mi = b.partial_trace(&[0]).unwrap().entropy() + b.partial_trace(&[1]).unwrap().entropy()
            - b.entropy();
        assert!((relative_entropy(&b, &prod).unwrap() - mi).abs() < 1e-9);
        assert!((mi - 2.0).abs() < 1e-9);
        assert_eq!(relative_entropy(&half, &basis(&[2], 0)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn mutual_information_examples() {
        let ab = Partition::parse("A|B").unwrap();
        assert!((mutual_information(&bell(), &ab).unwrap() - 2.0).abs() < 1e-9);
        let prod = basis(&[2, 2], 3);
        assert!(mutual_information(&prod, &ab).unwrap().abs() < 1e-12);
        assert!(mutual_information(&bell(), &Partition::parse("A").unwrap()).is_err());
        // brute-force eigenvalues for A|B|C on the counterexample state
        let cx = make_named_state("paper_cx_1p11", &[]).unwrap();
        let abc = Partition::parse("A|B|C").unwrap();
        let brute: f64 = (0..3)
            .map(|k| shannon_of(&cx.partial_trace(&[k]).unwrap()))
            .sum::<f64>()
            - shannon_of(&cx);
        assert!((mutual_information(&cx, &abc).unwrap() - brute).abs() < 1e-9);
    }

    fn shannon_of(r: &DensityMatrix) -> f64 {
        let eig = r.matrix().clone().symmetric_eigen();
        eig.eigenvalues
            .iter()
            .filter(|&&x| x > 1e-15)
            .map(|&x| -x * x.log2())
            .sum()
    }

    #[test]
    fn permutation_round_trip() {
        let r = sample_random_state(&[2, 3, 2], 3, 5).unwrap();
        let p = r.permuted(&[2, 0, 1]).unwrap();
        assert_eq!(p.names(), vec!["C", "A", "B"]);
        assert_eq!(p.dims(), vec![2, 2, 3]);
        let back = p.permuted(&[1, 2, 0]).unwrap();
        assert!(back.max_abs_diff(&r) < 1e-15);
        let bc = r.partial_trace(&[1, 2]).unwrap();
        let bc2 = p.partial_trace(&[0, 2]).unwrap().permuted(&[1, 0]).unwrap();
        assert!(bc.max_abs_diff(&bc2) < 1e-14);
    }
}
