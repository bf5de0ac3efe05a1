//! Rank-1 projective measurements: single bases, outcome-conditioned trees and
//! unconditioned products of local bases.
//!
//! A basis on a block of dimension `d` is `{U|j>}` with `U` a product of
//! `d(d-1)/2` Givens rotations, each carrying an angle and a phase:
//!
//! ```text
//! G(theta, phi) on (p, q) = [[cos theta, -e^{-i phi} sin theta],
//!                            [e^{i phi} sin theta, cos theta]]
//! ```
//!
//! applied in the order (0,1), (0,2), ..., (0,d-1), (1,2), ... Column phases
//! are dropped since projectors do not see them. For a qubit this is the Bloch
//! parameterization with polar angle `2 theta` and azimuth `phi`.

use serde::Serialize;

use crate::error::{invalid_arg, Result};
use crate::linalg::{self, CMatrix, C64, ONE, ZERO};
use crate::partition::Partition;
use crate::qstate::DensityMatrix;

pub fn n_basis_params(d: usize) -> usize {
    d * (d - 1)
}

fn givens_pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(move |p| (p + 1..d).map(move |q| (p, q)))
}

pub fn unitary_from_params(d: usize, params: &[f64]) -> CMatrix {
    debug_assert_eq!(params.len(), n_basis_params(d));
    let mut u = CMatrix::identity(d, d);
    for (k, (p, q)) in givens_pairs(d).enumerate() {
        let (s, c) = params[2 * k].sin_cos();
        let phase = C64::from_polar(1.0, params[2 * k + 1]);
        let gqp = phase * s;
        let gpq = -phase.conj() * s;
        for r in 0..d {
            let up = u[(r, p)];
            let uq = u[(r, q)];
            u[(r, p)] = up * c + uq * gqp;
            u[(r, q)] = up * gpq + uq * c;
        }
    }
    u
}

/// Inverts [`unitary_from_params`] up to column phases: eliminates the
/// sub-diagonal column by column with the same rotation order.
pub fn params_from_unitary(u: &CMatrix) -> Result<Vec<f64>> {
    let d = u.nrows();
    if u.ncols() != d {
        return Err(invalid_arg("basis matrix must be square"));
    }
    let gram = u.adjoint() * u;
    if linalg::max_abs_diff(&gram, &CMatrix::identity(d, d)) > 1e-8 {
        return Err(invalid_arg("basis matrix is not unitary"));
    }
    let mut w = u.clone();
    let mut params = Vec::with_capacity(n_basis_params(d));
    for (p, q) in givens_pairs(d) {
        let a = w[(p, p)];
        let b = w[(q, p)];
        let theta = b.norm().atan2(a.norm());
        let phi = if b.norm() == 0.0 {
            0.0
        } else if a.norm() == 0.0 {
            b.arg()
        } else {
            b.arg() - a.arg()
        };
        let (s, c) = theta.sin_cos();
        let phase = C64::from_polar(1.0, phi);
        // rows (p, q) <- G^dagger rows
        for col in 0..d {
            let wp = w[(p, col)];
            let wq = w[(q, col)];
            w[(p, col)] = wp * c + phase.conj() * s * wq;
            w[(q, col)] = -phase * s * wp + wq * c;
        }
        params.push(theta);
        params.push(phi);
    }
    Ok(params)
}

/// Orthonormal basis on a block of subsystems treated as one particle.
#[derive(Clone, Debug, Serialize)]
pub struct ProjectiveBasis {
    /// Subsystem positions of the measured block, ascending.
    pub target: Vec<usize>,
    pub dim: usize,
    pub params: Vec<f64>,
    #[serde(skip)]
    unitary: CMatrix,
}

impl ProjectiveBasis {
    pub fn from_params(target: Vec<usize>, dim: usize, params: Vec<f64>) -> Result<Self> {
        if dim < 2 {
            return Err(invalid_arg("basis dimension must be at least 2"));
        }
        if params.len() != n_basis_params(dim) {
            return Err(invalid_arg(format!(
                "a basis of dimension {dim} takes {} parameters, got {}",
                n_basis_params(dim),
                params.len()
            )));
        }
        let unitary = unitary_from_params(dim, &params);
        Ok(Self {
            target,
            dim,
            params,
            unitary,
        })
    }

    pub fn computational(target: Vec<usize>, dim: usize) -> Self {
        Self::from_params(target, dim, vec![0.0; n_basis_params(dim)]).expect("valid shape")
    }

    /// Basis whose `j`-th vector is column `j` of `u`.
    pub fn from_unitary(target: Vec<usize>, u: &CMatrix) -> Result<Self> {
        let params = params_from_unitary(u)?;
        Self::from_params(target, u.nrows(), params)
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    pub fn vector(&self, j: usize) -> Vec<C64> {
        self.unitary.column(j).iter().copied().collect()
    }

    pub fn projector(&self, j: usize) -> CMatrix {
        let v = self.unitary.column(j);
        v * v.adjoint()
    }
}

fn block_dim(dims: &[usize], block: &[usize]) -> Result<usize> {
    block
        .iter()
        .map(|&p| {
            dims.get(p)
                .copied()
                .ok_or_else(|| invalid_arg(format!("subsystem position {p} out of range")))
        })
        .product()
}

/// `sum_j (Pi_j (x) I) rho (Pi_j (x) I)`.
pub fn apply_basis(rho: &DensityMatrix, basis: &ProjectiveBasis) -> Result<DensityMatrix> {
    let dims = rho.dims();
    if basis.target.is_empty() || block_dim(&dims, &basis.target)? != basis.dim {
        return Err(invalid_arg("basis target does not match the state's subsystems"));
    }
    let w = linalg::embed_operator(basis.unitary(), &dims, &basis.target);
    let mut rotated = w.adjoint() * rho.matrix() * &w;
    let split = linalg::split_indices(&dims, &basis.target);
    for r in 0..rotated.nrows() {
        for c in 0..rotated.ncols() {
            if split[r].0 != split[c].0 {
                rotated[(r, c)] = ZERO;
            }
        }
    }
    let out = &w * rotated * w.adjoint();
    Ok(DensityMatrix::from_trusted(rho.labels().to_vec(), out))
}

/// Applies bases on disjoint blocks one after another (they commute).
pub fn apply_local(rho: &DensityMatrix, bases: &[ProjectiveBasis]) -> Result<DensityMatrix> {
    let mut used: Vec<usize> = Vec::new();
    let mut out = rho.clone();
    for b in bases {
        if b.target.iter().any(|t| used.contains(t)) {
            return Err(invalid_arg("local bases must act on disjoint blocks"));
        }
        used.extend(&b.target);
        out = apply_basis(&out, b)?;
    }
    Ok(out)
}

/// Shape bookkeeping for a conditional measurement tree over blocks
/// `X1 | ... | Xn` (last block unmeasured).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeLayout {
    pub block_dims: Vec<usize>,
    /// Parameter offset of the first node at each depth.
    pub offsets: Vec<usize>,
    pub node_counts: Vec<usize>,
    pub n_params: usize,
}

impl TreeLayout {
    pub fn new(block_dims: &[usize]) -> Self {
        let depth = block_dims.len().saturating_sub(1);
        let mut offsets = Vec::with_capacity(depth);
        let mut node_counts = Vec::with_capacity(depth);
        let mut off = 0;
        let mut nodes = 1;
        for &d in &block_dims[..depth] {
            offsets.push(off);
            node_counts.push(nodes);
            off += nodes * n_basis_params(d);
            nodes *= d;
        }
        Self {
            block_dims: block_dims.to_vec(),
            offsets,
            node_counts,
            n_params: off,
        }
    }

    pub fn depth(&self) -> usize {
        self.offsets.len()
    }

    pub fn node_params<'a>(&self, params: &'a [f64], depth: usize, node: usize) -> &'a [f64] {
        let np = n_basis_params(self.block_dims[depth]);
        let start = self.offsets[depth] + node * np;
        &params[start..start + np]
    }

    pub fn node_range(&self, depth: usize, node: usize) -> std::ops::Range<usize> {
        let np = n_basis_params(self.block_dims[depth]);
        let start = self.offsets[depth] + node * np;
        start..start + np
    }
}

/// Outcome-conditioned bases: the node at depth `t` for outcome string
/// `(j_1..j_t)` measures block `t`; children of node `i` at depth `t` are
/// `i * d_t + j` at depth `t + 1`.
#[derive(Clone, Debug, Serialize)]
pub struct MeasurementTree {
    pub partition: Partition,
    pub block_dims: Vec<usize>,
    pub nodes: Vec<Vec<ProjectiveBasis>>,
}

impl MeasurementTree {
    /// `dims` are the subsystem dimensions of the state the tree acts on;
    /// `partition` lists blocks by position in that state.
    pub fn from_params(dims: &[usize], partition: &Partition, params: &[f64]) -> Result<Self> {
        let block_dims = partition
            .blocks()
            .iter()
            .map(|b| block_dim(dims, b))
            .collect::<Result<Vec<_>>>()?;
        if block_dims.len() < 2 {
            return Err(invalid_arg("a measurement tree needs at least two blocks"));
        }
        let layout = TreeLayout::new(&block_dims);
        if params.len() != layout.n_params {
            return Err(invalid_arg(format!(
                "tree over {partition} takes {} parameters, got {}",
                layout.n_params,
                params.len()
            )));
        }
        let nodes = (0..layout.depth())
            .map(|t| {
                (0..layout.node_counts[t])
                    .map(|i| {
                        ProjectiveBasis::from_params(
                            partition.blocks()[t].clone(),
                            block_dims[t],
                            layout.node_params(params, t, i).to_vec(),
                        )
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            partition: partition.clone(),
            block_dims,
            nodes,
        })
    }

    pub fn computational(dims: &[usize], partition: &Partition) -> Result<Self> {
        let n = Self::n_params_for(dims, partition)?;
        Self::from_params(dims, partition, &vec![0.0; n])
    }

    /// Every node at depth `t` uses `per_depth[t]` (no conditioning).
    pub fn unconditioned(dims: &[usize], partition: &Partition, per_depth: &[ProjectiveBasis]) -> Result<Self> {
        let mut params = Vec::new();
        let mut tree = Self::computational(dims, partition)?;
        if per_depth.len() != tree.depth() {
            return Err(invalid_arg("one basis per measured block is required"));
        }
        for (t, b) in per_depth.iter().enumerate() {
            if b.dim != tree.block_dims[t] {
                return Err(invalid_arg("basis dimension does not match its block"));
            }
            for _ in 0..tree.nodes[t].len() {
                params.extend_from_slice(&b.params);
            }
        }
        tree = Self::from_params(dims, partition, &params)?;
        Ok(tree)
    }

    pub fn n_params_for(dims: &[usize], partition: &Partition) -> Result<usize> {
        let block_dims = partition
            .blocks()
            .iter()
            .map(|b| block_dim(dims, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(TreeLayout::new(&block_dims).n_params)
    }

    pub fn depth(&self) -> usize {
        self.nodes.len()
    }

    pub fn layout(&self) -> TreeLayout {
        TreeLayout::new(&self.block_dims)
    }

    pub fn params(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .flatten()
            .flat_map(|b| b.params.iter().copied())
            .collect()
    }

    /// The product basis that this tree induces on blocks `0..depth` seen as one
    /// particle: column `(j_1..j_depth)` is `|b_{j_1}> (x) |b_{j_2|j_1}> (x) ...`.
    pub fn induced_basis(&self, depth: usize) -> Result<ProjectiveBasis> {
        if depth == 0 || depth > self.depth() {
            return Err(invalid_arg(format!("depth {depth} outside 1..={}", self.depth())));
        }
        let d: usize = self.block_dims[..depth].iter().product();
        let mut u = CMatrix::zeros(d, d);
        for (col, v) in self.branch_vectors(depth).into_iter().enumerate() {
            for (r, x) in v.into_iter().enumerate() {
                u[(r, col)] = x;
            }
        }
        let target: Vec<usize> = self.partition.blocks()[..depth].iter().flatten().copied().collect();
        ProjectiveBasis::from_unitary(target, &u)
    }

    /// Product vectors for every outcome string of the first `depth` rounds, in
    /// mixed-radix order.
    fn branch_vectors(&self, depth: usize) -> Vec<Vec<C64>> {
        let mut out: Vec<(usize, Vec<C64>)> = vec![(0, vec![ONE])];
        for t in 0..depth {
            let d = self.block_dims[t];
            out = out
                .into_iter()
                .flat_map(|(node, v)| {
                    let basis = &self.nodes[t][node];
                    (0..d)
                        .map(|j| {
                            let b = basis.vector(j);
                            let kron: Vec<C64> = v.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect();
                            (node * d + j, kron)
                        })
                        .collect::<Vec<_>>()
                })
                .collect();
        }
        out.into_iter().map(|(_, v)| v).collect()
    }
}

/// State after the first `depth` conditional rounds, summed over outcome strings.
pub fn apply_tree(rho: &DensityMatrix, tree: &MeasurementTree, depth: usize) -> Result<DensityMatrix> {
    if depth > tree.depth() {
        return Err(invalid_arg(format!("depth {depth} exceeds tree depth {}", tree.depth())));
    }
    let dims = rho.dims();
    for (b, &d) in tree.partition.blocks().iter().zip(&tree.block_dims) {
        if block_dim(&dims, b)? != d {
            return Err(invalid_arg("tree blocks do not match the state"));
        }
    }
    if depth == 0 {
        return Ok(rho.clone());
    }
    let targets: Vec<usize> = tree.partition.blocks()[..depth].iter().flatten().copied().collect();
    let mut out = CMatrix::zeros(rho.dim(), rho.dim());
    for v in tree.branch_vectors(depth) {
        let v = nalgebra::DVector::from_vec(v);
        let proj = linalg::embed_operator(&(&v * v.adjoint()), &dims, &targets);
        out += &proj * rho.matrix() * &proj;
    }
    Ok(DensityMatrix::from_trusted(rho.labels().to_vec(), out))
}

/// `S_{X_k | Pi^{X_1..X_{k-1}}}` for 1-based `k`, via the post-measurement
/// state: `S(post restricted to X_1..X_k) - S(post restricted to X_1..X_{k-1})`.
pub fn conditional_entropy_post(rho: &DensityMatrix, tree: &MeasurementTree, k: usize) -> Result<f64> {
    if k == 0 || k > tree.depth() + 1 {
        return Err(invalid_arg(format!("k = {k} outside 1..={}", tree.depth() + 1)));
    }
    let post = apply_tree(rho, tree, k - 1)?;
    let blocks = tree.partition.blocks();
    let upto: Vec<usize> = blocks[..k].iter().flatten().copied().collect();
    let before: Vec<usize> = blocks[..k - 1].iter().flatten().copied().collect();
    let s_before = if before.is_empty() { 0.0 } else { post.partial_trace(&before)?.entropy() };
    Ok(post.partial_trace(&upto)?.entropy() - s_before)
}

/// `sum_{k=2..n} S_{X_k | Pi^{X_1..X_{k-1}}}` as an ensemble average over
/// outcome branches. `m` must be the state on exactly the tree's blocks, in
/// order, so that block `t` is the `t`-th tensor factor.
pub(crate) fn branch_conditional_sum(m: &CMatrix, layout: &TreeLayout, params: &[f64]) -> f64 {
    branch_sum(m, layout, params, 0, 0)
}

fn branch_sum(sigma: &CMatrix, layout: &TreeLayout, params: &[f64], t: usize, node: usize) -> f64 {
    let d = layout.block_dims[t];
    let u = unitary_from_params(d, layout.node_params(params, t, node));
    let last = t + 1 == layout.depth();
    let mut acc = 0.0;
    let mut v = vec![ZERO; d];
    for j in 0..d {
        for (a, x) in v.iter_mut().enumerate() {
            *x = u[(a, j)];
        }
        let branch = linalg::contract_leading(sigma, &v);
        if linalg::real_trace(&branch) < 1e-14 {
            continue;
        }
        if last {
            acc += linalg::weighted_entropy(&branch);
        } else {
            let next = linalg::trace_out_tail(&branch, layout.block_dims[t + 1]);
            acc += linalg::weighted_entropy(&next);
            acc += branch_sum(&branch, layout, params, t + 1, node * d + j);
        }
    }
    acc
}

/// Ensemble route for the whole chain of conditional entropies of a tree.
pub fn conditional_entropy_chain(rho: &DensityMatrix, tree: &MeasurementTree) -> Result<f64> {
    let labels = tree.partition.labels();
    let reduced = rho.partial_trace(&labels)?;
    let layout = tree.layout();
    if reduced.dims().iter().product::<usize>() != layout.block_dims.iter().product::<usize>() {
        return Err(invalid_arg("tree blocks do not match the state"));
    }
    Ok(branch_conditional_sum(reduced.matrix(), &layout, &tree.params()))
}

/// One unconditioned basis per block of a partition.
#[derive(Clone, Debug, Serialize)]
pub struct ProductMeasurement {
    pub partition: Partition,
    pub bases: Vec<ProjectiveBasis>,
}

impl ProductMeasurement {
    pub fn from_params(dims: &[usize], partition: &Partition, params: &[f64]) -> Result<Self> {
        let mut off = 0;
        let mut bases = Vec::with_capacity(partition.n_blocks());
        for b in partition.blocks() {
            let d = block_dim(dims, b)?;
            let np = n_basis_params(d);
            let slice = params
                .get(off..off + np)
                .ok_or_else(|| invalid_arg("too few product-measurement parameters"))?;
            bases.push(ProjectiveBasis::from_params(b.clone(), d, slice.to_vec())?);
            off += np;
        }
        if off != params.len() {
            return Err(invalid_arg("too many product-measurement parameters"));
        }
        Ok(Self {
            partition: partition.clone(),
            bases,
        })
    }

    pub fn computational(dims: &[usize], partition: &Partition) -> Result<Self> {
        let n = Self::n_params_for(dims, partition)?;
        Self::from_params(dims, partition, &vec![0.0; n])
    }

    pub fn n_params_for(dims: &[usize], partition: &Partition) -> Result<usize> {
        partition
            .blocks()
            .iter()
            .map(|b| block_dim(dims, b).map(n_basis_params))
            .sum()
    }

    pub fn params(&self) -> Vec<f64> {
        self.bases.iter().flat_map(|b| b.params.iter().copied()).collect()
    }

    /// The same bases restricted to a subset of the blocks.
    pub fn restricted(&self, blocks: &[usize]) -> Result<Self> {
        let mut sub_blocks = Vec::new();
        let mut bases = Vec::new();
        for &i in blocks {
            let b = self
                .bases
                .get(i)
                .ok_or_else(|| invalid_arg(format!("no block {i}")))?;
            sub_blocks.push(b.target.clone());
            bases.push(b.clone());
        }
        Ok(Self {
            partition: Partition::new(sub_blocks)?,
            bases,
        })
    }
}

/// The full local dephasing channel `Phi(rho) = sum_k Pi_k rho Pi_k`.
pub fn apply_product(rho: &DensityMatrix, m: &ProductMeasurement) -> Result<DensityMatrix> {
    let mut covered = m.partition.labels();
    covered.sort_unstable();
    if covered != (0..rho.n_subsystems()).collect::<Vec<_>>() {
        return Err(invalid_arg(format!(
            "product measurement over {} does not cover all subsystems",
            m.partition
        )));
    }
    apply_local(rho, &m.bases)
}

/// Outcome distribution of a product of bases on consecutive blocks covering
/// the whole matrix: `p_k = <k| U^dagger m U |k>` with `U = U_1 (x) U_2 (x) ...`.
pub(crate) fn product_outcome_probabilities(m: &CMatrix, unitaries: &[CMatrix]) -> Vec<f64> {
    let mut u = CMatrix::from_element(1, 1, ONE);
    for b in unitaries {
        u = u.kronecker(b);
    }
    let mu = m * &u;
    (0..u.ncols())
        .map(|k| {
            let mut acc = ZERO;
            for r in 0..u.nrows() {
                acc += u[(r, k)].conj() * mu[(r, k)];
            }
            acc.re.max(0.0)
        })
        .collect()
}
