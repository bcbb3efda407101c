//! Linear operators known through their action, with optional structure
//! (diagonal, sparse, block-diagonal, permutation-wrapped) that the phi
//! evaluator exploits.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use nalgebra_sparse::{CooMatrix, CsrMatrix};

use crate::error::{Error, Result};
use crate::krylov::PhiEvaluator;

/// Bijection on `0..n`. As a matrix, P has a one at (forward[i], i), so
/// `(P^T v)[i] = v[forward[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPermutation {
    forward: Vec<usize>,
    inverse: Vec<usize>,
}

impl IndexPermutation {
    pub fn new(forward: Vec<usize>) -> Result<Self> {
        let n = forward.len();
        let mut inverse = vec![usize::MAX; n];
        for (i, &f) in forward.iter().enumerate() {
            if f >= n || inverse[f] != usize::MAX {
                return Err(Error::contract(format!("index {f} breaks the permutation of 0..{n}")));
            }
            inverse[f] = i;
        }
        Ok(IndexPermutation { forward, inverse })
    }

    pub fn identity(n: usize) -> Self {
        IndexPermutation {
            forward: (0..n).collect(),
            inverse: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn forward(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> IndexPermutation {
        IndexPermutation {
            forward: self.inverse.clone(),
            inverse: self.forward.clone(),
        }
    }

    /// P^T v
    pub fn gather(&self, v: &[f64]) -> Vec<f64> {
        self.forward.iter().map(|&f| v[f]).collect()
    }

    /// P w
    pub fn scatter(&self, w: &[f64]) -> Vec<f64> {
        self.inverse.iter().map(|&i| w[i]).collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut p = DMatrix::zeros(n, n);
        for (i, &f) in self.forward.iter().enumerate() {
            p[(f, i)] = 1.0;
        }
        p
    }
}

pub type ActionFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

pub enum Structure {
    Dense(DMatrix<f64>),
    Diagonal(Vec<f64>),
    Sparse(CsrMatrix<f64>),
    BlockDiagonal(Vec<LinearOperator>),
    /// P inner P^T
    Permuted {
        inner: LinearOperator,
        perm: IndexPermutation,
    },
    /// Matrix-free action `out = A v`.
    Action(ActionFn),
}

struct Inner {
    dim: usize,
    structure: Structure,
    symmetric: bool,
    norm: OnceLock<f64>,
}

/// Immutable, cheaply clonable operator handle.
#[derive(Clone)]
pub struct LinearOperator(Arc<Inner>);

impl fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.0.structure {
            Structure::Dense(_) => "dense",
            Structure::Diagonal(_) => "diagonal",
            Structure::Sparse(_) => "sparse",
            Structure::BlockDiagonal(_) => "block-diagonal",
            Structure::Permuted { .. } => "permuted",
            Structure::Action(_) => "action",
        };
        write!(f, "LinearOperator({kind}, dim {})", self.0.dim)
    }
}

impl LinearOperator {
    fn build(dim: usize, structure: Structure, symmetric: bool) -> Self {
        LinearOperator(Arc::new(Inner {
            dim,
            structure,
            symmetric,
            norm: OnceLock::new(),
        }))
    }

    pub fn dense(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::contract(format!("operator must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        let symmetric = m == m.transpose();
        Ok(Self::build(m.nrows(), Structure::Dense(m), symmetric))
    }

    pub fn diagonal(d: Vec<f64>) -> Self {
        Self::build(d.len(), Structure::Diagonal(d), true)
    }

    pub fn zero(n: usize) -> Self {
        Self::diagonal(vec![0.0; n])
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(vec![1.0; n])
    }

    pub fn sparse(m: CsrMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::contract(format!("operator must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        let symmetric = m == m.transpose();
        Ok(Self::build(m.nrows(), Structure::Sparse(m), symmetric))
    }

    /// Sparse operator from (row, col, value) entries; duplicates are summed.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        let mut coo = CooMatrix::new(n, n);
        for &(i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::contract(format!("entry ({i}, {j}) outside {n}x{n}")));
            }
            coo.push(i, j, v);
        }
        Self::sparse(CsrMatrix::from(&coo))
    }

    pub fn block_diagonal(blocks: Vec<LinearOperator>) -> Self {
        let dim = blocks.iter().map(LinearOperator::dim).sum();
        let symmetric = blocks.iter().all(LinearOperator::is_symmetric);
        Self::build(dim, Structure::BlockDiagonal(blocks), symmetric)
    }

    /// The operator P inner P^T, stored without forming it.
    pub fn permuted(inner: LinearOperator, perm: IndexPermutation) -> Result<Self> {
        if inner.dim() != perm.len() {
            return Err(Error::contract(format!(
                "permutation of length {} for operator of dimension {}",
                perm.len(),
                inner.dim()
            )));
        }
        let symmetric = inner.is_symmetric();
        Ok(Self::build(inner.dim(), Structure::Permuted { inner, perm }, symmetric))
    }

    /// Matrix-free operator. `symmetric` selects the Lanczos path.
    pub fn action(dim: usize, symmetric: bool, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Self::build(dim, Structure::Action(Arc::new(f)), symmetric)
    }

    /// Sum of operators of equal dimension. Diagonal and sparse terms are
    /// merged into one stored matrix; anything else becomes an action.
    pub fn sum(ops: &[LinearOperator]) -> Result<Self> {
        let n = ops
            .first()
            .map(LinearOperator::dim)
            .ok_or_else(|| Error::contract("empty operator sum"))?;
        if ops.iter().any(|o| o.dim() != n) {
            return Err(Error::contract("operator sum: dimension mismatch"));
        }
        if ops.len() == 1 {
            return Ok(ops[0].clone());
        }
        if ops.iter().all(|o| matches!(o.structure(), Structure::Diagonal(_))) {
            let mut d = vec![0.0; n];
            for o in ops {
                if let Structure::Diagonal(x) = o.structure() {
                    d.iter_mut().zip(x).for_each(|(a, b)| *a += b);
                }
            }
            return Ok(Self::diagonal(d));
        }
        if ops
            .iter()
            .all(|o| matches!(o.structure(), Structure::Diagonal(_) | Structure::Sparse(_)))
        {
            let mut t = Vec::new();
            for o in ops {
                match o.structure() {
                    Structure::Diagonal(x) => t.extend(x.iter().enumerate().map(|(i, &v)| (i, i, v))),
                    Structure::Sparse(m) => t.extend(m.triplet_iter().map(|(i, j, &v)| (i, j, v))),
                    _ => unreachable!(),
                }
            }
            return Self::from_triplets(n, &t);
        }
        let parts: Vec<LinearOperator> = ops.to_vec();
        let symmetric = parts.iter().all(LinearOperator::is_symmetric);
        Ok(Self::action(n, symmetric, move |v, out| {
            let mut tmp = vec![0.0; v.len()];
            out.iter_mut().for_each(|x| *x = 0.0);
            for p in &parts {
                p.apply_into(v, &mut tmp);
                out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
            }
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn structure(&self) -> &Structure {
        &self.0.structure
    }

    pub fn is_symmetric(&self) -> bool {
        self.0.symmetric
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::contract(format!(
                "vector of length {} applied to operator of dimension {}",
                v.len(),
                self.dim()
            )));
        }
        let mut out = vec![0.0; self.dim()];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// `out = A v`; lengths must already match.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim());
        debug_assert_eq!(out.len(), self.dim());
        match &self.0.structure {
            Structure::Dense(m) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = m.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
                }
            }
            Structure::Diagonal(d) => {
                for ((o, a), b) in out.iter_mut().zip(d).zip(v) {
                    *o = a * b;
                }
            }
            Structure::Sparse(m) => {
                let (offsets, cols, vals) = (m.row_offsets(), m.col_indices(), m.values());
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for p in offsets[i]..offsets[i + 1] {
                        acc += vals[p] * v[cols[p]];
                    }
                    *o = acc;
                }
            }
            Structure::BlockDiagonal(blocks) => {
                let mut start = 0;
                for b in blocks {
                    let end = start + b.dim();
                    b.apply_into(&v[start..end], &mut out[start..end]);
                    start = end;
                }
            }
            Structure::Permuted { inner, perm } => {
                let pv = perm.gather(v);
                let mut w = vec![0.0; self.dim()];
                inner.apply_into(&pv, &mut w);
                out.copy_from_slice(&perm.scatter(&w));
            }
            Structure::Action(f) => f(v, out),
        }
    }

    /// Estimate of the 1-norm: exact for stored matrices, a lower bound from
    /// sampled columns for matrix-free operators.
    pub fn norm_estimate(&self) -> f64 {
        *self.0.norm.get_or_init(|| self.compute_norm())
    }

    fn compute_norm(&self) -> f64 {
        let n = self.dim();
        match &self.0.structure {
            Structure::Dense(m) => crate::phi::norm1(m),
            Structure::Diagonal(d) => d.iter().fold(0.0, |a, x| a.max(x.abs())),
            Structure::Sparse(m) => {
                let mut cols = vec![0.0; n];
                for (_, j, v) in m.triplet_iter() {
                    cols[j] += v.abs();
                }
                cols.into_iter().fold(0.0, f64::max)
            }
            Structure::BlockDiagonal(blocks) => blocks.iter().map(LinearOperator::norm_estimate).fold(0.0, f64::max),
            Structure::Permuted { inner, .. } => inner.norm_estimate(),
            Structure::Action(_) => self.sampled_norm(),
        }
    }

    fn sampled_norm(&self) -> f64 {
        const EXACT_UP_TO: usize = 256;
        const SAMPLES: usize = 32;
        let n = self.dim();
        let column_norm = |j: usize| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let mut out = vec![0.0; n];
            self.apply_into(&e, &mut out);
            out.iter().map(|x| x.abs()).sum::<f64>()
        };
        if n <= EXACT_UP_TO {
            return (0..n).map(column_norm).fold(0.0, f64::max);
        }
        let mut best = (0..SAMPLES).map(|s| column_norm(s * n / SAMPLES)).fold(0.0, f64::max);
        let ones = vec![1.0; n];
        let mut out = vec![0.0; n];
        self.apply_into(&ones, &mut out);
        best = best.max(out.iter().map(|x| x.abs()).sum::<f64>() / n as f64);
        best
    }

    /// Explicit matrix, for small problems and test oracles.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        match &self.0.structure {
            Structure::Dense(m) => m.clone(),
            Structure::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
            Structure::Sparse(m) => {
                let mut out = DMatrix::zeros(n, n);
                for (i, j, v) in m.triplet_iter() {
                    out[(i, j)] += *v;
                }
                out
            }
            Structure::BlockDiagonal(blocks) => {
                let mut out = DMatrix::zeros(n, n);
                let mut s = 0;
                for b in blocks {
                    let d = b.dim();
                    out.view_mut((s, s), (d, d)).copy_from(&b.to_dense());
                    s += d;
                }
                out
            }
            Structure::Permuted { inner, perm } => {
                let p = perm.to_matrix();
                &p * inner.to_dense() * p.transpose()
            }
            Structure::Action(_) => {
                let mut out = DMatrix::zeros(n, n);
                for j in 0..n {
                    let mut e = vec![0.0; n];
                    e[j] = 1.0;
                    let mut col = vec![0.0; n];
                    self.apply_into(&e, &mut col);
                    out.set_column(j, &nalgebra::DVector::from_vec(col));
                }
                out
            }
        }
    }
}

/// phi_k(scale P inner P^T) v evaluated as P phi_k(scale inner) (P^T v).
pub fn permuted_phi_action(
    eval: &PhiEvaluator,
    inner: &LinearOperator,
    perm: &IndexPermutation,
    k: usize,
    scale: f64,
    v: &[f64],
) -> Result<Vec<f64>> {
    if v.len() != inner.dim() || perm.len() != inner.dim() {
        return Err(Error::contract("permuted phi action: dimension mismatch"));
    }
    let (w, _) = eval.phi(inner, scale, k, &perm.gather(v), None)?;
    Ok(perm.scatter(&w))
}

/// Psi(scale P inner P^T) v with the same permute, evaluate, permute back.
pub fn permuted_psi_action(
    eval: &PhiEvaluator,
    inner: &LinearOperator,
    perm: &IndexPermutation,
    weights: &[f64],
    scale: f64,
    v: &[f64],
) -> Result<Vec<f64>> {
    if v.len() != inner.dim() || perm.len() != inner.dim() {
        return Err(Error::contract("permuted psi action: dimension mismatch"));
    }
    let (w, _) = eval.psi(inner, scale, weights, &perm.gather(v), None)?;
    Ok(perm.scatter(&w))
}
