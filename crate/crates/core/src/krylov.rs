//! Adaptive Arnoldi/Lanczos projections for phi_k(scale A) b and Psi
//! combinations, plus the structure-aware evaluator the steppers call.

use std::fmt;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operators::{LinearOperator, Structure};
use crate::phi::{combine_chain, phi_chain_dense, phi_scalar_all, MAX_PHI_ORDER};

/// Subspace sizes at which the error estimate is evaluated.
pub const SCHEDULE: [usize; 16] = [1, 2, 3, 4, 6, 8, 11, 15, 20, 27, 36, 46, 57, 70, 85, 100];
pub const DEFAULT_MAX_DIM: usize = 100;
/// Projection tolerance for fixed-step runs.
pub const FIXED_STEP_TOL: f64 = 1e-12;

const BREAKDOWN_RATIO: f64 = 1e-14;
/// Multiple of eps * beta * |scale| * ||A|| below which the estimate is
/// indistinguishable from the rounding error of the matrix-vector products.
const ROUNDING_FLOOR: f64 = 16.0;

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovOptions {
    pub tol: f64,
    pub max_dim: usize,
    /// Dimension used by the previous projection of the same kind.
    pub hint: Option<usize>,
    /// Overrides the operator's own symmetry flag.
    pub symmetric: Option<bool>,
    /// Accept estimates at rounding level even when `tol` is smaller.
    pub rounding_floor: bool,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            tol: FIXED_STEP_TOL,
            max_dim: DEFAULT_MAX_DIM,
            hint: None,
            symmetric: None,
            rounding_floor: true,
        }
    }
}

struct ChainCache {
    scale: f64,
    kmax: usize,
    chain: Vec<Vec<f64>>,
}

pub struct KrylovDecomposition {
    /// Orthonormal basis vectors v_1..v_M.
    pub basis: Vec<Vec<f64>>,
    /// Leading M x M block of the Hessenberg matrix.
    pub h: DMatrix<f64>,
    pub beta: f64,
    pub dim: usize,
    /// h_{M+1,M}; zero after a happy breakdown.
    pub h_next: f64,
    /// v_{M+1}, when the process did not break down.
    pub next: Option<Vec<f64>>,
    pub converged: bool,
    /// Last error estimate s_M (zero when exact).
    pub estimate: f64,
    n: usize,
    /// H came from the Lanczos recurrence.
    symmetric: bool,
    cache: Mutex<Option<ChainCache>>,
}

impl fmt::Debug for KrylovDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KrylovDecomposition")
            .field("dim", &self.dim)
            .field("beta", &self.beta)
            .field("h_next", &self.h_next)
            .field("converged", &self.converged)
            .field("estimate", &self.estimate)
            .finish()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// [phi_0..phi_kmax](scale H) e_1. Symmetric H goes through its
/// eigendecomposition, anything else through the augmented exponential.
fn reduced_phi_chain(h: &DMatrix<f64>, scale: f64, kmax: usize, symmetric: bool) -> Result<Vec<Vec<f64>>> {
    let m = h.nrows();
    if symmetric {
        let eig = SymmetricEigen::new(h.clone());
        let q = &eig.eigenvectors;
        let mut chain = vec![vec![0.0; m]; kmax + 1];
        for (i, &lam) in eig.eigenvalues.iter().enumerate() {
            let phis = phi_scalar_all(kmax, scale * lam)?;
            let w = q[(0, i)];
            for (k, c) in chain.iter_mut().enumerate() {
                let f = phis[k] * w;
                for (r, cr) in c.iter_mut().enumerate() {
                    *cr += q[(r, i)] * f;
                }
            }
        }
        return Ok(chain);
    }
    let mut e1 = vec![0.0; m];
    e1[0] = 1.0;
    phi_chain_dense(&(h * scale), &e1, kmax)
}

/// Error estimate beta |scale| h_{M+1,M} |e_M^T phi_1(scale H_M) e_1|.
fn estimate(h: &DMatrix<f64>, h_next: f64, beta: f64, scale: f64, symmetric: bool) -> Result<(f64, Vec<Vec<f64>>)> {
    let m = h.nrows();
    let chain = reduced_phi_chain(h, scale, 1, symmetric)?;
    Ok((beta * scale.abs() * h_next * chain[1][m - 1].abs(), chain))
}

/// Grows an orthonormal Krylov basis for (A, b) until the phi_1 error
/// estimate at a schedule index drops below `opts.tol`, or below the
/// rounding level when that is larger.
pub fn build_adaptive(op: &LinearOperator, b: &[f64], scale: f64, opts: &KrylovOptions) -> Result<KrylovDecomposition> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::contract(format!("Krylov input of length {} for dimension {n}", b.len())));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::contract("Krylov tolerance must be positive"));
    }
    let beta = norm2(b);
    if !beta.is_finite() {
        return Err(Error::NonFinite("Krylov input vector".into()));
    }
    let mut decomp = KrylovDecomposition {
        basis: Vec::new(),
        h: DMatrix::zeros(0, 0),
        beta,
        dim: 0,
        h_next: 0.0,
        next: None,
        converged: true,
        estimate: 0.0,
        n,
        symmetric: false,
        cache: Mutex::new(None),
    };
    if beta == 0.0 {
        return Ok(decomp);
    }
    let mcap = n.min(opts.max_dim).max(1);
    let first_check = match opts.hint {
        Some(hint) => SCHEDULE.iter().rev().find(|&&s| s < hint).copied().unwrap_or(SCHEDULE[0]),
        None => SCHEDULE[0],
    };
    let is_check = |m: usize| m == mcap || (m >= first_check && SCHEDULE.contains(&m));
    let symmetric = opts.symmetric.unwrap_or_else(|| op.is_symmetric());
    let breakdown = BREAKDOWN_RATIO * op.norm_estimate();
    let target = if opts.rounding_floor {
        opts.tol
            .max(ROUNDING_FLOOR * f64::EPSILON * beta * (scale.abs() * op.norm_estimate()).max(1.0))
    } else {
        opts.tol
    };

    let mut basis: Vec<Vec<f64>> = vec![b.iter().map(|x| x / beta).collect()];
    let mut hfull = DMatrix::<f64>::zeros(mcap + 1, mcap);
    let mut w = vec![0.0; n];
    let mut converged = false;
    let mut est = f64::INFINITY;
    let mut h_next = 0.0;
    let mut next = None;
    let mut cached = None;
    let mut m = 0;
    for j in 0..mcap {
        op.apply_into(&basis[j], &mut w);
        if symmetric {
            let lo = j.saturating_sub(1);
            for i in lo..=j {
                let c = dot(&w, &basis[i]);
                hfull[(i, j)] = c;
                axpy(-c, &basis[i], &mut w);
            }
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                if i >= lo {
                    hfull[(i, j)] += c;
                }
                axpy(-c, v, &mut w);
            }
            if j > 0 {
                // keep H exactly symmetric tridiagonal
                let s = 0.5 * (hfull[(j - 1, j)] + hfull[(j, j - 1)]);
                hfull[(j - 1, j)] = s;
                hfull[(j, j - 1)] = s;
            }
        } else {
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                hfull[(i, j)] = c;
                axpy(-c, v, &mut w);
            }
            for (i, v) in basis.iter().enumerate() {
                let c = dot(&w, v);
                hfull[(i, j)] += c;
                axpy(-c, v, &mut w);
            }
        }
        let hn = norm2(&w);
        if !hn.is_finite() {
            return Err(Error::NonFinite("Arnoldi iteration".into()));
        }
        m = j + 1;
        if hn <= breakdown {
            converged = true;
            est = 0.0;
            h_next = 0.0;
            break;
        }
        h_next = hn;
        hfull[(m, j)] = hn;
        let v_next: Vec<f64> = w.iter().map(|x| x / hn).collect();
        if m == n {
            converged = true;
            est = 0.0;
            next = Some(v_next);
            break;
        }
        if is_check(m) {
            let hm = hfull.view((0, 0), (m, m)).into_owned();
            let (s, chain) = estimate(&hm, hn, beta, scale, symmetric)?;
            est = s;
            if s <= target {
                converged = true;
                cached = Some(ChainCache { scale, kmax: 1, chain });
                next = Some(v_next);
                break;
            }
        }
        if m == mcap {
            next = Some(v_next);
            break;
        }
        basis.push(v_next);
    }
    decomp.h = hfull.view((0, 0), (m, m)).into_owned();
    decomp.symmetric = symmetric;
    decomp.basis = basis;
    decomp.dim = m;
    decomp.h_next = h_next;
    decomp.next = next;
    decomp.converged = converged;
    decomp.estimate = if est.is_finite() { est } else { 0.0 };
    *decomp.cache.lock().unwrap() = cached;
    Ok(decomp)
}

impl KrylovDecomposition {
    /// [phi_0..phi_kmax](scale H) e_1, cached per scale.
    fn reduced_chain(&self, scale: f64, kmax: usize) -> Result<Vec<Vec<f64>>> {
        let mut guard = self.cache.lock().unwrap();
        if let Some(c) = guard.as_ref() {
            if c.scale == scale && c.kmax >= kmax {
                return Ok(c.chain[..=kmax].to_vec());
            }
        }
        let chain = reduced_phi_chain(&self.h, scale, kmax, self.symmetric)?;
        *guard = Some(ChainCache {
            scale,
            kmax,
            chain: chain.clone(),
        });
        Ok(chain)
    }

    fn lift(&self, reduced: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (c, v) in reduced.iter().zip(&self.basis) {
            axpy(self.beta * c, v, &mut out);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// beta V_M phi_k(scale H_M) e_1.
pub fn phi_action(decomp: &KrylovDecomposition, scale: f64, k: usize) -> Result<Vec<f64>> {
    if k > MAX_PHI_ORDER {
        return Err(Error::contract(format!("phi index {k} exceeds {MAX_PHI_ORDER}")));
    }
    if decomp.dim == 0 {
        return Ok(vec![0.0; decomp.n]);
    }
    let chain = decomp.reduced_chain(scale, k)?;
    Ok(decomp.lift(&chain[k]))
}

/// All of phi_0..phi_kmax from one reduced exponential.
pub fn phi_chain_action(decomp: &KrylovDecomposition, scale: f64, kmax: usize) -> Result<Vec<Vec<f64>>> {
    if kmax > MAX_PHI_ORDER {
        return Err(Error::contract(format!("phi index {kmax} exceeds {MAX_PHI_ORDER}")));
    }
    if decomp.dim == 0 {
        return Ok(vec![vec![0.0; decomp.n]; kmax + 1]);
    }
    let chain = decomp.reduced_chain(scale, kmax)?;
    Ok(chain.iter().map(|c| decomp.lift(c)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub value: Vec<f64>,
    pub dim: usize,
    pub converged: bool,
    pub estimate: f64,
}

/// sum_k weights[k-1] phi_k(scale A) b over one adaptively sized subspace.
pub fn psi_action(op: &LinearOperator, b: &[f64], scale: f64, weights: &[f64], opts: &KrylovOptions) -> Result<ProjectionResult> {
    if weights.is_empty() {
        return Err(Error::contract("psi weights must not be empty"));
    }
    let d = build_adaptive(op, b, scale, opts)?;
    let chain = phi_chain_action(&d, scale, weights.len())?;
    Ok(ProjectionResult {
        value: combine_chain(&chain, weights),
        dim: d.dim,
        converged: d.converged,
        estimate: d.estimate,
    })
}

/// Chain of phi actions plus the largest Krylov dimension used.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub chain: Vec<Vec<f64>>,
    pub krylov_dim: usize,
}

/// Dispatches phi evaluations on the operator structure: exact scalar
/// formulas for diagonals, dense exponentials for small blocks, per-block
/// recursion (optionally on a worker pool), permute-evaluate-permute-back,
/// and adaptive Krylov otherwise.
#[derive(Clone)]
pub struct PhiEvaluator {
    pub tol: f64,
    pub max_dim: usize,
    /// Dense operators up to this size use the augmented exponential.
    pub dense_cutoff: usize,
    /// Return non-converged Krylov results instead of failing.
    pub accept_unconverged: bool,
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl fmt::Debug for PhiEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhiEvaluator")
            .field("tol", &self.tol)
            .field("max_dim", &self.max_dim)
            .field("dense_cutoff", &self.dense_cutoff)
            .field("parallel", &self.pool.is_some())
            .finish()
    }
}

impl Default for PhiEvaluator {
    fn default() -> Self {
        PhiEvaluator {
            tol: FIXED_STEP_TOL,
            max_dim: DEFAULT_MAX_DIM,
            dense_cutoff: 64,
            accept_unconverged: false,
            pool: None,
        }
    }
}

impl PhiEvaluator {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// Evaluate independent blocks on `pool`. Results do not depend on
    /// scheduling: every block is computed exactly as in serial mode.
    pub fn with_pool(mut self, pool: Arc<rayon::ThreadPool>) -> Self {
        self.pool = Some(pool);
        self
    }

    pub fn is_parallel(&self) -> bool {
        self.pool.is_some()
    }

    pub fn chain(&self, op: &LinearOperator, scale: f64, v: &[f64], kmax: usize, hint: Option<usize>) -> Result<ChainOutput> {
        let n = op.dim();
        if v.len() != n {
            return Err(Error::contract(format!(
                "vector of length {} for operator of dimension {n}",
                v.len()
            )));
        }
        if kmax > MAX_PHI_ORDER {
            return Err(Error::contract(format!("phi index {kmax} exceeds {MAX_PHI_ORDER}")));
        }
        if scale == 0.0 || v.iter().all(|&x| x == 0.0) {
            let mut f = 1.0;
            let chain = (0..=kmax)
                .map(|k| {
                    if k > 0 {
                        f /= k as f64;
                    }
                    v.iter().map(|x| x * f).collect()
                })
                .collect();
            return Ok(ChainOutput { chain, krylov_dim: 0 });
        }
        match op.structure() {
            Structure::Diagonal(d) => {
                let mut chain = vec![vec![0.0; n]; kmax + 1];
                for i in 0..n {
                    if v[i] == 0.0 {
                        continue;
                    }
                    let phis = phi_scalar_all(kmax, scale * d[i])?;
                    for k in 0..=kmax {
                        chain[k][i] = phis[k] * v[i];
                    }
                }
                Ok(ChainOutput { chain, krylov_dim: 0 })
            }
            Structure::Dense(m) if n <= self.dense_cutoff => Ok(ChainOutput {
                chain: phi_chain_dense(&(m * scale), v, kmax)?,
                krylov_dim: 0,
            }),
            Structure::BlockDiagonal(blocks) => {
                let mut ranges = Vec::with_capacity(blocks.len());
                let mut s = 0;
                for b in blocks {
                    ranges.push(s..s + b.dim());
                    s += b.dim();
                }
                let eval = |(b, r): (&LinearOperator, &std::ops::Range<usize>)| self.chain(b, scale, &v[r.clone()], kmax, hint);
                let parts: Vec<ChainOutput> = match &self.pool {
                    Some(pool) => pool.install(|| blocks.par_iter().zip(ranges.par_iter()).map(eval).collect::<Result<_>>())?,
                    None => blocks.iter().zip(ranges.iter()).map(eval).collect::<Result<_>>()?,
                };
                let mut chain = vec![Vec::with_capacity(n); kmax + 1];
                let mut dim = 0;
                for p in parts {
                    dim = dim.max(p.krylov_dim);
                    for (dst, src) in chain.iter_mut().zip(p.chain) {
                        dst.extend(src);
                    }
                }
                Ok(ChainOutput { chain, krylov_dim: dim })
            }
            Structure::Permuted { inner, perm } => {
                let out = self.chain(inner, scale, &perm.gather(v), kmax, hint)?;
                Ok(ChainOutput {
                    chain: out.chain.iter().map(|c| perm.scatter(c)).collect(),
                    krylov_dim: out.krylov_dim,
                })
            }
            _ => {
                let opts = KrylovOptions {
                    tol: self.tol,
                    max_dim: self.max_dim,
                    hint,
                    symmetric: None,
                    rounding_floor: true,
                };
                let d = build_adaptive(op, v, scale, &opts)?;
                if !d.converged && !self.accept_unconverged {
                    return Err(Error::KrylovNotConverged {
                        dim: d.dim,
                        estimate: d.estimate,
                    });
                }
                Ok(ChainOutput {
                    chain: phi_chain_action(&d, scale, kmax)?,
                    krylov_dim: d.dim,
                })
            }
        }
    }

    /// phi_k(scale A) v and the Krylov dimension used.
    pub fn phi(&self, op: &LinearOperator, scale: f64, k: usize, v: &[f64], hint: Option<usize>) -> Result<(Vec<f64>, usize)> {
        let mut out = self.chain(op, scale, v, k, hint)?;
        Ok((out.chain.swap_remove(k), out.krylov_dim))
    }

    /// sum_k weights[k-1] phi_k(scale A) v and the Krylov dimension used.
    pub fn psi(&self, op: &LinearOperator, scale: f64, weights: &[f64], v: &[f64], hint: Option<usize>) -> Result<(Vec<f64>, usize)> {
        if weights.is_empty() {
            return Err(Error::contract("psi weights must not be empty"));
        }
        let out = self.chain(op, scale, v, weights.len(), hint)?;
        Ok((combine_chain(&out.chain, weights), out.krylov_dim))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_shape() {
        assert!(SCHEDULE.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*SCHEDULE.last().unwrap(), DEFAULT_MAX_DIM);
    }

    #[test]
    fn invariant_subspace_breaks_down_at_one() {
        let op = LinearOperator::dense(DMatrix::from_diagonal(&nalgebra::dvector![-2.0, 3.0, 5.0])).unwrap();
        let d = build_adaptive(&op, &[1.0, 0.0, 0.0], 0.7, &KrylovOptions::default()).unwrap();
        assert_eq!(d.dim, 1);
        assert!(d.converged);
        assert_eq!(d.h[(0, 0)], -2.0);
        assert_eq!(d.h_next, 0.0);
        let v = phi_action(&d, 0.7, 1).unwrap();
        assert!((v[0] - crate::phi::phi_scalar(1, -1.4).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn zero_input_short_circuits() {
        let op = LinearOperator::identity(4);
        let r = psi_action(&op, &[0.0; 4], 1.0, &[1.0], &KrylovOptions::default()).unwrap();
        assert_eq!(r.dim, 0);
        assert_eq!(r.value, vec![0.0; 4]);
    }

    #[test]
    fn scale_zero_returns_input() {
        let op = LinearOperator::from_triplets(3, &[(0, 1, 2.0), (2, 0, -1.0)]).unwrap();
        let b = [1.0, -2.0, 0.5];
        let d = build_adaptive(&op, &b, 0.0, &KrylovOptions::default()).unwrap();
        let v = phi_action(&d, 0.0, 0).unwrap();
        for (x, y) in v.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn hint_starts_checks_later() {
        let n = 60;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, -2.0));
            if i + 1 < n {
                t.push((i, i + 1, 1.0));
                t.push((i + 1, i, 1.0));
            }
        }
        let op = LinearOperator::from_triplets(n, &t).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let base = build_adaptive(&op, &b, 0.5, &KrylovOptions::default()).unwrap();
        let hinted = build_adaptive(
            &op,
            &b,
            0.5,
            &KrylovOptions {
                hint: Some(base.dim + 10),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(hinted.dim >= base.dim);
        let a = phi_action(&base, 0.5, 1).unwrap();
        let c = phi_action(&hinted, 0.5, 1).unwrap();
        let diff = a.iter().zip(&c).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-11);
    }

    #[test]
    fn k_too_large() {
        let op = LinearOperator::identity(2);
        let d = build_adaptive(&op, &[1.0, 1.0], 1.0, &KrylovOptions::default()).unwrap();
        assert!(phi_action(&d, 1.0, 13).is_err());
    }
}
