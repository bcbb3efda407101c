//! Dense phi-functions: scalar values, the matrix exponential and the
//! augmented-matrix evaluation of phi_0..phi_K applied to a vector.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Highest phi index supported.
pub const MAX_PHI_ORDER: usize = 12;

/// Below this modulus phi values come straight from the truncated series.
const SERIES_RADIUS: f64 = 0.5;
const SERIES_TERMS: usize = 25;

/// Above this modulus the downward recurrence is stable and is used instead
/// of scaling and squaring.
const RECURRENCE_RADIUS: f64 = 64.0;

fn inv_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut f = 1.0;
    out.push(1.0);
    for i in 1..=n {
        f /= i as f64;
        out.push(f);
    }
    out
}

trait Scalar:
    Copy + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> + std::ops::Mul<Output = Self> + std::ops::Div<Output = Self>
{
    fn real(x: f64) -> Self;
    fn modulus(self) -> f64;
    fn expo(self) -> Self;
    fn finite(self) -> bool;
}

impl Scalar for f64 {
    fn real(x: f64) -> Self {
        x
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn expo(self) -> Self {
        self.exp()
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    fn real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn expo(self) -> Self {
        self.exp()
    }
    fn finite(self) -> bool {
        self.is_finite()
    }
}

/// phi_0..phi_K at one point by the series sum_i z^i / (i+k)!.
fn series_all<T: Scalar>(kmax: usize, z: T) -> Vec<T> {
    let inv = inv_factorials(kmax + SERIES_TERMS);
    (0..=kmax)
        .map(|k| {
            let mut acc = T::real(inv[k + SERIES_TERMS - 1]);
            for i in (0..SERIES_TERMS - 1).rev() {
                acc = acc * z + T::real(inv[k + i]);
            }
            acc
        })
        .collect()
}

fn phi_all_generic<T: Scalar>(kmax: usize, z: T) -> Result<Vec<T>> {
    if kmax > MAX_PHI_ORDER {
        return Err(Error::contract(format!("phi index {kmax} exceeds {MAX_PHI_ORDER}")));
    }
    if !z.finite() {
        return Err(Error::Domain("phi argument must be finite".into()));
    }
    let r = z.modulus();
    if r < SERIES_RADIUS {
        return Ok(series_all(kmax, z));
    }
    let inv = inv_factorials(kmax);
    if r >= RECURRENCE_RADIUS {
        let mut out = Vec::with_capacity(kmax + 1);
        out.push(z.expo());
        for k in 1..=kmax {
            let prev = out[k - 1];
            out.push((prev - T::real(inv[k - 1])) / z);
        }
        return Ok(out);
    }
    // phi_k(2z) = 2^{-k} [phi_0(z) phi_k(z) + sum_{j=1..k} phi_j(z) / (k-j)!]
    let s = (r / SERIES_RADIUS).log2().floor() as i32 + 1;
    let mut v = series_all(kmax, z * T::real(0.5f64.powi(s)));
    for _ in 0..s {
        let next: Vec<T> = (0..=kmax)
            .map(|k| {
                let mut acc = v[0] * v[k];
                for j in 1..=k {
                    acc = acc + v[j] * T::real(inv[k - j]);
                }
                acc * T::real(0.5f64.powi(k as i32))
            })
            .collect();
        v = next;
    }
    v[0] = z.expo();
    Ok(v)
}

/// phi_k(z) for real z.
pub fn phi_scalar(k: usize, z: f64) -> Result<f64> {
    phi_all_generic(k, z).map(|v| v[k])
}

/// phi_k(z) for complex z.
pub fn phi_scalar_complex(k: usize, z: Complex64) -> Result<Complex64> {
    phi_all_generic(k, z).map(|v| v[k])
}

/// [phi_0(z), ..., phi_K(z)] for real z.
pub fn phi_scalar_all(kmax: usize, z: f64) -> Result<Vec<f64>> {
    phi_all_generic(kmax, z)
}

const THETA13: f64 = 5.371920351148152;
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

pub fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// exp(A) by the degree-13 Pade approximant with scaling and squaring.
pub fn expm_dense(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::contract(format!("expm needs a square matrix, got {}x{}", n, a.ncols())));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("expm input".into()));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let norm = norm1(a);
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a * 0.5f64.powi(s);
    let b = &PADE13;
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let num = &v + &u;
    let den = v - u;
    let mut r = den
        .lu()
        .solve(&num)
        .ok_or_else(|| Error::NonFinite("singular Pade denominator".into()))?;
    for _ in 0..s {
        r = &r * &r;
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::Overflow { norm });
        }
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow { norm });
    }
    Ok(r)
}

/// [phi_0(A)b, ..., phi_K(A)b] from one exponential of the augmented matrix
/// [[A, b e_1^T], [0, J]] where J shifts along the superdiagonal.
pub fn phi_chain_dense(a: &DMatrix<f64>, b: &[f64], kmax: usize) -> Result<Vec<Vec<f64>>> {
    let n = a.nrows();
    if n != a.ncols() || b.len() != n {
        return Err(Error::contract(format!(
            "phi chain: matrix {}x{} with vector of length {}",
            n,
            a.ncols(),
            b.len()
        )));
    }
    if kmax > MAX_PHI_ORDER {
        return Err(Error::contract(format!("phi index {kmax} exceeds {MAX_PHI_ORDER}")));
    }
    let beta = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if beta == 0.0 {
        return Ok(vec![vec![0.0; n]; kmax + 1]);
    }
    if kmax == 0 {
        let e = expm_dense(a)?;
        return Ok(vec![(0..n).map(|i| (0..n).map(|j| e[(i, j)] * b[j]).sum()).collect()]);
    }
    let m = n + kmax;
    let mut aug = DMatrix::<f64>::zeros(m, m);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    for i in 0..n {
        aug[(i, n)] = b[i] / beta;
    }
    for j in 0..kmax - 1 {
        aug[(n + j, n + j + 1)] = 1.0;
    }
    let e = expm_dense(&aug)?;
    let mut out = Vec::with_capacity(kmax + 1);
    out.push((0..n).map(|i| (0..n).map(|j| e[(i, j)] * b[j]).sum()).collect());
    for k in 1..=kmax {
        out.push((0..n).map(|i| beta * e[(i, n + k - 1)]).collect());
    }
    Ok(out)
}

/// sum_k p_k phi_k(A) b with `weights[0]` the weight of phi_1.
pub fn psi_apply_dense(weights: &[f64], a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    if weights.is_empty() {
        return Err(Error::contract("psi weights must not be empty"));
    }
    let chain = phi_chain_dense(a, b, weights.len())?;
    Ok(combine_chain(&chain, weights))
}

/// sum_k weights[k-1] * chain[k].
pub fn combine_chain(chain: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let n = chain.first().map_or(0, Vec::len);
    let mut out = vec![0.0; n];
    for (k, &w) in weights.iter().enumerate() {
        if w != 0.0 {
            for (o, x) in out.iter_mut().zip(&chain[k + 1]) {
                *o += w * x;
            }
        }
    }
    out
}
