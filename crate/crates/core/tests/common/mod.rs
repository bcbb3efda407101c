//! Shared test oracles: fixed-point extended precision and small helpers.
#![allow(dead_code)]

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

use partexp::integrators::{Partition, PartitionedIvp};
use partexp::operators::LinearOperator;
use partexp::tableaus::{to_f64, PexpwTableau};

/// Binary digits after the point.
const P: u32 = 400;

/// Fixed-point number X / 2^P.
#[derive(Clone, Debug, PartialEq)]
pub struct Fx(BigInt);

impl Fx {
    pub fn zero() -> Self {
        Fx(BigInt::zero())
    }

    pub fn from_f64(x: f64) -> Self {
        assert!(x.is_finite());
        if x == 0.0 {
            return Fx::zero();
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1 } else { 1 };
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let mant = if exp == 0 {
            (bits & 0xf_ffff_ffff_ffff) << 1
        } else {
            (bits & 0xf_ffff_ffff_ffff) | 0x10_0000_0000_0000
        };
        let e = exp - 1075 + P as i64;
        let m = BigInt::from(mant) * sign;
        Fx(if e >= 0 { m << e as usize } else { m >> (-e) as usize })
    }

    pub fn to_f64(&self) -> f64 {
        let bits = self.0.bits() as i64;
        if bits <= 64 {
            return self.0.to_f64().unwrap() * 2f64.powi(-(P as i32));
        }
        let shift = bits - 64;
        (&self.0 >> shift as usize).to_f64().unwrap() * 2f64.powi((shift - P as i64) as i32)
    }

    pub fn div_int(&self, d: u64) -> Self {
        Fx(&self.0 / BigInt::from(d))
    }

    pub fn abs(&self) -> Self {
        Fx(self.0.abs())
    }
}

impl Add for Fx {
    type Output = Fx;
    fn add(self, o: Fx) -> Fx {
        Fx(self.0 + o.0)
    }
}

impl Sub for Fx {
    type Output = Fx;
    fn sub(self, o: Fx) -> Fx {
        Fx(self.0 - o.0)
    }
}

impl Neg for Fx {
    type Output = Fx;
    fn neg(self) -> Fx {
        Fx(-self.0)
    }
}

impl Mul for Fx {
    type Output = Fx;
    fn mul(self, o: Fx) -> Fx {
        Fx((self.0 * o.0) >> P as usize)
    }
}

/// phi_k(z) = sum_{i < terms} z^i / (i+k)!, complex z = (re, im).
pub fn phi_series_oracle(k: usize, re: f64, im: f64, terms: usize) -> (f64, f64) {
    let (zr, zi) = (Fx::from_f64(re), Fx::from_f64(im));
    let mut t = (Fx::from_f64(1.0), Fx::zero());
    for j in 1..=k as u64 {
        t = (t.0.div_int(j), t.1.div_int(j));
    }
    let mut acc = t.clone();
    for i in 1..terms {
        let d = (i + k) as u64;
        let nr = t.0.clone() * zr.clone() - t.1.clone() * zi.clone();
        let ni = t.0 * zi.clone() + t.1 * zr.clone();
        t = (nr.div_int(d), ni.div_int(d));
        acc = (acc.0 + t.0.clone(), acc.1 + t.1.clone());
    }
    (acc.0.to_f64(), acc.1.to_f64())
}

fn to_fx(a: &DMatrix<f64>) -> Vec<Vec<Fx>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| Fx::from_f64(a[(i, j)])).collect())
        .collect()
}

fn matvec(a: &[Vec<Fx>], v: &[Fx]) -> Vec<Fx> {
    a.iter()
        .map(|row| row.iter().zip(v).fold(Fx::zero(), |acc, (x, y)| acc + x.clone() * y.clone()))
        .collect()
}

/// phi_k(A) b = sum_{i < terms} A^i b / (i+k)! in fixed point.
pub fn phi_action_oracle(a: &DMatrix<f64>, b: &[f64], k: usize, terms: usize) -> Vec<f64> {
    let af = to_fx(a);
    let mut t: Vec<Fx> = b.iter().map(|&x| Fx::from_f64(x)).collect();
    for j in 1..=k as u64 {
        t = t.iter().map(|x| x.div_int(j)).collect();
    }
    let mut acc = t.clone();
    for i in 1..terms {
        t = matvec(&af, &t).iter().map(|x| x.div_int((i + k) as u64)).collect();
        acc = acc.into_iter().zip(&t).map(|(a, b)| a + b.clone()).collect();
    }
    acc.iter().map(Fx::to_f64).collect()
}

/// exp(A) by the Taylor sum, column by column.
pub fn expm_oracle(a: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = phi_action_oracle(a, &e, 0, terms);
        for i in 0..n {
            out[(i, j)] = col[i];
        }
    }
    out
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| scale * rng.gen_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d) / norm2(b).max(f64::MIN_POSITIVE)
}

pub fn matvec_f64(a: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a[(i, j)] * v[j]).sum()).collect()
}

/// phi_k(A) b for symmetric A through its eigendecomposition.
pub fn spectral_phi(a: &DMatrix<f64>, b: &[f64], k: usize) -> Vec<f64> {
    let eig = a.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let n = a.nrows();
    let qtb: Vec<f64> = (0..n).map(|j| (0..n).map(|i| q[(i, j)] * b[i]).sum()).collect();
    let scaled: Vec<f64> = qtb
        .iter()
        .zip(eig.eigenvalues.iter())
        .map(|(c, &l)| c * partexp::phi::phi_scalar(k, l).unwrap())
        .collect();
    matvec_f64(q, &scaled)
}

pub type VecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Two nonlinear partitions on R^4 with the given Jacobian approximations.
pub fn random_two_partition(seed: u64, w1: LinearOperator, w2: LinearOperator) -> (PartitionedIvp, [VecFn; 2]) {
    let mut r = rng(seed);
    let a = random_matrix(&mut r, 4, 1.0);
    let c = random_matrix(&mut r, 4, 1.0);
    let y0 = random_vector(&mut r, 4);
    let f1: VecFn = Arc::new(move |y: &[f64]| {
        let ay = matvec_f64(&a, y);
        (0..4).map(|i| ay[i] + 0.5 * y[(i + 1) % 4].sin()).collect()
    });
    let f2: VecFn = Arc::new(move |y: &[f64]| {
        let cy = matvec_f64(&c, y);
        (0..4).map(|i| cy[i].tanh() + y[i] * y[(i + 2) % 4]).collect()
    });
    let (g1, g2) = (f1.clone(), f2.clone());
    let p1 = Partition::new(move |y, out| out.copy_from_slice(&g1(y)), move |_| w1.clone());
    let p2 = Partition::new(move |y, out| out.copy_from_slice(&g2(y)), move |_| w2.clone());
    let ivp = PartitionedIvp::new("random4", y0, 0.0, 1.0, vec![p1, p2]).unwrap();
    (ivp, [f1, f2])
}

/// Explicit partitioned RK step with coupling matrices alpha^{q,m}.
pub fn gark_step(t: &PexpwTableau, f: &[VecFn; 2], y: &[f64], h: f64, b: &[Vec<f64>]) -> Vec<f64> {
    let s = &t.stages;
    let mut k: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); s[0]], vec![Vec::new(); s[1]]];
    for i in 0..*s.iter().max().unwrap() {
        for q in 0..2 {
            if i >= s[q] {
                continue;
            }
            let mut u = y.to_vec();
            for m in 0..2 {
                for j in 0..i.min(s[m]) {
                    let a = to_f64(&t.alpha[q][m][i][j]);
                    for (x, kk) in u.iter_mut().zip(&k[m][j]) {
                        *x += a * kk;
                    }
                }
            }
            k[q][i] = f[q](&u).iter().map(|v| h * v).collect();
        }
    }
    let mut out = y.to_vec();
    for q in 0..2 {
        for i in 0..s[q] {
            for (x, kk) in out.iter_mut().zip(&k[q][i]) {
                *x += b[q][i] * kk;
            }
        }
    }
    out
}
