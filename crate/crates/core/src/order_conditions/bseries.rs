//! Truncated B-series over the TPS-tree table and the three composition rules
//! (function of a series, linear action, matrix function).

use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::trees::{tree_table, NodeKind, MAX_ORDER, NUM_TREES};

pub type Rational = BigRational;

/// Scalar ring the B-series engine runs over.
pub trait Coeff:
    Clone + PartialEq + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn from_rational(q: &Rational) -> Self;
    fn magnitude(&self) -> f64;

    fn inv_factorial(n: usize) -> Self {
        let f: BigInt = (1..=n as u64).map(BigInt::from).product();
        Self::from_rational(&Rational::new(BigInt::one(), f))
    }

    fn pow(&self, n: usize) -> Self {
        (0..n).fold(Self::one(), |acc, _| acc * self.clone())
    }
}

impl Coeff for Rational {
    fn from_rational(q: &Rational) -> Self {
        q.clone()
    }

    fn magnitude(&self) -> f64 {
        self.abs().to_f64().unwrap_or(f64::INFINITY)
    }
}

impl Coeff for f64 {
    fn from_rational(q: &Rational) -> Self {
        q.to_f64().unwrap_or(f64::NAN)
    }

    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

/// Coefficients of a B-series: slot 0 is the empty tree, slot `i` is tau_i.
#[derive(Debug, Clone, PartialEq)]
pub struct BSeriesVector<T = Rational> {
    coeffs: Vec<T>,
}

impl<T: Coeff> BSeriesVector<T> {
    pub const LEN: usize = NUM_TREES + 1;

    pub fn zero() -> Self {
        BSeriesVector {
            coeffs: vec![T::zero(); Self::LEN],
        }
    }

    /// Series of `y_n` itself: one on the empty tree.
    pub fn identity() -> Self {
        let mut s = Self::zero();
        s.coeffs[0] = T::one();
        s
    }

    pub fn from_coeffs(coeffs: Vec<T>) -> Self {
        assert_eq!(coeffs.len(), Self::LEN, "B-series length");
        BSeriesVector { coeffs }
    }

    pub fn empty(&self) -> &T {
        &self.coeffs[0]
    }

    pub fn get(&self, slot: usize) -> &T {
        &self.coeffs[slot]
    }

    pub fn set(&mut self, slot: usize, value: T) {
        self.coeffs[slot] = value;
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.clone() + b.clone())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.clone() - b.clone())
    }

    pub fn scale(&self, s: &T) -> Self {
        BSeriesVector {
            coeffs: self.coeffs.iter().map(|a| s.clone() * a.clone()).collect(),
        }
    }

    /// `self += s * x`
    pub fn axpy(&mut self, s: &T, x: &Self) {
        if s.is_zero() {
            return;
        }
        for (a, b) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *a = a.clone() + s.clone() * b.clone();
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(&T, &T) -> T) -> Self {
        BSeriesVector {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| f(a, b)).collect(),
        }
    }
}

/// `B#(h f^{m}(B(a)))` for the round kind of partition m: one on the bare
/// node, the product of child coefficients on composites, zero elsewhere.
pub fn bs_compose_function<T: Coeff>(kind: NodeKind, a: &BSeriesVector<T>) -> BSeriesVector<T> {
    assert!(!kind.is_square(), "function application needs a round kind");
    let table = tree_table();
    let mut out = BSeriesVector::zero();
    for slot in 1..=table.len() {
        if table.root(slot) == Some(kind) {
            let v = table.children(slot).iter().fold(T::one(), |acc, &c| acc * a.coeffs[c].clone());
            out.coeffs[slot] = v;
        }
    }
    out
}

/// `B#(h W^{m} B(a))`: shifts a(tau) onto the square-rooted tree over tau; the
/// childless square receives the empty-tree coefficient.
pub fn bs_matrix<T: Coeff>(kind: NodeKind, a: &BSeriesVector<T>) -> BSeriesVector<T> {
    assert!(kind.is_square(), "matrix application needs a square kind");
    let table = tree_table();
    let mut out = BSeriesVector::zero();
    for slot in 1..=table.len() {
        if let Some(child) = table.remove_root(slot, kind) {
            out.coeffs[slot] = a.coeffs[child].clone();
        }
    }
    out
}

/// `B#(g(h W^{m}) B(a))` for a power series g with coefficients `c`:
/// result(tau) = sum_i c_i a(R^i tau) over the defined root removals.
pub fn bs_matrix_function<T: Coeff>(c: &[T], kind: NodeKind, a: &BSeriesVector<T>) -> BSeriesVector<T> {
    assert!(kind.is_square(), "matrix function needs a square kind");
    let table = tree_table();
    let mut out = BSeriesVector::zero();
    for slot in 0..BSeriesVector::<T>::LEN {
        let mut acc = match c.first() {
            Some(c0) => c0.clone() * a.coeffs[slot].clone(),
            None => T::zero(),
        };
        let mut cur = slot;
        for ci in c.iter().skip(1) {
            match table.remove_root(cur, kind) {
                Some(next) => {
                    acc = acc + ci.clone() * a.coeffs[next].clone();
                    cur = next;
                }
                None => break,
            }
        }
        out.coeffs[slot] = acc;
    }
    out
}

/// Power-series weights of phi_k(g z), truncated after z^MAX_ORDER.
pub fn phi_weights<T: Coeff>(k: usize, g: &T) -> Vec<T> {
    (0..=MAX_ORDER).map(|l| g.pow(l) * T::inv_factorial(k + l)).collect()
}

/// Power-series weights of Psi(g z) = sum_k p_k phi_k(g z) with `p[0]` the
/// weight of phi_1.
pub fn psi_weights<T: Coeff>(p: &[T], g: &T) -> Vec<T> {
    (0..=MAX_ORDER)
        .map(|l| {
            let s = p
                .iter()
                .enumerate()
                .fold(T::zero(), |acc, (i, pk)| acc + pk.clone() * T::inv_factorial(i + 1 + l));
            g.pow(l) * s
        })
        .collect()
}

/// j-th forward difference at the head of a sequence of series.
pub fn bs_forward_difference<T: Coeff>(values: &[BSeriesVector<T>], j: usize) -> BSeriesVector<T> {
    assert!(values.len() > j, "forward difference needs j+1 values");
    let mut layer: Vec<BSeriesVector<T>> = values[..=j].to_vec();
    for _ in 0..j {
        layer = layer.windows(2).map(|w| w[1].sub(&w[0])).collect();
    }
    layer.swap_remove(0)
}

/// Which exact-solution expansion a method is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    /// W-methods: square nodes stand for arbitrary matrices, so every tree
    /// containing one has exact coefficient zero.
    W,
    /// Split methods: squares are the true linear parts of f^{m}.
    S,
}

/// Exact-solution coefficients 1/gamma(tau) of the uncoloured tree.
pub fn exact_coeffs<T: Coeff>(kind: MethodKind) -> BSeriesVector<T> {
    let table = tree_table();
    let mut out = BSeriesVector::identity();
    for (i, t) in table.trees.iter().enumerate() {
        let v = if kind == MethodKind::W && t.contains_square() {
            T::zero()
        } else {
            T::from_rational(&Rational::new(BigInt::one(), BigInt::from(t.density())))
        };
        out.coeffs[i + 1] = v;
    }
    out
}
