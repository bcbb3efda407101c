use nalgebra::DMatrix;
use rand::Rng;

use super::seeded_rng;
use crate::error::{Error, Result};
use crate::integrators::{Partition, PartitionedIvp};
use crate::operators::LinearOperator;
use crate::reference::rk4;

/// Spin-up interval and RK4 step count used to produce y0.
const SPIN_UP: f64 = 0.3;
const SPIN_UP_STEPS: usize = 3000;

/// dy_j/dt = -y_{j-1} (y_{j-2} - y_{j+1}) - y_j + F, cyclic.
pub fn lorenz96_rhs(y: &[f64], forcing: f64, out: &mut [f64]) {
    let n = y.len();
    for j in 0..n {
        let jm1 = y[(j + n - 1) % n];
        let jm2 = y[(j + n - 2) % n];
        let jp1 = y[(j + 1) % n];
        out[j] = -jm1 * (jm2 - jp1) - y[j] + forcing;
    }
}

/// Exact Jacobian of the full right-hand side.
pub fn lorenz96_jacobian(y: &[f64]) -> LinearOperator {
    let n = y.len();
    let mut t = Vec::with_capacity(4 * n);
    for j in 0..n {
        let (jm1, jm2, jp1) = ((j + n - 1) % n, (j + n - 2) % n, (j + 1) % n);
        t.push((j, j, -1.0));
        t.push((j, jm1, -(y[jm2] - y[jp1])));
        t.push((j, jm2, -y[jm1]));
        t.push((j, jp1, y[jm1]));
    }
    LinearOperator::from_triplets(n, &t).expect("indices in range")
}

/// The split system with the random initial state before spin-up.
pub fn lorenz96_unspun(n: usize, forcing: f64, seed: u64) -> Result<PartitionedIvp> {
    if n < 4 {
        return Err(Error::contract(format!("Lorenz-96 needs N >= 4, got {n}")));
    }
    let mut rng = seeded_rng(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..=1.0));
    let y0: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let a_diag: Vec<f64> = a.diagonal().iter().copied().collect();

    let a_op = LinearOperator::dense(a)?;
    let a1 = a_op.clone();
    let p1 = Partition::new(move |y, out| a1.apply_into(y, out), {
        let d = LinearOperator::diagonal(a_diag.clone());
        move |_| d.clone()
    })
    .with_split(a_op.clone(), |_, out| out.iter_mut().for_each(|x| *x = 0.0));

    let a2 = a_op.clone();
    let f2 = move |y: &[f64], out: &mut [f64]| {
        lorenz96_rhs(y, forcing, out);
        let mut ay = vec![0.0; y.len()];
        a2.apply_into(y, &mut ay);
        out.iter_mut().zip(&ay).for_each(|(o, v)| *o -= v);
    };
    let f2n = f2.clone();
    // diag(J) is -1 for N >= 4
    let w2 = LinearOperator::diagonal(a_diag.iter().map(|d| -1.0 - d).collect());
    let p2 = Partition::new(f2, move |_| w2.clone()).with_split(LinearOperator::zero(n), f2n);

    PartitionedIvp::new("lorenz96", y0, 0.0, 0.3, vec![p1, p2])
}

/// N-dimensional Lorenz-96 with forcing F, split as A y + (F(y) - A y) for a
/// seeded uniform[-1, 1] matrix A; y0 is a seeded uniform[0, 1) state
/// integrated over [0, 0.3].
pub fn lorenz96(n: usize, forcing: f64, seed: u64) -> Result<PartitionedIvp> {
    let mut ivp = lorenz96_unspun(n, forcing, seed)?;
    let f = |y: &[f64]| {
        let mut o = vec![0.0; y.len()];
        lorenz96_rhs(y, forcing, &mut o);
        o
    };
    ivp.y0 = rk4(f, &ivp.y0, 0.0, SPIN_UP, SPIN_UP_STEPS)?;
    Ok(ivp)
}
