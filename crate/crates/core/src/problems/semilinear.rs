use std::sync::Arc;

use super::{Boundary, GridSpec};
use crate::error::{Error, Result};
use crate::integrators::{Partition, PartitionedIvp};
use crate::operators::LinearOperator;

fn exact_u(x: f64, t: f64) -> f64 {
    x * (1.0 - x) * t.exp()
}

/// Manufactured forcing for y = x(1-x)e^t.
fn forcing(x: f64, t: f64) -> f64 {
    let u = exact_u(x, t);
    u + 2.0 * t.exp() - 1.0 / (1.0 + u * u)
}

fn forcing_dt(x: f64, t: f64) -> f64 {
    let u = exact_u(x, t);
    let d = 1.0 + u * u;
    u + 2.0 * t.exp() + 2.0 * u * u / (d * d)
}

fn interior(n: usize) -> Vec<f64> {
    let dx = 1.0 / (n + 1) as f64;
    (1..=n).map(|i| i as f64 * dx).collect()
}

/// Exact augmented state [y(x_i, t); t] on the n interior points.
pub fn semilinear_exact(n: usize, t: f64) -> Vec<f64> {
    let mut v: Vec<f64> = interior(n).into_iter().map(|x| exact_u(x, t)).collect();
    v.push(t);
    v
}

/// y_t = y_xx + 1/(1+y^2) + Phi(x, t) on [0,1] x [0,1] with zero Dirichlet
/// data, central differences on n interior points, augmented with t.
pub fn semilinear_parabolic(n: usize) -> Result<PartitionedIvp> {
    if n < 3 {
        return Err(Error::contract(format!("semilinear problem needs n >= 3, got {n}")));
    }
    let grid = GridSpec {
        nx: n,
        ny: 1,
        lengths: (1.0, 1.0),
        bc: Boundary::DirichletZero,
    };
    let dx = grid.spacing().0;
    let c = 1.0 / (dx * dx);
    let mut t = Vec::with_capacity(3 * n);
    for i in 0..n {
        t.push((i, i, -2.0 * c));
        if i > 0 {
            t.push((i, i - 1, c));
        }
        if i + 1 < n {
            t.push((i, i + 1, c));
        }
    }
    // The last row and column (time) stay empty.
    let dxx = LinearOperator::from_triplets(n + 1, &t)?;
    let xs = Arc::new(interior(n));

    let d1 = dxx.clone();
    let w1 = dxx.clone();
    let p1 = Partition::new(move |y, out| d1.apply_into(y, out), move |_| w1.clone())
        .with_split(dxx.clone(), |_, out| out.iter_mut().for_each(|x| *x = 0.0));

    let xf = xs.clone();
    let f2 = move |y: &[f64], out: &mut [f64]| {
        let tt = y[n];
        for i in 0..n {
            out[i] = 1.0 / (1.0 + y[i] * y[i]) + forcing(xf[i], tt);
        }
        out[n] = 1.0;
    };
    let xj = xs.clone();
    let j2 = move |y: &[f64]| {
        let tt = y[n];
        let mut e = Vec::with_capacity(2 * n);
        for i in 0..n {
            let d = 1.0 + y[i] * y[i];
            e.push((i, i, -2.0 * y[i] / (d * d)));
            e.push((i, n, forcing_dt(xj[i], tt)));
        }
        LinearOperator::from_triplets(n + 1, &e).expect("indices in range")
    };
    let f2n = f2.clone();
    let p2 = Partition::new(f2, j2).with_split(LinearOperator::zero(n + 1), f2n);

    let mut ivp = PartitionedIvp::new("semilinear", semilinear_exact(n, 0.0), 0.0, 1.0, vec![p1, p2])?;
    ivp.exact = Some(Arc::new(move |t| semilinear_exact(n, t)));
    Ok(ivp)
}
