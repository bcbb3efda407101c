//! Fixed-step reference integrators: classical RK4 and, when a global
//! linear part is available, fourth-order exponential time differencing
//! (ETDRK4) on that split.

use crate::error::{Error, Result};
use crate::krylov::PhiEvaluator;
use crate::operators::LinearOperator;

use crate::integrators::PartitionedIvp;

/// y' = F(y) with F given as a closure.
pub fn rk4(f: impl Fn(&[f64]) -> Vec<f64>, y0: &[f64], t0: f64, tf: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::contract("RK4 needs at least one step"));
    }
    let h = (tf - t0) / steps as f64;
    let mut y = y0.to_vec();
    let lin = |a: &[f64], c: f64, k: &[f64]| -> Vec<f64> { a.iter().zip(k).map(|(x, d)| x + c * d).collect() };
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&lin(&y, h / 2.0, &k1));
        let k3 = f(&lin(&y, h / 2.0, &k2));
        let k4 = f(&lin(&y, h, &k3));
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("RK4 reference".into()));
    }
    Ok(y)
}

pub type NonlinearFn<'a> = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync + 'a>;

/// Global split F(y) = L y + N(y) used by ETDRK4.
pub struct GlobalSplit<'a> {
    pub linear: LinearOperator,
    pub nonlinear: NonlinearFn<'a>,
}

/// Cox-Matthews ETDRK4 written in phi-function form.
pub fn etdrk4(split: &GlobalSplit, eval: &PhiEvaluator, y0: &[f64], t0: f64, tf: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::contract("ETDRK4 needs at least one step"));
    }
    let h = (tf - t0) / steps as f64;
    let l = &split.linear;
    let n = |y: &[f64]| (split.nonlinear)(y);
    let add = |a: &[f64], c: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + c * y).collect() };
    let mut y = y0.to_vec();
    let mut hint = None;
    for _ in 0..steps {
        let nu = n(&y);
        let fu = add(&l.apply(&y)?, 1.0, &nu);
        let (p, d) = eval.phi(l, h / 2.0, 1, &fu, hint)?;
        hint = Some(d);
        let a = add(&y, h / 2.0, &p);
        let na = n(&a);
        let rb: Vec<f64> = fu.iter().zip(&na).zip(&nu).map(|((f, x), z)| f + x - z).collect();
        let b = add(&y, h / 2.0, &eval.phi(l, h / 2.0, 1, &rb, hint)?.0);
        let nb = n(&b);
        let rc: Vec<f64> = l.apply(&a)?.iter().zip(&nb).zip(&nu).map(|((la, x), z)| la + 2.0 * x - z).collect();
        let c = add(&a, h / 2.0, &eval.phi(l, h / 2.0, 1, &rc, hint)?.0);
        let nc = n(&c);
        let v2: Vec<f64> = (0..y.len()).map(|i| -3.0 * nu[i] + 2.0 * (na[i] + nb[i]) - nc[i]).collect();
        let v3: Vec<f64> = (0..y.len()).map(|i| 4.0 * (nu[i] - na[i] - nb[i] + nc[i])).collect();
        let t1 = eval.phi(l, h, 1, &fu, hint)?.0;
        let t2 = eval.phi(l, h, 2, &v2, hint)?.0;
        let t3 = eval.phi(l, h, 3, &v3, hint)?.0;
        for i in 0..y.len() {
            y[i] += h * (t1[i] + t2[i] + t3[i]);
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ETDRK4 reference".into()));
        }
    }
    Ok(y)
}

/// Linear part of an IVP for the reference integrator: the sum of all
/// partitions' split operators, or `None` when no partition carries a
/// nonzero one.
pub fn global_split(ivp: &PartitionedIvp) -> Option<GlobalSplit<'_>> {
    if !ivp.has_split() {
        return None;
    }
    let lin: Vec<LinearOperator> = ivp.partitions.iter().map(|p| p.split.as_ref().unwrap().linear.clone()).collect();
    let linear = LinearOperator::sum(&lin).ok()?;
    if linear.norm_estimate() == 0.0 {
        return None;
    }
    let parts = &ivp.partitions;
    Some(GlobalSplit {
        linear,
        nonlinear: Box::new(move |y: &[f64]| {
            let mut out = vec![0.0; y.len()];
            let mut tmp = vec![0.0; y.len()];
            for p in parts {
                (p.split.as_ref().unwrap().nonlinear)(y, &mut tmp);
                out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
            }
            out
        }),
    })
}

/// Endpoint of `ivp` with `steps` fixed steps of the best available
/// reference scheme.
pub fn reference_endpoint(ivp: &PartitionedIvp, steps: usize, eval: &PhiEvaluator) -> Result<Vec<f64>> {
    match global_split(ivp) {
        Some(split) => etdrk4(&split, eval, &ivp.y0, ivp.t0, ivp.tf, steps),
        None => rk4(|y| ivp.full_rhs(y), &ivp.y0, ivp.t0, ivp.tf, steps),
    }
}
