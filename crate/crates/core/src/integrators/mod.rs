//! Single-step maps and the fixed-step and adaptive drivers.

mod controller;
mod ivp;
mod steppers;

pub use controller::ControllerState;
pub use ivp::{ExactFn, JacobianFn, Partition, PartitionedIvp, RhsFn, Split};
pub use steppers::{error_norm, forward_difference, Method, StepContext, StepOutcome};

use crate::error::{Error, Result};
use crate::krylov::{PhiEvaluator, FIXED_STEP_TOL};

/// Hard cap on the number of step attempts in one run.
pub const MAX_STEPS: usize = 10_000_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub steps: usize,
    pub rejects: usize,
    pub rhs_evals: usize,
    pub krylov_dim_total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub t: f64,
    pub h: f64,
    pub err_est: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub t: f64,
    pub y: Vec<f64>,
    pub stats: Stats,
    /// Step attempts in order (adaptive runs only).
    pub history: Vec<HistoryEntry>,
}

/// Resolves the IVP view a method operates on: unpartitioned methods see the
/// merged right-hand side.
fn view(method: &Method, ivp: &PartitionedIvp) -> Result<PartitionedIvp> {
    if method.partitions() == 1 && ivp.num_partitions() > 1 {
        ivp.merged()
    } else {
        Ok(ivp.clone())
    }
}

fn record(stats: &mut Stats, out: &StepOutcome) {
    stats.rhs_evals += out.rhs_evals;
    stats.krylov_dim_total += out.krylov_dims.iter().sum::<usize>();
}

fn hints_from(out: &StepOutcome) -> Vec<Option<usize>> {
    out.krylov_dims.iter().map(|&d| (d > 0).then_some(d)).collect()
}

/// Fixed steps of size `h` with Krylov tolerance 1e-12; the last step is
/// shortened to land on tf.
pub fn integrate_fixed(method: &Method, ivp: &PartitionedIvp, h: f64) -> Result<Solution> {
    integrate_fixed_with(method, ivp, h, &PhiEvaluator::default().with_tol(FIXED_STEP_TOL))
}

pub fn integrate_fixed_with(method: &Method, ivp: &PartitionedIvp, h: f64, eval: &PhiEvaluator) -> Result<Solution> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::contract(format!("step size must be positive, got {h}")));
    }
    let span = ivp.tf - ivp.t0;
    let count = (span / h).ceil();
    if count > MAX_STEPS as f64 {
        return Err(Error::contract(format!("{count} steps exceed the limit of {MAX_STEPS}")));
    }
    let sys = view(method, ivp)?;
    let mut y = sys.y0.clone();
    let mut t = sys.t0;
    let mut stats = Stats::default();
    let mut hints = vec![None; sys.num_partitions()];
    // Land on tf without a sliver step when span/h is an integer up to rounding.
    let n = count.max(1.0) as usize;
    let n = if n > 1 && span - (n - 1) as f64 * h <= 1e-10 * h {
        n - 1
    } else {
        n
    };
    for i in 0..n {
        let hs = if i + 1 == n { sys.tf - t } else { h };
        let ctx = StepContext {
            eval,
            hints: hints.clone(),
        };
        let out = method.step(&sys, t, &y, hs, &ctx)?;
        record(&mut stats, &out);
        hints = hints_from(&out);
        stats.steps += 1;
        y = out.y_next;
        t = if i + 1 == n { sys.tf } else { t + hs };
    }
    Ok(Solution {
        t,
        y,
        stats,
        history: Vec::new(),
    })
}

/// Embedded-error controlled run; the Krylov tolerance follows `tol`.
pub fn integrate_adaptive(method: &Method, ivp: &PartitionedIvp, tol: f64, controller0: Option<ControllerState>) -> Result<Solution> {
    integrate_adaptive_with(method, ivp, tol, controller0, &PhiEvaluator::default().with_tol(tol))
}

pub fn integrate_adaptive_with(
    method: &Method,
    ivp: &PartitionedIvp,
    tol: f64,
    controller0: Option<ControllerState>,
    eval: &PhiEvaluator,
) -> Result<Solution> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::contract(format!("tolerance must be positive, got {tol}")));
    }
    let p_hat = method
        .embedded_order()
        .ok_or_else(|| Error::contract(format!("{} has no embedded solution", method.name())))?;
    let sys = view(method, ivp)?;
    let span = sys.tf - sys.t0;
    let mut ctrl = match controller0 {
        Some(c) => {
            c.validate()?;
            c
        }
        None => ControllerState::new(controller::initial_step(&sys, method.order(), tol), p_hat),
    };
    ctrl.h = ctrl.h.min(span);
    let h_min = 1e-14 * span;
    let mut y = sys.y0.clone();
    let mut t = sys.t0;
    let mut stats = Stats::default();
    let mut history = Vec::new();
    let mut hints = vec![None; sys.num_partitions()];
    while t < sys.tf {
        if stats.steps + stats.rejects >= MAX_STEPS {
            return Err(Error::Stiffness { t, h: ctrl.h });
        }
        if ctrl.h < h_min {
            return Err(Error::Stiffness { t, h: ctrl.h });
        }
        let last = t + ctrl.h >= sys.tf || sys.tf - (t + ctrl.h) < h_min;
        let h = if last { sys.tf - t } else { ctrl.h };
        let ctx = StepContext {
            eval,
            hints: hints.clone(),
        };
        match method.step(&sys, t, &y, h, &ctx) {
            Ok(out) => {
                record(&mut stats, &out);
                let ok = out.err_est <= tol;
                history.push(HistoryEntry {
                    t,
                    h,
                    err_est: out.err_est,
                    accepted: ok,
                });
                if ok {
                    stats.steps += 1;
                    hints = hints_from(&out);
                    y = out.y_next;
                    t = if last { sys.tf } else { t + h };
                    ctrl.accept(h, out.err_est, tol);
                } else {
                    stats.rejects += 1;
                    ctrl.reject(h, out.err_est, tol);
                }
            }
            Err(e) if e.is_numerical() => {
                history.push(HistoryEntry {
                    t,
                    h,
                    err_est: f64::INFINITY,
                    accepted: false,
                });
                stats.rejects += 1;
                ctrl.fail(h);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Solution { t, y, stats, history })
}
