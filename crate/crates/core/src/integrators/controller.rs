use crate::error::{Error, Result};

use super::ivp::PartitionedIvp;
use super::steppers::error_norm;

pub const SAFETY: f64 = 0.9;
pub const FACMIN: f64 = 0.2;
pub const FACMAX: f64 = 5.0;

/// Elementary step-size controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerState {
    pub h: f64,
    pub p_hat: usize,
    pub safety: f64,
    pub facmin: f64,
    pub facmax: f64,
    pub consecutive_rejects: usize,
}

impl ControllerState {
    pub fn new(h: f64, p_hat: usize) -> Self {
        ControllerState {
            h,
            p_hat,
            safety: SAFETY,
            facmin: FACMIN,
            facmax: FACMAX,
            consecutive_rejects: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !(self.facmin > 0.0 && self.facmin < 1.0 && self.facmax > 1.0) || !(self.safety > 0.0) {
            return Err(Error::contract(format!("invalid controller state {self:?}")));
        }
        Ok(())
    }

    fn factor(&self, err: f64, tol: f64, facmax: f64) -> f64 {
        let raw = if err == 0.0 {
            f64::INFINITY
        } else {
            self.safety * (tol / err).powf(1.0 / (self.p_hat as f64 + 1.0))
        };
        facmax.min(self.facmin.max(raw))
    }

    pub fn accept(&mut self, h: f64, err: f64, tol: f64) {
        let cap = if self.consecutive_rejects > 0 { 1.0 } else { self.facmax };
        self.h = h * self.factor(err, tol, cap);
        self.consecutive_rejects = 0;
    }

    pub fn reject(&mut self, h: f64, err: f64, tol: f64) {
        self.h = h * self.factor(err, tol, 1.0);
        self.consecutive_rejects += 1;
    }

    /// A step that could not be evaluated at all.
    pub fn fail(&mut self, h: f64) {
        self.h = h * self.facmin;
        self.consecutive_rejects += 1;
    }
}

/// Starting step from the size of y0 and F(y0) and one explicit Euler probe.
pub fn initial_step(ivp: &PartitionedIvp, order: usize, tol: f64) -> f64 {
    let span = ivp.tf - ivp.t0;
    let y0 = &ivp.y0;
    let zeros = vec![0.0; y0.len()];
    let f0 = ivp.full_rhs(y0);
    let d0 = error_norm(&zeros, y0, &zeros) / tol;
    let d1 = error_norm(&zeros, &f0, &zeros) / tol;
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(&f0).map(|(a, b)| a + h0 * b).collect();
    let f1 = ivp.full_rhs(&y1);
    let diff: Vec<f64> = f1.iter().zip(&f0).map(|(a, b)| a - b).collect();
    let d2 = error_norm(&zeros, &diff, &zeros) / tol / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / (order as f64 + 1.0))
    };
    let h = (100.0 * h0).min(h1).min(span);
    if h.is_finite() && h > 0.0 {
        h
    } else {
        1e-6 * span
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_error_grows_by_facmax() {
        let mut c = ControllerState::new(0.1, 2);
        c.accept(0.1, 0.0, 1e-6);
        assert!((c.h - 0.5).abs() < 1e-15);
    }

    #[test]
    fn after_reject_growth_is_capped() {
        let mut c = ControllerState::new(0.1, 2);
        c.reject(0.1, 1e-3, 1e-6);
        assert!((c.h - 0.02).abs() < 1e-15);
        c.accept(0.02, 0.0, 1e-6);
        assert!((c.h - 0.02).abs() < 1e-15);
        c.accept(0.02, 0.0, 1e-6);
        assert!((c.h - 0.1).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(ControllerState::new(0.1, 2).validate().is_ok());
        let mut c = ControllerState::new(0.1, 2);
        c.facmax = 0.5;
        assert!(c.validate().is_err());
    }
}
