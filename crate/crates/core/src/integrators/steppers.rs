//! One-step maps of the exponential families in floating point.

use crate::error::{Error, Result};
use crate::krylov::PhiEvaluator;
use crate::operators::LinearOperator;
use crate::order_conditions::Rational;
use crate::tableaus::{to_f64, ExpWTableau, MethodTableau, PepirkwTableau, PexpwTableau, PsepirkTableau, RMatrix, SepirkTableau};

use super::ivp::PartitionedIvp;

type FMat = Vec<Vec<f64>>;

fn fm(m: &RMatrix) -> FMat {
    m.iter().map(|r| r.iter().map(to_f64).collect()).collect()
}

fn fv(v: &[Rational]) -> Vec<f64> {
    v.iter().map(to_f64).collect()
}

fn fblocks(b: &[Vec<RMatrix>]) -> Vec<Vec<FMat>> {
    b.iter().map(|row| row.iter().map(fm).collect()).collect()
}

fn frows(b: &[Vec<Rational>]) -> Vec<Vec<f64>> {
    b.iter().map(|r| fv(r)).collect()
}

#[derive(Debug, Clone)]
struct PexpwF {
    stages: Vec<usize>,
    alpha: Vec<Vec<FMat>>,
    gamma: Vec<Vec<FMat>>,
    b: Vec<Vec<f64>>,
    b_hat: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
struct PepirkwF {
    stages: usize,
    a: Vec<Vec<FMat>>,
    g: Vec<Vec<FMat>>,
    p: Vec<Vec<FMat>>,
    b: Vec<Vec<f64>>,
    b_hat: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
struct PsepirkF {
    stages: usize,
    a: Vec<FMat>,
    g: Vec<FMat>,
    p: Vec<FMat>,
    b: Vec<Vec<f64>>,
    b_hat: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
enum Coeffs {
    Pexpw(PexpwF),
    Pepirkw(PepirkwF),
    /// Unpartitioned sEPIRK is stored as a one-partition PSEPIRK-like table.
    Sepirk(PsepirkF),
    Psepirk(PsepirkF),
}

fn pexpw_coeffs(t: &PexpwTableau) -> PexpwF {
    PexpwF {
        stages: t.stages.clone(),
        alpha: fblocks(&t.alpha),
        gamma: fblocks(&t.gamma),
        b: frows(&t.b),
        b_hat: t.b_hat.as_ref().map(|b| frows(b)),
    }
}

fn pepirkw_coeffs(t: &PepirkwTableau) -> PepirkwF {
    PepirkwF {
        stages: t.stages[0],
        a: fblocks(&t.a),
        g: fblocks(&t.g),
        p: fblocks(&t.p),
        b: frows(&t.b),
        b_hat: t.b_hat.as_ref().map(|b| frows(b)),
    }
}

fn psepirk_coeffs(t: &PsepirkTableau) -> PsepirkF {
    PsepirkF {
        stages: t.stages,
        a: t.a.iter().map(fm).collect(),
        g: t.g.iter().map(fm).collect(),
        p: t.p.iter().map(fm).collect(),
        b: frows(&t.b),
        b_hat: t.b_hat.as_ref().map(|b| frows(b)),
    }
}

fn sepirk_coeffs(t: &SepirkTableau) -> PsepirkF {
    PsepirkF {
        stages: t.b.len(),
        a: vec![fm(&t.a)],
        g: vec![fm(&t.g)],
        p: vec![fm(&t.p)],
        b: vec![fv(&t.b)],
        b_hat: t.b_hat.as_ref().map(|b| vec![fv(b)]),
    }
}

/// A tableau converted to floating point, ready to step.
#[derive(Debug, Clone)]
pub struct Method {
    tableau: MethodTableau,
    coeffs: Coeffs,
}

/// Per-step evaluation context: phi evaluator and per-partition Krylov
/// dimension hints from the previous step.
#[derive(Debug, Clone)]
pub struct StepContext<'a> {
    pub eval: &'a PhiEvaluator,
    pub hints: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub y_next: Vec<f64>,
    pub y_embedded: Option<Vec<f64>>,
    /// Scaled RMS of y_next - y_embedded; zero without embedded weights.
    pub err_est: f64,
    /// Largest Krylov dimension per partition.
    pub krylov_dims: Vec<usize>,
    pub rhs_evals: usize,
    pub accepted: bool,
}

impl Method {
    pub fn new(tableau: MethodTableau) -> Result<Self> {
        crate::tableaus::check_shapes(&tableau)?;
        let coeffs = match &tableau {
            MethodTableau::ExpW(t) => Coeffs::Pexpw(pexpw_coeffs(&PexpwTableau::from_expw(t))),
            MethodTableau::Pexpw(t) => Coeffs::Pexpw(pexpw_coeffs(t)),
            MethodTableau::Pepirkw(t) => Coeffs::Pepirkw(pepirkw_coeffs(t)),
            MethodTableau::Psepirk(t) => Coeffs::Psepirk(psepirk_coeffs(t)),
            MethodTableau::Sepirk(t) => Coeffs::Sepirk(sepirk_coeffs(t)),
        };
        Ok(Method { tableau, coeffs })
    }

    pub fn builtin(name: &str) -> Result<Self> {
        Self::new(crate::tableaus::builtin(name)?)
    }

    pub fn from_expw(t: ExpWTableau) -> Result<Self> {
        Self::new(MethodTableau::ExpW(t))
    }

    pub fn tableau(&self) -> &MethodTableau {
        &self.tableau
    }

    pub fn name(&self) -> &str {
        self.tableau.name()
    }

    pub fn order(&self) -> usize {
        self.tableau.order()
    }

    pub fn embedded_order(&self) -> Option<usize> {
        self.tableau.embedded_order()
    }

    pub fn partitions(&self) -> usize {
        self.tableau.partitions()
    }

    /// Advances `y` by `h`. Unpartitioned methods see the merged system.
    pub fn step(&self, ivp: &PartitionedIvp, t: f64, y: &[f64], h: f64, ctx: &StepContext) -> Result<StepOutcome> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::contract(format!("step size must be positive, got {h}")));
        }
        if y.len() != ivp.dim() {
            return Err(Error::contract("state length differs from the IVP dimension"));
        }
        if ivp.num_partitions() != self.partitions() {
            return Err(Error::contract(format!(
                "{} expects {} partition(s), the IVP has {}",
                self.name(),
                self.partitions(),
                ivp.num_partitions()
            )));
        }
        if self.tableau.needs_split() && !ivp.has_split() {
            return Err(Error::contract(format!("{} needs a linear/nonlinear split", self.name())));
        }
        let mut s = Stepper::new(ivp, t, h, ctx);
        let (y_next, y_hat) = match &self.coeffs {
            Coeffs::Pexpw(c) => s.pexpw(c, y)?,
            Coeffs::Pepirkw(c) => s.pepirkw(c, y)?,
            Coeffs::Psepirk(c) | Coeffs::Sepirk(c) => s.split_epirk(c, y)?,
        };
        if y_next.iter().any(|x| !x.is_finite()) {
            return Err(s.fail(None, "non-finite solution"));
        }
        let err_est = y_hat.as_ref().map_or(0.0, |yh| error_norm(y, &y_next, yh));
        Ok(StepOutcome {
            y_next,
            y_embedded: y_hat,
            err_est: if err_est.is_finite() { err_est } else { f64::INFINITY },
            krylov_dims: s.dims,
            rhs_evals: s.rhs_evals,
            accepted: true,
        })
    }
}

/// RMS of (y - y_hat) / (1 + max(|y_n|, |y|)) over components.
pub fn error_norm(y_n: &[f64], y: &[f64], y_hat: &[f64]) -> f64 {
    let n = y.len().max(1) as f64;
    let s: f64 = y_n
        .iter()
        .zip(y)
        .zip(y_hat)
        .map(|((a, b), c)| {
            let e = (b - c) / (1.0 + a.abs().max(b.abs()));
            e * e
        })
        .sum();
    (s / n).sqrt()
}

/// j-th forward difference at the head of a sequence.
pub fn forward_difference(values: &[Vec<f64>], j: usize) -> Result<Vec<f64>> {
    if values.len() <= j {
        return Err(Error::contract(format!(
            "difference of order {j} needs {} values, got {}",
            j + 1,
            values.len()
        )));
    }
    let mut layer: Vec<Vec<f64>> = values[..=j].to_vec();
    for _ in 0..j {
        layer = layer
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect())
            .collect();
    }
    Ok(layer.swap_remove(0))
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    if alpha != 0.0 {
        y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
    }
}

fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

struct Stepper<'a> {
    ivp: &'a PartitionedIvp,
    t: f64,
    h: f64,
    ctx: &'a StepContext<'a>,
    dims: Vec<usize>,
    rhs_evals: usize,
}

impl<'a> Stepper<'a> {
    fn new(ivp: &'a PartitionedIvp, t: f64, h: f64, ctx: &'a StepContext<'a>) -> Self {
        Stepper {
            ivp,
            t,
            h,
            ctx,
            dims: vec![0; ivp.num_partitions()],
            rhs_evals: 0,
        }
    }

    fn fail(&self, partition: Option<usize>, reason: impl Into<String>) -> Error {
        Error::StepFailure {
            t: self.t,
            h: self.h,
            partition,
            reason: reason.into(),
        }
    }

    fn hint(&self, m: usize) -> Option<usize> {
        self.ctx.hints.get(m).copied().flatten()
    }

    /// h f^{m}(y)
    fn hf(&mut self, m: usize, y: &[f64]) -> Vec<f64> {
        self.rhs_evals += 1;
        scaled(self.h, &self.ivp.rhs(m, y))
    }

    fn check(&self, m: usize, v: &[f64], what: &str) -> Result<()> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(self.fail(Some(m), format!("non-finite {what}")))
        }
    }

    fn phi1(&mut self, m: usize, op: &LinearOperator, scale: f64, v: &[f64]) -> Result<Vec<f64>> {
        let (out, dim) = self
            .ctx
            .eval
            .phi(op, scale, 1, v, self.hint(m))
            .map_err(|e| self.fail(Some(m), e.to_string()))?;
        self.dims[m] = self.dims[m].max(dim);
        Ok(out)
    }

    fn psi(&mut self, m: usize, op: &LinearOperator, scale: f64, weights: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let (out, dim) = self
            .ctx
            .eval
            .psi(op, scale, weights, v, self.hint(m))
            .map_err(|e| self.fail(Some(m), e.to_string()))?;
        self.dims[m] = self.dims[m].max(dim);
        Ok(out)
    }

    fn pexpw(&mut self, c: &PexpwF, y: &[f64]) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let p = c.stages.len();
        let h = self.h;
        let w: Vec<LinearOperator> = (0..p).map(|q| self.ivp.jacobian(q, y)).collect();
        let smax = *c.stages.iter().max().unwrap();
        let mut k: Vec<Vec<Vec<f64>>> = vec![Vec::new(); p];
        for i in 0..smax {
            for q in 0..p {
                if i >= c.stages[q] {
                    continue;
                }
                let mut u = y.to_vec();
                let mut g = vec![0.0; y.len()];
                for m in 0..p {
                    for j in 0..i.min(c.stages[m]) {
                        axpy(c.alpha[q][m][i][j], &k[m][j], &mut u);
                        axpy(c.gamma[q][m][i][j], &k[m][j], &mut g);
                    }
                }
                let mut rhs = self.hf(q, &u);
                if g.iter().any(|&x| x != 0.0) {
                    axpy(h, &w[q].apply(&g)?, &mut rhs);
                }
                self.check(q, &rhs, "stage right-hand side")?;
                let ki = self.phi1(q, &w[q], h * c.gamma[q][q][i][i], &rhs)?;
                k[q].push(ki);
            }
        }
        let combine = |b: &[Vec<f64>]| {
            let mut out = y.to_vec();
            for q in 0..p {
                for (i, ki) in k[q].iter().enumerate() {
                    axpy(b[q][i], ki, &mut out);
                }
            }
            out
        };
        Ok((combine(&c.b), c.b_hat.as_ref().map(|bh| combine(bh))))
    }

    fn pepirkw(&mut self, c: &PepirkwF, y: &[f64]) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let p = c.a.len();
        let s = c.stages;
        let h = self.h;
        let w: Vec<LinearOperator> = (0..p).map(|m| self.ivp.jacobian(m, y)).collect();
        // fvals[m]: h f^{m} at (y_n, Y_1^{m}, ...)
        let mut fvals: Vec<Vec<Vec<f64>>> = (0..p).map(|m| vec![self.hf(m, y)]).collect();
        for i in 0..s.saturating_sub(1) {
            let mut stage = Vec::with_capacity(p);
            for q in 0..p {
                let mut u = y.to_vec();
                for m in 0..p {
                    for j in 0..=i {
                        let a = c.a[q][m][i][j];
                        if a == 0.0 {
                            continue;
                        }
                        let v = forward_difference(&fvals[m], j)?;
                        let term = self.psi(m, &w[m], h * c.g[q][m][i][j], &c.p[q][m][j][..=j], &v)?;
                        axpy(a, &term, &mut u);
                    }
                }
                self.check(q, &u, "internal stage")?;
                stage.push(u);
            }
            for (m, ym) in stage.iter().enumerate() {
                let f = self.hf(m, ym);
                fvals[m].push(f);
            }
        }
        let mut terms: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; s]; p];
        for m in 0..p {
            for j in 0..s {
                let used = c.b[m][j] != 0.0 || c.b_hat.as_ref().is_some_and(|bh| bh[m][j] != 0.0);
                if used {
                    let v = forward_difference(&fvals[m], j)?;
                    terms[m][j] = Some(self.psi(m, &w[m], h * c.g[m][m][s - 1][j], &c.p[m][m][j][..=j], &v)?);
                }
            }
        }
        let combine = |b: &[Vec<f64>]| {
            let mut out = y.to_vec();
            for m in 0..p {
                for j in 0..s {
                    if let Some(t) = &terms[m][j] {
                        axpy(b[m][j], t, &mut out);
                    }
                }
            }
            out
        };
        Ok((combine(&c.b), c.b_hat.as_ref().map(|bh| combine(bh))))
    }

    /// h R^{m}(Y): the nonlinear remainder seen by partition m. With one
    /// partition this is h N(Y); with two, h (N^{m} + f^{other})(Y).
    fn remainder(&mut self, m: usize, yv: &[f64]) -> Vec<f64> {
        let parts = &self.ivp.partitions;
        let mut out = vec![0.0; yv.len()];
        (parts[m].split.as_ref().unwrap().nonlinear)(yv, &mut out);
        self.rhs_evals += 1;
        if parts.len() == 2 {
            let other = 1 - m;
            let mut tmp = vec![0.0; yv.len()];
            (parts[other].f)(yv, &mut tmp);
            self.rhs_evals += 1;
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
        }
        scaled(self.h, &out)
    }

    fn split_epirk(&mut self, c: &PsepirkF, y: &[f64]) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        let p = c.a.len();
        let s = c.stages;
        let h = self.h;
        let lin: Vec<LinearOperator> = (0..p)
            .map(|m| self.ivp.partitions[m].split.as_ref().unwrap().linear.clone())
            .collect();
        self.rhs_evals += p;
        let hf = scaled(h, &self.ivp.full_rhs(y));
        let mut rvals: Vec<Vec<Vec<f64>>> = (0..p).map(|m| vec![self.remainder(m, y)]).collect();
        for i in 0..s.saturating_sub(1) {
            let mut u = y.to_vec();
            for m in 0..p {
                for l in 0..=i {
                    let a = c.a[m][i][l];
                    if a == 0.0 {
                        continue;
                    }
                    let v = if l == 0 { hf.clone() } else { forward_difference(&rvals[m], l)? };
                    let term = self.psi(m, &lin[m], h * c.g[m][i][l], &c.p[m][l][..=l], &v)?;
                    axpy(a, &term, &mut u);
                }
            }
            self.check(0, &u, "internal stage")?;
            for m in 0..p {
                let r = self.remainder(m, &u);
                rvals[m].push(r);
            }
        }
        let mut terms: Vec<Vec<Option<Vec<f64>>>> = vec![vec![None; s]; p];
        for m in 0..p {
            for l in 0..s {
                let used = c.b[m][l] != 0.0 || c.b_hat.as_ref().is_some_and(|bh| bh[m][l] != 0.0);
                if used {
                    let v = if l == 0 { hf.clone() } else { forward_difference(&rvals[m], l)? };
                    terms[m][l] = Some(self.psi(m, &lin[m], h * c.g[m][s - 1][l], &c.p[m][l][..=l], &v)?);
                }
            }
        }
        let combine = |b: &[Vec<f64>]| {
            let mut out = y.to_vec();
            for m in 0..p {
                for l in 0..s {
                    if let Some(t) = &terms[m][l] {
                        axpy(b[m][l], t, &mut out);
                    }
                }
            }
            out
        };
        Ok((combine(&c.b), c.b_hat.as_ref().map(|bh| combine(bh))))
    }
}
