use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operators::LinearOperator;

pub type RhsFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&[f64]) -> LinearOperator + Send + Sync>;
pub type ExactFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// f^{m}(y) = L^{m} y + N^{m}(y).
#[derive(Clone)]
pub struct Split {
    pub linear: LinearOperator,
    pub nonlinear: RhsFn,
}

#[derive(Clone)]
pub struct Partition {
    pub f: RhsFn,
    /// W^{m} evaluated at the current step's starting state.
    pub jacobian: JacobianFn,
    pub split: Option<Split>,
}

impl Partition {
    pub fn new(
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        jacobian: impl Fn(&[f64]) -> LinearOperator + Send + Sync + 'static,
    ) -> Self {
        Partition {
            f: Arc::new(f),
            jacobian: Arc::new(jacobian),
            split: None,
        }
    }

    pub fn with_split(mut self, linear: LinearOperator, nonlinear: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.split = Some(Split {
            linear,
            nonlinear: Arc::new(nonlinear),
        });
        self
    }
}

/// Autonomous IVP y' = sum_m f^{m}(y) on [t0, tf].
#[derive(Clone)]
pub struct PartitionedIvp {
    pub name: String,
    pub y0: Vec<f64>,
    pub t0: f64,
    pub tf: f64,
    pub partitions: Vec<Partition>,
    /// Closed-form solution, when known.
    pub exact: Option<ExactFn>,
}

impl fmt::Debug for PartitionedIvp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartitionedIvp")
            .field("name", &self.name)
            .field("dim", &self.dim())
            .field("t0", &self.t0)
            .field("tf", &self.tf)
            .field("partitions", &self.partitions.len())
            .finish()
    }
}

impl PartitionedIvp {
    pub fn new(name: impl Into<String>, y0: Vec<f64>, t0: f64, tf: f64, partitions: Vec<Partition>) -> Result<Self> {
        if partitions.is_empty() {
            return Err(Error::contract("an IVP needs at least one partition"));
        }
        if !(tf > t0) {
            return Err(Error::contract(format!("empty time span [{t0}, {tf}]")));
        }
        Ok(PartitionedIvp {
            name: name.into(),
            y0,
            t0,
            tf,
            partitions,
            exact: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    pub fn num_partitions(&self) -> usize {
        self.partitions.len()
    }

    pub fn has_split(&self) -> bool {
        self.partitions.iter().all(|p| p.split.is_some())
    }

    pub fn rhs(&self, m: usize, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        (self.partitions[m].f)(y, &mut out);
        out
    }

    pub fn full_rhs(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        let mut tmp = vec![0.0; y.len()];
        for p in &self.partitions {
            (p.f)(y, &mut tmp);
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
        }
        out
    }

    pub fn jacobian(&self, m: usize, y: &[f64]) -> LinearOperator {
        (self.partitions[m].jacobian)(y)
    }

    pub fn with_span(mut self, t0: f64, tf: f64) -> Self {
        self.t0 = t0;
        self.tf = tf;
        self
    }

    /// Single-partition view: F = sum f^{m}, W = sum W^{m}, and the summed
    /// split when every partition has one.
    pub fn merged(&self) -> Result<PartitionedIvp> {
        if self.partitions.len() == 1 {
            return Ok(self.clone());
        }
        let parts = self.partitions.clone();
        let fs: Vec<RhsFn> = parts.iter().map(|p| p.f.clone()).collect();
        let js: Vec<JacobianFn> = parts.iter().map(|p| p.jacobian.clone()).collect();
        let mut merged = Partition::new(
            move |y, out| sum_into(&fs, y, out),
            move |y| {
                let ops: Vec<LinearOperator> = js.iter().map(|j| j(y)).collect();
                LinearOperator::sum(&ops).expect("partition Jacobians share one dimension")
            },
        );
        if self.has_split() {
            let linear = LinearOperator::sum(&parts.iter().map(|p| p.split.as_ref().unwrap().linear.clone()).collect::<Vec<_>>())?;
            let ns: Vec<RhsFn> = parts.iter().map(|p| p.split.as_ref().unwrap().nonlinear.clone()).collect();
            merged = merged.with_split(linear, move |y, out| sum_into(&ns, y, out));
        }
        Ok(PartitionedIvp {
            name: self.name.clone(),
            y0: self.y0.clone(),
            t0: self.t0,
            tf: self.tf,
            partitions: vec![merged],
            exact: self.exact.clone(),
        })
    }
}

fn sum_into(fs: &[RhsFn], y: &[f64], out: &mut [f64]) {
    let mut tmp = vec![0.0; y.len()];
    out.iter_mut().for_each(|x| *x = 0.0);
    for f in fs {
        f(y, &mut tmp);
        out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
    }
}
