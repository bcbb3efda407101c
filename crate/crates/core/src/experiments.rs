//! Convergence and work-precision studies, reference solutions, slope fits
//! and the CSV row format.

use std::io::{Read, Write};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{integrate_adaptive, integrate_fixed, Method, PartitionedIvp, Solution};
use crate::krylov::PhiEvaluator;
use crate::reference::reference_endpoint;

/// Relative self-consistency demanded of a computed reference.
pub const REFERENCE_TOL: f64 = 1e-10;
const REFERENCE_REFINEMENTS: usize = 4;

/// Allowed deviation of consecutive slopes from their mean within a fitted
/// segment.
pub const SLOPE_BAND: f64 = 0.25;
pub const MIN_SEGMENT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

/// One CSV row. `error` is empty for failed runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub method: String,
    pub problem: String,
    pub mode: Mode,
    pub h: Option<f64>,
    pub tol: Option<f64>,
    pub error: Option<f64>,
    pub cpu_seconds: f64,
    pub steps: usize,
    pub rejects: usize,
    pub krylov_dim_total: usize,
    pub status: Status,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "method,problem,mode,h,tol,error,cpu_seconds,steps,rejects,krylov_dim_total,status,seed";

pub fn write_csv<W: Write>(out: W, rows: &[StudyRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(',')).map_err(|e| Error::Io(e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Rows without a header, for streaming after [`CSV_HEADER`].
pub fn append_csv<W: Write>(out: W, rows: &[StudyRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<StudyRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::Parse(format!("row {}: {e}", i + 1))))
        .collect()
}

/// Relative 2-norm of y - reference.
pub fn relative_error(y: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = y.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = reference.iter().map(|b| b * b).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Endpoint at tf: the closed form when the IVP has one, otherwise the
/// reference integrator at a quarter of `finest_h` (or smaller if the
/// Krylov projection needs it), refined by halving until two successive
/// levels agree to 1e-10.
pub fn reference_solution(ivp: &PartitionedIvp, finest_h: f64) -> Result<Vec<f64>> {
    if let Some(exact) = &ivp.exact {
        return Ok(exact(ivp.tf));
    }
    if !(finest_h > 0.0) {
        return Err(Error::contract("reference step must be positive"));
    }
    let eval = PhiEvaluator::default();
    let mut steps = ((ivp.tf - ivp.t0) / (finest_h / 4.0)).ceil().max(1.0) as usize;
    // Steps too large for the projection cap are halved before refinement starts.
    let mut prev = loop {
        match reference_endpoint(ivp, steps, &eval) {
            Ok(y) => break y,
            Err(Error::KrylovNotConverged { .. }) if steps < (1 << 24) => steps *= 2,
            Err(e) => return Err(Error::Reference(e.to_string())),
        }
    };
    let mut last_diff = f64::INFINITY;
    for _ in 0..REFERENCE_REFINEMENTS {
        steps *= 2;
        let next = reference_endpoint(ivp, steps, &eval).map_err(|e| Error::Reference(e.to_string()))?;
        last_diff = relative_error(&prev, &next);
        if last_diff < REFERENCE_TOL {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Reference(format!(
        "{}: successive refinements differ by {last_diff:e} after {REFERENCE_REFINEMENTS} halvings",
        ivp.name
    )))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    /// Index of the first point of the fitted segment.
    pub start: usize,
    pub len: usize,
}

/// Least-squares slope of log(error) against log(h) over the longest run of
/// at least four consecutive usable points whose consecutive slopes stay
/// within 0.25 of their mean. Ties prefer the segment at smaller h. Points
/// with a missing or non-positive error break runs.
pub fn fit_slope(points: &[(f64, Option<f64>)]) -> std::result::Result<SlopeFit, String> {
    let usable = |i: usize| matches!(points[i], (h, Some(e)) if h > 0.0 && e > 0.0 && e.is_finite());
    let log = |i: usize| (points[i].0.ln(), points[i].1.unwrap().ln());
    let mut best: Option<(usize, usize)> = None;
    for start in 0..points.len() {
        for end in (start + MIN_SEGMENT)..=points.len() {
            if !(start..end).all(usable) {
                break;
            }
            let slopes: Vec<f64> = (start..end - 1)
                .map(|i| {
                    let (a, b) = (log(i), log(i + 1));
                    (b.1 - a.1) / (b.0 - a.0)
                })
                .collect();
            let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
            if slopes.iter().all(|s| (s - mean).abs() < SLOPE_BAND) {
                let len = end - start;
                if best.is_none_or(|(_, l)| len >= l) {
                    best = Some((start, len));
                }
            }
        }
    }
    let (start, len) = best.ok_or_else(|| {
        let n = (0..points.len()).filter(|&i| usable(i)).count();
        format!("no run of {MIN_SEGMENT} consecutive points with slopes within {SLOPE_BAND} of their mean ({n} usable points)")
    })?;
    let xs: Vec<(f64, f64)> = (start..start + len).map(log).collect();
    let mx = xs.iter().map(|p| p.0).sum::<f64>() / len as f64;
    let my = xs.iter().map(|p| p.1).sum::<f64>() / len as f64;
    let sxy: f64 = xs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = xs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(SlopeFit {
        slope: sxy / sxx,
        start,
        len,
    })
}

/// Settings shared by the studies.
#[derive(Clone, Default)]
pub struct StudyOptions {
    pub seed: u64,
    /// Record cpu_seconds as 0 so output is byte-reproducible.
    pub no_timing: bool,
    /// Runs independent cells here; rows keep input order.
    pub pool: Option<Arc<rayon::ThreadPool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceResult {
    pub rows: Vec<StudyRow>,
    pub slope: std::result::Result<SlopeFit, String>,
}

fn run_cells<T: Send>(pool: &Option<Arc<rayon::ThreadPool>>, n: usize, cell: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    match pool {
        Some(p) => p.install(|| (0..n).into_par_iter().map(&cell).collect()),
        None => (0..n).map(cell).collect(),
    }
}

fn make_row(
    method: &Method,
    ivp: &PartitionedIvp,
    (mode, param): (Mode, f64),
    (result, seconds): (Result<Solution>, f64),
    reference: &[f64],
    opts: &StudyOptions,
) -> StudyRow {
    let (h, tol) = match mode {
        Mode::Fixed => (Some(param), None),
        Mode::Adaptive => (None, Some(param)),
    };
    let mut row = StudyRow {
        method: method.name().to_string(),
        problem: ivp.name.clone(),
        mode,
        h,
        tol,
        error: None,
        cpu_seconds: if opts.no_timing { 0.0 } else { seconds },
        steps: 0,
        rejects: 0,
        krylov_dim_total: 0,
        status: Status::Failed,
        seed: opts.seed,
    };
    if let Ok(sol) = result {
        row.steps = sol.stats.steps;
        row.rejects = sol.stats.rejects;
        row.krylov_dim_total = sol.stats.krylov_dim_total;
        let err = relative_error(&sol.y, reference);
        if err.is_finite() && err <= 1.0 {
            row.error = Some(err);
            row.status = Status::Ok;
        }
    }
    row
}

/// Fixed-step runs over `h_list` (descending) with a fitted slope.
pub fn convergence_study(
    method: &Method,
    ivp: &PartitionedIvp,
    h_list: &[f64],
    reference: &[f64],
    opts: &StudyOptions,
) -> ConvergenceResult {
    let rows = run_cells(&opts.pool, h_list.len(), |i| {
        let start = Instant::now();
        let result = integrate_fixed(method, ivp, h_list[i]);
        make_row(
            method,
            ivp,
            (Mode::Fixed, h_list[i]),
            (result, start.elapsed().as_secs_f64()),
            reference,
            opts,
        )
    });
    let points: Vec<(f64, Option<f64>)> = rows.iter().map(|r| (r.h.unwrap(), r.error)).collect();
    ConvergenceResult {
        slope: fit_slope(&points),
        rows,
    }
}

/// Adaptive runs over `tol_list`; failures become rows with status failed.
pub fn work_precision_study(
    method: &Method,
    ivp: &PartitionedIvp,
    tol_list: &[f64],
    reference: &[f64],
    opts: &StudyOptions,
) -> Vec<StudyRow> {
    run_cells(&opts.pool, tol_list.len(), |i| {
        let start = Instant::now();
        let result = integrate_adaptive(method, ivp, tol_list[i], None);
        make_row(
            method,
            ivp,
            (Mode::Adaptive, tol_list[i]),
            (result, start.elapsed().as_secs_f64()),
            reference,
            opts,
        )
    })
}

/// Parses `start:/ratio:count` into a geometric sequence.
pub fn parse_geometric(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Parse(format!("expected start:/ratio:count, got '{spec}'"));
    let mut parts = spec.split(':');
    let (a, r, c) = (
        parts.next().ok_or_else(bad)?,
        parts.next().ok_or_else(bad)?,
        parts.next().ok_or_else(bad)?,
    );
    if parts.next().is_some() {
        return Err(bad());
    }
    let start: f64 = a.trim().parse().map_err(|_| bad())?;
    let ratio: f64 = r.trim().strip_prefix('/').ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let count: usize = c.trim().parse().map_err(|_| bad())?;
    if !(start > 0.0) || !(ratio > 1.0) || count == 0 || !start.is_finite() || !ratio.is_finite() {
        return Err(bad());
    }
    Ok((0..count).map(|k| start / ratio.powi(k as i32)).collect())
}
