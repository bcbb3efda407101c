//! Method coefficient sets stored as exact rationals.
//!
//! Builtins are kept as JSON documents of rational strings (the same format
//! users can load) and parsed on first use.

use std::fmt;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::order_conditions::{self, Rational, WeightSet};

pub type RMatrix = Vec<Vec<Rational>>;

/// Unpartitioned exponential Rosenbrock W-method.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpWTableau {
    pub name: String,
    pub alpha: RMatrix,
    pub gamma: RMatrix,
    pub b: Vec<Rational>,
    pub b_hat: Option<Vec<Rational>>,
    pub order: usize,
    pub embedded_order: Option<usize>,
}

/// Unpartitioned split EPIRK method. Rows of `a` are internal stages, row
/// `s-1` of `g` holds the final-stage arguments, row `j` of `p` holds the
/// phi_1..phi_{j+1} weights of Psi_{j+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SepirkTableau {
    pub name: String,
    pub a: RMatrix,
    pub g: RMatrix,
    pub p: RMatrix,
    pub b: Vec<Rational>,
    pub b_hat: Option<Vec<Rational>>,
    pub order: usize,
    pub embedded_order: Option<usize>,
}

/// Partitioned EXP-W method of GAXP type. Blocks are indexed `[q][m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PexpwTableau {
    pub name: String,
    pub stages: Vec<usize>,
    pub alpha: Vec<Vec<RMatrix>>,
    pub gamma: Vec<Vec<RMatrix>>,
    pub b: Vec<Vec<Rational>>,
    pub b_hat: Option<Vec<Vec<Rational>>>,
    pub order: usize,
    pub embedded_order: Option<usize>,
}

/// Partitioned EPIRK-W method of GAXP type. Blocks are indexed `[q][m]`;
/// the layout of each block follows [`SepirkTableau`].
#[derive(Debug, Clone, PartialEq)]
pub struct PepirkwTableau {
    pub name: String,
    pub stages: Vec<usize>,
    pub a: Vec<Vec<RMatrix>>,
    pub g: Vec<Vec<RMatrix>>,
    pub p: Vec<Vec<RMatrix>>,
    pub b: Vec<Vec<Rational>>,
    pub b_hat: Option<Vec<Vec<Rational>>>,
    pub order: usize,
    pub embedded_order: Option<usize>,
}

/// Two-partition split EPIRK method with unified stages (averaging
/// strategy). Vectors are indexed by partition.
#[derive(Debug, Clone, PartialEq)]
pub struct PsepirkTableau {
    pub name: String,
    pub stages: usize,
    pub a: Vec<RMatrix>,
    pub g: Vec<RMatrix>,
    pub p: Vec<RMatrix>,
    pub b: Vec<Vec<Rational>>,
    pub b_hat: Option<Vec<Vec<Rational>>>,
    pub order: usize,
    pub embedded_order: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MethodTableau {
    ExpW(ExpWTableau),
    Sepirk(SepirkTableau),
    Pexpw(PexpwTableau),
    Pepirkw(PepirkwTableau),
    Psepirk(PsepirkTableau),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    ExpW,
    Sepirk,
    Pexpw,
    Pepirkw,
    Psepirk,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::ExpW => "expw",
            Family::Sepirk => "sepirk",
            Family::Pexpw => "pexpw",
            Family::Pepirkw => "pepirkw",
            Family::Psepirk => "psepirk",
        })
    }
}

impl MethodTableau {
    pub fn name(&self) -> &str {
        match self {
            MethodTableau::ExpW(t) => &t.name,
            MethodTableau::Sepirk(t) => &t.name,
            MethodTableau::Pexpw(t) => &t.name,
            MethodTableau::Pepirkw(t) => &t.name,
            MethodTableau::Psepirk(t) => &t.name,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            MethodTableau::ExpW(_) => Family::ExpW,
            MethodTableau::Sepirk(_) => Family::Sepirk,
            MethodTableau::Pexpw(_) => Family::Pexpw,
            MethodTableau::Pepirkw(_) => Family::Pepirkw,
            MethodTableau::Psepirk(_) => Family::Psepirk,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            MethodTableau::ExpW(t) => t.order,
            MethodTableau::Sepirk(t) => t.order,
            MethodTableau::Pexpw(t) => t.order,
            MethodTableau::Pepirkw(t) => t.order,
            MethodTableau::Psepirk(t) => t.order,
        }
    }

    pub fn embedded_order(&self) -> Option<usize> {
        match self {
            MethodTableau::ExpW(t) => t.embedded_order,
            MethodTableau::Sepirk(t) => t.embedded_order,
            MethodTableau::Pexpw(t) => t.embedded_order,
            MethodTableau::Pepirkw(t) => t.embedded_order,
            MethodTableau::Psepirk(t) => t.embedded_order,
        }
    }

    pub fn has_embedded(&self) -> bool {
        match self {
            MethodTableau::ExpW(t) => t.b_hat.is_some(),
            MethodTableau::Sepirk(t) => t.b_hat.is_some(),
            MethodTableau::Pexpw(t) => t.b_hat.is_some(),
            MethodTableau::Pepirkw(t) => t.b_hat.is_some(),
            MethodTableau::Psepirk(t) => t.b_hat.is_some(),
        }
    }

    /// Number of right-hand-side partitions the method expects.
    pub fn partitions(&self) -> usize {
        match self {
            MethodTableau::ExpW(_) | MethodTableau::Sepirk(_) => 1,
            MethodTableau::Pexpw(t) => t.stages.len(),
            MethodTableau::Pepirkw(t) => t.stages.len(),
            MethodTableau::Psepirk(_) => 2,
        }
    }

    /// Whether the method needs the linear/nonlinear split of each partition.
    pub fn needs_split(&self) -> bool {
        matches!(self, MethodTableau::Sepirk(_) | MethodTableau::Psepirk(_))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawTableau = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let t = raw.into_tableau()?;
        check_shapes(&t)?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawTableau::from_tableau(self)).expect("tableau serializes")
    }
}

impl PexpwTableau {
    /// Single-partition view of an unpartitioned EXP-W tableau.
    pub fn from_expw(t: &ExpWTableau) -> Self {
        PexpwTableau {
            name: t.name.clone(),
            stages: vec![t.b.len()],
            alpha: vec![vec![t.alpha.clone()]],
            gamma: vec![vec![t.gamma.clone()]],
            b: vec![t.b.clone()],
            b_hat: t.b_hat.clone().map(|r| vec![r]),
            order: t.order,
            embedded_order: t.embedded_order,
        }
    }
}

/// Parses `"n/d"`, integers, and plain decimals (`"-0.125"`, `"1e-3"`) exactly.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("invalid rational '{s}'"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Parse(format!("zero denominator in '{s}'")));
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let num: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut q = if scale >= 0 {
        Rational::from_integer(num * ten.pow(scale as u32))
    } else {
        Rational::new(num, ten.pow((-scale) as u32))
    };
    if neg {
        q = -q;
    }
    Ok(q)
}

fn fmt_rational(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
enum RawTableau {
    Expw {
        name: String,
        order: usize,
        #[serde(default)]
        embedded_order: Option<usize>,
        alpha: Vec<Vec<String>>,
        gamma: Vec<Vec<String>>,
        b: Vec<String>,
        #[serde(default)]
        b_hat: Option<Vec<String>>,
    },
    Sepirk {
        name: String,
        order: usize,
        #[serde(default)]
        embedded_order: Option<usize>,
        a: Vec<Vec<String>>,
        g: Vec<Vec<String>>,
        p: Vec<Vec<String>>,
        b: Vec<String>,
        #[serde(default)]
        b_hat: Option<Vec<String>>,
    },
    Pexpw {
        name: String,
        order: usize,
        #[serde(default)]
        embedded_order: Option<usize>,
        stages: Vec<usize>,
        alpha: Vec<Vec<Vec<Vec<String>>>>,
        gamma: Vec<Vec<Vec<Vec<String>>>>,
        b: Vec<Vec<String>>,
        #[serde(default)]
        b_hat: Option<Vec<Vec<String>>>,
    },
    Pepirkw {
        name: String,
        order: usize,
        #[serde(default)]
        embedded_order: Option<usize>,
        stages: Vec<usize>,
        a: Vec<Vec<Vec<Vec<String>>>>,
        g: Vec<Vec<Vec<Vec<String>>>>,
        p: Vec<Vec<Vec<Vec<String>>>>,
        b: Vec<Vec<String>>,
        #[serde(default)]
        b_hat: Option<Vec<Vec<String>>>,
    },
    Psepirk {
        name: String,
        order: usize,
        #[serde(default)]
        embedded_order: Option<usize>,
        stages: usize,
        a: Vec<Vec<Vec<String>>>,
        g: Vec<Vec<Vec<String>>>,
        p: Vec<Vec<Vec<String>>>,
        b: Vec<Vec<String>>,
        #[serde(default)]
        b_hat: Option<Vec<Vec<String>>>,
    },
}

fn row(v: &[String]) -> Result<Vec<Rational>> {
    v.iter().map(|s| parse_rational(s)).collect()
}
fn mat(v: &[Vec<String>]) -> Result<RMatrix> {
    v.iter().map(|r| row(r)).collect()
}
fn mats(v: &[Vec<Vec<String>>]) -> Result<Vec<RMatrix>> {
    v.iter().map(|m| mat(m)).collect()
}
fn blocks(v: &[Vec<Vec<Vec<String>>>]) -> Result<Vec<Vec<RMatrix>>> {
    v.iter().map(|r| mats(r)).collect()
}
fn opt<T, U>(v: &Option<T>, f: impl Fn(&T) -> Result<U>) -> Result<Option<U>> {
    v.as_ref().map(f).transpose()
}

fn srow(v: &[Rational]) -> Vec<String> {
    v.iter().map(fmt_rational).collect()
}
fn smat(v: &RMatrix) -> Vec<Vec<String>> {
    v.iter().map(|r| srow(r)).collect()
}
fn smats(v: &[RMatrix]) -> Vec<Vec<Vec<String>>> {
    v.iter().map(smat).collect()
}
fn sblocks(v: &[Vec<RMatrix>]) -> Vec<Vec<Vec<Vec<String>>>> {
    v.iter().map(|r| smats(r)).collect()
}
fn srows(v: &[Vec<Rational>]) -> Vec<Vec<String>> {
    v.iter().map(|r| srow(r)).collect()
}

impl RawTableau {
    fn into_tableau(self) -> Result<MethodTableau> {
        Ok(match self {
            RawTableau::Expw {
                name,
                order,
                embedded_order,
                alpha,
                gamma,
                b,
                b_hat,
            } => MethodTableau::ExpW(ExpWTableau {
                name,
                alpha: mat(&alpha)?,
                gamma: mat(&gamma)?,
                b: row(&b)?,
                b_hat: opt(&b_hat, |r| row(r))?,
                order,
                embedded_order,
            }),
            RawTableau::Sepirk {
                name,
                order,
                embedded_order,
                a,
                g,
                p,
                b,
                b_hat,
            } => MethodTableau::Sepirk(SepirkTableau {
                name,
                a: mat(&a)?,
                g: mat(&g)?,
                p: mat(&p)?,
                b: row(&b)?,
                b_hat: opt(&b_hat, |r| row(r))?,
                order,
                embedded_order,
            }),
            RawTableau::Pexpw {
                name,
                order,
                embedded_order,
                stages,
                alpha,
                gamma,
                b,
                b_hat,
            } => MethodTableau::Pexpw(PexpwTableau {
                name,
                stages,
                alpha: blocks(&alpha)?,
                gamma: blocks(&gamma)?,
                b: mat(&b)?,
                b_hat: opt(&b_hat, |r| mat(r))?,
                order,
                embedded_order,
            }),
            RawTableau::Pepirkw {
                name,
                order,
                embedded_order,
                stages,
                a,
                g,
                p,
                b,
                b_hat,
            } => MethodTableau::Pepirkw(PepirkwTableau {
                name,
                stages,
                a: blocks(&a)?,
                g: blocks(&g)?,
                p: blocks(&p)?,
                b: mat(&b)?,
                b_hat: opt(&b_hat, |r| mat(r))?,
                order,
                embedded_order,
            }),
            RawTableau::Psepirk {
                name,
                order,
                embedded_order,
                stages,
                a,
                g,
                p,
                b,
                b_hat,
            } => MethodTableau::Psepirk(PsepirkTableau {
                name,
                stages,
                a: mats(&a)?,
                g: mats(&g)?,
                p: mats(&p)?,
                b: mat(&b)?,
                b_hat: opt(&b_hat, |r| mat(r))?,
                order,
                embedded_order,
            }),
        })
    }

    fn from_tableau(t: &MethodTableau) -> Self {
        match t {
            MethodTableau::ExpW(t) => RawTableau::Expw {
                name: t.name.clone(),
                order: t.order,
                embedded_order: t.embedded_order,
                alpha: smat(&t.alpha),
                gamma: smat(&t.gamma),
                b: srow(&t.b),
                b_hat: t.b_hat.as_ref().map(|r| srow(r)),
            },
            MethodTableau::Sepirk(t) => RawTableau::Sepirk {
                name: t.name.clone(),
                order: t.order,
                embedded_order: t.embedded_order,
                a: smat(&t.a),
                g: smat(&t.g),
                p: smat(&t.p),
                b: srow(&t.b),
                b_hat: t.b_hat.as_ref().map(|r| srow(r)),
            },
            MethodTableau::Pexpw(t) => RawTableau::Pexpw {
                name: t.name.clone(),
                order: t.order,
                embedded_order: t.embedded_order,
                stages: t.stages.clone(),
                alpha: sblocks(&t.alpha),
                gamma: sblocks(&t.gamma),
                b: srows(&t.b),
                b_hat: t.b_hat.as_ref().map(|r| srows(r)),
            },
            MethodTableau::Pepirkw(t) => RawTableau::Pepirkw {
                name: t.name.clone(),
                order: t.order,
                embedded_order: t.embedded_order,
                stages: t.stages.clone(),
                a: sblocks(&t.a),
                g: sblocks(&t.g),
                p: sblocks(&t.p),
                b: srows(&t.b),
                b_hat: t.b_hat.as_ref().map(|r| srows(r)),
            },
            MethodTableau::Psepirk(t) => RawTableau::Psepirk {
                name: t.name.clone(),
                order: t.order,
                embedded_order: t.embedded_order,
                stages: t.stages,
                a: smats(&t.a),
                g: smats(&t.g),
                p: smats(&t.p),
                b: srows(&t.b),
                b_hat: t.b_hat.as_ref().map(|r| srows(r)),
            },
        }
    }
}

fn check_mat(m: &RMatrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.len() != rows || m.iter().any(|r| r.len() != cols) {
        return Err(Error::contract(format!("{what} must be {rows}x{cols}")));
    }
    Ok(())
}

fn check_rows(b: &[Vec<Rational>], stages: &[usize], what: &str) -> Result<()> {
    if b.len() != stages.len() || b.iter().zip(stages).any(|(r, &s)| r.len() != s) {
        return Err(Error::contract(format!("{what} rows must match stage counts {stages:?}")));
    }
    Ok(())
}

fn check_epirk_blocks(a: &RMatrix, g: &RMatrix, p: &RMatrix, s: usize, what: &str) -> Result<()> {
    check_mat(a, s, s, &format!("{what} a"))?;
    check_mat(g, s, s, &format!("{what} g"))?;
    check_mat(p, s, s, &format!("{what} p"))
}

/// Shape and sign invariants; called by the loader.
pub fn check_shapes(t: &MethodTableau) -> Result<()> {
    match t {
        MethodTableau::ExpW(t) => {
            let s = t.b.len();
            if s == 0 {
                return Err(Error::contract("empty tableau"));
            }
            check_mat(&t.alpha, s, s, "alpha")?;
            check_mat(&t.gamma, s, s, "gamma")?;
            if let Some(bh) = &t.b_hat {
                check_rows(std::slice::from_ref(bh), &[s], "b_hat")?;
            }
            for i in 0..s {
                if !t.gamma[i][i].is_positive() {
                    return Err(Error::contract("diagonal gamma entries must be positive"));
                }
            }
        }
        MethodTableau::Sepirk(t) => {
            let s = t.b.len();
            if s == 0 {
                return Err(Error::contract("empty tableau"));
            }
            check_epirk_blocks(&t.a, &t.g, &t.p, s, "sepirk")?;
            if let Some(bh) = &t.b_hat {
                check_rows(std::slice::from_ref(bh), &[s], "b_hat")?;
            }
        }
        MethodTableau::Pexpw(t) => {
            let p = t.stages.len();
            if p == 0 || t.stages.contains(&0) {
                return Err(Error::contract("stage counts must be positive"));
            }
            if t.alpha.len() != p || t.gamma.len() != p {
                return Err(Error::contract("coupling blocks must be P x P"));
            }
            for q in 0..p {
                if t.alpha[q].len() != p || t.gamma[q].len() != p {
                    return Err(Error::contract("coupling blocks must be P x P"));
                }
                for m in 0..p {
                    check_mat(&t.alpha[q][m], t.stages[q], t.stages[m], &format!("alpha[{q}][{m}]"))?;
                    check_mat(&t.gamma[q][m], t.stages[q], t.stages[m], &format!("gamma[{q}][{m}]"))?;
                }
                for i in 0..t.stages[q] {
                    if !t.gamma[q][q][i][i].is_positive() {
                        return Err(Error::contract("diagonal gamma entries must be positive"));
                    }
                }
            }
            check_rows(&t.b, &t.stages, "b")?;
            if let Some(bh) = &t.b_hat {
                check_rows(bh, &t.stages, "b_hat")?;
            }
        }
        MethodTableau::Pepirkw(t) => {
            let p = t.stages.len();
            let s = *t.stages.first().ok_or_else(|| Error::contract("no partitions"))?;
            if s == 0 || t.stages.iter().any(|&x| x != s) {
                return Err(Error::contract("PEPIRKW partitions must share a positive stage count"));
            }
            for blocks in [&t.a, &t.g, &t.p] {
                if blocks.len() != p || blocks.iter().any(|r| r.len() != p) {
                    return Err(Error::contract("coupling blocks must be P x P"));
                }
            }
            for q in 0..p {
                for m in 0..p {
                    check_epirk_blocks(&t.a[q][m], &t.g[q][m], &t.p[q][m], s, &format!("block [{q}][{m}]"))?;
                }
            }
            check_rows(&t.b, &t.stages, "b")?;
            if let Some(bh) = &t.b_hat {
                check_rows(bh, &t.stages, "b_hat")?;
            }
        }
        MethodTableau::Psepirk(t) => {
            let s = t.stages;
            if s == 0 || t.a.len() != 2 || t.g.len() != 2 || t.p.len() != 2 {
                return Err(Error::contract("PSEPIRK needs two partitions and s > 0"));
            }
            for m in 0..2 {
                check_epirk_blocks(&t.a[m], &t.g[m], &t.p[m], s, &format!("partition {}", m + 1))?;
            }
            check_rows(&t.b, &[s, s], "b")?;
            if let Some(bh) = &t.b_hat {
                check_rows(bh, &[s, s], "b_hat")?;
            }
        }
    }
    Ok(())
}

pub const BUILTIN_NAMES: [&str; 5] = ["pexpw3a", "pexpw3b", "pepirkw3a", "pepirkw3b", "psepirkb"];

fn builtin_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "pexpw3a" => include_str!("data/pexpw3a.json"),
        "pexpw3b" => include_str!("data/pexpw3b.json"),
        "pepirkw3a" => include_str!("data/pepirkw3a.json"),
        "pepirkw3b" => include_str!("data/pepirkw3b.json"),
        "psepirkb" => include_str!("data/psepirkb.json"),
        _ => return None,
    })
}

/// One of the shipped methods, by lowercase identifier.
pub fn builtin(name: &str) -> Result<MethodTableau> {
    static CACHE: OnceLock<Vec<MethodTableau>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        BUILTIN_NAMES
            .iter()
            .map(|n| MethodTableau::from_json(builtin_source(n).unwrap()).expect("builtin tableau parses"))
            .collect()
    });
    let key = name.to_ascii_lowercase();
    BUILTIN_NAMES
        .iter()
        .position(|n| *n == key)
        .map(|i| all[i].clone())
        .ok_or_else(|| Error::UnknownMethod {
            name: name.to_string(),
            available: BUILTIN_NAMES.iter().map(|s| s.to_string()).collect(),
        })
}

/// Residual threshold under which an order check is reported as passing.
/// Several builtin tableaus are rational images of double-precision
/// coefficients, so their residuals are tiny but not exactly zero.
pub const DEFAULT_ORDER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OrderCheck {
    pub weights: WeightSet,
    pub order: usize,
    pub report: order_conditions::OrderReport,
}

impl OrderCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.report.passes(tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub name: String,
    pub shape_ok: bool,
    pub shape_error: Option<String>,
    pub checks: Vec<OrderCheck>,
}

impl ValidationReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.shape_ok && self.checks.iter().all(|c| c.passed(tol))
    }

    /// Largest residual over all checks.
    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.report.max_residual_f64()).fold(0.0, f64::max)
    }
}

/// Shape check plus order verification of the main and embedded weights.
pub fn validate(t: &MethodTableau) -> ValidationReport {
    let mut report = ValidationReport {
        name: t.name().to_string(),
        shape_ok: true,
        shape_error: None,
        checks: Vec::new(),
    };
    if let Err(e) = check_shapes(t) {
        report.shape_ok = false;
        report.shape_error = Some(e.to_string());
        return report;
    }
    let p = t.order().min(crate::order_conditions::MAX_ORDER);
    report.checks.push(OrderCheck {
        weights: WeightSet::Main,
        order: p,
        report: order_conditions::verify_tableau(t, WeightSet::Main, p),
    });
    if let (true, Some(pe)) = (t.has_embedded(), t.embedded_order()) {
        let pe = pe.min(crate::order_conditions::MAX_ORDER);
        report.checks.push(OrderCheck {
            weights: WeightSet::Embedded,
            order: pe,
            report: order_conditions::verify_tableau(t, WeightSet::Embedded, pe),
        });
    }
    report
}
