//! B-series order verification for partitioned exponential methods.
//!
//! Every method is pushed through the composition rules of [`bseries`] to get
//! the coefficient vector of its one-step map, which is then compared with the
//! exact-solution vector tree by tree.

pub mod bseries;
pub mod trees;

pub use bseries::{
    bs_compose_function, bs_forward_difference, bs_matrix, bs_matrix_function, exact_coeffs, phi_weights, psi_weights, BSeriesVector,
    Coeff, MethodKind, Rational,
};
pub use trees::{enumerate_trees, tree_table, NodeKind, TpsTree, MAX_ORDER, NUM_TREES};

use num_traits::{Signed, ToPrimitive, Zero};

use crate::tableaus::{MethodTableau, PepirkwTableau, PexpwTableau, PsepirkTableau, RMatrix, SepirkTableau};

/// Main weights `b` or embedded weights `b_hat`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightSet {
    Main,
    Embedded,
}

fn weights<'a, R>(b: &'a R, b_hat: &'a Option<R>, w: WeightSet) -> &'a R {
    match w {
        WeightSet::Main => b,
        WeightSet::Embedded => b_hat.as_ref().expect("tableau has no embedded weights"),
    }
}

fn c<T: Coeff>(q: &Rational) -> T {
    T::from_rational(q)
}

fn m_at<T: Coeff>(m: &RMatrix, i: usize, j: usize) -> T {
    c(&m[i][j])
}

/// Coefficients of the PEXPW one-step map (stages in lockstep, phi_1 with
/// argument h gamma_ii W^{q}).
pub fn numerical_bseries_pexpw<T: Coeff>(t: &PexpwTableau, w: WeightSet) -> BSeriesVector<T> {
    let p = t.stages.len();
    assert!(p <= 2, "the tree table covers at most two partitions");
    let y = BSeriesVector::<T>::identity();
    let mut k: Vec<Vec<BSeriesVector<T>>> = vec![Vec::new(); p];
    let smax = *t.stages.iter().max().unwrap_or(&0);
    for i in 0..smax {
        for q in 0..p {
            if i >= t.stages[q] {
                continue;
            }
            let mut u = y.clone();
            let mut g = BSeriesVector::<T>::zero();
            for m in 0..p {
                for j in 0..i.min(t.stages[m]) {
                    u.axpy(&m_at(&t.alpha[q][m], i, j), &k[m][j]);
                    g.axpy(&m_at(&t.gamma[q][m], i, j), &k[m][j]);
                }
            }
            let sq = NodeKind::square(q);
            let inner = bs_compose_function(NodeKind::round(q), &u).add(&bs_matrix(sq, &g));
            let gii: T = m_at(&t.gamma[q][q], i, i);
            k[q].push(bs_matrix_function(&phi_weights(1, &gii), sq, &inner));
        }
    }
    let b = weights(&t.b, &t.b_hat, w);
    let mut out = y;
    for q in 0..p {
        for (i, ki) in k[q].iter().enumerate() {
            out.axpy(&c(&b[q][i]), ki);
        }
    }
    out
}

fn psi_term<T: Coeff>(p_row: &[Rational], j: usize, g: &Rational, kind: NodeKind, v: &BSeriesVector<T>) -> BSeriesVector<T> {
    let p: Vec<T> = p_row[..=j].iter().map(c).collect();
    bs_matrix_function(&psi_weights(&p, &c(g)), kind, v)
}

/// Coefficients of the PEPIRKW one-step map. Forward differences of f^{m}
/// run over the stage values of partition m.
pub fn numerical_bseries_pepirkw<T: Coeff>(t: &PepirkwTableau, w: WeightSet) -> BSeriesVector<T> {
    let p = t.stages.len();
    assert!(p <= 2, "the tree table covers at most two partitions");
    let s = t.stages[0];
    let y = BSeriesVector::<T>::identity();
    let f = |m: usize, a: &BSeriesVector<T>| bs_compose_function(NodeKind::round(m), a);
    // nodes[m] = (y_n, Y_1^{m}, ...), fvals[m] = h f^{m} at those nodes
    let mut fvals: Vec<Vec<BSeriesVector<T>>> = (0..p).map(|m| vec![f(m, &y)]).collect();
    for i in 0..s.saturating_sub(1) {
        let mut stage = Vec::with_capacity(p);
        for q in 0..p {
            let mut u = y.clone();
            for m in 0..p {
                for j in 0..=i {
                    let a: T = m_at(&t.a[q][m], i, j);
                    if a.is_zero() {
                        continue;
                    }
                    let v = bs_forward_difference(&fvals[m], j);
                    u.axpy(&a, &psi_term(&t.p[q][m][j], j, &t.g[q][m][i][j], NodeKind::square(m), &v));
                }
            }
            stage.push(u);
        }
        for (m, ym) in stage.iter().enumerate() {
            fvals[m].push(f(m, ym));
        }
    }
    let b = weights(&t.b, &t.b_hat, w);
    let mut out = y;
    for m in 0..p {
        for j in 0..s {
            let v = bs_forward_difference(&fvals[m], j);
            out.axpy(
                &c(&b[m][j]),
                &psi_term(&t.p[m][m][j], j, &t.g[m][m][s - 1][j], NodeKind::square(m), &v),
            );
        }
    }
    out
}

/// Coefficients of the averaged partitioned sEPIRK map over split trees.
pub fn numerical_bseries_psepirk<T: Coeff>(t: &PsepirkTableau, w: WeightSet) -> BSeriesVector<T> {
    let s = t.stages;
    let y = BSeriesVector::<T>::identity();
    let full = |a: &BSeriesVector<T>| {
        bs_compose_function(NodeKind::N, a)
            .add(&bs_matrix(NodeKind::L, a))
            .add(&bs_compose_function(NodeKind::P, a))
            .add(&bs_matrix(NodeKind::M, a))
    };
    // R^{1} = N^{1} + f^{2}, R^{2} = N^{2} + f^{1}
    let rem = |m: usize, a: &BSeriesVector<T>| {
        let other = 1 - m;
        bs_compose_function(NodeKind::round(m), a)
            .add(&bs_compose_function(NodeKind::round(other), a))
            .add(&bs_matrix(NodeKind::square(other), a))
    };
    let hf = full(&y);
    let mut rvals: Vec<Vec<BSeriesVector<T>>> = (0..2).map(|m| vec![rem(m, &y)]).collect();
    let combine = |row: usize, coef: &dyn Fn(usize, usize) -> T, rvals: &Vec<Vec<BSeriesVector<T>>>| {
        let mut u = BSeriesVector::<T>::zero();
        for m in 0..2 {
            for l in 0..=row {
                let a = coef(m, l);
                if a.is_zero() {
                    continue;
                }
                let v = if l == 0 { hf.clone() } else { bs_forward_difference(&rvals[m], l) };
                u.axpy(&a, &psi_term(&t.p[m][l], l, &t.g[m][row][l], NodeKind::square(m), &v));
            }
        }
        u
    };
    for i in 0..s.saturating_sub(1) {
        let yi = y.add(&combine(i, &|m, l| m_at(&t.a[m], i, l), &rvals));
        for (m, r) in rvals.iter_mut().enumerate() {
            r.push(rem(m, &yi));
        }
    }
    let b = weights(&t.b, &t.b_hat, w);
    y.add(&combine(s - 1, &|m, l| c(&b[m][l]), &rvals))
}

/// Coefficients of an unpartitioned split EPIRK map (partition-1 trees only).
pub fn numerical_bseries_sepirk<T: Coeff>(t: &SepirkTableau, w: WeightSet) -> BSeriesVector<T> {
    let s = t.b.len();
    let y = BSeriesVector::<T>::identity();
    let hf = bs_compose_function(NodeKind::N, &y).add(&bs_matrix(NodeKind::L, &y));
    let mut nvals = vec![bs_compose_function(NodeKind::N, &y)];
    let combine = |row: usize, coef: &dyn Fn(usize) -> T, nvals: &Vec<BSeriesVector<T>>| {
        let mut u = BSeriesVector::<T>::zero();
        for l in 0..=row {
            let a = coef(l);
            if a.is_zero() {
                continue;
            }
            let v = if l == 0 { hf.clone() } else { bs_forward_difference(nvals, l) };
            u.axpy(&a, &psi_term(&t.p[l], l, &t.g[row][l], NodeKind::L, &v));
        }
        u
    };
    for i in 0..s.saturating_sub(1) {
        let yi = y.add(&combine(i, &|l| m_at(&t.a, i, l), &nvals));
        nvals.push(bs_compose_function(NodeKind::N, &yi));
    }
    let b = weights(&t.b, &t.b_hat, w);
    y.add(&combine(s - 1, &|l| c(&b[l]), &nvals))
}

/// Per-tree comparison of a numerical series with the exact one.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub order: usize,
    pub kind: MethodKind,
    /// Slots (1-based tree indices) that were compared.
    pub checked: Vec<usize>,
    /// Signed residual numerical - exact for each checked slot.
    pub residuals: Vec<Rational>,
    pub numerical: BSeriesVector<Rational>,
}

impl OrderReport {
    pub fn max_residual(&self) -> Rational {
        self.residuals.iter().map(|r| r.abs()).max().unwrap_or_else(Rational::zero)
    }

    pub fn max_residual_f64(&self) -> f64 {
        self.max_residual().to_f64().unwrap_or(f64::INFINITY)
    }

    /// Slots whose residual exceeds `tol` in magnitude (`tol = 0` means exact).
    pub fn violations(&self, tol: f64) -> Vec<usize> {
        self.checked
            .iter()
            .zip(&self.residuals)
            .filter(|(_, r)| {
                if tol == 0.0 {
                    !r.is_zero()
                } else {
                    r.abs().to_f64().unwrap_or(f64::INFINITY) > tol
                }
            })
            .map(|(&s, _)| s)
            .collect()
    }

    pub fn first_violation(&self) -> Option<usize> {
        self.violations(crate::tableaus::DEFAULT_ORDER_TOL).first().copied()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.violations(tol).is_empty()
    }

    pub fn exact(&self) -> bool {
        self.residuals.iter().all(Zero::is_zero)
    }
}

fn compare(numerical: BSeriesVector<Rational>, kind: MethodKind, p: usize, single_partition: bool) -> OrderReport {
    let table = tree_table();
    let exact: BSeriesVector<Rational> = exact_coeffs(kind);
    let checked: Vec<usize> = (1..=table.len())
        .filter(|&s| table.order(s) <= p)
        .filter(|&s| !single_partition || !uses_partition_two(table.tree(s).unwrap()))
        .collect();
    let residuals = checked.iter().map(|&s| numerical.get(s) - exact.get(s)).collect();
    OrderReport {
        order: p,
        kind,
        checked,
        residuals,
        numerical,
    }
}

fn uses_partition_two(t: &TpsTree) -> bool {
    t.root.partition() == 1 || t.children.iter().any(uses_partition_two)
}

/// Compares a method's series with the exact one on every tree of order <= p.
pub fn verify_order(numerical: &BSeriesVector<Rational>, kind: MethodKind, p: usize) -> OrderReport {
    compare(numerical.clone(), kind, p.min(MAX_ORDER), false)
}

/// Numerical series of any tableau in exact arithmetic.
pub fn numerical_bseries(t: &MethodTableau, w: WeightSet) -> BSeriesVector<Rational> {
    match t {
        MethodTableau::ExpW(e) => numerical_bseries_pexpw(&PexpwTableau::from_expw(e), w),
        MethodTableau::Sepirk(e) => numerical_bseries_sepirk(e, w),
        MethodTableau::Pexpw(e) => numerical_bseries_pexpw(e, w),
        MethodTableau::Pepirkw(e) => numerical_bseries_pepirkw(e, w),
        MethodTableau::Psepirk(e) => numerical_bseries_psepirk(e, w),
    }
}

/// Method family's exact-solution kind.
pub fn method_kind(t: &MethodTableau) -> MethodKind {
    match t {
        MethodTableau::Sepirk(_) | MethodTableau::Psepirk(_) => MethodKind::S,
        _ => MethodKind::W,
    }
}

/// Order report for a tableau. Single-partition methods are compared only on
/// trees built from partition-1 nodes.
pub fn verify_tableau(t: &MethodTableau, w: WeightSet, p: usize) -> OrderReport {
    let single = t.partitions() == 1;
    compare(numerical_bseries(t, w), method_kind(t), p.min(MAX_ORDER), single)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableaus::{builtin, parse_rational, ExpWTableau};
    use num_traits::One;

    fn q(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    fn slot(s: &str) -> usize {
        tree_table().slot(&TpsTree::parse(s).unwrap()).unwrap()
    }

    #[test]
    fn exact_against_itself() {
        let e: BSeriesVector<Rational> = exact_coeffs(MethodKind::W);
        let r = verify_order(&e, MethodKind::W, 3);
        assert!(r.violations(0.0).is_empty());
        assert_eq!(r.checked.len(), 104);
    }

    #[test]
    fn pexpw_main_solutions_are_exact() {
        for name in ["pexpw3a", "pexpw3b"] {
            let t = builtin(name).unwrap();
            let r = verify_tableau(&t, WeightSet::Main, 3);
            assert!(r.exact(), "{name}: {:?}", r.violations(0.0));
        }
    }

    #[test]
    fn builtin_embedded_weights_are_second_order_not_third() {
        for name in crate::tableaus::BUILTIN_NAMES {
            let t = builtin(name).unwrap();
            assert!(verify_tableau(&t, WeightSet::Embedded, 2).passes(1e-12), "{name}");
            assert!(!verify_tableau(&t, WeightSet::Embedded, 3).passes(1e-12), "{name}");
        }
    }

    #[test]
    fn zero_pepirkw_is_identity() {
        let crate::tableaus::MethodTableau::Pepirkw(mut t) = builtin("pepirkw3a").unwrap() else {
            panic!()
        };
        for row in t.a.iter_mut().flatten().flatten() {
            row.iter_mut().for_each(|x| *x = Rational::zero());
        }
        for row in t.b.iter_mut() {
            row.iter_mut().for_each(|x| *x = Rational::zero());
        }
        assert_eq!(
            numerical_bseries_pepirkw::<Rational>(&t, WeightSet::Main),
            BSeriesVector::identity()
        );
    }

    #[test]
    fn float_engine_matches_exact() {
        let t = builtin("pepirkw3b").unwrap();
        let crate::tableaus::MethodTableau::Pepirkw(ref inner) = t else {
            panic!()
        };
        let exact = numerical_bseries_pepirkw::<Rational>(inner, WeightSet::Main);
        let float = numerical_bseries_pepirkw::<f64>(inner, WeightSet::Main);
        for i in 0..BSeriesVector::<f64>::LEN {
            assert!((exact.get(i).to_f64().unwrap() - float.get(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn perturbation_of_pexpw3a_is_detected() {
        let crate::tableaus::MethodTableau::Pexpw(base) = builtin("pexpw3a").unwrap() else {
            panic!()
        };
        let eps = q("1/1000000");
        let detected = |t: PexpwTableau| {
            let t = crate::tableaus::MethodTableau::Pexpw(t);
            !verify_tableau(&t, WeightSet::Main, 3).exact() || !verify_tableau(&t, WeightSet::Embedded, 2).passes(1e-20)
        };
        let mut t = base.clone();
        t.gamma[1][1][3][2] += eps.clone();
        assert!(detected(t));
        let mut t = base;
        t.alpha[0][1][2][1] += eps;
        assert!(detected(t));
    }

    #[test]
    fn exponential_euler_w_is_first_order() {
        let t = ExpWTableau {
            name: "expeuler".into(),
            alpha: vec![vec![q("0")]],
            gamma: vec![vec![q("1")]],
            b: vec![q("1")],
            b_hat: None,
            order: 1,
            embedded_order: None,
        };
        let t = crate::tableaus::MethodTableau::ExpW(t);
        assert!(verify_tableau(&t, WeightSet::Main, 1).exact());
        let r = verify_tableau(&t, WeightSet::Main, 2);
        // W-exact L[N] is zero while phi_1 contributes 1/2
        assert_eq!(r.violations(0.0), vec![slot("N[N]"), slot("L[N]")]);
    }

    #[test]
    fn exponential_euler_split_is_exact_for_linear_trees() {
        // y + phi_1(hL) hF(y): second order on L-chains, first order otherwise.
        let t = SepirkTableau {
            name: "expeuler".into(),
            a: vec![vec![q("0")]],
            g: vec![vec![q("1")]],
            p: vec![vec![q("1")]],
            b: vec![q("1")],
            b_hat: None,
            order: 1,
            embedded_order: None,
        };
        let r = verify_tableau(&crate::tableaus::MethodTableau::Sepirk(t), WeightSet::Main, 3);
        let v = r.violations(0.0);
        assert!(!v.contains(&slot("L[L]")) && !v.contains(&slot("L[N]")) && !v.contains(&slot("L[L[L]]")));
        assert!(v.contains(&slot("N[N]")));
    }

    /// GAXP split EPIRK (functions of L^{k} only ever see partition-k vectors)
    /// built from exponential-Euler parts with one internal stage.
    fn gaxp_sepirk_series() -> BSeriesVector<Rational> {
        let half = q("1/2");
        let y = BSeriesVector::<Rational>::identity();
        let hf = |k: usize, a: &BSeriesVector<Rational>| bs_compose_function(NodeKind::round(k), a).add(&bs_matrix(NodeKind::square(k), a));
        let phi1 = phi_weights::<Rational>(1, &Rational::one());
        let mut stage = y.clone();
        for k in 0..2 {
            stage.axpy(&half, &bs_matrix_function(&phi1, NodeKind::square(k), &hf(k, &y)));
        }
        let mut out = y.clone();
        for k in 0..2 {
            let sq = NodeKind::square(k);
            out.axpy(&Rational::one(), &bs_matrix_function(&phi1, sq, &hf(k, &y)));
            let dn = bs_compose_function(NodeKind::round(k), &stage).sub(&bs_compose_function(NodeKind::round(k), &y));
            // Psi = 2 phi_2, so the leading weight times the stage node 1/2 gives 1/2
            let psi2 = psi_weights(&[Rational::zero(), Rational::from_integer(2.into())], &Rational::one());
            out.axpy(&Rational::one(), &bs_matrix_function(&psi2, sq, &dn));
        }
        out
    }

    #[test]
    fn gaxp_split_method_fails_only_on_mixed_trees() {
        let r = verify_order(&gaxp_sepirk_series(), MethodKind::S, 2);
        let mut v = r.violations(0.0);
        v.sort();
        let mut want: Vec<usize> = ["L[P]", "L[M]", "M[N]", "M[L]"].iter().map(|s| slot(s)).collect();
        want.sort();
        assert_eq!(v, want);
    }

    /// Elementary-weight recursion of an explicit GARK method: stage i of
    /// partition q is y_n + sum_m sum_l abar[q][m][i][l] h f^{m}(Z_l^{m}),
    /// with Z_0^{m} = y_n.
    fn degenerate_rk_series(abar: &[Vec<Vec<Vec<Rational>>>], bbar: &[Vec<Rational>]) -> Vec<Rational> {
        let table = tree_table();
        let s = bbar[0].len();
        // phi[q][i][slot]: coefficient of stage i of partition q
        let mut stage: Vec<Vec<Vec<Rational>>> = vec![vec![vec![Rational::zero(); 105]; s]; 2];
        for q_ in 0..2 {
            for i in 0..s {
                stage[q_][i][0] = Rational::one();
            }
        }
        // elementary differentials over round-only trees, processed by order
        for ord in 1..=3 {
            for slot in 1..=table.len() {
                let t = table.tree(slot).unwrap();
                if t.order() != ord || t.contains_square() {
                    continue;
                }
                let m = t.root.partition();
                for q_ in 0..2 {
                    for i in 0..s {
                        let mut acc = Rational::zero();
                        for l in 0..s {
                            let prod = table.children(slot).iter().fold(Rational::one(), |a, &c| a * &stage[m][l][c]);
                            acc += &abar[q_][m][i][l] * prod;
                        }
                        stage[q_][i][slot] = acc;
                    }
                }
            }
        }
        let mut out = vec![Rational::zero(); 105];
        out[0] = Rational::one();
        for slot in 1..=table.len() {
            let t = table.tree(slot).unwrap();
            if t.contains_square() {
                continue;
            }
            let m = t.root.partition();
            out[slot] = (0..s)
                .map(|l| &bbar[m][l] * table.children(slot).iter().fold(Rational::one(), |a, &c| a * &stage[m][l][c]))
                .fold(Rational::zero(), |a, b| a + b);
        }
        out
    }

    #[test]
    fn degenerate_pepirkw_matches_classical_rk_recursion() {
        let crate::tableaus::MethodTableau::Pepirkw(mut t) = builtin("pepirkw3a").unwrap() else {
            panic!()
        };
        for blk in t.g.iter_mut().flatten() {
            for row in blk.iter_mut() {
                row.iter_mut().for_each(|x| *x = Rational::zero());
            }
        }
        let s = 3;
        // Psi_j(0) = sum_k p_jk / k!
        let psi0 = |p: &RMatrix, j: usize| (0..=j).fold(Rational::zero(), |acc, k| acc + &p[j][k] * Rational::inv_factorial(k + 1));
        // Expand differences: Delta^{(j)} over nodes 0..=j has binomial weights.
        let binom = |n: usize, k: usize| -> Rational {
            let v: u64 = (0..k).fold(1u64, |a, i| a * (n - i) as u64 / (i + 1) as u64);
            Rational::from_integer(v.into())
        };
        let diff_weight = |j: usize, l: usize| -> Rational {
            let w = binom(j, l);
            if (j - l) % 2 == 1 {
                -w
            } else {
                w
            }
        };
        // Stage index 0 is y_n and index i is Y_i.
        let mut abar = vec![vec![vec![vec![Rational::zero(); s]; s]; 2]; 2];
        for q_ in 0..2 {
            for m in 0..2 {
                for i in 0..s - 1 {
                    for j in 0..=i {
                        let coef = &t.a[q_][m][i][j] * psi0(&t.p[q_][m], j);
                        for l in 0..=j {
                            abar[q_][m][i + 1][l] += &coef * diff_weight(j, l);
                        }
                    }
                }
            }
        }
        let mut bbar = vec![vec![Rational::zero(); s]; 2];
        for m in 0..2 {
            for j in 0..s {
                let coef = &t.b[m][j] * psi0(&t.p[m][m], j);
                for l in 0..=j {
                    bbar[m][l] += &coef * diff_weight(j, l);
                }
            }
        }
        let oracle = degenerate_rk_series(&abar, &bbar);
        let got = numerical_bseries_pepirkw::<Rational>(&t, WeightSet::Main);
        let table = tree_table();
        for slot in 1..=table.len() {
            if table.tree(slot).unwrap().contains_square() {
                continue;
            }
            assert_eq!(got.get(slot), &oracle[slot], "tree {}", table.tree(slot).unwrap());
        }
    }
}
