//! The tree ordering and composition-rule rows are frozen in `data/tps_trees.tsv`.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use partexp::order_conditions::{
    bs_compose_function, bs_matrix, enumerate_trees, exact_coeffs, BSeriesVector, MethodKind, NodeKind, Rational,
};
use partexp::tableaus::parse_rational;

struct Row {
    tree: String,
    rows: [String; 4],
    inv_gamma_w: Rational,
    inv_gamma_s: Rational,
}

fn fixture() -> Vec<Row> {
    include_str!("data/tps_trees.tsv")
        .lines()
        .skip(1)
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            assert_eq!(f.len(), 8, "line {}", i + 2);
            assert_eq!(f[0].parse::<usize>().unwrap(), i + 1);
            Row {
                tree: f[1].to_string(),
                rows: [f[2], f[3], f[4], f[5]].map(String::from),
                inv_gamma_w: parse_rational(f[6]).unwrap(),
                inv_gamma_s: parse_rational(f[7]).unwrap(),
            }
        })
        .collect()
}

/// Evaluates a monomial like `x1*x2`, `x3^2`, `x105`, `0` or `1`.
fn eval(expr: &str, a: &BSeriesVector<Rational>) -> Rational {
    match expr {
        "0" => return Rational::zero(),
        "1" => return Rational::one(),
        _ => {}
    }
    expr.split('*').fold(Rational::one(), |acc, factor| {
        let (var, pow) = factor.split_once('^').unwrap_or((factor, "1"));
        let idx: usize = var.strip_prefix('x').unwrap().parse().unwrap();
        let slot = if idx == 105 { 0 } else { idx };
        let v = a.get(slot).clone();
        (0..pow.parse::<u32>().unwrap()).fold(acc, |acc, _| acc * v.clone())
    })
}

fn probe() -> BSeriesVector<Rational> {
    let coeffs = (0..BSeriesVector::<Rational>::LEN)
        .map(|i| Rational::new(BigInt::from((i * 37 + 11) % 101) - 50, BigInt::from(i % 7 + 1)))
        .collect();
    BSeriesVector::from_coeffs(coeffs)
}

#[test]
fn canonical_serialization_is_stable() {
    let got: Vec<String> = enumerate_trees().iter().map(ToString::to_string).collect();
    let want: Vec<String> = fixture().into_iter().map(|r| r.tree).collect();
    assert_eq!(got, want);
}

#[test]
fn exact_coefficients_match_table() {
    let w: BSeriesVector<Rational> = exact_coeffs(MethodKind::W);
    let s: BSeriesVector<Rational> = exact_coeffs(MethodKind::S);
    assert!(w.empty().is_one() && s.empty().is_one());
    for (i, row) in fixture().iter().enumerate() {
        assert_eq!(w.get(i + 1), &row.inv_gamma_w, "W tree {}", row.tree);
        assert_eq!(s.get(i + 1), &row.inv_gamma_s, "S tree {}", row.tree);
    }
}

#[test]
fn composition_rows_match_table() {
    let a = probe();
    let series = [
        bs_compose_function(NodeKind::N, &a),
        bs_matrix(NodeKind::L, &a),
        bs_compose_function(NodeKind::P, &a),
        bs_matrix(NodeKind::M, &a),
    ];
    for (i, row) in fixture().iter().enumerate() {
        for (k, s) in series.iter().enumerate() {
            assert_eq!(s.get(i + 1), &eval(&row.rows[k], &a), "tree {} row {k}", row.tree);
        }
    }
}
