mod common;

use common::*;
use nalgebra::DMatrix;
use partexp::krylov::{build_adaptive, phi_action, phi_chain_action, psi_action, KrylovOptions, PhiEvaluator};
use partexp::operators::LinearOperator;
use partexp::phi::{phi_chain_dense, psi_apply_dense};
use proptest::prelude::*;

fn full(n: usize) -> KrylovOptions {
    KrylovOptions {
        tol: 1e-300,
        max_dim: n,
        rounding_floor: false,
        ..Default::default()
    }
}

fn laplacian(n: usize) -> LinearOperator {
    let dx2 = ((n + 1) as f64).powi(2);
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, -2.0 * dx2));
        if i + 1 < n {
            t.push((i, i + 1, dx2));
            t.push((i + 1, i, dx2));
        }
    }
    LinearOperator::from_triplets(n, &t).unwrap()
}

#[test]
fn full_dimension_matches_dense() {
    let mut r = rng(21);
    for _ in 0..5 {
        let a = random_matrix(&mut r, 12, 1.0);
        let b = random_vector(&mut r, 12);
        let op = LinearOperator::dense(a.clone()).unwrap();
        let d = build_adaptive(&op, &b, 0.8, &full(12)).unwrap();
        assert_eq!(d.dim, 12);
        assert!(d.converged);
        let dense = phi_chain_dense(&(&a * 0.8), &b, 4).unwrap();
        let kry = phi_chain_action(&d, 0.8, 4).unwrap();
        for k in 0..=4 {
            assert!(rel_diff(&kry[k], &dense[k]) <= 1e-10, "k = {k}");
        }
    }
}

#[test]
fn n8_phi1_exact() {
    let mut r = rng(22);
    let a = random_matrix(&mut r, 8, 2.0);
    let b = random_vector(&mut r, 8);
    let op = LinearOperator::dense(a.clone()).unwrap();
    let d = build_adaptive(&op, &b, 1.0, &full(8)).unwrap();
    let want = phi_chain_dense(&a, &b, 1).unwrap();
    assert!(rel_diff(&phi_action(&d, 1.0, 1).unwrap(), &want[1]) <= 1e-12);
}

#[test]
fn arnoldi_relation_and_orthonormality() {
    let mut r = rng(23);
    for symmetric in [false, true] {
        let m = random_matrix(&mut r, 40, 1.0);
        let a = if symmetric { &m + m.transpose() } else { m };
        let op = LinearOperator::dense(a.clone()).unwrap();
        let b = random_vector(&mut r, 40);
        let d = build_adaptive(
            &op,
            &b,
            1.0,
            &KrylovOptions {
                tol: 1e-300,
                max_dim: 20,
                rounding_floor: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(d.dim, 20);
        let vnext = d.next.clone().unwrap();
        for i in 0..20 {
            for j in 0..20 {
                let g: f64 = d.basis[i].iter().zip(&d.basis[j]).map(|(x, y)| x * y).sum();
                assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        for j in 0..20 {
            let av = matvec_f64(&a, &d.basis[j]);
            let mut rhs = vec![0.0; 40];
            for i in 0..20 {
                for (x, v) in rhs.iter_mut().zip(&d.basis[i]) {
                    *x += d.h[(i, j)] * v;
                }
            }
            if j == 19 {
                for (x, v) in rhs.iter_mut().zip(&vnext) {
                    *x += d.h_next * v;
                }
            }
            let res = norm2(&av.iter().zip(&rhs).map(|(x, y)| x - y).collect::<Vec<_>>());
            assert!(res <= 1e-10 * op.norm_estimate(), "symmetric {symmetric}, column {j}: {res:e}");
        }
    }
}

#[test]
fn dimension_monotone_in_tolerance() {
    let op = laplacian(200);
    let b: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.05).sin()).collect();
    for scale in [1e-5, 1e-4, 5e-4] {
        let loose = build_adaptive(
            &op,
            &b,
            scale,
            &KrylovOptions {
                tol: 1e-6,
                ..Default::default()
            },
        )
        .unwrap();
        let tight = build_adaptive(
            &op,
            &b,
            scale,
            &KrylovOptions {
                tol: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(loose.dim <= tight.dim, "scale {scale}: {} > {}", loose.dim, tight.dim);
    }
}

#[test]
fn laplacian_estimates_decrease_and_match_truncated_dense() {
    let op = laplacian(500);
    let b: Vec<f64> = (0..500)
        .map(|i| {
            let x = (i + 1) as f64 / 501.0;
            x * (1.0 - x)
        })
        .collect();
    // h gamma from a PEXPW3A step with h = 1e-4
    let scale = 1e-4 / 3.0;
    let floor = 1e-16 * norm2(&b);
    let mut last = f64::INFINITY;
    for &m in &[11, 15, 20, 27, 36, 46] {
        let d = build_adaptive(
            &op,
            &b,
            scale,
            &KrylovOptions {
                tol: 1e-300,
                max_dim: m,
                rounding_floor: false,
                ..Default::default()
            },
        )
        .unwrap();
        // monotone until both sit at rounding level
        assert!(
            d.estimate <= last || last.max(d.estimate) < floor,
            "M = {m}: {} after {last}",
            d.estimate
        );
        last = d.estimate;
    }
    let d = build_adaptive(&op, &b, scale, &KrylovOptions::default()).unwrap();
    assert!(d.converged && d.dim <= 100);

    let small = laplacian(100);
    let bs: Vec<f64> = (0..100)
        .map(|i| {
            let x = (i + 1) as f64 / 101.0;
            x * (1.0 - x)
        })
        .collect();
    let d = build_adaptive(&small, &bs, scale, &KrylovOptions::default()).unwrap();
    let want = phi_chain_dense(&(small.to_dense() * scale), &bs, 1).unwrap();
    let got = phi_action(&d, scale, 1).unwrap();
    assert!(rel_diff(&got, &want[1]) <= 1e-10);
}

#[test]
fn phi2_on_tridiagonal_matches_spectral() {
    let op = laplacian(30);
    let a = op.to_dense() * 1e-3;
    let b: Vec<f64> = (0..30).map(|i| (i as f64).cos()).collect();
    let d = build_adaptive(&op, &b, 1e-3, &KrylovOptions::default()).unwrap();
    let got = phi_action(&d, 1e-3, 2).unwrap();
    assert!(rel_diff(&got, &spectral_phi(&a, &b, 2)) <= 1e-10);
}

#[test]
fn psi_matches_dense_on_symmetric() {
    let mut r = rng(24);
    let m = random_matrix(&mut r, 30, 0.5);
    let a = &m + m.transpose();
    let b = random_vector(&mut r, 30);
    let w = [1.0, 0.5, 0.25];
    let op = LinearOperator::dense(a.clone()).unwrap();
    let tol = 1e-10;
    let got = psi_action(&op, &b, 0.7, &w, &KrylovOptions { tol, ..Default::default() }).unwrap();
    let want = psi_apply_dense(&w, &(&a * 0.7), &b).unwrap();
    let err = norm2(&got.value.iter().zip(&want).map(|(x, y)| x - y).collect::<Vec<_>>());
    assert!(err <= 10.0 * tol, "{err:e}");
    let single = psi_action(&op, &b, 0.7, &[1.0], &KrylovOptions::default()).unwrap();
    let d = build_adaptive(&op, &b, 0.7, &KrylovOptions::default()).unwrap();
    assert_eq!(single.value, phi_action(&d, 0.7, 1).unwrap());
}

#[test]
fn evaluator_diagonal_and_block_paths_agree_with_dense() {
    let mut r = rng(25);
    let d: Vec<f64> = random_vector(&mut r, 5).iter().map(|x| 10.0 * x).collect();
    let op = LinearOperator::diagonal(d.clone());
    let b = random_vector(&mut r, 5);
    let ev = PhiEvaluator::default();
    let got = ev.chain(&op, 0.3, &b, 3, None).unwrap();
    let want = phi_chain_dense(&(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)) * 0.3), &b, 3).unwrap();
    for k in 0..=3 {
        assert!(rel_diff(&got.chain[k], &want[k]) <= 1e-13);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn hint_neutrality(seed in 0u64..500, hint in 1usize..120) {
        let op = laplacian(150);
        let mut r = rng(seed);
        let b = random_vector(&mut r, 150);
        let tol = 1e-10;
        let base = build_adaptive(&op, &b, 2e-5, &KrylovOptions { tol, ..Default::default() }).unwrap();
        let hinted = build_adaptive(&op, &b, 2e-5, &KrylovOptions { tol, hint: Some(hint), ..Default::default() }).unwrap();
        let x = phi_action(&base, 2e-5, 1).unwrap();
        let y = phi_action(&hinted, 2e-5, 1).unwrap();
        let diff = norm2(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
        prop_assert!(diff <= 10.0 * tol, "{diff:e}");
    }
}

#[test]
fn rounding_floor_accepts_attainable_accuracy() {
    let op = laplacian(100);
    let b: Vec<f64> = (0..100).map(|i| 50.0 * ((i as f64) * 0.3).cos()).collect();
    let scale = 2e-3;
    let strict = KrylovOptions {
        tol: 1e-300,
        ..Default::default()
    };
    let d = build_adaptive(&op, &b, scale, &strict).unwrap();
    assert!(d.converged && d.dim < 100, "dim {}", d.dim);
    let want = phi_chain_dense(&(op.to_dense() * scale), &b, 1).unwrap();
    assert!(rel_diff(&phi_action(&d, scale, 1).unwrap(), &want[1]) <= 1e-12);
    let capped = build_adaptive(
        &op,
        &b,
        scale,
        &KrylovOptions {
            rounding_floor: false,
            max_dim: 60,
            ..strict
        },
    )
    .unwrap();
    assert!(!capped.converged);
}
