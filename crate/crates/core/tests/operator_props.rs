mod common;

use common::*;
use nalgebra::DMatrix;
use partexp::krylov::PhiEvaluator;
use partexp::operators::{permuted_phi_action, permuted_psi_action, IndexPermutation, LinearOperator};
use partexp::phi::{phi_chain_dense, psi_apply_dense};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_perm(r: &mut ChaCha8Rng, n: usize) -> IndexPermutation {
    let mut f: Vec<usize> = (0..n).collect();
    f.shuffle(r);
    IndexPermutation::new(f).unwrap()
}

fn random_blocks(r: &mut ChaCha8Rng, sizes: &[usize], scale: f64) -> LinearOperator {
    LinearOperator::block_diagonal(
        sizes
            .iter()
            .map(|&s| LinearOperator::dense(random_matrix(r, s, scale)).unwrap())
            .collect(),
    )
}

fn sample_ops(r: &mut ChaCha8Rng) -> Vec<LinearOperator> {
    let dense = LinearOperator::dense(random_matrix(r, 6, 1.0)).unwrap();
    let diag = LinearOperator::diagonal(random_vector(r, 6));
    let trip: Vec<(usize, usize, f64)> = (0..10)
        .map(|_| (r.gen_range(0..6), r.gen_range(0..6), r.gen_range(-1.0..1.0)))
        .collect();
    let sparse = LinearOperator::from_triplets(6, &trip).unwrap();
    let blocks = random_blocks(r, &[2, 4], 1.0);
    let perm = LinearOperator::permuted(random_blocks(r, &[3, 3], 1.0), random_perm(r, 6)).unwrap();
    let m = dense.to_dense();
    let action = LinearOperator::action(6, false, move |v, o| {
        for i in 0..6 {
            o[i] = (0..6).map(|j| m[(i, j)] * v[j]).sum();
        }
    });
    vec![dense, diag, sparse, blocks, perm, action]
}

#[test]
fn block_apply_matches_assembled_dense() {
    let mut r = rng(31);
    for _ in 0..10 {
        let op = random_blocks(&mut r, &[2, 3, 4], 1.0);
        let v = random_vector(&mut r, 9);
        assert!(rel_diff(&op.apply(&v).unwrap(), &matvec_f64(&op.to_dense(), &v)) <= 1e-13);
    }
}

#[test]
fn permuted_apply_matches_explicit_product() {
    let mut r = rng(32);
    let inner = random_blocks(&mut r, &[3, 3], 1.0);
    let perm = random_perm(&mut r, 6);
    let p = perm.to_matrix();
    let jr = &p * inner.to_dense() * p.transpose();
    let op = LinearOperator::permuted(inner, perm).unwrap();
    let v = random_vector(&mut r, 6);
    assert!(rel_diff(&op.apply(&v).unwrap(), &matvec_f64(&jr, &v)) <= 1e-14);
}

#[test]
fn permuted_phi_matches_dense() {
    let ev = PhiEvaluator::default();
    let mut r = rng(33);
    for k in 0..=3 {
        let inner = random_blocks(&mut r, &[3, 3], 1.0);
        let perm = random_perm(&mut r, 6);
        let p = perm.to_matrix();
        let jr = &p * inner.to_dense() * p.transpose();
        let v = random_vector(&mut r, 6);
        let got = permuted_phi_action(&ev, &inner, &perm, k, 0.4, &v).unwrap();
        let want = phi_chain_dense(&(jr * 0.4), &v, k).unwrap();
        assert!(rel_diff(&got, &want[k]) <= 1e-12);
    }
}

#[test]
fn permuted_phi_trivial_cases() {
    let ev = PhiEvaluator::default();
    let mut r = rng(34);
    let inner = random_blocks(&mut r, &[2, 2], 1.0);
    let v = random_vector(&mut r, 4);
    let id = IndexPermutation::identity(4);
    let plain = ev.phi(&inner, 0.5, 1, &v, None).unwrap().0;
    assert_eq!(permuted_phi_action(&ev, &inner, &id, 1, 0.5, &v).unwrap(), plain);
    let perm = random_perm(&mut r, 4);
    assert_eq!(permuted_phi_action(&ev, &inner, &perm, 0, 0.0, &v).unwrap(), v);
}

#[test]
fn norm_estimate_bounds_on_sparse_pattern() {
    let mut r = rng(35);
    let trip: Vec<(usize, usize, f64)> = (0..60)
        .map(|_| (r.gen_range(0..20), r.gen_range(0..20), r.gen_range(-3.0..3.0)))
        .collect();
    let op = LinearOperator::from_triplets(20, &trip).unwrap();
    let exact = partexp::phi::norm1(&op.to_dense());
    let est = op.norm_estimate();
    assert!(est >= exact / 20.0 && est <= exact * (1.0 + 1e-15));
    let m = op.to_dense();
    let action = LinearOperator::action(20, false, move |v, o| {
        for i in 0..20 {
            o[i] = (0..20).map(|j| m[(i, j)] * v[j]).sum();
        }
    });
    let a = action.norm_estimate();
    assert!(a >= exact / 20.0 && a <= exact * (1.0 + 1e-15));
}

#[test]
fn permuted_psi_matches_direct_evaluation() {
    let ev = PhiEvaluator::default();
    let mut r = rng(36);
    for _ in 0..20 {
        let inner = random_blocks(&mut r, &[2, 3, 1], 1.0);
        let perm = random_perm(&mut r, 6);
        let p = perm.to_matrix();
        let jr: DMatrix<f64> = &p * inner.to_dense() * p.transpose();
        let v = random_vector(&mut r, 6);
        let w = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
        let got = permuted_psi_action(&ev, &inner, &perm, &w, 0.6, &v).unwrap();
        let want = psi_apply_dense(&w, &(jr * 0.6), &v).unwrap();
        assert!(rel_diff(&got, &want) <= 1e-12);
    }
}

#[test]
fn parallel_blocks_are_bitwise_serial() {
    let pool = std::sync::Arc::new(rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap());
    let serial = PhiEvaluator::default();
    let parallel = PhiEvaluator::default().with_pool(pool);
    let mut r = rng(37);
    let op = random_blocks(&mut r, &[5, 7, 3, 9, 2, 6], 2.0);
    let v = random_vector(&mut r, 32);
    assert_eq!(
        serial.chain(&op, 0.9, &v, 3, None).unwrap(),
        parallel.chain(&op, 0.9, &v, 3, None).unwrap()
    );
}

proptest! {
    #[test]
    fn apply_is_linear(seed in 0u64..10_000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let mut r = rng(seed);
        for op in sample_ops(&mut r) {
            let u = random_vector(&mut r, 6);
            let v = random_vector(&mut r, 6);
            let comb: Vec<f64> = u.iter().zip(&v).map(|(x, y)| alpha * x + beta * y).collect();
            let lhs = op.apply(&comb).unwrap();
            let (au, av) = (op.apply(&u).unwrap(), op.apply(&v).unwrap());
            for i in 0..6 {
                prop_assert!((lhs[i] - (alpha * au[i] + beta * av[i])).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn permutation_inverse_is_identity(seed in 0u64..10_000, n in 1usize..40) {
        let mut r = rng(seed);
        let p = random_perm(&mut r, n);
        let v = random_vector(&mut r, n);
        prop_assert_eq!(p.scatter(&p.gather(&v)), v.clone());
        prop_assert_eq!(p.inverse().gather(&p.gather(&v)), v);
    }
}
