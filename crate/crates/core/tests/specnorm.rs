mod common;

use common::*;
use oocpca::dense::gaussian_matrix;
use oocpca::source::InMemory;
use oocpca::specnorm::{estimate_norm_from, DenseOperator, ResidualOperator};
use oocpca::{
    estimate_norm, estimate_pca_error, randomized_pca, DenseMatrix, LinearOperator, NormEstParams,
    PcaParams, StreamConfig,
};
use proptest::prelude::*;

fn cfg() -> StreamConfig {
    StreamConfig::default()
}

/// `Q diag(d) Pᵀ` with random orthogonal `Q`, `P`.
fn rotated_diagonal(n: usize, d: &[f64], seed: u64) -> DenseMatrix {
    with_spectrum(n, n, d, seed)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, ..ProptestConfig::default() })]

    #[test]
    fn never_overestimates(
        seed in any::<u64>(),
        d in prop::collection::vec(0.0f64..5.0, 2..30),
        j in 1usize..8,
        k in 1usize..4,
    ) {
        let n = d.len();
        let a = rotated_diagonal(n, &d, seed);
        let truth = spectral_norm(&a);
        let est = estimate_norm(&DenseOperator(&a), &NormEstParams { j_iters: j, k_probes: k, seed }, &cfg()).unwrap();
        prop_assert!(est.value <= truth * (1.0 + 1e-12) + 1e-300);
        prop_assert_eq!(est.k_probes, k);
    }

    #[test]
    fn estimate_grows_with_steps(seed in any::<u64>(), n in 3usize..40) {
        let a: DenseMatrix = gaussian_matrix(n + 5, n, seed);
        let op = DenseOperator(&a);
        let start: DenseMatrix = gaussian_matrix(n, 1, seed ^ 7);
        let mut prev = 0.0;
        for j in 1..=8 {
            let p = estimate_norm_from(&op, &start, j, &cfg()).unwrap().per_probe[0];
            prop_assert!(p >= prev * (1.0 - 1e-12));
            prev = p;
        }
    }
}

#[test]
fn probes_in_a_block_match_single_probes() {
    let a: DenseMatrix = gaussian_matrix(30, 20, 4);
    let op = DenseOperator(&a);
    let start: DenseMatrix = gaussian_matrix(20, 3, 5);
    let batch = estimate_norm_from(&op, &start, 6, &cfg()).unwrap();
    for q in 0..3 {
        let single = DenseMatrix::column_vector(&start.column(q));
        let one = estimate_norm_from(&op, &single, 6, &cfg()).unwrap();
        assert!((one.per_probe[0] - batch.per_probe[q]).abs() <= 1e-13 * one.per_probe[0]);
    }
}

#[test]
fn each_step_costs_two_passes() {
    let a: DenseMatrix = gaussian_matrix(80, 30, 4);
    let src = InMemory::new(a).unwrap();
    let before = src.counters();
    estimate_norm(
        &src,
        &NormEstParams {
            j_iters: 6,
            k_probes: 5,
            seed: 1,
        },
        &cfg(),
    )
    .unwrap();
    assert_eq!(src.counters().since(&before).passes_over_a, 12);
}

#[test]
fn residual_operator_matches_dense_difference() {
    let a: DenseMatrix = gaussian_matrix(40, 25, 9);
    let src = InMemory::new(a.clone()).unwrap();
    let res = randomized_pca(&src, &PcaParams::new(4).seed(3)).unwrap();
    let diff = a.sub(&res.reconstruct()).unwrap();
    let op = ResidualOperator::new(&src, &res).unwrap();
    let g: DenseMatrix = gaussian_matrix(25, 3, 1);
    let q: DenseMatrix = gaussian_matrix(40, 3, 2);
    let d1 = op
        .multiply(&g, &cfg())
        .unwrap()
        .sub(&diff.matmul(&g).unwrap())
        .unwrap();
    let d2 = op
        .multiply_transpose(&q, &cfg())
        .unwrap()
        .sub(&diff.t_matmul(&q).unwrap())
        .unwrap();
    assert!(d1.max_abs() < 1e-12);
    assert!(d2.max_abs() < 1e-12);
}

#[test]
fn residual_operator_rejects_foreign_factors() {
    let a: DenseMatrix = gaussian_matrix(40, 25, 9);
    let res = randomized_pca(&InMemory::new(a).unwrap(), &PcaParams::new(4)).unwrap();
    let other = InMemory::new(gaussian_matrix(41, 25, 1)).unwrap();
    assert!(ResidualOperator::new(&other, &res).is_err());
}

#[test]
fn pca_error_estimate_is_within_a_factor_two() {
    for seed in 0..10 {
        let a: DenseMatrix = gaussian_matrix(60, 40, seed);
        let src = InMemory::new(a.clone()).unwrap();
        let res = randomized_pca(&src, &PcaParams::new(5).seed(seed)).unwrap();
        let truth = residual_norm(&a, &res.reconstruct());
        let est =
            estimate_pca_error(&src, &res, &NormEstParams::for_result(&res, seed), &cfg()).unwrap();
        assert!(
            est.value <= truth * (1.0 + 1e-10),
            "{} > {truth}",
            est.value
        );
        assert!(est.value >= truth / 2.0, "{} < {truth} / 2", est.value);
        assert_eq!(est.k_probes, 5);
    }
}

#[test]
fn exact_fit_has_zero_error_estimate() {
    let a = with_spectrum(30, 20, &[2.0, 1.0], 3);
    let src = InMemory::new(a).unwrap();
    let res = randomized_pca(&src, &PcaParams::new(2)).unwrap();
    let est = estimate_pca_error(&src, &res, &NormEstParams::for_result(&res, 0), &cfg()).unwrap();
    assert!(est.value < 1e-13);
}
