mod common;

use common::*;
use gapsense::basis::{optimal_rank, FeatureBasis, TrainingSet};
use gapsense::datagen::{generate, SynthSpec};
use gapsense::io::{format_matrix, parse_matrix};
use gapsense::linalg::{pivoted_qr, svd, DenseMatrix};
use gapsense::pipeline::{loo_crossval, CrossvalConfig, SensorPolicy};
use gapsense::reconstruct::{predict_full, Measurement};
use gapsense::rpca::{rpca, svt, RpcaConfig};
use gapsense::sensors::{select_exact, select_oversampled, select_pivots};
use proptest::prelude::*;

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = DenseMatrix> {
    (rows, cols, any::<u64>()).prop_map(|(r, c, seed)| gaussian(&mut rng(seed), r, c))
}

fn basis(n: std::ops::Range<usize>, r: std::ops::Range<usize>) -> impl Strategy<Value = FeatureBasis> {
    (n, r, any::<u64>()).prop_map(|(n, r, seed)| FeatureBasis::from_phi(random_orthonormal(&mut rng(seed), n, r.min(n))))
}

fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.sub(b).unwrap().max_abs()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pivoted_qr_is_dominant_monotone_and_factors(a in matrix(1..30, 1..30), frac in 0.0f64..1.0) {
        let k = a.rows().min(a.cols());
        let p = 1 + ((k - 1) as f64 * frac) as usize;
        let qr = pivoted_qr(&a, p).unwrap();
        prop_assert!(diagonally_dominant(&qr.r));
        for w in qr.r_diagonal.windows(2) {
            prop_assert!(w[1].abs() <= w[0].abs() * (1.0 + 1e-12));
        }
        let steps = qr.pivots.len();
        // The pivoted columns are reproduced exactly: A[:, pivots] = Q · R[:, ..steps].
        let lead: Vec<usize> = (0..steps).collect();
        let rebuilt = qr.q().matmul(&qr.r.select_columns(&lead)).unwrap();
        let err = max_abs_diff(&rebuilt, &a.select_columns(&qr.pivots));
        prop_assert!(err <= 1e-13 * (1.0 + a.max_abs()) * (a.rows() + a.cols()) as f64);
        prop_assert!(steps <= p);
    }

    #[test]
    fn pivoted_qr_matches_greedy_oracle(a in matrix(2..25, 2..25)) {
        let p = a.rows().min(a.cols());
        let qr = pivoted_qr(&a, p).unwrap();
        prop_assert_eq!(qr.pivots, greedy_gram_schmidt_pivots(&a, p));
    }

    #[test]
    fn full_pivoting_determinant_is_diagonal_product(a in matrix(1..15, 1..2)) {
        let n = a.rows();
        let sq = gaussian(&mut rng(a.as_slice()[0].to_bits()), n, n);
        let qr = pivoted_qr(&sq, n).unwrap();
        let prod: f64 = qr.r_diagonal.iter().map(|d| d.abs()).product();
        let det = lu_determinant(&sq).abs();
        prop_assert!((prod - det).abs() <= 1e-8 * det);
    }

    #[test]
    fn svd_reconstructs(a in matrix(1..70, 1..70)) {
        let dec = svd(&a).unwrap();
        let k = dec.singular_values.len();
        prop_assert_eq!(k, a.rows().min(a.cols()));
        for w in dec.singular_values.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        let tol = 1e-12 * (a.rows() + a.cols()) as f64 * dec.singular_values[0].max(1.0);
        prop_assert!(max_abs_diff(&dec.reconstruct(None), &a) <= tol);
        let utu = dec.u.tr_matmul(&dec.u).unwrap();
        let vtv = dec.v.tr_matmul(&dec.v).unwrap();
        prop_assert!(max_abs_diff(&utu, &DenseMatrix::identity(utu.rows())) <= 1e-12 * a.rows() as f64);
        prop_assert!(max_abs_diff(&vtv, &DenseMatrix::identity(vtv.rows())) <= 1e-12 * a.cols() as f64);
    }

    #[test]
    fn svd_of_planted_spectrum(n in 5usize..60, seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = 1 + n / 3;
        let u = random_orthonormal(&mut r, n, k);
        let v = random_orthonormal(&mut r, k, k);
        let sigma: Vec<f64> = (0..k).map(|i| 10.0 / (1 + i) as f64).collect();
        let a = u.matmul(&DenseMatrix::from_diagonal(&sigma)).unwrap().matmul(&v.transpose()).unwrap();
        let got = svd(&a).unwrap().singular_values;
        for (g, s) in got.iter().zip(&sigma) {
            prop_assert!((g - s).abs() <= 1e-12 * 10.0 * n as f64);
        }
    }

    #[test]
    fn svt_shrinks_every_singular_value(a in matrix(1..20, 1..20), tau in 0.0f64..3.0) {
        let before = svd(&a).unwrap().singular_values;
        let after = svd(&svt(&a, tau).unwrap()).unwrap().singular_values;
        for (b, s) in before.iter().zip(&after) {
            prop_assert!((s - (b - tau).max(0.0)).abs() <= 1e-10 * (1.0 + b));
        }
    }

    #[test]
    fn noiseless_span_is_recovered_exactly(b in basis(10..120, 1..12), seed in any::<u64>()) {
        let mut r = rng(seed);
        let a: Vec<f64> = gaussian(&mut r, b.rank_r, 1).into_column_major();
        let x = b.phi_r.matvec(&a).unwrap();
        let sensors = select_exact(&b).unwrap();
        let pred = predict_full(&b, &Measurement::sample(&x, &sensors.indices)).unwrap();
        prop_assert!(relative_error(&pred.x_hat, &x) <= 1e-9);
        prop_assert!(relative_error(&pred.a_hat, &a) <= 1e-9);
    }

    #[test]
    fn prediction_is_linear_in_measurements(b in basis(10..80, 1..8), alpha in -3.0f64..3.0, seed in any::<u64>()) {
        let p = (2 * b.rank_r).min(b.location_count());
        let sensors = if p > b.rank_r { select_oversampled(&b, p).unwrap() } else { select_exact(&b).unwrap() };
        let mut r = rng(seed);
        let y1 = gaussian(&mut r, p, 1).into_column_major();
        let y2 = gaussian(&mut r, p, 1).into_column_major();
        let combo: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| alpha * a + b).collect();
        let idx = sensors.indices.clone();
        let f = |y: Vec<f64>| predict_full(&b, &Measurement::new(idx.clone(), y).unwrap()).unwrap().x_hat;
        let lhs = f(combo);
        let rhs: Vec<f64> = f(y1).iter().zip(f(y2)).map(|(a, b)| alpha * a + b).collect();
        let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (l, r) in lhs.iter().zip(&rhs) {
            prop_assert!((l - r).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn oversampled_sets_are_nested(b in basis(20..100, 1..10), a in 0.0f64..1.0, c in 0.0f64..1.0) {
        let n = b.location_count();
        let r = b.rank_r;
        prop_assume!(n > r + 1);
        let p1 = r + 1 + ((n - r - 1) as f64 * a.min(c)) as usize;
        let p2 = r + 1 + ((n - r - 1) as f64 * a.max(c)) as usize;
        let s1 = select_oversampled(&b, p1).unwrap().indices;
        let s2 = select_oversampled(&b, p2).unwrap().indices;
        prop_assert_eq!(&s2[..p1], &s1[..]);
        prop_assert_eq!(&s1[..r], &select_exact(&b).unwrap().indices[..]);
    }

    #[test]
    fn oversampling_follows_log_det_greedy(b in basis(8..30, 1..5), extra in 1usize..6) {
        let n = b.location_count();
        let r = b.rank_r;
        let p = (r + extra).min(n);
        prop_assume!(p > r);
        let got = select_oversampled(&b, p).unwrap().indices;
        // Reference: add the row that maximises det(ΘᵀΘ), evaluated by LU.
        let mut chosen = got[..r].to_vec();
        while chosen.len() < p {
            let dets: Vec<(usize, f64)> = (0..n)
                .filter(|i| !chosen.contains(i))
                .map(|i| {
                    let mut idx = chosen.clone();
                    idx.push(i);
                    let theta = b.phi_r.select_rows(&idx);
                    (i, lu_determinant(&theta.tr_matmul(&theta).unwrap()))
                })
                .collect();
            let best = dets.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
            let k = chosen.len();
            // Near-ties may legitimately resolve either way.
            prop_assert!(dets.iter().find(|d| d.0 == got[k]).unwrap().1 >= best * (1.0 - 1e-9));
            chosen.push(got[k]);
        }
    }

    #[test]
    fn gram_pivots_agree_with_basis_pivots(b in basis(10..80, 1..10)) {
        // Pivoting the n×n projector ΦΦᵀ picks the same first r rows as Φᵀ.
        let r = b.rank_r;
        let gram = b.phi_r.matmul(&b.phi_r.transpose()).unwrap();
        let from_gram = pivoted_qr(&gram, r).unwrap().pivots;
        prop_assert_eq!(from_gram, select_exact(&b).unwrap().indices);
    }

    #[test]
    fn selection_is_permutation_equivariant(b in basis(10..60, 1..8), seed in any::<u64>()) {
        let n = b.location_count();
        let perm = rand::seq::index::sample(&mut rng(seed), n, n).into_vec();
        let permuted = FeatureBasis::from_phi(b.phi_r.select_rows(&perm));
        let original = select_exact(&b).unwrap().indices;
        let mapped: Vec<usize> = select_exact(&permuted).unwrap().indices.iter().map(|&i| perm[i]).collect();
        prop_assert_eq!(mapped, original);
    }

    #[test]
    fn selection_is_scale_invariant(b in basis(10..60, 1..8), c in 1e-3f64..1e3) {
        let scaled = FeatureBasis::from_phi(b.phi_r.scaled(c));
        prop_assert_eq!(select_exact(&scaled).unwrap().indices, select_exact(&b).unwrap().indices);
        let k = b.rank_r.div_ceil(2);
        prop_assert_eq!(select_pivots(&b, k).unwrap().indices, select_exact(&b).unwrap().indices[..k].to_vec());
    }

    #[test]
    fn matrix_text_round_trips(a in matrix(1..12, 1..12), scale in -300i32..300) {
        let a = a.scaled(10f64.powi(scale / 10));
        prop_assert_eq!(parse_matrix(&format_matrix(&a)).unwrap(), a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn rpca_is_scale_equivariant(seed in any::<u64>(), c in 0.01f64..100.0) {
        let spec = SynthSpec { n: 60, m: 12, r_true: 2, coeff_scale: 1.0, outlier_fraction: 0.02, outlier_magnitude: 1.0, noise_sigma: 0.0, seed };
        let x = generate(&spec).unwrap().x;
        let cfg = RpcaConfig { max_iterations: 300, ..RpcaConfig::default() };
        let base = rpca(&x, &cfg).unwrap();
        let scaled = rpca(&x.scaled(c), &cfg).unwrap();
        prop_assert!(max_abs_diff(&scaled.low_rank.scaled(1.0 / c), &base.low_rank) <= 1e-8 * x.max_abs());
    }

    #[test]
    fn crossval_is_reproducible_and_pools_every_point(seed in any::<u64>(), m in 4usize..7) {
        let spec = SynthSpec { n: 40, m, r_true: 2, coeff_scale: 0.05, outlier_fraction: 0.0, outlier_magnitude: 0.0, noise_sigma: 0.0005, seed };
        let training = TrainingSet::from_matrix(generate(&spec).unwrap().x, None).unwrap();
        let cfg = CrossvalConfig { baseline_trials: 3, sensors: SensorPolicy::Oversampled { p: 6 }, seed, ..CrossvalConfig::default() };
        let a = loo_crossval(&training, &cfg, None).unwrap();
        let b = loo_crossval(&training, &cfg, None).unwrap();
        prop_assert_eq!(&a, &b);
        let folds = a.per_fold.len();
        prop_assert_eq!(folds + a.failed_folds.len(), m);
        prop_assert_eq!(a.aggregate.total_points, spec.n * folds);
        prop_assert_eq!(a.aggregate.histogram.iter().sum::<u64>() as usize, spec.n * folds);
        prop_assert_eq!(a.sensor_ensemble.iter().map(|&c| c as usize).sum::<usize>(), a.per_fold.iter().map(|f| f.p).sum::<usize>());
        let baseline = a.baseline.unwrap();
        prop_assert_eq!(baseline.total_points, spec.n * folds * 3);
    }

    #[test]
    fn held_out_column_never_reaches_its_fold(seed in any::<u64>(), bump in -1.0f64..1.0) {
        let spec = SynthSpec { n: 50, m: 6, r_true: 2, coeff_scale: 0.05, outlier_fraction: 0.0, outlier_magnitude: 0.0, noise_sigma: 0.0005, seed };
        let x = generate(&spec).unwrap().x;
        let fold = (seed % spec.m as u64) as usize;
        let mut y = x.clone();
        for i in 0..spec.n {
            y[(i, fold)] += bump;
        }
        let cfg = CrossvalConfig { baseline_trials: 0, sensors: SensorPolicy::Oversampled { p: 5 }, ..CrossvalConfig::default() };
        let a = loo_crossval(&TrainingSet::from_matrix(x, None).unwrap(), &cfg, None).unwrap();
        let b = loo_crossval(&TrainingSet::from_matrix(y, None).unwrap(), &cfg, None).unwrap();
        prop_assert_eq!(&a.per_fold[fold].sensor_indices, &b.per_fold[fold].sensor_indices);
        prop_assert_eq!(a.per_fold[fold].rank_r, b.per_fold[fold].rank_r);
    }

    #[test]
    fn pure_noise_rank_is_small(seed in any::<u64>()) {
        let x = gaussian(&mut rng(seed), 120, 30);
        let sv = svd(&x).unwrap().singular_values;
        prop_assert!(optimal_rank(&sv, 120, 30).rank <= 3);
    }
}
