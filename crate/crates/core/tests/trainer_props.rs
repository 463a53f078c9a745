mod common;

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_svm::data::Dataset;
use robust_svm::kernel::{gram, rkhs_norm_sq, KernelSpec};
use robust_svm::objective::{negative_margins, primal_objective_levels, Levels};
use robust_svm::trainer::{train, train_gram, TrainConfig};

use common::{blobs, combinations, enum_qp, fixed_eta_dual};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn never_below_the_enumerated_global_optimum(seed in 0u64..10_000, gamma in 0.2f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = blobs(&mut rng, 8, 4, 0.5);
        let k = gram(&KernelSpec::Gaussian { gamma }, ds.features.view()).unwrap();
        let lv = Levels::from_counts(8, 4, 1).unwrap();
        let global = combinations(8, 1)
            .into_iter()
            .map(|z| {
                let mut eta = vec![true; 8];
                eta[z[0]] = false;
                let (_, p) = fixed_eta_dual(&k.entries, &ds.labels, &eta, lv.gap::<f64>());
                -enum_qp(&p).unwrap().1
            })
            .fold(f64::INFINITY, f64::min);
        let mut cfg = TrainConfig::new(0.5, 0.125, k.kernel);
        cfg.seed = seed;
        let model = train_gram(&k, &ds.labels, None, &cfg).unwrap();
        prop_assert!(model.objective >= global - 1e-9, "{} < {}", model.objective, global);
    }

    #[test]
    fn reported_objective_is_consistent(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = blobs(&mut rng, 20, 10, 0.7);
        let cfg = TrainConfig::new(0.4, 0.1, KernelSpec::Gaussian { gamma: 0.8 });
        let model = train(&ds, &cfg).unwrap();
        let k = gram(&cfg.kernel, ds.features.view()).unwrap();
        let norm = rkhs_norm_sq(model.alpha.view(), &k).unwrap();
        let margins = negative_margins(model.alpha.view(), model.b, k.entries.view(), &ds.labels).unwrap();
        let recomputed = primal_objective_levels(norm, &model.levels, margins.view());
        prop_assert!((recomputed - model.objective).abs() <= 1e-12 * model.objective.abs().max(1.0));
        prop_assert!(model.objective <= model.trace[0] + 1e-12);
        prop_assert_eq!(*model.trace.last().unwrap(), model.objective);
    }
}

#[test]
fn flipped_point_is_dropped() {
    let mut x = Array2::zeros((20, 2));
    let mut y = Vec::new();
    for i in 0..20 {
        let side = if i < 10 { -3.0 } else { 3.0 };
        x[[i, 0]] = side + 0.1 * (i % 5) as f64;
        x[[i, 1]] = 0.2 * (i % 3) as f64;
        y.push(if i < 10 { 1 } else { -1 });
    }
    // a negative-looking point labelled positive
    y[15] = 1;
    let ds = Dataset::new(x, y).unwrap();
    let cfg = TrainConfig::new(0.3, 0.05, KernelSpec::Gaussian { gamma: 0.5 });
    let model = train(&ds, &cfg).unwrap();
    assert!(!model.eta[15]);
    assert_eq!(model.alpha[15], 0.0);
    let (_, labels) = model.predict(ds.features.view()).unwrap();
    let wrong: Vec<usize> = (0..20).filter(|&i| labels[i] != ds.labels[i]).collect();
    assert_eq!(wrong, vec![15]);
}

#[test]
fn single_precision_agrees_with_double() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ds = blobs(&mut rng, 40, 20, 0.8);
    let ds32 = Dataset::<f32>::new(ds.features.mapv(|v| v as f32), ds.labels.clone()).unwrap();
    let cfg = TrainConfig::new(0.4, 0.1, KernelSpec::Gaussian { gamma: 0.5 });
    let cfg32 = TrainConfig::new(0.4, 0.1, KernelSpec::Gaussian { gamma: 0.5f32 });
    let m64 = train(&ds, &cfg).unwrap();
    let m32 = train(&ds32, &cfg32).unwrap();
    assert_eq!(m32.eta, m64.eta);
    // the f32 subproblems are solved to about 1e-4
    let diff = (m32.objective as f64 - m64.objective).abs();
    assert!(diff < 1e-4, "objective difference {}", diff);
    let (_, l64) = m64.predict(ds.features.view()).unwrap();
    let (_, l32) = m32.predict(ds32.features.view()).unwrap();
    let agree = l64.iter().zip(&l32).filter(|(a, b)| a == b).count();
    assert!(agree >= 38, "{} of 40 labels agree", agree);
}

#[test]
fn mu_zero_stops_after_one_update() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let ds = blobs(&mut rng, 30, 15, 0.6);
    let model = train(&ds, &TrainConfig::new(0.5, 0.0, KernelSpec::Linear)).unwrap();
    assert_eq!(model.iterations, 1);
    assert!(model.eta.iter().all(|&e| e));
}
