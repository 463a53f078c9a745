mod common;

use ndarray::Array2;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use robust_svm::geometry::{
    hull_nonempty, min_norm_between_hulls, opt_value, primal_dual_check, MinNorm, PrimalDual,
};
use robust_svm::kernel::{gram, KernelSpec};
use robust_svm::objective::Levels;

use common::{blobs, hull_distance_sq};

fn instance(seed: u64, m: usize, n_pos: usize, gamma: f64) -> (Array2<f64>, Vec<i8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ds = blobs(&mut rng, m, n_pos, 0.4);
    let k = gram(&KernelSpec::Gaussian { gamma }, ds.features.view()).unwrap();
    (k.entries, ds.labels)
}

fn finite(v: MinNorm<f64>) -> f64 {
    match v {
        MinNorm::Finite(x) => x,
        MinNorm::Infinite => f64::INFINITY,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn min_norm_matches_enumeration(
        seed in 0u64..10_000,
        m in 4usize..=7,
        gamma in 0.2f64..2.0,
        zeros in prop::collection::vec(any::<bool>(), 7),
        counts in (1usize..4, 0usize..2),
    ) {
        let n_pos = m / 2;
        let (k, y) = instance(seed, m, n_pos, gamma);
        let (gap_count, mu_count) = counts;
        let nu_count = (mu_count + gap_count).min(m - 1);
        prop_assume!(nu_count > mu_count);
        let lv = Levels::from_counts(m, nu_count, mu_count).unwrap();
        let eta: Vec<bool> = (0..m).map(|i| !zeros[i]).collect();
        let got = finite(min_norm_between_hulls(k.view(), &y, &eta, &lv).unwrap());
        let status = hull_nonempty(&eta, &y, &lv);
        if status.both() {
            let oracle = hull_distance_sq(&k, &y, &eta, lv.gap::<f64>()).unwrap();
            prop_assert!((got - oracle).abs() <= 1e-9, "{} vs {}", got, oracle);
        } else {
            prop_assert!(got.is_infinite());
        }
    }

    #[test]
    fn removing_points_never_shrinks_the_distance(seed in 0u64..10_000, drop in 0usize..8) {
        let (k, y) = instance(seed, 8, 4, 0.7);
        let lv = Levels::from_counts(8, 3, 1).unwrap();
        let all = vec![true; 8];
        let mut fewer = all.clone();
        fewer[drop] = false;
        let a = finite(min_norm_between_hulls(k.view(), &y, &all, &lv).unwrap());
        let b = finite(min_norm_between_hulls(k.view(), &y, &fewer, &lv).unwrap());
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn invariant_under_relabelling(seed in 0u64..10_000, shift in 1usize..7) {
        let (k, y) = instance(seed, 7, 3, 0.9);
        let lv = Levels::from_counts(7, 3, 1).unwrap();
        let perm: Vec<usize> = (0..7).map(|i| (i + shift) % 7).collect();
        let kp = Array2::from_shape_fn((7, 7), |(i, j)| k[[perm[i], perm[j]]]);
        let yp: Vec<i8> = perm.iter().map(|&i| y[i]).collect();
        let a = finite(opt_value(k.view(), &y, &lv).unwrap().value);
        let b = finite(opt_value(kp.view(), &yp, &lv).unwrap().value);
        prop_assert!(a == b || (a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn strong_duality_on_feasible_indicators(seed in 0u64..10_000, drop in 0usize..8) {
        let (k, y) = instance(seed, 8, 4, 0.5);
        let lv = Levels::from_counts(8, 4, 1).unwrap();
        let mut eta = vec![true; 8];
        eta[drop] = false;
        match primal_dual_check(k.view(), &y, &eta, &lv).unwrap() {
            PrimalDual::Finite { residual, .. } => prop_assert!(residual <= 1e-9),
            PrimalDual::Unbounded => prop_assert!(false, "hulls are nonempty"),
        }
    }
}

#[test]
fn empty_hull_is_unbounded_on_both_sides() {
    let (k, y) = instance(1, 6, 2, 0.5);
    // gap count 4 needs two kept samples of each class; drop one positive
    let lv = Levels::from_counts(6, 5, 1).unwrap();
    let first_pos = y.iter().position(|&v| v == 1).unwrap();
    let mut eta = vec![true; 6];
    eta[first_pos] = false;
    assert!(!hull_nonempty(&eta, &y, &lv).positive);
    assert_eq!(
        primal_dual_check(k.view(), &y, &eta, &lv).unwrap(),
        PrimalDual::Unbounded
    );
}
