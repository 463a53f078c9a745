mod common;

use num_rational::Ratio;
use proptest::prelude::*;
use robust_svm::region::{self, Classification};

use common::lattice;

type Q = Ratio<i64>;

fn code(c: Classification) -> u8 {
    match c {
        Classification::FullBreakdownMu => 0,
        Classification::FunctionOnlyMuBiasLower => 1,
        Classification::BelowMu => 2,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn exact_predicates_match_integer_scan(
        n in 2i64..80,
        a in 0i64..80,
        b in 0i64..80,
        c in 1i64..40,
        m in 1i64..60,
        bounded in any::<bool>(),
    ) {
        let i = a % n + 1;
        let j = b % n;
        let rr = c % (n / 2).max(1) + 1;
        let (nu, mu, r) = (Q::new(i, n), Q::new(j, n), Q::new(rr, n));
        let key = region::key_inequality_holds(nu, mu, r);
        prop_assert_eq!(key.holds, lattice::key(i, j, rr));
        prop_assert_eq!(key.strict, lattice::key_strict(i, j, rr));
        prop_assert_eq!(region::bias_ell(nu, mu, r, m as usize), lattice::bias_ell(i, j, rr, n, m));
        prop_assert_eq!(region::classify(nu, mu, r, bounded).ok().map(code), lattice::class(i, j, rr, bounded));
    }

    #[test]
    fn float_and_exact_agree_off_the_boundary(i in 1i64..100, j in 0i64..100, rr in 1i64..50) {
        let (nu, mu, r) = (i as f64 / 100.0, j as f64 / 100.0, rr as f64 / 100.0);
        let on_boundary = i - j == 2 * (rr - 2 * j) || 2 * j == rr;
        prop_assume!(!on_boundary);
        let exact = region::key_inequality_holds(Q::new(i, 100), Q::new(j, 100), Q::new(rr, 100));
        let float = region::key_inequality_holds(nu, mu, r);
        prop_assert_eq!(exact, float);
    }
}

#[test]
fn grid_points_lie_in_the_region() {
    let regions = region::lambda_regions(Q::new(2, 5), None).unwrap();
    let pts = region::grid(|nu, mu| regions.contains_up(nu, mu), 50, 40).unwrap();
    assert!(!pts.is_empty() && pts.len() <= 40);
    for p in &pts {
        assert!(regions.contains_up(p.nu, p.mu));
        assert_eq!(p.nu, Q::new(p.nu_count as i64, 50));
        assert_eq!(p.mu, Q::new(p.mu_count as i64, 50));
    }
    let mut sorted = pts.clone();
    sorted.sort_by(|a, b| a.mu.cmp(&b.mu).then(a.nu.cmp(&b.nu)));
    assert_eq!(sorted, pts);
}
