use num_bigint::BigUint;
use num_traits::{One, Zero};
use proptest::prelude::*;
use subclt::ensembles::Beta;
use subclt::indexing::GoodFamily;
use subclt::theory::covariance::{catalan_expansion, series_expansion};
use subclt::theory::*;

fn dyck_paths(n: usize) -> u64 {
    // brute force over all 2^(2n) up/down words
    let len = 2 * n;
    (0u64..1 << len)
        .filter(|w| {
            let mut h = 0i32;
            for b in 0..len {
                h += if w >> b & 1 == 1 { 1 } else { -1 };
                if h < 0 {
                    return false;
                }
            }
            h == 0
        })
        .count() as u64
}

fn compositions(total: u64, parts: u64, out: &mut Vec<Vec<u64>>, prefix: &mut Vec<u64>) {
    if parts == 1 {
        prefix.push(total);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for s in 0..=total {
        prefix.push(s);
        compositions(total - s, parts - 1, out, prefix);
        prefix.pop();
    }
}

fn composition_oracle(total: u64, parts: u64) -> BigUint {
    let mut all = Vec::new();
    compositions(total, parts, &mut all, &mut Vec::new());
    all.iter()
        .map(|c| c.iter().fold(BigUint::one(), |acc, &s| acc * catalan(s)))
        .fold(BigUint::zero(), |a, b| a + b)
}

#[test]
fn catalan_matches_dyck_enumeration() {
    for n in 0..=9 {
        assert_eq!(catalan(n as u64), BigUint::from(dyck_paths(n)), "n = {n}");
    }
    assert_eq!(catalan(3), BigUint::from(5u32));
    assert_eq!(catalan(5), BigUint::from(42u32));
}

#[test]
fn composition_sum_matches_enumeration() {
    for total in 0..=8 {
        for parts in 1..=8 {
            assert_eq!(catalan_composition_sum(total, parts), composition_oracle(total, parts), "S={total} r={parts}");
        }
    }
    assert_eq!(catalan_composition_sum(1, 2), BigUint::from(2u32));
    assert_eq!(catalan_composition_sum(2, 3), BigUint::from(9u32));
}

// Variance of Tr X^k for a real Wigner matrix by counting: the r-cycle
// coefficient 2r binom(k,(k-r)/2)^2 summed at b = c = 1 must equal the
// Catalan-form total computed independently from trees and cycles.
#[test]
fn expansions_agree_for_large_powers() {
    for kp in [13u32, 20, 31, 40] {
        for kq in [13u32, 21, 30, 40] {
            assert_eq!(series_expansion(kp, kq), catalan_expansion(kp, kq));
        }
    }
}

fn beta_strategy() -> impl Strategy<Value = Beta> {
    prop_oneof![Just(Beta::Real), Just(Beta::Complex)]
}

fn params_strategy() -> impl Strategy<Value = CovarianceParams> {
    (1u32..=7, 1u32..=7, 0.1f64..3.0, 0.1f64..3.0, 0.0f64..=1.0, beta_strategy())
        .prop_map(|(kp, kq, bp, bq, t, beta)| CovarianceParams::new(kp, kq, bp, bq, t * bp.min(bq), beta))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forms_are_symmetric(p in params_strategy()) {
        let q = p.swapped();
        prop_assert_eq!(limit_covariance_series(&p).unwrap(), limit_covariance_series(&q).unwrap());
        prop_assert_eq!(limit_covariance_catalan(&p).unwrap(), limit_covariance_catalan(&q).unwrap());
        prop_assert_eq!(chebyshev_limit_covariance(&p).unwrap(), chebyshev_limit_covariance(&q).unwrap());
        let a = limit_covariance_contour(&p, None, 128).unwrap();
        let b = limit_covariance_contour(&q, None, 128).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()));
        let a = limit_covariance_kernel_integral(&p, 64).unwrap();
        let b = limit_covariance_kernel_integral(&q, 64).unwrap();
        prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()));
    }

    #[test]
    fn complex_case_is_exactly_half(p in params_strategy()) {
        let real = CovarianceParams { beta: Beta::Real, ..p };
        let complex = CovarianceParams { beta: Beta::Complex, ..p };
        prop_assert_eq!(limit_covariance_series(&complex).unwrap(), 0.5 * limit_covariance_series(&real).unwrap());
        prop_assert_eq!(limit_covariance_catalan(&complex).unwrap(), 0.5 * limit_covariance_catalan(&real).unwrap());
    }

    #[test]
    fn nondecreasing_in_overlap(k in 1u32..=4, b in 0.2f64..3.0, t in 0.0f64..1.0, dt in 0.0f64..1.0) {
        let k = 2 * k;
        let lo = t * b;
        let hi = (t + dt * (1.0 - t)) * b;
        let f = |c| limit_covariance_series(&CovarianceParams::new(k, k, b, b, c, Beta::Real)).unwrap();
        prop_assert!(f(lo) <= f(hi));
    }

    #[test]
    fn series_and_contour_agree(p in params_strategy()) {
        let s = limit_covariance_series(&p).unwrap();
        let c = limit_covariance_contour(&p, None, DEFAULT_NODES).unwrap();
        prop_assert!((s - c).abs() <= 1e-8 * (1.0 + s.abs()), "{} vs {}", s, c);
    }

    #[test]
    fn kernel_is_symmetric(i in 0usize..4, j in 0usize..4,
                           zr in -2.0f64..2.0, zi in 0.05f64..2.0, wr in -2.0f64..2.0, wi in 0.05f64..2.0) {
        let f = GoodFamily::four_sequence_example(1000);
        let z = num_complex::Complex64::new(zr, zi);
        let w = num_complex::Complex64::new(wr, wi);
        let a = gff_kernel(&f, i, z, j, w).unwrap();
        let b = gff_kernel(&f, j, w, i, z).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{} vs {}", a, b);
    }

    #[test]
    fn omega_round_trip(y in 0.01f64..10.0, t in -1.0f64..=1.0) {
        let x = 2.0 * y.sqrt() * t;
        let (x2, y2) = omega_inverse(omega(x, y).unwrap()).unwrap();
        prop_assert!((x2 - x).abs() <= 1e-12 * (1.0 + x.abs()));
        prop_assert!((y2 - y).abs() <= 1e-12 * y);
    }
}
