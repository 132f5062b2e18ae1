use proptest::prelude::*;
use subclt::ensembles::{Beta, EnsembleSpec, EntryDistribution, EntryKey};
use subclt::matrixops::*;

fn spec_strategy() -> impl Strategy<Value = EnsembleSpec> {
    prop_oneof![
        Just(EnsembleSpec::goe()),
        Just(EnsembleSpec::gue()),
        Just(EnsembleSpec {
            beta: Beta::Complex,
            offdiag: EntryDistribution::UniformPhaseRadial { radius: std::f64::consts::SQRT_2, weight: 0.5 },
            diag: EntryDistribution::GaussianReal { variance: 1.0 },
        }),
    ]
}

fn index_set() -> impl Strategy<Value = Vec<u64>> {
    proptest::collection::hash_set(1u64..400, 1..40).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn entries_match_keyed_values(spec in spec_strategy(), seed: u64, r in 0u64..100, b in index_set()) {
        let m = realize(&spec, seed, r, &b).unwrap();
        for a in 0..b.len() {
            for c in 0..b.len() {
                prop_assert_eq!(m.get(a, c), spec.entry(EntryKey::new(seed, r, b[a], b[c])));
                prop_assert_eq!(m.get(a, c), m.get(c, a).conj());
            }
        }
    }

    #[test]
    fn second_trace_is_frobenius_norm(spec in spec_strategy(), seed: u64, b in index_set()) {
        let m = realize(&spec, seed, 0, &b).unwrap();
        let t2 = m.trace_power(2).unwrap();
        let f = m.frobenius_sq();
        prop_assert!((t2 - f).abs() <= 1e-12 * f, "{} vs {}", t2, f);
    }

    #[test]
    fn chebyshev_matches_power_expansion(spec in spec_strategy(), seed: u64, b in index_set(), a in 0.5f64..20.0) {
        let m = realize(&spec, seed, 1, &b).unwrap();
        let p = m.power_traces(4).unwrap();
        let t = m.chebyshev_traces(4, a).unwrap();
        let n = b.len() as f64;
        let expect = [
            n,
            p[0] / a,
            2.0 * p[1] / (a * a) - n,
            4.0 * p[2] / a.powi(3) - 3.0 * p[0] / a,
            8.0 * p[3] / a.powi(4) - 8.0 * p[1] / (a * a) + n,
        ];
        for (k, (got, want)) in t.iter().zip(expect).enumerate() {
            let scale = want.abs().max(n);
            prop_assert!((got - want).abs() <= 1e-10 * scale, "T{}: {} vs {}", k, got, want);
        }
    }

    #[test]
    fn principal_submatrix_equals_direct_realization(spec in spec_strategy(), seed: u64, b in index_set(), pick in proptest::collection::vec(any::<bool>(), 40)) {
        let big = realize(&spec, seed, 2, &b).unwrap();
        let pos: Vec<usize> = (0..b.len()).filter(|&k| pick[k]).collect();
        prop_assume!(!pos.is_empty());
        let sub: Vec<u64> = pos.iter().map(|&k| b[k]).collect();
        prop_assert_eq!(big.principal(&pos), realize(&spec, seed, 2, &sub).unwrap());
    }

    #[test]
    fn permuted_index_list_gives_identical_traces(spec in spec_strategy(), seed: u64, b in index_set(), rot in 0usize..40) {
        let mut sorted = b.clone();
        sorted.sort_unstable();
        let mut perm = b.clone();
        perm.rotate_left(rot % b.len());
        let x = realize(&spec, seed, 3, &sorted).unwrap();
        let y = realize(&spec, seed, 3, &perm).unwrap();
        prop_assert_eq!(x.power_traces(5).unwrap(), y.power_traces(5).unwrap());
        prop_assert_eq!(x.chebyshev_traces(5, 7.0).unwrap(), y.chebyshev_traces(5, 7.0).unwrap());
    }
}

#[test]
fn overlapping_sets_share_entries() {
    let spec = EnsembleSpec::goe();
    let l = 20u64;
    let b1: Vec<u64> = (1..=l).collect();
    let b2: Vec<u64> = (l / 2..=3 * l / 2).collect();
    let x1 = realize(&spec, 8, 4, &b1).unwrap();
    let x2 = realize(&spec, 8, 4, &b2).unwrap();
    for (a, i) in b1.iter().enumerate() {
        for (c, j) in b1.iter().enumerate() {
            if let (Some(a2), Some(c2)) = (b2.iter().position(|v| v == i), b2.iter().position(|v| v == j)) {
                assert_eq!(x1.get(a, c), x2.get(a2, c2));
            }
        }
    }
}

#[test]
fn large_hermitian_traces_pass_the_residue_check() {
    let b: Vec<u64> = (1..=150).collect();
    let m = realize(&EnsembleSpec::gue(), 1, 0, &b).unwrap();
    assert!(m.power_traces(6).is_ok());
    assert!(m.chebyshev_traces(6, 2.0 * 150f64.sqrt()).is_ok());
}

#[test]
fn height_moment_variance_for_goe() {
    // Var of sqrt(pi/2) L^{-1/2} (Tr X - mean) is (pi/2) * 2 = pi up to sampling error
    let l = 30u64;
    let b: Vec<u64> = (1..=l).collect();
    let traces: Vec<f64> = (0..4000).map(|r| realize(&EnsembleSpec::goe(), 12, r, &b).unwrap().trace_power(1).unwrap()).collect();
    let h = height_moment_from_traces(&traces, l, 0, Beta::Real).unwrap();
    let n = h.len() as f64;
    let var = h.iter().map(|v| v * v).sum::<f64>() / (n - 1.0);
    let se = std::f64::consts::PI * (2.0 / n).sqrt();
    assert!((var - std::f64::consts::PI).abs() < 5.0 * se, "{var}");
}
