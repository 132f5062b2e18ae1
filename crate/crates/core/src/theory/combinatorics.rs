//! Exact binomial and Catalan arithmetic.

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// `binom(n, k)`, zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        // exact at every step: acc = binom(n, i+1) afterwards
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Catalan number `C_n = binom(2n, n) / (n + 1)`.
pub fn catalan(n: u64) -> BigUint {
    binomial(2 * n, n) / (n + 1)
}

/// `C_{twice / 2}`, which is zero unless `twice` is a nonnegative even integer.
pub fn catalan_at_half(twice: i64) -> BigUint {
    if twice < 0 || twice % 2 != 0 {
        BigUint::zero()
    } else {
        catalan(twice as u64 / 2)
    }
}

/// Sum over compositions `s_1 + ... + s_r = S` of `C_{s_1} ... C_{s_r}`,
/// evaluated as `binom(2S + r, S) r / (2S + r)`.
pub fn catalan_composition_sum(total: u64, parts: u64) -> BigUint {
    assert!(parts >= 1, "a composition needs at least one part");
    let n = 2 * total + parts;
    binomial(n, total) * parts / n
}
