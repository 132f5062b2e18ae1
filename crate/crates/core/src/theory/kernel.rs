//! Correlated free-field kernel, the map `Omega` and height-moment covariances.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::covariance::{limit_covariance_series, CovarianceParams};
use crate::ensembles::Beta;
use crate::error::{Error, Result};
use crate::indexing::GoodFamily;

fn check_upper(z: Complex64) -> Result<()> {
    if z.im > 0.0 && z.re.is_finite() && z.im.is_finite() {
        Ok(())
    } else {
        Err(Error::NotInUpperHalfPlane(format!("{z}")))
    }
}

/// Dirichlet Green function of the upper half-plane,
/// `(1/2pi) ln |(z - conj w) / (z - w)|`; `+inf` on the diagonal.
pub fn green_function(z: Complex64, w: Complex64) -> Result<f64> {
    check_upper(z)?;
    check_upper(w)?;
    let near = (z - w).norm();
    if near == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(((z - w.conj()).norm() / near).ln() / (2.0 * PI))
}

/// `(1/2pi) ln |(alpha - z w) / (alpha - z conj(w))|` for a given overlap value.
pub fn kernel_with_overlap(alpha: f64, z: Complex64, w: Complex64) -> f64 {
    if alpha == 0.0 {
        // |z w| = |z conj(w)|, exact in real arithmetic
        return 0.0;
    }
    let num = (alpha - z * w).norm();
    let den = (alpha - z * w.conj()).norm();
    if den == 0.0 {
        return f64::INFINITY;
    }
    (num / den).ln() / (2.0 * PI)
}

/// Covariance kernel `C_ij(z, w)` between sheet `i` at `z` and sheet `j` at `w`.
///
/// On one sheet the overlap is `min(|z|^2, |w|^2)` and the kernel is the
/// Green function, evaluated in that form to keep precision near the
/// diagonal.
pub fn gff_kernel(family: &GoodFamily, i: usize, z: Complex64, j: usize, w: Complex64) -> Result<f64> {
    check_upper(z)?;
    check_upper(w)?;
    if i == j {
        if i >= family.len() {
            return Err(Error::ParameterDomain(format!("sequence index {i} out of range")));
        }
        return green_function(z, w);
    }
    let alpha = family.alpha_limit(i, z.norm_sqr(), j, w.norm_sqr())?;
    Ok(kernel_with_overlap(alpha, z, w))
}

/// `Omega(x, y) = x/2 + i sqrt(y - x^2/4)`.
pub fn omega(x: f64, y: f64) -> Result<Complex64> {
    if !(y > 0.0 && y.is_finite() && x.is_finite()) {
        return Err(Error::ParameterDomain(format!("omega needs y > 0, got {y}")));
    }
    let h = y - 0.25 * x * x;
    // allow the boundary up to rounding
    if h < -1e-12 * y {
        return Err(Error::ParameterDomain(format!("({x}, {y}) lies outside |x| <= 2 sqrt(y)")));
    }
    Ok(Complex64::new(0.5 * x, h.max(0.0).sqrt()))
}

/// Inverse map `z -> (2 Re z, |z|^2)`.
pub fn omega_inverse(z: Complex64) -> Result<(f64, f64)> {
    if !(z.im >= 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::NotInUpperHalfPlane(format!("{z}")));
    }
    Ok((2.0 * z.re, z.norm_sqr()))
}

/// Limit covariance of the `k`-th and `k'`-th `x`-moments of the height
/// function at levels `y` on sheet `i` and `y'` on sheet `j`.
///
/// Uses `int x^k H dx = (beta pi / 2)^{1/2} ... / (k + 1)` against the
/// trace of power `k + 1`, so the covariance is the trace covariance times
/// `(beta pi / 2) / ((k + 1)(k' + 1))`.
#[allow(clippy::too_many_arguments)]
pub fn height_moment_limit_covariance(
    family: &GoodFamily,
    i: usize,
    y: f64,
    k: u32,
    j: usize,
    y2: f64,
    k2: u32,
    beta: Beta,
) -> Result<f64> {
    if !(y > 0.0 && y2 > 0.0) {
        return Err(Error::ParameterDomain(format!("levels must be positive, got ({y}, {y2})")));
    }
    let alpha = family.alpha_limit(i, y, j, y2)?;
    // rounding in the limit set can push alpha a hair past min(y, y')
    let c = alpha.min(y).min(y2);
    let p = CovarianceParams::new(k + 1, k2 + 1, y, y2, c, beta);
    let trace_cov = limit_covariance_series(&p)?;
    Ok(beta.value() * PI / 2.0 / ((k + 1) as f64 * (k2 + 1) as f64) * trace_cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indexing::SequenceKind;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn same_sheet_reference_value() {
        let f = GoodFamily::four_sequence_example(100);
        let v = gff_kernel(&f, 0, c(0.0, 1.0), 0, c(0.0, 2.0)).unwrap();
        assert!((v - 3f64.ln() / (2.0 * PI)).abs() < 1e-15);
        assert!((v - 0.174850).abs() < 1e-6);
        assert_eq!(gff_kernel(&f, 2, c(0.3, 0.7), 2, c(0.3, 0.7)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn general_formula_matches_green_on_one_sheet() {
        let f = GoodFamily::four_sequence_example(100);
        for &(z, w) in &[(c(0.2, 0.5), c(-1.0, 1.3)), (c(1.5, 0.1), c(0.4, 2.0))] {
            let alpha = f.alpha_limit(3, z.norm_sqr(), 3, w.norm_sqr()).unwrap();
            let g = green_function(z, w).unwrap();
            assert!((kernel_with_overlap(alpha, z, w) - g).abs() < 1e-12);
        }
    }

    #[test]
    fn disjoint_sequences_have_zero_kernel() {
        let f = GoodFamily::four_sequence_example(100);
        // even and odd numbers never meet
        for &(z, w) in &[(c(0.2, 0.5), c(-1.0, 1.3)), (c(3.0, 0.1), c(0.0, 0.2))] {
            assert_eq!(gff_kernel(&f, 1, z, 2, w).unwrap(), 0.0);
        }
    }

    #[test]
    fn kernel_rejects_lower_half_plane() {
        let f = GoodFamily::four_sequence_example(100);
        assert!(matches!(gff_kernel(&f, 0, c(0.0, -1.0), 1, c(0.0, 1.0)), Err(Error::NotInUpperHalfPlane(_))));
        assert!(gff_kernel(&f, 0, c(0.0, 0.0), 0, c(0.0, 1.0)).is_err());
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega(0.0, 1.0).unwrap(), c(0.0, 1.0));
        assert_eq!(omega(2.0, 1.0).unwrap(), c(1.0, 0.0));
        assert_eq!(omega_inverse(c(1.0, 1.0)).unwrap(), (2.0, 2.0));
        assert!(omega(3.0, 1.0).is_err());
        assert!(omega(0.0, 0.0).is_err());
        assert!(omega_inverse(c(0.0, -1.0)).is_err());
    }

    #[test]
    fn height_moment_examples() {
        let f = GoodFamily::new(10, vec![("id", SequenceKind::Identity)]).unwrap();
        let v = height_moment_limit_covariance(&f, 0, 1.0, 0, 0, 1.0, 0, Beta::Real).unwrap();
        assert!((v - PI).abs() < 1e-15);
        assert_eq!(height_moment_limit_covariance(&f, 0, 1.0, 0, 0, 1.0, 1, Beta::Real).unwrap(), 0.0);
        let g = GoodFamily::four_sequence_example(10);
        assert_eq!(height_moment_limit_covariance(&g, 1, 1.0, 1, 2, 2.0, 1, Beta::Complex).unwrap(), 0.0);
    }
}
