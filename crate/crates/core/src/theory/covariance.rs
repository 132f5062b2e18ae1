//! Limiting covariance of centered submatrix trace statistics.
//!
//! For statistics `L^{-k_p/2} (Tr X(B_p)^{k_p} - E Tr X(B_p)^{k_p})` with
//! `|B_p|/L -> b_p` and `|B_p ∩ B_q|/L -> c`, the limit covariance is a
//! polynomial in `c` whose coefficients are computed here in two exact
//! combinatorial forms (binomial and Catalan), plus two quadrature forms
//! (a double contour integral over full circles and a double integral of
//! the logarithmic kernel over half circles).

use std::f64::consts::PI;

use gauss_quad::legendre::GaussLegendre;
use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::combinatorics::{binomial, catalan_at_half, catalan_composition_sum};
use crate::ensembles::Beta;
use crate::error::{Error, Result};

/// Default node count per angular dimension.
pub const DEFAULT_NODES: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceParams {
    pub k_p: u32,
    pub k_q: u32,
    pub b_p: f64,
    pub b_q: f64,
    pub c: f64,
    pub beta: Beta,
}

impl CovarianceParams {
    pub fn new(k_p: u32, k_q: u32, b_p: f64, b_q: f64, c: f64, beta: Beta) -> Self {
        Self { k_p, k_q, b_p, b_q, c, beta }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_p == 0 || self.k_q == 0 {
            return Err(Error::ParameterDomain("powers must be >= 1".into()));
        }
        if !(self.b_p.is_finite() && self.b_p > 0.0 && self.b_q.is_finite() && self.b_q > 0.0) {
            return Err(Error::ParameterDomain(format!("densities must be positive, got ({}, {})", self.b_p, self.b_q)));
        }
        if !(self.c >= 0.0 && self.c <= self.b_p.min(self.b_q)) {
            return Err(Error::ParameterDomain(format!(
                "overlap {} must lie in [0, min({}, {})]",
                self.c, self.b_p, self.b_q
            )));
        }
        Ok(())
    }

    /// Parameters with the roles of `p` and `q` exchanged.
    pub fn swapped(&self) -> Self {
        Self { k_p: self.k_q, k_q: self.k_p, b_p: self.b_q, b_q: self.b_p, ..*self }
    }
}

/// `sum_r coeff_r c^r b_p^{(k_p-r)/2} b_q^{(k_q-r)/2}` with exact integer
/// coefficients, before the `1/beta` factor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CovarianceExpansion {
    pub k_p: u32,
    pub k_q: u32,
    /// `(r, coefficient)`, increasing `r`, zero coefficients omitted.
    pub terms: Vec<(u32, BigUint)>,
}

impl CovarianceExpansion {
    pub fn evaluate(&self, p: &CovarianceParams) -> f64 {
        debug_assert_eq!((self.k_p, self.k_q), (p.k_p, p.k_q));
        let mut total = 0.0;
        for (r, coeff) in &self.terms {
            let r = *r as i32;
            let ep = (p.k_p as i32 - r) / 2;
            let eq = (p.k_q as i32 - r) / 2;
            // grouped so that swapping p and q is bitwise neutral
            total += coeff.to_f64().expect("finite coefficient") * p.c.powi(r) * (p.b_p.powi(ep) * p.b_q.powi(eq));
        }
        total / p.beta.value()
    }
}

fn admissible(k_p: u32, k_q: u32) -> impl Iterator<Item = u32> {
    (1..=k_p.min(k_q)).filter(move |r| (k_p - r).is_multiple_of(2) && (k_q - r).is_multiple_of(2))
}

/// Coefficients `2r binom(k_p, (k_p-r)/2) binom(k_q, (k_q-r)/2)`.
pub fn series_expansion(k_p: u32, k_q: u32) -> CovarianceExpansion {
    let terms = admissible(k_p, k_q)
        .map(|r| {
            let coeff = BigUint::from(2 * r)
                * binomial(k_p as u64, ((k_p - r) / 2) as u64)
                * binomial(k_q as u64, ((k_q - r) / 2) as u64);
            (r, coeff)
        })
        .filter(|(_, c)| !c.is_zero())
        .collect();
    CovarianceExpansion { k_p, k_q, terms }
}

/// Coefficients from the three graph classes: two trees sharing a vertex
/// (`r = 1`), two trees glued along an edge (`r = 2`) and two `r`-cycles
/// with pendant trees (`r >= 3`).
pub fn catalan_expansion(k_p: u32, k_q: u32) -> CovarianceExpansion {
    let kk = BigUint::from(k_p) * BigUint::from(k_q);
    let mut terms = Vec::new();

    let t1 = BigUint::from(2u32) * &kk * catalan_at_half(k_p as i64 - 1) * catalan_at_half(k_q as i64 - 1);
    if !t1.is_zero() {
        terms.push((1, t1));
    }
    let t2 = &kk * catalan_at_half(k_p as i64) * catalan_at_half(k_q as i64);
    if !t2.is_zero() {
        terms.push((2, t2));
    }
    for r in 3..=k_p.min(k_q) {
        if !(k_p - r).is_multiple_of(2) || !(k_q - r).is_multiple_of(2) {
            continue;
        }
        let gp = catalan_composition_sum(((k_p - r) / 2) as u64, r as u64);
        let gq = catalan_composition_sum(((k_q - r) / 2) as u64, r as u64);
        let numerator = BigUint::from(2u32) * &kk * gp * gq;
        let coeff = &numerator / r;
        assert!((&coeff * r) == numerator, "cycle term is integral");
        if !coeff.is_zero() {
            terms.push((r, coeff));
        }
    }
    CovarianceExpansion { k_p, k_q, terms }
}

/// Limit covariance from the binomial series.
pub fn limit_covariance_series(p: &CovarianceParams) -> Result<f64> {
    p.validate()?;
    Ok(series_expansion(p.k_p, p.k_q).evaluate(p))
}

/// Limit covariance from the Catalan three-term form.
pub fn limit_covariance_catalan(p: &CovarianceParams) -> Result<f64> {
    p.validate()?;
    Ok(catalan_expansion(p.k_p, p.k_q).evaluate(p))
}

/// Circle radii for the contour form; the `w` circle must enclose the
/// double pole at `w = (c / b_p) z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourRadii {
    pub z: f64,
    pub w: f64,
}

impl ContourRadii {
    /// `|z| = sqrt(b_p)`, `|w| = 2 sqrt(b_q)`; valid for every admissible `c`.
    pub fn default_for(p: &CovarianceParams) -> Self {
        Self { z: p.b_p.sqrt(), w: 2.0 * p.b_q.sqrt() }
    }
}

/// Limit covariance as
/// `(2/beta) (2 pi i)^{-2} ∮∮ (z + b_p/z)^{k_p} (w + b_q/w)^{k_q} (c/b_p) dz dw / ((c/b_p) z - w)^2`
/// with the trapezoid rule on both circles.
pub fn limit_covariance_contour(p: &CovarianceParams, radii: Option<ContourRadii>, nodes: usize) -> Result<f64> {
    p.validate()?;
    if nodes == 0 {
        return Err(Error::ParameterDomain("contour needs at least one node".into()));
    }
    let radii = radii.unwrap_or_else(|| ContourRadii::default_for(p));
    if !(radii.z > 0.0 && radii.w > 0.0) {
        return Err(Error::ParameterDomain("contour radii must be positive".into()));
    }
    let ratio = p.c / p.b_p;
    if ratio * radii.z >= radii.w {
        return Err(Error::PoleOnContour(format!(
            "pole radius {} not strictly inside |w| = {}",
            ratio * radii.z,
            radii.w
        )));
    }
    if p.c == 0.0 {
        return Ok(0.0);
    }
    let circle = |radius: f64, b: f64, k: u32| -> Vec<(Complex64, Complex64)> {
        (0..nodes)
            .map(|j| {
                let z = Complex64::from_polar(radius, 2.0 * PI * j as f64 / nodes as f64);
                // dz / (2 pi i) = z dtheta / (2 pi)
                (z, (z + b / z).powu(k) * z)
            })
            .collect()
    };
    let zs = circle(radii.z, p.b_p, p.k_p);
    let ws = circle(radii.w, p.b_q, p.k_q);
    let mut acc = Complex64::new(0.0, 0.0);
    for &(z, fz) in &zs {
        let gz = ratio * z;
        let mut inner = Complex64::new(0.0, 0.0);
        for &(w, fw) in &ws {
            let d = gz - w;
            inner += fw / (d * d);
        }
        acc += fz * inner;
    }
    let n2 = (nodes * nodes) as f64;
    Ok(2.0 / p.beta.value() * ratio * acc.re / n2)
}

/// `(1/2pi) ln |(c - zw) / (c - z conj(w))|` for `z = rho e^{i theta}`,
/// `w = sigma e^{i phi}`, written through `theta + phi` and `theta - phi`:
/// `|c - R e^{it}|^2 = (c - R)^2 + 4 c R sin^2(t/2)`.
#[inline]
pub fn log_kernel_polar(c: f64, r: f64, sum: f64, diff: f64) -> f64 {
    let base = (c - r) * (c - r);
    let s = (0.5 * sum).sin();
    let d = (0.5 * diff).sin();
    let num = base + 4.0 * c * r * s * s;
    let den = base + 4.0 * c * r * d * d;
    (num.ln() - den.ln()) / (4.0 * PI)
}

/// Gauss-Legendre nodes and weights mapped to `(0, 1)`.
pub fn unit_gauss_legendre(nodes: usize) -> Result<Vec<(f64, f64)>> {
    let rule = GaussLegendre::new(nodes).map_err(|e| Error::ParameterDomain(e.to_string()))?;
    Ok(rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect())
}

// Grading exponent for the inner integral; nodes cluster as u^GRADE at phi = theta.
const GRADE: i32 = 3;

/// Limit covariance as the double integral of the logarithmic kernel over
/// the half circles `|z|^2 = b_p`, `|w|^2 = b_q` against
/// `x(z)^{k_p-1} dx(z)` and `x(w)^{k_q-1} dx(w)`, `x = 2 Re`.
///
/// Gauss-Legendre in `theta`; for each `theta` the `phi` range is split at
/// `phi = theta` and graded toward the split, where the kernel has a
/// logarithmic singularity when `b_p = b_q = c`.
pub fn limit_covariance_kernel_integral(p: &CovarianceParams, nodes: usize) -> Result<f64> {
    p.validate()?;
    if p.c == 0.0 {
        return Ok(0.0);
    }
    let rule = unit_gauss_legendre(nodes)?;
    let (rho, sigma) = (p.b_p.sqrt(), p.b_q.sqrt());
    let r = rho * sigma;
    // x^{k-1} dx/dt for x = 2 rad cos t
    let weight = |k: u32, rad: f64, t: f64| -> f64 {
        let x = 2.0 * rad * t.cos();
        x.powi(k as i32 - 1) * (-2.0 * rad * t.sin())
    };
    let graded: Vec<(f64, f64)> = rule
        .iter()
        .map(|&(u, w)| (u.powi(GRADE), w * GRADE as f64 * u.powi(GRADE - 1)))
        .collect();

    let mut outer = 0.0;
    for &(x, wx) in &rule {
        let theta = PI * x;
        let mut inner = 0.0;
        // phi = theta + (pi - theta) s on the right, theta - theta s on the left
        for &(s, ws) in &graded {
            let span = PI - theta;
            let phi = theta + span * s;
            inner += span * ws * weight(p.k_q, sigma, phi) * log_kernel_polar(p.c, r, theta + phi, -span * s);
            let phi = theta - theta * s;
            inner += theta * ws * weight(p.k_q, sigma, phi) * log_kernel_polar(p.c, r, theta + phi, theta * s);
        }
        outer += PI * wx * weight(p.k_p, rho, theta) * inner;
    }
    let prefactor = 2.0 * p.k_p as f64 * p.k_q as f64 / (p.beta.value() * PI);
    Ok(prefactor * outer)
}

/// Limit covariance of `Tr T_{k_p}(X(B_p)/a_p)` and `Tr T_{k_q}(X(B_q)/a_q)`
/// with `a = 2 sqrt(b L)`: `delta_{k_p k_q} (k_p / 2beta) (c / sqrt(b_p b_q))^{k_p}`.
pub fn chebyshev_limit_covariance(p: &CovarianceParams) -> Result<f64> {
    p.validate()?;
    if p.k_p != p.k_q {
        return Ok(0.0);
    }
    let k = p.k_p as f64;
    Ok(k / (2.0 * p.beta.value()) * (p.c / (p.b_p * p.b_q).sqrt()).powi(p.k_p as i32))
}
