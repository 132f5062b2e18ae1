//! Entry distributions of Wigner matrices and keyed entry generation.
//!
//! A Wigner matrix here is one fixed infinite matrix per `(seed, replicate)`:
//! entry `(i, j)` is a pure function of `(seed, replicate, min(i,j), max(i,j))`,
//! so every finite principal submatrix is cut out of the same realization.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keyed::{open_unit, standard_normal, KeyedRow, KeyedStream};

/// Relative tolerance used when comparing closed-form moments with the
/// required constants. Parameters such as `sqrt(3)` are not exactly
/// representable, so bit equality would reject valid inputs.
pub const MOMENT_RTOL: f64 = 1e-12;

/// Symmetry class: 1 for real symmetric, 2 for Hermitian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Beta {
    Real = 1,
    Complex = 2,
}

impl Beta {
    pub fn value(self) -> f64 {
        self as u8 as f64
    }
}

impl TryFrom<u8> for Beta {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Beta::Real),
            2 => Ok(Beta::Complex),
            _ => Err(format!("beta must be 1 or 2, got {v}")),
        }
    }
}

impl From<Beta> for u8 {
    fn from(b: Beta) -> u8 {
        b as u8
    }
}

/// Law of a single matrix entry. All kinds are centered.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EntryDistribution {
    /// Real normal with the given variance.
    GaussianReal { variance: f64 },
    /// `+atom` and `-atom` with probability `weight` each, else 0.
    ThreePointReal { atom: f64, weight: f64 },
    /// `+scale` or `-scale` with probability 1/2 each.
    RademacherScaled { scale: f64 },
    /// Independent real and imaginary normals, each with `component_variance`.
    GaussianComplex { component_variance: f64 },
    /// `radius * exp(i theta)` with probability `weight`, else 0; theta uniform.
    UniformPhaseRadial { radius: f64, weight: f64 },
}

/// Mean, second absolute moment and fourth absolute moment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub second: f64,
    pub fourth: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn probability(name: &str, v: f64, max: f64) -> Result<()> {
    if (0.0..=max).contains(&v) {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("{name} must lie in [0, {max}], got {v}")))
    }
}

impl EntryDistribution {
    pub fn is_complex(&self) -> bool {
        matches!(
            self,
            EntryDistribution::GaussianComplex { .. } | EntryDistribution::UniformPhaseRadial { .. }
        )
    }

    pub fn check_parameters(&self) -> Result<()> {
        match *self {
            EntryDistribution::GaussianReal { variance } => positive("variance", variance),
            EntryDistribution::ThreePointReal { atom, weight } => {
                positive("atom", atom)?;
                // two atoms carry mass `weight` each
                probability("weight", weight, 0.5)
            }
            EntryDistribution::RademacherScaled { scale } => positive("scale", scale),
            EntryDistribution::GaussianComplex { component_variance } => {
                positive("component_variance", component_variance)
            }
            EntryDistribution::UniformPhaseRadial { radius, weight } => {
                positive("radius", radius)?;
                probability("weight", weight, 1.0)
            }
        }
    }

    /// Closed-form moments `(E Z, E|Z|^2, E|Z|^4)`.
    pub fn analytic_moments(&self) -> Result<Moments> {
        self.check_parameters()?;
        let (second, fourth) = match *self {
            EntryDistribution::GaussianReal { variance: v } => (v, 3.0 * v * v),
            EntryDistribution::ThreePointReal { atom: a, weight: p } => {
                let a2 = a * a;
                (2.0 * p * a2, 2.0 * p * a2 * a2)
            }
            EntryDistribution::RademacherScaled { scale: s } => {
                let s2 = s * s;
                (s2, s2 * s2)
            }
            // |Z|^2 = X^2 + Y^2 with X, Y ~ N(0, v): E|Z|^4 = 3v^2 + 2v^2 + 3v^2
            EntryDistribution::GaussianComplex { component_variance: v } => (2.0 * v, 8.0 * v * v),
            EntryDistribution::UniformPhaseRadial { radius: a, weight: p } => {
                let a2 = a * a;
                (p * a2, p * a2 * a2)
            }
        };
        Ok(Moments { mean: 0.0, second, fourth })
    }

    /// Real draw; the imaginary stream is never consumed.
    #[inline]
    pub(crate) fn draw_real(&self, row: &KeyedRow, j: u64) -> f64 {
        match *self {
            EntryDistribution::GaussianReal { variance } => {
                variance.sqrt() * standard_normal(row.bits(j, 0))
            }
            EntryDistribution::ThreePointReal { atom, weight } => {
                let u = open_unit(row.bits(j, 0));
                if u < weight {
                    atom
                } else if u < 2.0 * weight {
                    -atom
                } else {
                    0.0
                }
            }
            EntryDistribution::RademacherScaled { scale } => {
                if row.bits(j, 0) >> 63 == 0 {
                    scale
                } else {
                    -scale
                }
            }
            EntryDistribution::GaussianComplex { .. } | EntryDistribution::UniformPhaseRadial { .. } => {
                self.draw(row, j).re
            }
        }
    }

    #[inline]
    pub(crate) fn draw(&self, row: &KeyedRow, j: u64) -> Complex64 {
        match *self {
            EntryDistribution::GaussianComplex { component_variance } => {
                let sd = component_variance.sqrt();
                Complex64::new(sd * standard_normal(row.bits(j, 0)), sd * standard_normal(row.bits(j, 1)))
            }
            EntryDistribution::UniformPhaseRadial { radius, weight } => {
                // radial choice on stream 0, phase on stream 1
                if open_unit(row.bits(j, 0)) < weight {
                    let theta = std::f64::consts::TAU * open_unit(row.bits(j, 1));
                    Complex64::from_polar(radius, theta)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            _ => Complex64::new(self.draw_real(row, j), 0.0),
        }
    }
}

/// Which family of entries a constraint applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryRole {
    Offdiag,
    Diag,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    Parameters,
    Field,
    Mean,
    Variance,
    FourthMoment,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub role: EntryRole,
    pub constraint: Constraint,
    pub expected: Option<f64>,
    pub actual: Option<f64>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {:?}: {}", self.role, self.constraint, self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, role: EntryRole, constraint: Constraint) -> bool {
        self.violations.iter().any(|v| v.role == role && v.constraint == constraint)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// A Wigner ensemble: symmetry class plus off-diagonal and diagonal laws.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub beta: Beta,
    pub offdiag: EntryDistribution,
    pub diag: EntryDistribution,
}

fn close(actual: f64, expected: f64) -> bool {
    (actual - expected).abs() <= MOMENT_RTOL * expected.abs().max(1.0)
}

impl EnsembleSpec {
    /// Gaussian orthogonal ensemble in the normalization `E Z^2 = 1, E Y^2 = 2`.
    pub fn goe() -> Self {
        Self {
            beta: Beta::Real,
            offdiag: EntryDistribution::GaussianReal { variance: 1.0 },
            diag: EntryDistribution::GaussianReal { variance: 2.0 },
        }
    }

    /// Gaussian unitary ensemble in the normalization `E|Z|^2 = 1, E Y^2 = 1`.
    pub fn gue() -> Self {
        Self {
            beta: Beta::Complex,
            offdiag: EntryDistribution::GaussianComplex { component_variance: 0.5 },
            diag: EntryDistribution::GaussianReal { variance: 1.0 },
        }
    }

    /// Checks the moment constraints required for the symmetry class.
    pub fn validate(&self) -> ValidationReport {
        let (off_second, off_fourth, diag_second) = match self.beta {
            Beta::Real => (1.0, 3.0, 2.0),
            Beta::Complex => (1.0, 2.0, 1.0),
        };
        let mut report = ValidationReport::default();
        let mut check = |role: EntryRole, dist: &EntryDistribution, want_complex: bool, second: f64, fourth: Option<f64>| {
            let mut push = |constraint, expected, actual, detail: String| {
                report.violations.push(Violation { role, constraint, expected, actual, detail })
            };
            if dist.is_complex() != want_complex {
                let field = if want_complex { "complex" } else { "real" };
                push(Constraint::Field, None, None, format!("entries must be {field}-valued"));
            }
            let m = match dist.analytic_moments() {
                Ok(m) => m,
                Err(e) => {
                    push(Constraint::Parameters, None, None, e.to_string());
                    return;
                }
            };
            if m.mean != 0.0 {
                push(Constraint::Mean, Some(0.0), Some(m.mean), format!("mean {} != 0", m.mean));
            }
            if !close(m.second, second) {
                push(Constraint::Variance, Some(second), Some(m.second), format!("second moment {} != {second}", m.second));
            }
            if let Some(fourth) = fourth {
                if !close(m.fourth, fourth) {
                    push(Constraint::FourthMoment, Some(fourth), Some(m.fourth), format!("fourth moment {} != {fourth}", m.fourth));
                }
            }
        };
        check(EntryRole::Offdiag, &self.offdiag, self.beta == Beta::Complex, off_second, Some(off_fourth));
        check(EntryRole::Diag, &self.diag, false, diag_second, None);
        report
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.passed() {
            Ok(())
        } else {
            Err(Error::InvalidEnsemble(report.to_string()))
        }
    }

    /// Entry `X(i, j)` of the infinite matrix for `key`. Real entries are
    /// returned with a zero imaginary part.
    pub fn entry(&self, key: EntryKey) -> Complex64 {
        let stream = KeyedStream::new(key.seed, key.replicate);
        self.entry_in(&stream.row(key.i.min(key.j)), key.i, key.j)
    }

    /// Entry `(i, j)` given the keyed row of `min(i, j)`.
    #[inline]
    pub(crate) fn entry_in(&self, row: &KeyedRow, i: u64, j: u64) -> Complex64 {
        if i == j {
            return Complex64::new(self.diag.draw_real(row, i), 0.0);
        }
        let hi = i.max(j);
        match self.beta {
            Beta::Real => Complex64::new(self.offdiag.draw_real(row, hi), 0.0),
            Beta::Complex => {
                let z = self.offdiag.draw(row, hi);
                if i < j {
                    z
                } else {
                    z.conj()
                }
            }
        }
    }

    #[inline]
    pub(crate) fn real_entry_in(&self, row: &KeyedRow, i: u64, j: u64) -> f64 {
        if i == j {
            self.diag.draw_real(row, i)
        } else {
            self.offdiag.draw_real(row, i.max(j))
        }
    }
}

/// Key of one entry of the infinite matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntryKey {
    pub seed: u64,
    pub replicate: u64,
    pub i: u64,
    pub j: u64,
}

impl EntryKey {
    pub fn new(seed: u64, replicate: u64, i: u64, j: u64) -> Self {
        Self { seed, replicate, i, j }
    }

    /// Key with `i <= j`; `(i, j)` and `(j, i)` share it.
    pub fn canonical(&self) -> Self {
        Self { i: self.i.min(self.j), j: self.i.max(self.j), ..*self }
    }
}
