//! Finite-dimensional marginals of the correlated free fields.
//!
//! The pointwise kernel is infinite on the diagonal, so each diagonal entry
//! is replaced by the variance of the field averaged over a circle of radius
//! `eps` around the point, `(1/2pi) ln(2 Im z / eps)`. Off-diagonal entries
//! are pointwise kernel values. For one sheet and points further than
//! `2 eps` apart this is exactly the covariance of the circle averages.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::indexing::GoodFamily;
use crate::keyed::{standard_normal, KeyedStream};
use crate::theory::gff_kernel;

/// Default circle radius for the diagonal.
pub const DEFAULT_DIAGONAL_RADIUS: f64 = 1e-3;

/// Default relative tolerance for the positivity check.
pub const DEFAULT_PSD_TOL: f64 = 1e-8;

// keeps field normals apart from matrix entry draws under the same seed
const FIELD_STREAM: u64 = 0x6666;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub sheet: usize,
    pub z: Complex64,
}

impl GridPoint {
    pub fn new(sheet: usize, re: f64, im: f64) -> Self {
        Self { sheet, z: Complex64::new(re, im) }
    }
}

#[derive(Clone, Debug)]
pub struct SheetGrid {
    family: GoodFamily,
    points: Vec<GridPoint>,
}

impl SheetGrid {
    pub fn new(family: GoodFamily, points: Vec<GridPoint>) -> Result<Self> {
        for p in &points {
            if p.sheet >= family.len() {
                return Err(Error::ParameterDomain(format!(
                    "sheet {} out of range for a family of {}",
                    p.sheet,
                    family.len()
                )));
            }
            if !(p.z.im > 0.0 && p.z.re.is_finite() && p.z.im.is_finite()) {
                return Err(Error::NotInUpperHalfPlane(format!("{}", p.z)));
            }
        }
        for a in 0..points.len() {
            for b in a + 1..points.len() {
                if points[a] == points[b] {
                    return Err(Error::DuplicatePoint(a, b));
                }
            }
        }
        Ok(Self { family, points })
    }

    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    pub fn family(&self) -> &GoodFamily {
        &self.family
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Outcome of the pivoted factorization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    pub passed: bool,
    /// Most negative (or smallest) pivot before clipping.
    pub min_pivot: f64,
    pub max_diagonal: f64,
    /// `min_pivot / max_diagonal`; the check passes iff this is `>= -tol`.
    pub relative_margin: f64,
    pub tolerance: f64,
    /// Number of pivots set to zero.
    pub clipped: usize,
}

/// `P A P^T = L D L^T` with unit lower `L`.
#[derive(Clone, Debug)]
pub struct LdlFactor {
    /// `perm[k]` is the original row placed at position `k`.
    pub perm: Vec<usize>,
    pub lower: Array2<f64>,
    pub pivots: Vec<f64>,
}

/// Symmetric factorization with complete diagonal pivoting. Pivots that are
/// not positive beyond rounding are clipped to zero and their columns dropped.
pub fn pivoted_ldl(matrix: &Array2<f64>, tol: f64) -> Result<(PsdReport, LdlFactor)> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(Error::ParameterDomain("matrix must be square".into()));
    }
    for a in 0..n {
        for b in 0..a {
            if matrix[[a, b]] != matrix[[b, a]] {
                return Err(Error::ParameterDomain(format!("matrix not symmetric at ({a}, {b})")));
            }
        }
    }
    let max_diagonal = (0..n).map(|a| matrix[[a, a]]).fold(0.0f64, f64::max);
    let floor = f64::EPSILON * n as f64 * max_diagonal;
    let mut work = matrix.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut lower = Array2::<f64>::eye(n);
    let mut pivots = vec![0.0; n];
    let mut min_pivot = f64::INFINITY;
    let mut clipped = 0;

    for k in 0..n {
        let p = (k..n)
            .max_by(|&a, &b| work[[a, a]].total_cmp(&work[[b, b]]).then(b.cmp(&a)))
            .expect("nonempty range");
        if p != k {
            perm.swap(k, p);
            for c in 0..n {
                work.swap([k, c], [p, c]);
            }
            for r in 0..n {
                work.swap([r, k], [r, p]);
            }
            for c in 0..k {
                lower.swap([k, c], [p, c]);
            }
        }
        let d = work[[k, k]];
        min_pivot = min_pivot.min(d);
        if d <= floor {
            clipped += 1;
            continue;
        }
        pivots[k] = d;
        for r in k + 1..n {
            lower[[r, k]] = work[[r, k]] / d;
        }
        for r in k + 1..n {
            let lr = lower[[r, k]];
            if lr == 0.0 {
                continue;
            }
            for c in k + 1..=r {
                let v = work[[r, c]] - lr * d * lower[[c, k]];
                work[[r, c]] = v;
                work[[c, r]] = v;
            }
        }
    }
    if n == 0 {
        min_pivot = 0.0;
    }
    let relative_margin = if max_diagonal > 0.0 { min_pivot / max_diagonal } else { min_pivot };
    let report = PsdReport {
        passed: relative_margin >= -tol,
        min_pivot,
        max_diagonal,
        relative_margin,
        tolerance: tol,
        clipped,
    };
    Ok((report, LdlFactor { perm, lower, pivots }))
}

/// Kernel matrix on a grid together with its positivity certificate.
#[derive(Clone, Debug)]
pub struct FieldCovariance {
    pub matrix: Array2<f64>,
    pub grid: SheetGrid,
    pub diagonal_radius: f64,
    report: Option<PsdReport>,
    factor: Option<LdlFactor>,
}

/// Assemble the kernel matrix, one evaluation per unordered pair.
pub fn build_covariance(grid: &SheetGrid, diagonal_radius: f64) -> Result<FieldCovariance> {
    if !(diagonal_radius > 0.0) {
        return Err(Error::ParameterDomain("diagonal radius must be positive".into()));
    }
    let pts = grid.points();
    if let Some(p) = pts.iter().find(|p| p.z.im <= diagonal_radius) {
        return Err(Error::ParameterDomain(format!(
            "point {} is within the diagonal radius {diagonal_radius} of the real axis",
            p.z
        )));
    }
    let n = pts.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| {
            if a == b {
                Ok((2.0 * pts[a].z.im / diagonal_radius).ln() / (2.0 * PI))
            } else {
                gff_kernel(grid.family(), pts[a].sheet, pts[a].z, pts[b].sheet, pts[b].z)
            }
        })
        .collect::<Result<_>>()?;
    let mut matrix = Array2::zeros((n, n));
    for (&(a, b), &v) in pairs.iter().zip(&values) {
        if !v.is_finite() {
            return Err(Error::DuplicatePoint(a, b));
        }
        matrix[[a, b]] = v;
        matrix[[b, a]] = v;
    }
    Ok(FieldCovariance { matrix, grid: grid.clone(), diagonal_radius, report: None, factor: None })
}

impl FieldCovariance {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn report(&self) -> Option<&PsdReport> {
        self.report.as_ref()
    }

    /// Factor the matrix and record the outcome; sampling needs a pass.
    pub fn psd_check(&mut self, tol: f64) -> Result<PsdReport> {
        let (report, factor) = pivoted_ldl(&self.matrix, tol)?;
        self.report = Some(report);
        self.factor = Some(factor);
        Ok(report)
    }

    /// `n_samples` zero-mean Gaussian vectors, one row each.
    pub fn sample_field(&self, n_samples: usize, seed: u64) -> Result<Array2<f64>> {
        let (report, factor) = match (&self.report, &self.factor) {
            (Some(r), Some(f)) => (r, f),
            _ => return Err(Error::ContractViolation("sample_field called before psd_check".into())),
        };
        if !report.passed {
            return Err(Error::ContractViolation(format!(
                "covariance failed the positivity check (relative margin {:e})",
                report.relative_margin
            )));
        }
        let n = self.dim();
        let scale: Vec<f64> = factor.pivots.iter().map(|d| d.sqrt()).collect();
        let mut out = Array2::zeros((n_samples, n));
        let rows: Vec<Vec<f64>> = (0..n_samples)
            .into_par_iter()
            .map(|s| {
                let stream = KeyedStream::new(seed, s as u64);
                let g: Vec<f64> = (0..n)
                    .map(|k| scale[k] * standard_normal(stream.bits(k as u64, 0, FIELD_STREAM)))
                    .collect();
                let mut x = vec![0.0; n];
                for r in 0..n {
                    let mut acc = 0.0;
                    for (k, gk) in g.iter().enumerate().take(r + 1) {
                        acc += factor.lower[[r, k]] * gk;
                    }
                    x[factor.perm[r]] = acc;
                }
                x
            })
            .collect();
        for (s, row) in rows.into_iter().enumerate() {
            for (a, v) in row.into_iter().enumerate() {
                out[[s, a]] = v;
            }
        }
        Ok(out)
    }
}

/// Unbiased sample covariance of the rows, treating the mean as known zero.
pub fn sample_covariance(samples: &Array2<f64>) -> Array2<f64> {
    let m = samples.nrows().max(1) as f64;
    samples.t().dot(samples) / m
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn one_sheet(points: &[(f64, f64)]) -> SheetGrid {
        let family = GoodFamily::four_sequence_example(100);
        SheetGrid::new(family, points.iter().map(|&(x, y)| GridPoint::new(0, x, y)).collect()).unwrap()
    }

    #[test]
    fn reference_pair() {
        let cov = build_covariance(&one_sheet(&[(0.0, 1.0), (0.0, 2.0)]), 1e-3).unwrap();
        assert!((cov.matrix[[0, 1]] - 3f64.ln() / (2.0 * PI)).abs() < 1e-15);
        assert_eq!(cov.matrix[[0, 1]], cov.matrix[[1, 0]]);
        assert!((cov.matrix[[0, 0]] - (2000f64).ln() / (2.0 * PI)).abs() < 1e-14);
    }

    #[test]
    fn disjoint_sheets_decouple() {
        let family = GoodFamily::four_sequence_example(100);
        let pts = vec![GridPoint::new(1, 0.1, 0.5), GridPoint::new(1, -0.4, 1.1), GridPoint::new(2, 0.3, 0.9), GridPoint::new(2, 0.0, 2.0)];
        let cov = build_covariance(&SheetGrid::new(family, pts).unwrap(), 1e-3).unwrap();
        for a in 0..2 {
            for b in 2..4 {
                assert_eq!(cov.matrix[[a, b]], 0.0);
            }
        }
    }

    #[test]
    fn duplicates_and_bad_points_rejected() {
        let family = GoodFamily::four_sequence_example(100);
        let e = SheetGrid::new(family.clone(), vec![GridPoint::new(0, 0.0, 1.0), GridPoint::new(1, 0.0, 1.0), GridPoint::new(0, 0.0, 1.0)]);
        assert!(matches!(e, Err(Error::DuplicatePoint(0, 2))));
        assert!(SheetGrid::new(family.clone(), vec![GridPoint::new(0, 0.0, 0.0)]).is_err());
        assert!(SheetGrid::new(family, vec![GridPoint::new(7, 0.0, 1.0)]).is_err());
    }

    #[test]
    fn ldl_examples() {
        let (r, _) = pivoted_ldl(&array![[2.5]], 1e-8).unwrap();
        assert!(r.passed);
        let (r, _) = pivoted_ldl(&array![[1.0, 2.0], [2.0, 1.0]], 1e-8).unwrap();
        assert!(!r.passed);
        assert!((r.min_pivot + 3.0).abs() < 1e-15);
        let (r, f) = pivoted_ldl(&array![[1.0, 1.0], [1.0, 1.0]], 1e-8).unwrap();
        assert!(r.passed);
        assert_eq!(r.clipped, 1);
        assert_eq!(f.pivots[1], 0.0);
    }

    #[test]
    fn ldl_reconstructs_matrix() {
        let a = array![[4.0, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 9.0]];
        let (r, f) = pivoted_ldl(&a, 1e-8).unwrap();
        assert!(r.passed);
        let d = Array2::from_diag(&ndarray::Array1::from(f.pivots.clone()));
        let b = f.lower.dot(&d).dot(&f.lower.t());
        for i in 0..3 {
            for j in 0..3 {
                assert!((b[[i, j]] - a[[f.perm[i], f.perm[j]]]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn sampling_requires_check() {
        let mut cov = build_covariance(&one_sheet(&[(0.0, 1.0), (0.5, 0.5)]), 1e-3).unwrap();
        assert!(matches!(cov.sample_field(3, 1), Err(Error::ContractViolation(_))));
        cov.psd_check(1e-8).unwrap();
        assert_eq!(cov.sample_field(0, 1).unwrap().nrows(), 0);
        assert_eq!(cov.sample_field(5, 9).unwrap(), cov.sample_field(5, 9).unwrap());
        assert_ne!(cov.sample_field(5, 9).unwrap(), cov.sample_field(5, 10).unwrap());
    }

    #[test]
    fn identity_covariance_sampling() {
        let grid = one_sheet(&[(0.0, 1.0), (1.0, 1.0), (2.0, 1.0)]);
        let mut cov = build_covariance(&grid, 1e-3).unwrap();
        cov.matrix = Array2::eye(3);
        cov.psd_check(1e-8).unwrap();
        let s = sample_covariance(&cov.sample_field(100_000, 4).unwrap());
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((s[[i, j]] - target).abs() < 0.02, "({i},{j}) {}", s[[i, j]]);
            }
        }
    }

    #[test]
    fn nested_grids_give_principal_submatrices() {
        let pts = [(0.0, 1.0), (0.3, 0.4), (-1.0, 2.0), (0.7, 0.9)];
        let big = build_covariance(&one_sheet(&pts), 1e-3).unwrap();
        let small = build_covariance(&one_sheet(&pts[1..3]), 1e-3).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert_eq!(small.matrix[[a, b]], big.matrix[[a + 1, b + 1]]);
            }
        }
    }
}
