//! Dense principal submatrices `X(B)` and their trace statistics.
//!
//! Traces of powers and of Chebyshev polynomials are computed with dense
//! products only; no eigenvalues are ever formed. The final multiplication of
//! each chain is replaced by the trace of a product, `Tr(AB) = sum A_ij B_ji`,
//! reduced with compensated summation.

use std::borrow::Cow;
use std::collections::HashSet;

use ndarray::{Array2, LinalgScalar};
use num_complex::Complex64;

use crate::ensembles::{Beta, EnsembleSpec};
use crate::error::{Error, Result};
use crate::keyed::{KeyedRow, KeyedStream};

/// Relative bound on the imaginary part of a Hermitian trace.
pub const HERMITIAN_RESIDUE_RTOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum SubmatrixData {
    Real(Array2<f64>),
    Complex(Array2<Complex64>),
}

/// `X(B)` for one replicate of one ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct RealizedSubmatrix {
    pub indices: Vec<u64>,
    pub data: SubmatrixData,
    pub seed: u64,
    pub replicate: u64,
    pub spec: EnsembleSpec,
}

/// Cuts `X(B)` out of the keyed infinite matrix.
pub fn realize(spec: &EnsembleSpec, seed: u64, replicate: u64, indices: &[u64]) -> Result<RealizedSubmatrix> {
    if indices.is_empty() {
        return Err(Error::ParameterDomain("submatrix index set is empty".into()));
    }
    let mut seen = HashSet::with_capacity(indices.len());
    for &i in indices {
        if i == 0 {
            return Err(Error::ParameterDomain("matrix indices start at 1".into()));
        }
        if !seen.insert(i) {
            return Err(Error::DuplicateIndex(i));
        }
    }
    let stream = KeyedStream::new(seed, replicate);
    let rows: Vec<KeyedRow> = indices.iter().map(|&i| stream.row(i)).collect();
    let n = indices.len();
    let row_of = |a: usize, b: usize| if indices[a] <= indices[b] { &rows[a] } else { &rows[b] };

    let data = match spec.beta {
        Beta::Real => {
            let mut m = Array2::<f64>::zeros((n, n));
            for a in 0..n {
                for b in a..n {
                    let v = spec.real_entry_in(row_of(a, b), indices[a], indices[b]);
                    m[[a, b]] = v;
                    m[[b, a]] = v;
                }
            }
            SubmatrixData::Real(m)
        }
        Beta::Complex => {
            let mut m = Array2::<Complex64>::zeros((n, n));
            for a in 0..n {
                for b in a..n {
                    let v = spec.entry_in(row_of(a, b), indices[a], indices[b]);
                    m[[a, b]] = v;
                    m[[b, a]] = v.conj();
                }
            }
            SubmatrixData::Complex(m)
        }
    };
    Ok(RealizedSubmatrix { indices: indices.to_vec(), data, seed, replicate, spec: *spec })
}

impl RealizedSubmatrix {
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Entry at positions `(a, b)` of `B`.
    pub fn get(&self, a: usize, b: usize) -> Complex64 {
        match &self.data {
            SubmatrixData::Real(m) => Complex64::new(m[[a, b]], 0.0),
            SubmatrixData::Complex(m) => m[[a, b]],
        }
    }

    /// Sum of squared moduli of all entries.
    pub fn frobenius_sq(&self) -> f64 {
        match &self.data {
            SubmatrixData::Real(m) => m.iter().map(|v| v * v).sum(),
            SubmatrixData::Complex(m) => m.iter().map(|v| v.norm_sqr()).sum(),
        }
    }

    /// Traces `Tr(M^k)` for `k = 1..=max_power`.
    pub fn power_traces(&self, max_power: u32) -> Result<Vec<f64>> {
        match &self.data {
            SubmatrixData::Real(m) => Ok(power_traces(&canonical(&self.indices, m), max_power).0),
            SubmatrixData::Complex(m) => {
                let (traces, residues) = power_traces(&canonical(&self.indices, m), max_power);
                residues.iter().try_for_each(check_residue)?;
                Ok(traces)
            }
        }
    }

    /// `Tr(M^k)`.
    pub fn trace_power(&self, k: u32) -> Result<f64> {
        if k == 0 {
            return Err(Error::ParameterDomain("trace power must be >= 1".into()));
        }
        Ok(self.power_traces(k)?[k as usize - 1])
    }

    /// Traces `Tr T_n(M / a)` for `n = 0..=max_degree`.
    pub fn chebyshev_traces(&self, max_degree: u32, scale: f64) -> Result<Vec<f64>> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::ParameterDomain(format!("Chebyshev scale must be positive, got {scale}")));
        }
        match &self.data {
            SubmatrixData::Real(m) => Ok(chebyshev_traces(&canonical(&self.indices, m), max_degree, scale).0),
            SubmatrixData::Complex(m) => {
                let (traces, residues) = chebyshev_traces(&canonical(&self.indices, m), max_degree, scale);
                residues.iter().try_for_each(check_residue)?;
                Ok(traces)
            }
        }
    }

    /// `Tr T_n(M / a)`.
    pub fn trace_chebyshev(&self, n: u32, scale: f64) -> Result<f64> {
        Ok(self.chebyshev_traces(n, scale)?[n as usize])
    }

    /// Principal submatrix on positions `pos`, in that order.
    pub fn principal(&self, pos: &[usize]) -> RealizedSubmatrix {
        let pick = |a: usize, b: usize| (pos[a], pos[b]);
        let n = pos.len();
        let data = match &self.data {
            SubmatrixData::Real(m) => SubmatrixData::Real(Array2::from_shape_fn((n, n), |(a, b)| m[pick(a, b)])),
            SubmatrixData::Complex(m) => SubmatrixData::Complex(Array2::from_shape_fn((n, n), |(a, b)| m[pick(a, b)])),
        };
        RealizedSubmatrix {
            indices: pos.iter().map(|&p| self.indices[p]).collect(),
            data,
            seed: self.seed,
            replicate: self.replicate,
            spec: self.spec,
        }
    }
}

fn check_residue(r: &Residue) -> Result<()> {
    let tolerance = HERMITIAN_RESIDUE_RTOL * r.magnitude;
    if r.imag.abs() <= tolerance {
        Ok(())
    } else {
        Err(Error::HermitianResidue { residue: r.imag.abs(), tolerance })
    }
}

// Reorders to increasing global index so traces do not depend on the order of B.
fn canonical<'a, T: Clone>(indices: &[u64], m: &'a Array2<T>) -> Cow<'a, Array2<T>> {
    if indices.windows(2).all(|w| w[0] < w[1]) {
        return Cow::Borrowed(m);
    }
    let mut order: Vec<usize> = (0..indices.len()).collect();
    order.sort_by_key(|&a| indices[a]);
    let n = order.len();
    Cow::Owned(Array2::from_shape_fn((n, n), |(a, b)| m[[order[a], order[b]]].clone()))
}

/// Scalars the trace kernels accept.
pub trait TraceScalar: LinalgScalar + Send + Sync {
    fn re(self) -> f64;
    fn im(self) -> f64;
    fn modulus(self) -> f64;
    fn from_f64(v: f64) -> Self;
}

impl TraceScalar for f64 {
    fn re(self) -> f64 {
        self
    }
    fn im(self) -> f64 {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn from_f64(v: f64) -> Self {
        v
    }
}

impl TraceScalar for Complex64 {
    fn re(self) -> f64 {
        self.re
    }
    fn im(self) -> f64 {
        self.im
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn from_f64(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
}

/// Neumaier compensated sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Imaginary part and absolute mass of a trace reduction.
#[derive(Clone, Copy, Debug, Default)]
pub struct Residue {
    pub imag: f64,
    pub magnitude: f64,
}

struct TraceAcc {
    re: CompensatedSum,
    im: CompensatedSum,
    mag: f64,
}

impl TraceAcc {
    fn new() -> Self {
        Self { re: CompensatedSum::default(), im: CompensatedSum::default(), mag: 0.0 }
    }

    #[inline]
    fn add<T: TraceScalar>(&mut self, v: T) {
        self.re.add(v.re());
        self.im.add(v.im());
        self.mag += v.modulus();
    }

    fn finish(self) -> (f64, Residue) {
        (self.re.value(), Residue { imag: self.im.value(), magnitude: self.mag })
    }
}

fn trace<T: TraceScalar>(a: &Array2<T>) -> (f64, Residue) {
    let mut acc = TraceAcc::new();
    for i in 0..a.nrows() {
        acc.add(a[[i, i]]);
    }
    acc.finish()
}

/// `Tr(AB)` without forming the product.
fn trace_of_product<T: TraceScalar>(a: &Array2<T>, b: &Array2<T>) -> (f64, Residue) {
    let mut acc = TraceAcc::new();
    for (i, row) in a.rows().into_iter().enumerate() {
        for (j, &aij) in row.iter().enumerate() {
            acc.add(aij * b[[j, i]]);
        }
    }
    acc.finish()
}

/// `Tr(M^k)`, `k = 1..=max_power`, from the powers `M^1 .. M^ceil(max/2)`:
/// `Tr(M^k) = Tr(M^ceil(k/2) M^floor(k/2))`.
pub fn power_traces<T: TraceScalar>(m: &Array2<T>, max_power: u32) -> (Vec<f64>, Vec<Residue>) {
    let mut traces = Vec::with_capacity(max_power as usize);
    let mut residues = Vec::with_capacity(max_power as usize);
    if max_power == 0 {
        return (traces, residues);
    }
    let half = max_power.div_ceil(2) as usize;
    let mut powers: Vec<Array2<T>> = vec![m.clone()];
    while powers.len() < half {
        let next = powers.last().unwrap().dot(m);
        powers.push(next);
    }
    let (t, r) = trace(m);
    traces.push(t);
    residues.push(r);
    for k in 2..=max_power as usize {
        let hi = k.div_ceil(2);
        let lo = k / 2;
        let (t, r) = trace_of_product(&powers[hi - 1], &powers[lo - 1]);
        traces.push(t);
        residues.push(r);
    }
    (traces, residues)
}

/// `Tr T_n(M / a)`, `n = 0..=max_degree`, by the three-term recurrence
/// `T_{n+1} = 2 (M/a) T_n - T_{n-1}`; the last step is trace-only.
pub fn chebyshev_traces<T: TraceScalar>(m: &Array2<T>, max_degree: u32, scale: f64) -> (Vec<f64>, Vec<Residue>) {
    let n = m.nrows();
    let y = m.mapv(|v| v * T::from_f64(1.0 / scale));
    let mut traces = vec![n as f64];
    let mut residues = vec![Residue::default()];
    if max_degree == 0 {
        return (traces, residues);
    }
    let (t1, r1) = trace(&y);
    traces.push(t1);
    residues.push(r1);
    let mut prev = Array2::<T>::eye(n);
    let mut cur = y.clone();
    let two = T::from_f64(2.0);
    for deg in 1..max_degree as usize {
        let (tp, rp) = trace_of_product(&y, &cur);
        traces.push(2.0 * tp - traces[deg - 1]);
        residues.push(Residue { imag: 2.0 * rp.imag, magnitude: 2.0 * rp.magnitude + n as f64 });
        if deg + 1 < max_degree as usize {
            let mut next = y.dot(&cur);
            next.zip_mut_with(&prev, |a, &b| *a = two * *a - b);
            prev = std::mem::replace(&mut cur, next);
        }
    }
    (traces, residues)
}

/// One column of centered, normalized per-replicate values.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceStatistic {
    pub power: u32,
    pub normalization: f64,
    pub values: Vec<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    let mut s = CompensatedSum::default();
    xs.iter().for_each(|&x| s.add(x));
    s.value() / xs.len() as f64
}

fn centered_scaled(traces: &[f64], factor: f64) -> Result<Vec<f64>> {
    if traces.len() < 2 {
        return Err(Error::InvalidSpec("centering needs at least 2 replicates".into()));
    }
    let m = mean(traces);
    Ok(traces.iter().map(|t| factor * (t - m)).collect())
}

/// `L^{-k/2} (Tr - mean Tr)` per replicate, the across-replicate mean
/// standing in for the expectation.
pub fn centered_statistic(traces: &[f64], scale: u64, power: u32) -> Result<TraceStatistic> {
    let normalization = (scale as f64).powf(-(power as f64) / 2.0);
    Ok(TraceStatistic { power, normalization, values: centered_scaled(traces, normalization)? })
}

/// Height-function moment `M_{i,y,k}` from traces of power `k + 1` on the
/// prefix of length `[Ly]`.
pub fn height_moment_from_traces(traces: &[f64], scale: u64, k: u32, beta: Beta) -> Result<Vec<f64>> {
    let l = scale as f64;
    let factor = l.powf(-((k + 1) as f64) / 2.0) * (beta.value() * std::f64::consts::PI / 2.0).sqrt() / (k + 1) as f64;
    centered_scaled(traces, factor)
}
