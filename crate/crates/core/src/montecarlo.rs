//! Replicated experiments on overlapping submatrices of one keyed matrix.
//!
//! Replicate `r` realizes every distinct index set from keys
//! `(seed, r, i, j)`, so overlapping sets share entries exactly. Replicates
//! run on a worker pool and are collected in replicate order; every
//! reduction afterwards is serial, which keeps output independent of the
//! thread count.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensembles::{Beta, EnsembleSpec};
use crate::error::{Error, Result};
use crate::indexing::{scaled_length, GoodFamily, SequenceKind};
use crate::matrixops::{realize, CompensatedSum};
use crate::theory::{
    chebyshev_limit_covariance, limit_covariance_catalan, limit_covariance_contour, limit_covariance_kernel_integral,
    limit_covariance_series, CovarianceParams,
};

/// Default `|z|` threshold for flagging a comparison.
pub const DEFAULT_Z_THRESHOLD: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceDecl {
    pub label: String,
    pub sequence: SequenceKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefixFraction {
    pub sequence: String,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrefixLength {
    pub sequence: String,
    pub length: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitSet {
    pub indices: Vec<u64>,
}

/// How the index set `B_p` is chosen: a prefix of a family sequence of
/// length `[fraction L]` or a given length, or an explicit list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SetRule {
    Fraction(PrefixFraction),
    Length(PrefixLength),
    Explicit(ExplicitSet),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// `L^{-k/2} Tr X(B)^k`
    #[default]
    Trace,
    /// `Tr T_k(X(B) / 2 sqrt|B|)`
    Chebyshev,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticDecl {
    pub label: String,
    pub set: SetRule,
    pub power: u32,
    #[serde(default)]
    pub kind: StatisticKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub family: Vec<SequenceDecl>,
    pub statistics: Vec<StatisticDecl>,
    #[serde(rename = "L")]
    pub scale: u64,
    pub replicates: u64,
    pub seed: u64,
}

/// Per-statistic metadata echoed in every output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatMeta {
    pub label: String,
    pub kind: StatisticKind,
    pub power: u32,
    pub set_size: u64,
}

/// A spec with its sets materialized at scale `L`.
#[derive(Clone, Debug)]
pub struct ResolvedExperiment {
    pub spec: ExperimentSpec,
    pub family: GoodFamily,
    /// Distinct index sets, in first-use order.
    pub sets: Vec<Vec<u64>>,
    /// Set used by each statistic.
    pub stat_set: Vec<usize>,
    /// Sequence and limiting density behind each statistic, when known.
    pub stat_profile: Vec<Option<(usize, f64)>>,
}

impl ExperimentSpec {
    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        self.ensemble.ensure_valid()?;
        if self.scale == 0 {
            return Err(Error::InvalidSpec("L must be >= 1".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidSpec("replicates must be >= 1".into()));
        }
        let family = GoodFamily::new(
            self.scale,
            self.family.iter().map(|d| (d.label.clone(), d.sequence.clone())).collect(),
        )?;
        let mut seen = HashSet::new();
        let mut sets: Vec<Vec<u64>> = Vec::new();
        let mut stat_set = Vec::with_capacity(self.statistics.len());
        let mut stat_profile = Vec::with_capacity(self.statistics.len());
        for st in &self.statistics {
            if !seen.insert(st.label.as_str()) {
                return Err(Error::InvalidSpec(format!("duplicate statistic label `{}`", st.label)));
            }
            if st.power == 0 {
                return Err(Error::InvalidSpec(format!("statistic `{}` needs power >= 1", st.label)));
            }
            let (indices, profile) = match &st.set {
                SetRule::Fraction(r) => {
                    if !(r.fraction > 0.0 && r.fraction.is_finite()) {
                        return Err(Error::InvalidSpec(format!("statistic `{}` needs fraction > 0", st.label)));
                    }
                    let i = family.index_of(&r.sequence)?;
                    let m = scaled_length(r.fraction, self.scale);
                    (family.sequence(i).prefix(m), Some((i, r.fraction)))
                }
                SetRule::Length(r) => {
                    let i = family.index_of(&r.sequence)?;
                    (family.sequence(i).prefix(r.length), Some((i, r.length as f64 / self.scale as f64)))
                }
                SetRule::Explicit(r) => (r.indices.clone(), None),
            };
            if indices.is_empty() {
                return Err(Error::InvalidSpec(format!("statistic `{}` has an empty index set", st.label)));
            }
            let mut dup = HashSet::with_capacity(indices.len());
            for &i in &indices {
                if i == 0 {
                    return Err(Error::InvalidSpec(format!("statistic `{}`: indices start at 1", st.label)));
                }
                if !dup.insert(i) {
                    return Err(Error::DuplicateIndex(i));
                }
            }
            let pos = match sets.iter().position(|s| *s == indices) {
                Some(p) => p,
                None => {
                    sets.push(indices);
                    sets.len() - 1
                }
            };
            stat_set.push(pos);
            stat_profile.push(profile);
        }
        Ok(ResolvedExperiment { spec: self.clone(), family, sets, stat_set, stat_profile })
    }
}

impl ResolvedExperiment {
    pub fn stat_meta(&self) -> Vec<StatMeta> {
        self.spec
            .statistics
            .iter()
            .zip(&self.stat_set)
            .map(|(st, &s)| StatMeta {
                label: st.label.clone(),
                kind: st.kind,
                power: st.power,
                set_size: self.sets[s].len() as u64,
            })
            .collect()
    }

    /// `|B_p ∩ B_q|` for all statistic pairs.
    pub fn overlaps(&self) -> Vec<Vec<u64>> {
        let hashed: Vec<HashSet<u64>> = self.sets.iter().map(|s| s.iter().copied().collect()).collect();
        let n = self.stat_set.len();
        let mut out = vec![vec![0; n]; n];
        for p in 0..n {
            for q in 0..n {
                let (a, b) = (&hashed[self.stat_set[p]], &hashed[self.stat_set[q]]);
                out[p][q] = a.intersection(b).count() as u64;
            }
        }
        out
    }

    fn replicate(&self, r: u64) -> Result<Vec<f64>> {
        let spec = &self.spec;
        let mut per_set: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(self.sets.len());
        for (s, indices) in self.sets.iter().enumerate() {
            let users = spec.statistics.iter().zip(&self.stat_set).filter(|(_, &t)| t == s);
            let (mut max_trace, mut max_cheb) = (0u32, 0u32);
            for (st, _) in users {
                match st.kind {
                    StatisticKind::Trace => max_trace = max_trace.max(st.power),
                    StatisticKind::Chebyshev => max_cheb = max_cheb.max(st.power),
                }
            }
            let m = realize(&spec.ensemble, spec.seed, r, indices)?;
            let traces = if max_trace > 0 { m.power_traces(max_trace)? } else { Vec::new() };
            let cheb = if max_cheb > 0 {
                m.chebyshev_traces(max_cheb, 2.0 * (indices.len() as f64).sqrt())?
            } else {
                Vec::new()
            };
            per_set.push((traces, cheb));
        }
        Ok(spec
            .statistics
            .iter()
            .zip(&self.stat_set)
            .map(|(st, &s)| match st.kind {
                StatisticKind::Trace => per_set[s].0[st.power as usize - 1],
                StatisticKind::Chebyshev => per_set[s].1[st.power as usize],
            })
            .collect())
    }
}

/// Uncentered traces, one row per replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawTable {
    pub stats: Vec<StatMeta>,
    #[serde(rename = "L")]
    pub scale: u64,
    pub seed: u64,
    pub beta: Beta,
    pub overlaps: Vec<Vec<u64>>,
    pub rows: Vec<Vec<f64>>,
}

impl RawTable {
    pub fn replicates(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, p: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[p]).collect()
    }
}

/// Worker count: the request, else available parallelism, capped by
/// `SUBCLT_MAX_THREADS` when set.
pub fn worker_count(requested: Option<usize>) -> usize {
    let mut n = requested.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    if let Some(cap) = std::env::var("SUBCLT_MAX_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        n = n.min(cap.max(1));
    }
    n.max(1)
}

/// Run every replicate of the experiment.
pub fn run(spec: &ExperimentSpec, threads: Option<usize>) -> Result<RawTable> {
    let resolved = spec.resolve()?;
    run_resolved(&resolved, threads)
}

pub fn run_resolved(resolved: &ResolvedExperiment, threads: Option<usize>) -> Result<RawTable> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(threads))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let spec = &resolved.spec;
    let rows = pool.install(|| {
        (0..spec.replicates)
            .into_par_iter()
            .map(|r| resolved.replicate(r))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(RawTable {
        stats: resolved.stat_meta(),
        scale: spec.scale,
        seed: spec.seed,
        beta: spec.ensemble.beta,
        overlaps: resolved.overlaps(),
        rows,
    })
}

fn compensated_mean(xs: &[f64]) -> f64 {
    let mut s = CompensatedSum::default();
    xs.iter().for_each(|&x| s.add(x));
    s.value() / xs.len() as f64
}

fn compensated_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = CompensatedSum::default();
    a.iter().zip(b).for_each(|(x, y)| s.add(x * y));
    s.value()
}

/// Delete-one jackknife SE of the unbiased covariance of two centered
/// columns. `None` below three samples.
pub fn jackknife_covariance_se(d: &[f64], e: &[f64]) -> Option<f64> {
    let n = d.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let s = compensated_dot(d, e);
    // leaving out i shifts the mean by -d_i/(n-1), which folds into one term
    let loo: Vec<f64> = d.iter().zip(e).map(|(x, y)| (s - x * y * nf / (nf - 1.0)) / (nf - 2.0)).collect();
    let m = compensated_mean(&loo);
    let mut acc = CompensatedSum::default();
    loo.iter().for_each(|v| acc.add((v - m) * (v - m)));
    Some(((nf - 1.0) / nf * acc.value()).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatSummary {
    pub stats: Vec<StatMeta>,
    #[serde(rename = "L")]
    pub scale: u64,
    pub seed: u64,
    pub replicates: u64,
    pub beta: Beta,
    pub overlaps: Vec<Vec<u64>>,
    /// Mean of the normalized, uncentered statistic.
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// `None` when the variance is zero.
    pub skewness: Vec<Option<f64>>,
    pub excess_kurtosis: Vec<Option<f64>>,
    pub covariance: Vec<Vec<f64>>,
    pub covariance_se: Vec<Vec<Option<f64>>>,
}

fn normalization(meta: &StatMeta, scale: u64) -> f64 {
    match meta.kind {
        StatisticKind::Trace => (scale as f64).powf(-(meta.power as f64) / 2.0),
        StatisticKind::Chebyshev => 1.0,
    }
}

/// Moments, covariances and jackknife errors of the normalized statistics,
/// centered at the empirical mean.
pub fn summarize(raw: &RawTable) -> Result<StatSummary> {
    let m = raw.replicates();
    if m < 2 {
        return Err(Error::InvalidSpec(format!("summary needs at least 2 replicates, got {m}")));
    }
    let mf = m as f64;
    let n = raw.stats.len();
    let mut means = Vec::with_capacity(n);
    let mut centered = Vec::with_capacity(n);
    for (p, meta) in raw.stats.iter().enumerate() {
        let f = normalization(meta, raw.scale);
        let col: Vec<f64> = raw.column(p).iter().map(|t| f * t).collect();
        let mu = compensated_mean(&col);
        means.push(mu);
        centered.push(col.iter().map(|x| x - mu).collect::<Vec<f64>>());
    }
    let mut covariance = vec![vec![0.0; n]; n];
    let mut covariance_se = vec![vec![None; n]; n];
    for p in 0..n {
        for q in p..n {
            let v = compensated_dot(&centered[p], &centered[q]) / (mf - 1.0);
            let se = jackknife_covariance_se(&centered[p], &centered[q]);
            covariance[p][q] = v;
            covariance[q][p] = v;
            covariance_se[p][q] = se;
            covariance_se[q][p] = se;
        }
    }
    let variance: Vec<f64> = (0..n).map(|p| covariance[p][p]).collect();
    let mut skewness = Vec::with_capacity(n);
    let mut excess_kurtosis = Vec::with_capacity(n);
    for d in &centered {
        let m2 = compensated_mean(&d.iter().map(|x| x * x).collect::<Vec<_>>());
        if m2 == 0.0 {
            skewness.push(None);
            excess_kurtosis.push(None);
            continue;
        }
        let m3 = compensated_mean(&d.iter().map(|x| x * x * x).collect::<Vec<_>>());
        let m4 = compensated_mean(&d.iter().map(|x| (x * x) * (x * x)).collect::<Vec<_>>());
        skewness.push(Some(m3 / m2.powf(1.5)));
        excess_kurtosis.push(Some(m4 / (m2 * m2) - 3.0));
    }
    Ok(StatSummary {
        stats: raw.stats.clone(),
        scale: raw.scale,
        seed: raw.seed,
        replicates: m as u64,
        beta: raw.beta,
        overlaps: raw.overlaps.clone(),
        mean: means,
        variance,
        skewness,
        excess_kurtosis,
        covariance,
        covariance_se,
    })
}

impl StatSummary {
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.stats.iter().position(|s| s.label == label)
    }

    pub fn correlation(&self, p: usize, q: usize) -> f64 {
        self.covariance[p][q] / (self.variance[p] * self.variance[q]).sqrt()
    }
}

/// One row of the theory table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryRow {
    pub p: String,
    pub q: String,
    pub k_p: u32,
    pub k_q: u32,
    pub b_p: f64,
    pub b_q: f64,
    pub c_pq: f64,
    pub beta: u8,
    pub cov_series: f64,
    pub cov_catalan: f64,
    pub cov_contour: f64,
    pub cov_kernel: f64,
    pub cheb_cov: f64,
}

impl TheoryRow {
    pub fn evaluate(p: &str, q: &str, params: &CovarianceParams, nodes: usize) -> Result<Self> {
        Ok(Self {
            p: p.to_string(),
            q: q.to_string(),
            k_p: params.k_p,
            k_q: params.k_q,
            b_p: params.b_p,
            b_q: params.b_q,
            c_pq: params.c,
            beta: params.beta.into(),
            cov_series: limit_covariance_series(params)?,
            cov_catalan: limit_covariance_catalan(params)?,
            cov_contour: limit_covariance_contour(params, None, nodes)?,
            cov_kernel: limit_covariance_kernel_integral(params, nodes)?,
            cheb_cov: chebyshev_limit_covariance(params)?,
        })
    }
}

/// Where the densities in the theory table come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Densities {
    /// `|B_p| / L` and `|B_p ∩ B_q| / L` at the configured `L`.
    FiniteScale,
    /// Limiting densities and the overlap profile of the family.
    Limit,
}

/// Theory rows for every pair `p <= q` of statistics, in declaration order.
pub fn theory_table(resolved: &ResolvedExperiment, densities: Densities, nodes: usize) -> Result<Vec<TheoryRow>> {
    let meta = resolved.stat_meta();
    let overlaps = resolved.overlaps();
    let l = resolved.spec.scale as f64;
    let beta = resolved.spec.ensemble.beta;
    let mut rows = Vec::new();
    for p in 0..meta.len() {
        for q in p..meta.len() {
            let (b_p, b_q, c) = match densities {
                Densities::FiniteScale => {
                    (meta[p].set_size as f64 / l, meta[q].set_size as f64 / l, overlaps[p][q] as f64 / l)
                }
                Densities::Limit => {
                    let no_form = |s: &StatMeta| Error::NoClosedForm(s.label.clone(), "explicit set".into());
                    let (i, x) = resolved.stat_profile[p].ok_or_else(|| no_form(&meta[p]))?;
                    let (j, y) = resolved.stat_profile[q].ok_or_else(|| no_form(&meta[q]))?;
                    let alpha = resolved.family.alpha_limit(i, x, j, y)?;
                    (x, y, alpha.min(x).min(y))
                }
            };
            let params = CovarianceParams::new(meta[p].power, meta[q].power, b_p, b_q, c, beta);
            rows.push(TheoryRow::evaluate(&meta[p].label, &meta[q].label, &params, nodes)?);
        }
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    Covariance,
    Skewness,
    ExcessKurtosis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub moment: Moment,
    pub p: String,
    pub q: String,
    pub empirical: f64,
    pub theory: f64,
    pub se: f64,
    pub z: f64,
    pub breach: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub threshold: f64,
    pub rows: Vec<ZScore>,
}

impl Comparison {
    pub fn breaches(&self) -> usize {
        self.rows.iter().filter(|r| r.breach).count()
    }

    pub fn find(&self, moment: Moment, p: &str, q: &str) -> Option<&ZScore> {
        self.rows
            .iter()
            .find(|r| r.moment == moment && ((r.p == p && r.q == q) || (r.p == q && r.q == p)))
    }
}

fn z_score(moment: Moment, p: &str, q: &str, empirical: f64, theory: f64, se: f64, threshold: f64) -> ZScore {
    let diff = empirical - theory;
    let z = if diff == 0.0 { 0.0 } else { diff / se };
    ZScore { moment, p: p.into(), q: q.into(), empirical, theory, se, z, breach: !(z.abs() <= threshold) }
}

/// z-scores of empirical covariances against the theory table, plus
/// skewness and excess kurtosis against the Gaussian null. Trace pairs use
/// the series column and Chebyshev pairs the Chebyshev column; mixed pairs
/// have no limit in the table and are skipped.
pub fn compare(summary: &StatSummary, theory: &[TheoryRow], threshold: f64) -> Result<Comparison> {
    let sim_labels: HashSet<&str> = summary.stats.iter().map(|s| s.label.as_str()).collect();
    let th_labels: HashSet<&str> = theory.iter().flat_map(|r| [r.p.as_str(), r.q.as_str()]).collect();
    let mut problems: Vec<String> = Vec::new();
    let mut only_sim: Vec<&str> = sim_labels.difference(&th_labels).copied().collect();
    let mut only_th: Vec<&str> = th_labels.difference(&sim_labels).copied().collect();
    only_sim.sort_unstable();
    only_th.sort_unstable();
    if !only_sim.is_empty() {
        problems.push(format!("only in simulation: {}", only_sim.join(", ")));
    }
    if !only_th.is_empty() {
        problems.push(format!("only in theory: {}", only_th.join(", ")));
    }

    let m = summary.replicates as f64;
    let mut rows = Vec::new();
    let mut missing = Vec::new();
    let n = summary.stats.len();
    for p in 0..n {
        for q in p..n {
            let (sp, sq) = (&summary.stats[p], &summary.stats[q]);
            if sp.kind != sq.kind {
                continue;
            }
            let row = theory
                .iter()
                .find(|r| (r.p == sp.label && r.q == sq.label) || (r.p == sq.label && r.q == sp.label));
            let Some(row) = row else {
                missing.push(format!("({}, {})", sp.label, sq.label));
                continue;
            };
            let target = match sp.kind {
                StatisticKind::Trace => row.cov_series,
                StatisticKind::Chebyshev => row.cheb_cov,
            };
            let se = summary.covariance_se[p][q].unwrap_or(f64::NAN);
            rows.push(z_score(Moment::Covariance, &sp.label, &sq.label, summary.covariance[p][q], target, se, threshold));
        }
    }
    if !missing.is_empty() {
        problems.push(format!("pairs missing from theory: {}", missing.join(" ")));
    }
    if !problems.is_empty() {
        return Err(Error::LabelMismatch(problems.join("; ")));
    }
    for (p, s) in summary.stats.iter().enumerate() {
        if let Some(g1) = summary.skewness[p] {
            rows.push(z_score(Moment::Skewness, &s.label, &s.label, g1, 0.0, (6.0 / m).sqrt(), threshold));
        }
        if let Some(g2) = summary.excess_kurtosis[p] {
            rows.push(z_score(Moment::ExcessKurtosis, &s.label, &s.label, g2, 0.0, (24.0 / m).sqrt(), threshold));
        }
    }
    Ok(Comparison { threshold, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::EntryKey;

    fn full_set(label: &str, power: u32) -> StatisticDecl {
        StatisticDecl {
            label: label.into(),
            set: SetRule::Fraction(PrefixFraction { sequence: "id".into(), fraction: 1.0 }),
            power,
            kind: StatisticKind::Trace,
        }
    }

    fn spec(stats: Vec<StatisticDecl>, scale: u64, replicates: u64) -> ExperimentSpec {
        ExperimentSpec {
            ensemble: EnsembleSpec::goe(),
            family: vec![
                SequenceDecl { label: "id".into(), sequence: SequenceKind::Identity },
                SequenceDecl { label: "shift".into(), sequence: SequenceKind::Arithmetic { stride: 1, offset: 2 } },
            ],
            statistics: stats,
            scale,
            replicates,
            seed: 11,
        }
    }

    #[test]
    fn single_replicate_gives_one_row() {
        let raw = run(&spec(vec![full_set("a", 1), full_set("b", 2)], 5, 1), Some(1)).unwrap();
        assert_eq!(raw.rows.len(), 1);
        assert_eq!(raw.rows[0].len(), 2);
        assert!(summarize(&raw).is_err());
    }

    #[test]
    fn trace_matches_direct_summation() {
        let s = spec(vec![full_set("a", 1)], 6, 3);
        let raw = run(&s, Some(2)).unwrap();
        for r in 0..3 {
            let mut direct = CompensatedSum::default();
            for i in 1..=6 {
                direct.add(s.ensemble.entry(EntryKey::new(11, r, i, i)).re);
            }
            assert_eq!(raw.rows[r as usize][0], direct.value());
        }
    }

    #[test]
    fn sets_are_deduplicated_and_overlaps_counted() {
        let mut stats = vec![full_set("a", 1), full_set("b", 2)];
        stats.push(StatisticDecl {
            label: "c".into(),
            set: SetRule::Length(PrefixLength { sequence: "shift".into(), length: 4 }),
            power: 2,
            kind: StatisticKind::Trace,
        });
        let r = spec(stats, 4, 2).resolve().unwrap();
        assert_eq!(r.sets, vec![vec![1, 2, 3, 4], vec![3, 4, 5, 6]]);
        assert_eq!(r.overlaps()[0][2], 2);
        assert_eq!(r.overlaps()[1][1], 4);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(spec(vec![full_set("a", 1), full_set("a", 2)], 4, 2).resolve().is_err());
        assert!(spec(vec![full_set("a", 0)], 4, 2).resolve().is_err());
        assert!(spec(vec![], 0, 2).resolve().is_err());
        let mut bad = spec(vec![], 4, 2);
        bad.ensemble.offdiag = crate::ensembles::EntryDistribution::GaussianReal { variance: 2.0 };
        assert!(bad.resolve().is_err());
        let json = r#"{"sequence": "id", "fraction": 1.0, "length": 3}"#;
        assert!(serde_json::from_str::<SetRule>(json).is_err());
    }

    fn synthetic(columns: Vec<Vec<f64>>) -> RawTable {
        let n = columns.len();
        let m = columns[0].len();
        RawTable {
            stats: (0..n)
                .map(|p| StatMeta { label: format!("s{p}"), kind: StatisticKind::Chebyshev, power: 1, set_size: 1 })
                .collect(),
            scale: 1,
            seed: 0,
            beta: Beta::Real,
            overlaps: vec![vec![1; n]; n],
            rows: (0..m).map(|r| columns.iter().map(|c| c[r]).collect()).collect(),
        }
    }

    #[test]
    fn constant_column_flags_undefined_shape() {
        let s = summarize(&synthetic(vec![vec![3.0; 10]])).unwrap();
        assert_eq!(s.variance[0], 0.0);
        assert_eq!(s.skewness[0], None);
        assert_eq!(s.excess_kurtosis[0], None);
    }

    #[test]
    fn perfectly_correlated_columns() {
        let a: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let b: Vec<f64> = a.iter().map(|x| 2.0 * x + 1.0).collect();
        let s = summarize(&synthetic(vec![a, b])).unwrap();
        assert!((s.correlation(0, 1) - 1.0).abs() < 1e-12);
        assert_eq!(s.covariance[0][1], s.covariance[1][0]);
    }

    #[test]
    fn jackknife_matches_direct_leave_one_out() {
        let d: Vec<f64> = (0..9).map(|i| ((i * 7) % 5) as f64 - 1.3).collect();
        let e: Vec<f64> = (0..9).map(|i| ((i * 3) % 4) as f64 * 0.5).collect();
        let cov = |x: &[f64], y: &[f64]| {
            let n = x.len() as f64;
            let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
            x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0)
        };
        let n = d.len();
        let loo: Vec<f64> = (0..n)
            .map(|i| {
                let x: Vec<f64> = (0..n).filter(|&k| k != i).map(|k| d[k]).collect();
                let y: Vec<f64> = (0..n).filter(|&k| k != i).map(|k| e[k]).collect();
                cov(&x, &y)
            })
            .collect();
        let mean = loo.iter().sum::<f64>() / n as f64;
        let direct = ((n as f64 - 1.0) / n as f64 * loo.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt();
        let md = d.iter().sum::<f64>() / n as f64;
        let me = e.iter().sum::<f64>() / n as f64;
        let dc: Vec<f64> = d.iter().map(|x| x - md).collect();
        let ec: Vec<f64> = e.iter().map(|x| x - me).collect();
        let fast = jackknife_covariance_se(&dc, &ec).unwrap();
        assert!((fast - direct).abs() < 1e-12, "{fast} vs {direct}");
        assert_eq!(jackknife_covariance_se(&dc[..2], &ec[..2]), None);
    }

    #[test]
    fn compare_exact_match_and_mismatch() {
        let a: Vec<f64> = (0..40).map(|i| ((i * 13) % 7) as f64).collect();
        let s = summarize(&synthetic(vec![a])).unwrap();
        let row = TheoryRow {
            p: "s0".into(),
            q: "s0".into(),
            k_p: 1,
            k_q: 1,
            b_p: 1.0,
            b_q: 1.0,
            c_pq: 1.0,
            beta: 1,
            cov_series: 0.0,
            cov_catalan: 0.0,
            cov_contour: 0.0,
            cov_kernel: 0.0,
            cheb_cov: s.variance[0],
        };
        let c = compare(&s, std::slice::from_ref(&row), 5.0).unwrap();
        assert_eq!(c.find(Moment::Covariance, "s0", "s0").unwrap().z, 0.0);
        let far = TheoryRow { cheb_cov: s.variance[0] - 10.0 * s.covariance_se[0][0].unwrap(), ..row.clone() };
        assert!(compare(&s, &[far], 5.0).unwrap().breaches() >= 1);
        let other = TheoryRow { p: "zz".into(), q: "zz".into(), ..row };
        assert!(matches!(compare(&s, &[other], 5.0), Err(Error::LabelMismatch(_))));
        assert!(matches!(compare(&s, &[], 5.0), Err(Error::LabelMismatch(_))));
    }
}
