//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input, 2 a comparison breached its
//! threshold, 3 a numerical contract failed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ensembles::EnsembleSpec;
use crate::error::{Error, Result};
use crate::gff::{build_covariance, GridPoint, PsdReport, SheetGrid, DEFAULT_DIAGONAL_RADIUS, DEFAULT_PSD_TOL};
use crate::indexing::GoodFamily;
use crate::montecarlo::{
    self, compare, summarize, theory_table, worker_count, Comparison, Densities, ExperimentSpec, RawTable,
    SequenceDecl, StatSummary, StatisticDecl, TheoryRow, DEFAULT_Z_THRESHOLD,
};
use crate::theory::{gff_kernel, DEFAULT_NODES};

#[derive(Debug, Parser)]
#[command(name = "subclt", version, about = "Trace fluctuations of overlapping Wigner submatrices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Default)]
pub struct Common {
    /// JSON configuration file
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (standard output when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Nodes per angle for the quadrature forms
    #[arg(long, global = true)]
    pub quad_nodes: Option<usize>,
    /// Theory: cross-form agreement bound. gff: relative pivot tolerance.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Limit covariances for every pair of configured statistics (CSV)
    Theory {
        /// Use limiting densities and the family's overlap profile instead
        /// of the exact ratios at the configured L
        #[arg(long)]
        limit: bool,
    },
    /// Run the Monte Carlo experiment (JSON report)
    Simulate {
        #[arg(long)]
        replicates: Option<u64>,
        /// Per-replicate raw traces (CSV)
        #[arg(long)]
        dump_raw: Option<PathBuf>,
    },
    /// z-scores of a simulation report against a theory table (CSV)
    Compare {
        #[arg(long)]
        theory: PathBuf,
        #[arg(long)]
        sim: PathBuf,
        #[arg(long, default_value_t = DEFAULT_Z_THRESHOLD)]
        threshold: f64,
    },
    /// Kernel values for all pairs of points (CSV)
    Kernel {
        /// JSON list of {sheet, re, im}
        #[arg(long)]
        points: PathBuf,
    },
    /// Field covariance on a grid, positivity report and samples (CSV)
    Gff {
        /// JSON list of {sheet, re, im}
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long)]
        samples_out: Option<PathBuf>,
        /// Circle radius for the diagonal entries
        #[arg(long)]
        radius: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    #[serde(rename = "L")]
    pub scale: u64,
    pub replicates: u64,
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct QuadratureBlock {
    #[serde(default)]
    pub nodes: Option<usize>,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FieldBlock {
    #[serde(default)]
    pub diagonal_radius: Option<f64>,
}

/// Whole configuration file. Each subcommand requires only its blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub ensemble: Option<EnsembleSpec>,
    #[serde(default)]
    pub family: Option<Vec<SequenceDecl>>,
    #[serde(default)]
    pub statistics: Option<Vec<StatisticDecl>>,
    #[serde(default)]
    pub run: Option<RunBlock>,
    #[serde(default)]
    pub quadrature: Option<QuadratureBlock>,
    #[serde(default)]
    pub field: Option<FieldBlock>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }

    fn need<'a, T>(block: &'a Option<T>, name: &str) -> Result<&'a T> {
        block.as_ref().ok_or_else(|| Error::Config(format!("config is missing the `{name}` block")))
    }

    pub fn experiment(&self) -> Result<ExperimentSpec> {
        let run = Self::need(&self.run, "run")?;
        Ok(ExperimentSpec {
            ensemble: *Self::need(&self.ensemble, "ensemble")?,
            family: self.family.clone().unwrap_or_default(),
            statistics: self.statistics.clone().unwrap_or_default(),
            scale: run.scale,
            replicates: run.replicates,
            seed: run.seed,
        })
    }

    /// The configured family, or the four-sequence example when absent.
    pub fn family(&self) -> Result<GoodFamily> {
        let scale = self.run.as_ref().map_or(1000, |r| r.scale);
        match &self.family {
            Some(decls) => GoodFamily::new(scale, decls.iter().map(|d| (d.label.clone(), d.sequence.clone())).collect()),
            None => Ok(GoodFamily::four_sequence_example(scale)),
        }
    }
}

/// Point on one sheet; the sheet is a label or a zero-based position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointDecl {
    pub sheet: SheetRef,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SheetRef {
    Index(usize),
    Label(String),
}

impl SheetRef {
    fn resolve(&self, family: &GoodFamily) -> Result<usize> {
        match self {
            SheetRef::Index(i) if *i < family.len() => Ok(*i),
            SheetRef::Index(i) => Err(Error::ParameterDomain(format!("sheet {i} out of range"))),
            SheetRef::Label(l) => family.index_of(l),
        }
    }
}

fn load_points(path: &Path, family: &GoodFamily) -> Result<Vec<GridPoint>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read points {}: {e}", path.display())))?;
    let decls: Vec<PointDecl> =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("points {}: {e}", path.display())))?;
    decls
        .iter()
        .map(|d| Ok(GridPoint { sheet: d.sheet.resolve(family)?, z: Complex64::new(d.re, d.im) }))
        .collect()
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

pub const THEORY_HEADER: [&str; 13] = [
    "p", "q", "k_p", "k_q", "b_p", "b_q", "c_pq", "beta", "cov_series", "cov_catalan", "cov_contour", "cov_kernel",
    "cheb_cov",
];

pub fn write_theory_csv<W: Write>(w: W, rows: &[TheoryRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(THEORY_HEADER)?;
    for r in rows {
        out.write_record([
            r.p.clone(),
            r.q.clone(),
            r.k_p.to_string(),
            r.k_q.to_string(),
            fmt_f64(r.b_p),
            fmt_f64(r.b_q),
            fmt_f64(r.c_pq),
            r.beta.to_string(),
            fmt_f64(r.cov_series),
            fmt_f64(r.cov_catalan),
            fmt_f64(r.cov_contour),
            fmt_f64(r.cov_kernel),
            fmt_f64(r.cheb_cov),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_theory_csv(path: &Path) -> Result<Vec<TheoryRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != THEORY_HEADER {
        return Err(Error::Config(format!("{}: unexpected theory header {header:?}", path.display())));
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Simulation report: summary plus provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationReport {
    pub version: String,
    pub spec_hash: String,
    pub seed: u64,
    pub summary: StatSummary,
}

/// SHA-256 of the experiment's canonical JSON.
pub fn spec_hash(spec: &ExperimentSpec) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(spec)?)))
}

pub fn write_raw_csv<W: Write>(w: W, raw: &RawTable) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["replicate", "p", "k", "trace"])?;
    for (r, row) in raw.rows.iter().enumerate() {
        for (meta, v) in raw.stats.iter().zip(row) {
            out.write_record([r.to_string(), meta.label.clone(), meta.power.to_string(), fmt_f64(*v)])?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_comparison_csv<W: Write>(w: W, cmp: &Comparison) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["moment", "p", "q", "empirical", "theory", "se", "z", "breach"])?;
    for r in &cmp.rows {
        let moment = serde_json::to_value(r.moment)?;
        out.write_record([
            moment.as_str().unwrap_or_default().to_string(),
            r.p.clone(),
            r.q.clone(),
            fmt_f64(r.empirical),
            fmt_f64(r.theory),
            fmt_f64(r.se),
            fmt_f64(r.z),
            r.breach.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

fn psd_comment(r: &PsdReport) -> String {
    format!(
        "# psd passed={} min_pivot={} max_diagonal={} relative_margin={} tolerance={} clipped={}\n",
        r.passed,
        fmt_f64(r.min_pivot),
        fmt_f64(r.max_diagonal),
        fmt_f64(r.relative_margin),
        fmt_f64(r.tolerance),
        r.clipped
    )
}

fn write_matrix<W: Write>(mut w: W, comment: &str, rows: impl Iterator<Item = Vec<f64>>, ncols: usize) -> Result<()> {
    w.write_all(comment.as_bytes())?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record((0..ncols).map(|c| format!("x{c}")))?;
    for row in rows {
        out.write_record(row.iter().map(|&v| fmt_f64(v)))?;
    }
    out.flush()?;
    Ok(())
}

fn config_or_default(common: &Common) -> Result<Config> {
    match &common.config {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn require_config(common: &Common) -> Result<Config> {
    match &common.config {
        Some(p) => Config::load(p),
        None => Err(Error::Config("--config is required".into())),
    }
}

fn nodes(common: &Common, cfg: &Config) -> usize {
    common
        .quad_nodes
        .or(cfg.quadrature.as_ref().and_then(|q| q.nodes))
        .unwrap_or(DEFAULT_NODES)
}

fn tolerance(common: &Common, cfg: &Config) -> Option<f64> {
    common.tolerance.or(cfg.quadrature.as_ref().and_then(|q| q.tolerance))
}

pub fn cmd_theory(common: &Common, limit: bool) -> Result<Vec<TheoryRow>> {
    let cfg = require_config(common)?;
    let resolved = cfg.experiment()?.resolve()?;
    let densities = if limit { Densities::Limit } else { Densities::FiniteScale };
    let rows = theory_table(&resolved, densities, nodes(common, &cfg))?;
    if let Some(tol) = tolerance(common, &cfg) {
        for r in &rows {
            let scale = r.cov_series.abs().max(1.0);
            for (name, v) in [("catalan", r.cov_catalan), ("contour", r.cov_contour), ("kernel", r.cov_kernel)] {
                if (v - r.cov_series).abs() > tol * scale {
                    return Err(Error::ContractViolation(format!(
                        "({}, {}): {name} form {v} differs from series {} beyond {tol}",
                        r.p, r.q, r.cov_series
                    )));
                }
            }
        }
    }
    write_theory_csv(sink(&common.out)?, &rows)?;
    Ok(rows)
}

pub fn cmd_simulate(common: &Common, replicates: Option<u64>, dump_raw: &Option<PathBuf>) -> Result<SimulationReport> {
    let cfg = require_config(common)?;
    let mut spec = cfg.experiment()?;
    if let Some(m) = replicates {
        spec.replicates = m;
    }
    if let Some(s) = common.seed {
        spec.seed = s;
    }
    let threads = common.threads.or(cfg.run.as_ref().and_then(|r| r.threads));
    let raw = montecarlo::run(&spec, Some(worker_count(threads)))?;
    if let Some(path) = dump_raw {
        write_raw_csv(std::io::BufWriter::new(fs::File::create(path)?), &raw)?;
    }
    let report = SimulationReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        spec_hash: spec_hash(&spec)?,
        seed: spec.seed,
        summary: summarize(&raw)?,
    };
    let mut w = sink(&common.out)?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(report)
}

pub fn cmd_compare(common: &Common, theory: &Path, sim: &Path, threshold: f64) -> Result<Comparison> {
    let rows = read_theory_csv(theory)?;
    let text = fs::read_to_string(sim).map_err(|e| Error::Config(format!("cannot read {}: {e}", sim.display())))?;
    let report: SimulationReport = serde_json::from_str(&text)?;
    let cmp = compare(&report.summary, &rows, threshold)?;
    write_comparison_csv(sink(&common.out)?, &cmp)?;
    Ok(cmp)
}

pub fn cmd_kernel(common: &Common, points: &Path) -> Result<Vec<f64>> {
    let cfg = config_or_default(common)?;
    let family = cfg.family()?;
    let pts = load_points(points, &family)?;
    let mut out = csv::Writer::from_writer(sink(&common.out)?);
    out.write_record(["a", "b", "sheet_a", "re_a", "im_a", "sheet_b", "re_b", "im_b", "kernel"])?;
    let mut values = Vec::new();
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            let (p, q) = (pts[a], pts[b]);
            let v = gff_kernel(&family, p.sheet, p.z, q.sheet, q.z)?;
            values.push(v);
            out.write_record([
                a.to_string(),
                b.to_string(),
                family.labels()[p.sheet].clone(),
                fmt_f64(p.z.re),
                fmt_f64(p.z.im),
                family.labels()[q.sheet].clone(),
                fmt_f64(q.z.re),
                fmt_f64(q.z.im),
                fmt_f64(v),
            ])?;
        }
    }
    out.flush()?;
    Ok(values)
}

pub fn cmd_gff(
    common: &Common,
    grid: &Path,
    samples: usize,
    samples_out: &Option<PathBuf>,
    radius: Option<f64>,
) -> Result<PsdReport> {
    let cfg = config_or_default(common)?;
    let family = cfg.family()?;
    let pts = load_points(grid, &family)?;
    let grid = SheetGrid::new(family, pts)?;
    let radius = radius
        .or(cfg.field.as_ref().and_then(|f| f.diagonal_radius))
        .unwrap_or(DEFAULT_DIAGONAL_RADIUS);
    let tol = common.tolerance.unwrap_or(DEFAULT_PSD_TOL);
    let threads = common.threads.or(cfg.run.as_ref().and_then(|r| r.threads));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(threads))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let mut cov = pool.install(|| build_covariance(&grid, radius))?;
    let report = cov.psd_check(tol)?;
    let comment = psd_comment(&report);
    let n = cov.dim();
    write_matrix(sink(&common.out)?, &comment, cov.matrix.rows().into_iter().map(|r| r.to_vec()), n)?;
    if !report.passed {
        return Err(Error::ContractViolation(format!(
            "covariance is not positive semidefinite: relative margin {:e}",
            report.relative_margin
        )));
    }
    if samples > 0 || samples_out.is_some() {
        let seed = common.seed.or(cfg.run.as_ref().map(|r| r.seed)).unwrap_or(0);
        let draws = pool.install(|| cov.sample_field(samples, seed))?;
        let path = samples_out.as_ref().ok_or_else(|| Error::Config("--samples needs --samples-out".into()))?;
        let w = std::io::BufWriter::new(fs::File::create(path)?);
        write_matrix(w, &comment, draws.rows().into_iter().map(|r| r.to_vec()), n)?;
    }
    Ok(report)
}

/// Parse arguments, run, and return the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let c = &cli.common;
    let outcome = match &cli.command {
        Command::Theory { limit } => cmd_theory(c, *limit).map(|_| 0),
        Command::Simulate { replicates, dump_raw } => cmd_simulate(c, *replicates, dump_raw).map(|_| 0),
        Command::Compare { theory, sim, threshold } => cmd_compare(c, theory, sim, *threshold).map(|cmp| {
            let n = cmp.breaches();
            if n > 0 {
                eprintln!("{n} z-score(s) exceed {threshold}");
                2
            } else {
                0
            }
        }),
        Command::Kernel { points } => cmd_kernel(c, points).map(|_| 0),
        Command::Gff { grid, samples, samples_out, radius } => {
            cmd_gff(c, grid, *samples, samples_out, *radius).map(|_| 0)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
