#![allow(dead_code)]

use subclt::gff::GridPoint;
use subclt::keyed::{open_unit, KeyedStream};
use subclt::theory::omega;

/// `n` points spread over `sheets`, drawn as `Omega(x, y)` with
/// `y in (0.1, 3)` and `|x| <= 1.9 sqrt(y)` so that `Im z >= 0.09`.
pub fn random_grid(seed: u64, grid: u64, n: u64, sheets: &[usize]) -> Vec<GridPoint> {
    let s = KeyedStream::new(seed, grid);
    (0..n)
        .map(|a| {
            let u = |k| open_unit(s.bits(a, k, 0));
            let y = 0.1 + 2.9 * u(0);
            let t = 0.95 * (2.0 * u(1) - 1.0);
            let z = omega(2.0 * y.sqrt() * t, y).unwrap();
            let sheet = sheets[((u(2) * sheets.len() as f64) as usize).min(sheets.len() - 1)];
            GridPoint { sheet, z }
        })
        .collect()
}

pub fn goe_config(seed: u64, replicates: u64) -> String {
    experiment_config(
        r#"{"beta": 1, "offdiag": {"kind": "gaussian_real", "variance": 1.0}, "diag": {"kind": "gaussian_real", "variance": 2.0}}"#,
        FULL_STATS,
        seed,
        replicates,
    )
}

pub fn gue_config(seed: u64, replicates: u64) -> String {
    experiment_config(
        r#"{"beta": 2, "offdiag": {"kind": "gaussian_complex", "component_variance": 0.5}, "diag": {"kind": "gaussian_real", "variance": 1.0}}"#,
        TRACE2_ONLY,
        seed,
        replicates,
    )
}

pub fn three_point_config(seed: u64, replicates: u64) -> String {
    experiment_config(
        r#"{"beta": 1, "offdiag": {"kind": "three_point_real", "atom": 1.7320508075688772, "weight": 0.16666666666666666}, "diag": {"kind": "rademacher_scaled", "scale": 1.4142135623730951}}"#,
        TRACE2_ONLY,
        seed,
        replicates,
    )
}

const FULL_STATS: &str = r#"[
    {"label": "t1", "set": {"sequence": "b1", "fraction": 1.0}, "power": 1},
    {"label": "t2", "set": {"sequence": "b1", "fraction": 1.0}, "power": 2},
    {"label": "u1", "set": {"sequence": "b2", "fraction": 1.0}, "power": 1},
    {"label": "u2", "set": {"sequence": "b2", "fraction": 1.0}, "power": 2},
    {"label": "c2", "set": {"sequence": "b1", "fraction": 1.0}, "power": 2, "kind": "chebyshev"},
    {"label": "c4", "set": {"sequence": "b1", "fraction": 1.0}, "power": 4, "kind": "chebyshev"},
    {"label": "d2", "set": {"sequence": "b2", "fraction": 1.0}, "power": 2, "kind": "chebyshev"}
]"#;

const TRACE2_ONLY: &str = r#"[
    {"label": "t1", "set": {"sequence": "b1", "fraction": 1.0}, "power": 1},
    {"label": "t2", "set": {"sequence": "b1", "fraction": 1.0}, "power": 2}
]"#;

fn experiment_config(ensemble: &str, stats: &str, seed: u64, replicates: u64) -> String {
    format!(
        r#"{{
  "ensemble": {ensemble},
  "family": [
    {{"label": "b1", "sequence": {{"kind": "identity"}}}},
    {{"label": "b2", "sequence": {{"kind": "arithmetic", "stride": 1, "offset": 100}}}}
  ],
  "statistics": {stats},
  "run": {{"L": 200, "replicates": {replicates}, "seed": {seed}}}
}}"#
    )
}
