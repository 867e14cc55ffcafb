//! Tabulated grid sizes and log-probability curves.

use serde::Serialize;

use crate::exec::Execution;
use crate::grid::{estimate_grid_points, GridError, GridMode, Segment};
use crate::prob::{log_error_probability, ProbParams};

/// Left ends of the reference grid-size table; every row is `[A, A + 5]`.
pub const TABLE1_STARTS: [f64; 9] = [1e1, 1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8, 1e9];

/// Width shared by all rows of the reference table.
pub const TABLE1_WIDTH: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "M")]
    pub grid_points: u64,
}

pub fn table1() -> Vec<GridRow> {
    TABLE1_STARTS
        .iter()
        .map(|&a| GridRow {
            a,
            b: a + TABLE1_WIDTH,
            grid_points: Segment::new(a, a + TABLE1_WIDTH)
                .and_then(|s| estimate_grid_points(s, GridMode::RelativeEps))
                .expect("table segments are positive"),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub m: u64,
    pub k: u64,
    pub log_p: f64,
}

/// `ln P_err` on `segment` for every `m` in `checks` and `steps` values of
/// `k` spaced geometrically over `[k_from, k_to]` (rounded, deduplicated).
pub fn log_probability_curves(
    segment: Segment,
    mode: GridMode,
    checks: &[u64],
    k_from: u64,
    k_to: u64,
    steps: usize,
    execution: Execution,
) -> Result<Vec<CurvePoint>, GridError> {
    let grid_points = estimate_grid_points(segment, mode)?;
    let ks = geometric_steps(k_from, k_to, steps);
    let rows = execution.map_range(checks.len(), |i| {
        let m = checks[i];
        ks.iter()
            .map(|&k| CurvePoint {
                m,
                k,
                log_p: log_error_probability(ProbParams::new(grid_points, m, k)),
            })
            .collect::<Vec<_>>()
    });
    Ok(rows.into_iter().flatten().collect())
}

fn geometric_steps(from: u64, to: u64, steps: usize) -> Vec<u64> {
    let (from, to) = (from.max(1), to.max(from.max(1)));
    if steps <= 1 || from == to {
        return vec![from];
    }
    let ratio = (to as f64 / from as f64).ln() / (steps - 1) as f64;
    let mut ks: Vec<u64> = (0..steps)
        .map(|i| ((from as f64) * (ratio * i as f64).exp()).round() as u64)
        .map(|k| k.clamp(from, to))
        .collect();
    ks.dedup();
    ks
}
