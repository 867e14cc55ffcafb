//! Two-stage answer comparison.
//!
//! Stage one is [`symbolic_compare`]. When it answers `Unknown`, the
//! difference `f = real - user` is evaluated at `m` distinct, uniformly drawn
//! grid points on each configured segment. A point where `f` is not zero
//! refutes equality; undefined points are skipped without counting toward
//! `m`. Passing every segment yields a verdict with an error bound computed
//! from the assumed zero count `k` and each segment's grid size.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{evaluate_scaled, is_zero, EvalBudget, ToleranceSpec};
use crate::exec::Execution;
use crate::expr::{self, Expr, ExprError};
use crate::grid::{GridError, GridMode, GridModel, Segment};
use crate::prob::{log_error_probability, ProbParams};
use crate::symbolic::{symbolic_compare, Verdict};

/// Undefined evaluations allowed per segment, as a multiple of `m`.
pub const RESAMPLE_FACTOR: u64 = 10;

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// RNG stream reserved for placing automatic segments.
const PLACEMENT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("cannot place {count} disjoint segments of length {length} in {range}")]
    InfeasiblePacking {
        count: usize,
        length: f64,
        range: Segment,
    },
    #[error("all {0} grid points have been used")]
    GridExhausted(u64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentPlan {
    Explicit(Vec<Segment>),
    Auto {
        count: usize,
        length: f64,
        range: Segment,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckConfig {
    pub segments: SegmentPlan,
    /// Check points per segment (`m`).
    pub points: u64,
    pub tolerance: ToleranceSpec,
    pub budget: EvalBudget,
    pub seed: u64,
    /// Assumed bound `k` on zeros per segment, used only for the error bound.
    pub assumed_zeros: u64,
    pub grid_mode: GridMode,
    pub execution: Execution,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            segments: SegmentPlan::Auto {
                count: 3,
                length: 10.0,
                range: Segment::new(1.0, 100.0).expect("valid default range"),
            },
            points: 100,
            tolerance: ToleranceSpec::default(),
            budget: EvalBudget::default(),
            seed: 0x5eed,
            assumed_zeros: 1_000_000,
            grid_mode: GridMode::RelativeEps,
            execution: Execution::default(),
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws distinct grid indices uniformly from `0..M`.
#[derive(Debug, Clone)]
pub struct SampleState {
    rng: ChaCha8Rng,
    used: HashSet<u64>,
    grid_points: u64,
}

impl SampleState {
    pub fn new(seed: u64, stream: u64, grid_points: u64) -> Self {
        SampleState {
            rng: stream_rng(seed, stream),
            used: HashSet::new(),
            grid_points,
        }
    }

    pub fn used(&self) -> &HashSet<u64> {
        &self.used
    }

    /// Uniform over the indices not drawn yet; the index is marked used.
    pub fn sample_next(&mut self) -> Result<u64, CheckError> {
        let used = self.used.len() as u64;
        if used >= self.grid_points {
            return Err(CheckError::GridExhausted(self.grid_points));
        }
        let index = if used.saturating_mul(2) < self.grid_points {
            loop {
                let d = self.rng.gen_range(0..self.grid_points);
                if !self.used.contains(&d) {
                    break d;
                }
            }
        } else {
            // dense: pick the r-th free index directly (M <= 2 * |used| here)
            let r = self.rng.gen_range(0..self.grid_points - used);
            (0..self.grid_points)
                .filter(|i| !self.used.contains(i))
                .nth(r as usize)
                .expect("r is below the number of free indices")
        };
        self.used.insert(index);
        Ok(index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: f64,
    pub fx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointwiseOutcome {
    /// `m` points (or the whole grid) evaluated to zero.
    Passed,
    /// A point evaluated away from zero.
    Failed,
    /// Too many undefined points, or an empty grid.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub segment: Segment,
    /// Grid size `M` of the normalized segment.
    pub grid_points: u64,
    /// Points with a defined value; never more than `m`.
    pub points_tested: u64,
    /// Points skipped because evaluation was undefined.
    pub resampled: u64,
}

impl PointwiseOutcome {
    pub fn label(self) -> &'static str {
        match self {
            PointwiseOutcome::Passed => "passed",
            PointwiseOutcome::Failed => "failed",
            PointwiseOutcome::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseResult {
    pub outcome: PointwiseOutcome,
    pub witness: Option<Witness>,
    pub stats: SegmentStats,
}

/// Runs the pointwise check of `f` on one segment with `cfg.seed`.
pub fn pointwise_check(f: &Expr, segment: &Segment, cfg: &CheckConfig) -> Result<PointwiseResult, CheckError> {
    pointwise_check_stream(f, segment, cfg, 0)
}

fn pointwise_check_stream(
    f: &Expr,
    segment: &Segment,
    cfg: &CheckConfig,
    stream: u64,
) -> Result<PointwiseResult, CheckError> {
    if cfg.points == 0 {
        return Err(CheckError::InvalidConfig("points per segment must be at least 1".into()));
    }
    let model = GridModel::new(*segment, cfg.grid_mode)?;
    let mirrored = segment.b() <= 0.0;
    let mut stats = SegmentStats {
        segment: *segment,
        grid_points: model.points,
        points_tested: 0,
        resampled: 0,
    };
    let result = |outcome, witness, stats| PointwiseResult {
        outcome,
        witness,
        stats,
    };
    if model.points == 0 {
        return Ok(result(PointwiseOutcome::Inconclusive, None, stats));
    }
    let resample_cap = cfg.points.saturating_mul(RESAMPLE_FACTOR);
    let mut sampler = SampleState::new(cfg.seed, stream, model.points);
    while stats.points_tested < cfg.points {
        let Ok(index) = sampler.sample_next() else {
            break;
        };
        let p = model.grid_point(index)?;
        let x = if mirrored { -p } else { p };
        let ev = evaluate_scaled(f, x, &cfg.budget);
        let Some(fx) = ev.outcome.value() else {
            stats.resampled += 1;
            if stats.resampled >= resample_cap {
                return Ok(result(PointwiseOutcome::Inconclusive, None, stats));
            }
            continue;
        };
        stats.points_tested += 1;
        if !is_zero(ev.outcome, ev.scale, &cfg.tolerance) {
            return Ok(result(PointwiseOutcome::Failed, Some(Witness { x, fx }), stats));
        }
    }
    // the loop also ends when the whole grid has been used
    let outcome = if stats.points_tested > 0 {
        PointwiseOutcome::Passed
    } else {
        PointwiseOutcome::Inconclusive
    };
    Ok(result(outcome, None, stats))
}

/// `count` pairwise-disjoint segments of `length`, placed uniformly in `range`.
///
/// A single segment may fill `range` exactly; two or more need slack.
pub fn auto_segments(count: usize, length: f64, range: Segment, seed: u64) -> Result<Vec<Segment>, CheckError> {
    if count == 0 || !length.is_finite() || length <= 0.0 {
        return Err(CheckError::InvalidConfig(format!(
            "need a positive segment count and length, got {count} x {length}"
        )));
    }
    let infeasible = || CheckError::InfeasiblePacking {
        count,
        length,
        range,
    };
    let total = count as f64 * length;
    let slack = range.width() - total;
    if slack < 0.0 || (count > 1 && slack <= 0.0) {
        return Err(infeasible());
    }
    let mut rng = stream_rng(seed, PLACEMENT_STREAM);
    for _ in 0..64 {
        // gaps between segments are the spacings of `count` sorted uniforms
        let mut offsets: Vec<f64> = (0..count).map(|_| rng.gen_range(0.0..=slack)).collect();
        offsets.sort_by(f64::total_cmp);
        let placed: Result<Vec<Segment>, _> = offsets
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let a = range.a() + u + i as f64 * length;
                Segment::new(a, (a + length).min(range.b()))
            })
            .collect();
        let Ok(placed) = placed else { continue };
        if placed.windows(2).all(|w| w[0].b() < w[1].a()) {
            return Ok(placed);
        }
    }
    Err(infeasible())
}

/// Segments to test, with any segment straddling zero split in two.
pub fn resolve_segments(cfg: &CheckConfig) -> Result<Vec<Segment>, CheckError> {
    let base = match &cfg.segments {
        SegmentPlan::Explicit(list) if list.is_empty() => {
            return Err(CheckError::InvalidConfig("no segments given".into()))
        }
        SegmentPlan::Explicit(list) => list.clone(),
        SegmentPlan::Auto {
            count,
            length,
            range,
        } => auto_segments(*count, *length, *range, cfg.seed)?,
    };
    Ok(base.iter().flat_map(Segment::split_at_zero).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalVerdict {
    Correct,
    Incorrect,
    CorrectWithBound,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Symbolic,
    Pointwise,
}

impl FinalVerdict {
    pub fn label(self) -> &'static str {
        match self {
            FinalVerdict::Correct => "correct",
            FinalVerdict::Incorrect => "incorrect",
            FinalVerdict::CorrectWithBound => "correct_with_bound",
            FinalVerdict::Inconclusive => "inconclusive",
        }
    }
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::Symbolic => "symbolic",
            Stage::Pointwise => "pointwise",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentReport {
    pub outcome: PointwiseOutcome,
    pub stats: SegmentStats,
    /// Error probability of this segment alone (0 unless it passed).
    pub error_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub verdict: FinalVerdict,
    pub stage: Stage,
    pub symbolic: Verdict,
    pub segments: Vec<SegmentReport>,
    pub witness: Option<Witness>,
    /// `1 - prod(1 - P_i)` over the segments that passed.
    pub error_bound: f64,
    /// Natural log of the bound; `-inf` when it is exactly zero.
    pub log_error_bound: f64,
    pub assumed_zeros: u64,
    pub seed: u64,
}

impl CheckReport {
    /// Whether the answer is accepted. Inconclusive runs are accepted: a
    /// wrong rejection is the worse failure for a student.
    pub fn accepted(&self) -> bool {
        self.verdict != FinalVerdict::Incorrect
    }

    pub fn to_document(&self) -> ReportDocument {
        ReportDocument {
            schema_version: SCHEMA_VERSION,
            verdict: self.verdict,
            stage: self.stage,
            symbolic_verdict: self.symbolic,
            segments: self
                .segments
                .iter()
                .map(|s| SegmentDocument {
                    a: s.stats.segment.a(),
                    b: s.stats.segment.b(),
                    grid_points: s.stats.grid_points,
                    points_tested: s.stats.points_tested,
                    resampled: s.stats.resampled,
                    outcome: s.outcome,
                })
                .collect(),
            witness: self.witness,
            error_bound: self.error_bound,
            log_error_bound: self.log_error_bound.is_finite().then_some(self.log_error_bound),
            assumed_k: self.assumed_zeros,
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("report serializes")
    }
}

/// The stable JSON layout of a [`CheckReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub verdict: FinalVerdict,
    pub stage: Stage,
    pub symbolic_verdict: Verdict,
    pub segments: Vec<SegmentDocument>,
    pub witness: Option<Witness>,
    pub error_bound: f64,
    pub log_error_bound: Option<f64>,
    pub assumed_k: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentDocument {
    pub a: f64,
    pub b: f64,
    #[serde(rename = "M")]
    pub grid_points: u64,
    pub points_tested: u64,
    pub resampled: u64,
    pub outcome: PointwiseOutcome,
}

/// Combines per-segment log error probabilities into `1 - prod(1 - P_i)`
/// and its log. When the bound underflows, the log falls back to
/// `ln(sum P_i)`.
fn combine_bounds(log_probs: &[f64]) -> (f64, f64) {
    let log_survive: f64 = log_probs.iter().map(|lp| (-lp.exp()).ln_1p()).sum();
    let bound = -log_survive.exp_m1();
    if bound > 0.0 {
        return (bound, bound.ln());
    }
    let max = log_probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return (0.0, f64::NEG_INFINITY);
    }
    let sum: f64 = log_probs.iter().map(|lp| (lp - max).exp()).sum();
    (0.0, max + sum.ln())
}

fn segment_seed(seed: u64, index: usize) -> (u64, u64) {
    (seed, index as u64)
}

/// Full pipeline: symbolic stage, then pointwise checks if needed.
pub fn compare_answers(real: &Expr, user: &Expr, cfg: &CheckConfig) -> Result<CheckReport, CheckError> {
    let f = expr::difference(real, user)?;
    let segments = resolve_segments(cfg)?;
    let symbolic = symbolic_compare(real, user);
    let mut report = CheckReport {
        verdict: FinalVerdict::Correct,
        stage: Stage::Symbolic,
        symbolic,
        segments: Vec::new(),
        witness: None,
        error_bound: 0.0,
        log_error_bound: f64::NEG_INFINITY,
        assumed_zeros: cfg.assumed_zeros,
        seed: cfg.seed,
    };
    match symbolic {
        Verdict::Equal => return Ok(report),
        Verdict::NotEqual => {
            report.verdict = FinalVerdict::Incorrect;
            report.witness = symbolic_witness(&f, &segments, cfg)?;
            return Ok(report);
        }
        Verdict::Unknown => {}
    }

    report.stage = Stage::Pointwise;
    let results = cfg.execution.map_range(segments.len(), |i| {
        let (seed, stream) = segment_seed(cfg.seed, i);
        let cfg = CheckConfig {
            seed,
            ..cfg.clone()
        };
        pointwise_check_stream(&f, &segments[i], &cfg, stream)
    });
    let results: Vec<PointwiseResult> = results.into_iter().collect::<Result<_, _>>()?;

    let mut log_probs = Vec::new();
    for r in &results {
        let mut error_probability = 0.0;
        if r.outcome == PointwiseOutcome::Passed {
            let lp = log_error_probability(ProbParams::new(
                r.stats.grid_points,
                r.stats.points_tested,
                cfg.assumed_zeros,
            ));
            error_probability = lp.exp();
            log_probs.push(lp);
        }
        report.segments.push(SegmentReport {
            outcome: r.outcome,
            stats: r.stats,
            error_probability,
        });
    }

    if let Some(failed) = results.iter().find(|r| r.outcome == PointwiseOutcome::Failed) {
        report.verdict = FinalVerdict::Incorrect;
        report.witness = failed.witness;
    } else if log_probs.is_empty() {
        report.verdict = FinalVerdict::Inconclusive;
    } else {
        report.verdict = FinalVerdict::CorrectWithBound;
        (report.error_bound, report.log_error_bound) = combine_bounds(&log_probs);
    }
    Ok(report)
}

/// First definable point on the first segment, for symbolic refutations.
fn symbolic_witness(f: &Expr, segments: &[Segment], cfg: &CheckConfig) -> Result<Option<Witness>, CheckError> {
    let Some(segment) = segments.first() else {
        return Ok(None);
    };
    let model = GridModel::new(*segment, cfg.grid_mode)?;
    let mirrored = segment.b() <= 0.0;
    let mut sampler = SampleState::new(cfg.seed, 0, model.points);
    for _ in 0..cfg.points.max(1).saturating_mul(RESAMPLE_FACTOR) {
        let Ok(index) = sampler.sample_next() else { break };
        let p = model.grid_point(index)?;
        let x = if mirrored { -p } else { p };
        if let Some(fx) = evaluate_scaled(f, x, &cfg.budget).outcome.value() {
            return Ok(Some(Witness { x, fx }));
        }
    }
    Ok(None)
}
