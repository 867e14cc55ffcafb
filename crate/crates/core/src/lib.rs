//! Grading of free-form mathematical answers.
//!
//! Two expressions are compared first by symbolic normalization and, when
//! that is inconclusive, by evaluating their difference at random distinct
//! floating-point grid points. The probability that a wrong answer slips
//! through is bounded in closed form from the grid size `M`, the number of
//! check points `m` and an assumed zero count `k`.
//!
//! ```
//! use zerocheck::{compare_answers, parse, CheckConfig, FinalVerdict};
//!
//! let real = parse("sin(x)^2").unwrap();
//! let user = parse("1 - cos(x)^2").unwrap();
//! let report = compare_answers(&real, &user, &CheckConfig::default()).unwrap();
//! assert_eq!(report.verdict, FinalVerdict::CorrectWithBound);
//! assert!(report.error_bound < 1e-200);
//! ```

pub mod checker;
pub mod eval;
pub mod exec;
pub mod expr;
pub mod figures;
pub mod grid;
pub mod harness;
pub mod prob;
pub mod symbolic;

pub use checker::{
    auto_segments, compare_answers, pointwise_check, CheckConfig, CheckError, CheckReport, FinalVerdict,
    PointwiseOutcome, PointwiseResult, SampleState, SegmentPlan, Stage, Witness,
};
pub use eval::{evaluate_at, evaluate_scaled, is_zero, EvalBudget, EvalOutcome, ToleranceSpec, UndefinedReason};
pub use exec::Execution;
pub use expr::{difference, format, parse, parse_with_var, Expr, ExprError, ParseError};
pub use grid::{estimate_grid_points, GridMode, GridModel, Segment};
pub use prob::{
    error_probability, failure_probability, log_error_probability, log_failure_probability, min_points_for_target,
    ProbParams, ProbResult,
};
pub use symbolic::{normalize, symbolic_compare, Verdict};
