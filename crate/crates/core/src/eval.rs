//! Budgeted binary64 evaluation of an [`Expr`] at a point.
//!
//! Failures are values: a point where the expression is undefined, overflows
//! or exhausts its budget yields [`EvalOutcome::Undefined`] and the caller
//! picks another point.

use std::time::{Duration, Instant};

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::expr::{BinOp, Expr, Func};

/// Default cooperative step budget per evaluation.
pub const DEFAULT_MAX_NODE_VISITS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalBudget {
    max_node_visits: u64,
    wall_clock_limit: Option<Duration>,
}

impl EvalBudget {
    /// `max_node_visits` is clamped to at least 1.
    pub fn new(max_node_visits: u64) -> Self {
        EvalBudget {
            max_node_visits: max_node_visits.max(1),
            wall_clock_limit: None,
        }
    }

    pub fn with_wall_clock_limit(mut self, limit: Duration) -> Self {
        self.wall_clock_limit = Some(limit);
        self
    }

    pub fn max_node_visits(&self) -> u64 {
        self.max_node_visits
    }

    pub fn wall_clock_limit(&self) -> Option<Duration> {
        self.wall_clock_limit
    }
}

impl Default for EvalBudget {
    fn default() -> Self {
        EvalBudget::new(DEFAULT_MAX_NODE_VISITS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UndefinedReason {
    DomainError,
    Overflow,
    BudgetExhausted,
}

/// Result of evaluating at one point. `Value` is always finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EvalOutcome {
    Value(f64),
    Undefined(UndefinedReason),
}

impl EvalOutcome {
    pub fn value(self) -> Option<f64> {
        match self {
            EvalOutcome::Value(v) => Some(v),
            EvalOutcome::Undefined(_) => None,
        }
    }
}

/// An outcome together with the largest subterm magnitude seen on the way.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub outcome: EvalOutcome,
    pub scale: f64,
}

/// Zero-test tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub absolute: f64,
    pub relative: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        ToleranceSpec {
            absolute: 1e-12,
            relative: 1e-9,
        }
    }
}

pub fn evaluate_at(e: &Expr, x: f64, budget: &EvalBudget) -> EvalOutcome {
    evaluate_scaled(e, x, budget).outcome
}

pub fn evaluate_scaled(e: &Expr, x: f64, budget: &EvalBudget) -> Evaluation {
    let mut walker = Walker {
        x,
        visits_left: budget.max_node_visits,
        deadline: budget.wall_clock_limit.map(|d| Instant::now() + d),
        scale: 0.0,
    };
    let outcome = match walker.eval(e) {
        Ok(v) => EvalOutcome::Value(v),
        Err(reason) => EvalOutcome::Undefined(reason),
    };
    Evaluation {
        outcome,
        scale: walker.scale,
    }
}

/// `|value| <= absolute` or `|value| <= relative * scale`.
///
/// Undefined outcomes are never zero.
pub fn is_zero(v: EvalOutcome, scale: f64, tol: &ToleranceSpec) -> bool {
    match v {
        EvalOutcome::Value(value) => {
            let magnitude = value.abs();
            magnitude <= tol.absolute || magnitude <= tol.relative * scale
        }
        EvalOutcome::Undefined(_) => false,
    }
}

struct Walker {
    x: f64,
    visits_left: u64,
    deadline: Option<Instant>,
    scale: f64,
}

type Step = Result<f64, UndefinedReason>;

impl Walker {
    fn tick(&mut self) -> Result<(), UndefinedReason> {
        if self.visits_left == 0 {
            return Err(UndefinedReason::BudgetExhausted);
        }
        self.visits_left -= 1;
        if let Some(deadline) = self.deadline {
            if Instant::now() >= deadline {
                return Err(UndefinedReason::BudgetExhausted);
            }
        }
        Ok(())
    }

    fn record(&mut self, v: f64) -> Step {
        if v.is_nan() {
            return Err(UndefinedReason::DomainError);
        }
        if v.is_infinite() {
            return Err(UndefinedReason::Overflow);
        }
        self.scale = self.scale.max(v.abs());
        Ok(v)
    }

    fn eval(&mut self, e: &Expr) -> Step {
        self.tick()?;
        let v = match e {
            Expr::Int(n) => n.to_f64().unwrap_or(f64::INFINITY),
            Expr::Decimal(d) => d.value(),
            Expr::Const(c) => c.value(),
            Expr::Var(_) => self.x,
            Expr::Neg(inner) => -self.eval(inner)?,
            Expr::Binary(op, lhs, rhs) => {
                let a = self.eval(lhs)?;
                let b = self.eval(rhs)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(UndefinedReason::DomainError);
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        if a == 0.0 && b < 0.0 {
                            return Err(UndefinedReason::DomainError);
                        }
                        a.powf(b)
                    }
                }
            }
            Expr::Call(func, arg) => {
                let a = self.eval(arg)?;
                match func {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => {
                        let t = a.tan();
                        if !t.is_finite() {
                            return Err(UndefinedReason::DomainError);
                        }
                        t
                    }
                    Func::Exp => a.exp(),
                    Func::Log | Func::Ln => {
                        if a <= 0.0 {
                            return Err(UndefinedReason::DomainError);
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(UndefinedReason::DomainError);
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                }
            }
        };
        self.record(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn eval(text: &str, x: f64) -> EvalOutcome {
        evaluate_at(&parse(text).unwrap(), x, &EvalBudget::default())
    }

    #[test]
    fn simple_values() {
        assert_eq!(eval("x - 5", 12.0), EvalOutcome::Value(7.0));
        assert_eq!(eval("2^x", 10.0), EvalOutcome::Value(1024.0));
        assert_eq!(eval("pi", 0.0), EvalOutcome::Value(std::f64::consts::PI));
    }

    #[test]
    fn domain_errors() {
        let domain = EvalOutcome::Undefined(UndefinedReason::DomainError);
        assert_eq!(eval("log(x - 15)", 12.0), domain);
        assert_eq!(eval("ln(0*x)", 12.0), domain);
        assert_eq!(eval("sqrt(-x)", 1.0), domain);
        assert_eq!(eval("1/(x-1)", 1.0), domain);
        assert_eq!(eval("(x-1)^-1", 1.0), domain);
        assert_eq!(eval("(-x)^0.5", 2.0), domain);
    }

    #[test]
    fn overflow() {
        let overflow = EvalOutcome::Undefined(UndefinedReason::Overflow);
        assert_eq!(eval("exp(x)", 1000.0), overflow);
        assert_eq!(eval(&"9".repeat(400), 0.0), overflow);
        assert_eq!(eval("x*x", 1e200), overflow);
    }

    #[test]
    fn budget_exhaustion() {
        let e = parse("x+x+x+x").unwrap();
        assert_eq!(
            evaluate_at(&e, 1.0, &EvalBudget::new(3)),
            EvalOutcome::Undefined(UndefinedReason::BudgetExhausted)
        );
        assert_eq!(evaluate_at(&e, 1.0, &EvalBudget::new(7)), EvalOutcome::Value(4.0));
        assert_eq!(EvalBudget::new(0).max_node_visits(), 1);
    }

    #[test]
    fn zero_wall_clock_limit_exhausts() {
        let e = parse("x").unwrap();
        let budget = EvalBudget::default().with_wall_clock_limit(Duration::ZERO);
        assert_eq!(
            evaluate_at(&e, 1.0, &budget),
            EvalOutcome::Undefined(UndefinedReason::BudgetExhausted)
        );
    }

    #[test]
    fn scale_tracks_largest_subterm() {
        let ev = evaluate_scaled(&parse("x*1000 - x*1000").unwrap(), 3.0, &EvalBudget::default());
        assert_eq!(ev.outcome, EvalOutcome::Value(0.0));
        assert_eq!(ev.scale, 3000.0);
    }

    #[test]
    fn zero_test() {
        let tol = ToleranceSpec::default();
        assert!(is_zero(EvalOutcome::Value(0.0), 0.0, &tol));
        assert!(is_zero(EvalOutcome::Value(3e-16), 1.0, &tol));
        assert!(!is_zero(EvalOutcome::Value(1.0), 1.0, &tol));
        assert!(!is_zero(EvalOutcome::Value(1.0), 0.0, &tol));
        assert!(!is_zero(
            EvalOutcome::Undefined(UndefinedReason::DomainError),
            1.0,
            &tol
        ));
    }

    #[test]
    fn pythagorean_residue_is_tiny_but_not_always_zero() {
        // brute check behind the 3e-16 example above
        let e = parse("sin(x)^2 + cos(x)^2 - 1").unwrap();
        let mut nonzero = 0;
        for i in 0..1000 {
            let x = 10.0 + i as f64 * 0.01;
            let ev = evaluate_scaled(&e, x, &EvalBudget::default());
            let v = ev.outcome.value().unwrap();
            assert!(v.abs() <= 4.0 * f64::EPSILON, "x={x} residue={v}");
            nonzero += usize::from(v != 0.0);
            assert!(is_zero(ev.outcome, ev.scale, &ToleranceSpec::default()));
        }
        assert!(nonzero > 0, "exact zero test would misgrade this identity");
    }
}
