mod common;

use common::{arb_any_expr, arb_expr, shuffle};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use zerocheck::eval::Evaluation;
use zerocheck::grid::{epsilon_for, grid_point};
use zerocheck::{
    evaluate_at, evaluate_scaled, format, normalize, parse, symbolic_compare, EvalBudget, EvalOutcome, Expr,
    GridMode, Segment, Verdict,
};

fn eval(e: &Expr, x: f64) -> Evaluation {
    evaluate_scaled(e, x, &EvalBudget::new(1_000_000))
}

/// Both defined and equal up to `rel` times the larger evaluation scale.
fn agree(a: &Evaluation, b: &Evaluation, rel: f64) -> Option<bool> {
    let (va, vb) = (a.outcome.value()?, b.outcome.value()?);
    let scale = a.scale.max(b.scale).max(va.abs()).max(vb.abs());
    Some((va - vb).abs() <= rel * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn printing_round_trips(e in arb_any_expr()) {
        let text = format(&e);
        let back = parse(&text);
        prop_assert_eq!(back.as_ref().ok(), Some(&e), "printed as {}", text);
    }

    #[test]
    fn parser_is_total(text in "[ x0-9.+*/^()a-z-]{0,24}") {
        // never panics; errors point into the input and are reproducible
        match parse(&text) {
            Ok(e) => prop_assert_eq!(parse(&format(&e)).ok(), Some(e)),
            Err(err) => {
                prop_assert!(err.offset <= text.len());
                prop_assert_eq!(parse(&text).unwrap_err().to_string(), err.to_string());
            }
        }
    }

    #[test]
    fn normalize_is_idempotent(e in arb_any_expr()) {
        let once = normalize(&e);
        prop_assert_eq!(normalize(&once), once);
    }

    #[test]
    fn normalize_preserves_value(e in arb_expr(), x in 0.1f64..5.0) {
        let n = normalize(&e);
        if let Some(ok) = agree(&eval(&e, x), &eval(&n, x), 8e-12) {
            prop_assert!(ok, "{} vs {} at {}: {:?} {:?}", format(&e), format(&n), x, eval(&e, x), eval(&n, x));
        }
    }

    #[test]
    fn symbolic_verdicts_are_sound(a in arb_expr(), b in arb_expr(), seed in any::<u64>()) {
        let shuffled = shuffle(&a, &mut ChaCha8Rng::seed_from_u64(seed));
        for (lhs, rhs) in [(&a, &b), (&a, &shuffled)] {
            match symbolic_compare(lhs, rhs) {
                Verdict::Equal => {
                    for i in 0..20 {
                        let x = 0.1 + 0.25 * i as f64;
                        if let Some(ok) = agree(&eval(lhs, x), &eval(rhs, x), 1e-9) {
                            prop_assert!(ok, "{} = {} fails at {}", format(lhs), format(rhs), x);
                        }
                    }
                }
                Verdict::NotEqual => {
                    let diff = normalize(&Expr::sub(lhs.clone(), rhs.clone()));
                    prop_assert!(diff.variables().is_empty(), "non-constant {}", format(&diff));
                    if let EvalOutcome::Value(v) = evaluate_at(&diff, 0.0, &EvalBudget::default()) {
                        prop_assert!(v != 0.0);
                    }
                }
                Verdict::Unknown => {}
            }
        }
    }

    #[test]
    fn shuffles_close_under_normalization(e in arb_expr(), seed in any::<u64>()) {
        let s = shuffle(&e, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(normalize(&s), normalize(&e), "{} vs {}", format(&e), format(&s));
    }

    #[test]
    fn evaluation_is_deterministic(e in arb_any_expr(), x in -1e3f64..1e3) {
        let budget = EvalBudget::default();
        prop_assert_eq!(evaluate_scaled(&e, x, &budget), evaluate_scaled(&e, x, &budget));
    }

    #[test]
    fn budget_is_monotone(e in arb_expr(), x in -10f64..10.0, b in 1u64..64, extra in 0u64..1000) {
        let small = evaluate_at(&e, x, &EvalBudget::new(b));
        if let EvalOutcome::Value(_) = small {
            prop_assert_eq!(evaluate_at(&e, x, &EvalBudget::new(b + extra)), small);
        }
    }

    #[test]
    fn spacing_is_monotone(x in 1e-300f64..1e300, f in 1.0f64..1e10) {
        let y = (x * f).min(f64::MAX);
        for mode in [GridMode::RelativeEps, GridMode::TrueUlp] {
            prop_assert!(epsilon_for(x, mode).unwrap() <= epsilon_for(y, mode).unwrap());
        }
    }

    #[test]
    fn grid_points_stay_ordered(a in 1e-3f64..1e6, w in 1e-6f64..1e3, i in any::<u64>()) {
        let s = Segment::new(a, a + w).unwrap();
        for mode in [GridMode::RelativeEps, GridMode::TrueUlp] {
            let m = zerocheck::estimate_grid_points(s, mode).unwrap();
            let i = i % (m - 1);
            let (p, q) = (grid_point(s, i, mode).unwrap(), grid_point(s, i + 1, mode).unwrap());
            prop_assert!(s.a() <= p && q <= s.b());
            match mode {
                GridMode::RelativeEps => prop_assert!(p <= q),
                // the spacing at B is at least the ulp anywhere in [A, B]
                GridMode::TrueUlp => prop_assert!(p < q),
            }
        }
    }
}
