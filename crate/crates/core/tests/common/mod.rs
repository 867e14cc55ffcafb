//! Expression generators shared by the integration tests.
#![allow(dead_code)]

use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;
use rand::Rng;
use zerocheck::expr::{BinOp, Constant, Decimal, Func};
use zerocheck::Expr;

const BINARY_OPS: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow];

fn decimal(v: f64) -> Expr {
    Expr::Decimal(Decimal::new(v).expect("non-negative finite"))
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        4 => Just(Expr::var("x")),
        3 => (0u64..10).prop_map(Expr::int),
        1 => prop::sample::select(vec![0.5, 0.25, 1.5, 2.75, 0.1]).prop_map(decimal),
        1 => prop_oneof![Just(Expr::Const(Constant::Pi)), Just(Expr::Const(Constant::E))],
    ]
}

/// Moderate expressions in `x`: small literals, integer powers up to 3.
pub fn arb_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expr::neg),
            (
                prop::sample::select(BINARY_OPS[..4].to_vec()),
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::binary(op, a, b)),
            (inner.clone(), 0u64..4).prop_map(|(b, n)| Expr::pow(b, Expr::int(n))),
            (prop::sample::select(Func::ALL.to_vec()), inner).prop_map(|(f, a)| Expr::call(f, a)),
        ]
    })
}

/// Any single-variable tree the grammar can express, including huge
/// literals and odd decimals; used for printing and parsing properties.
pub fn arb_any_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        Just(Expr::var("x")),
        any::<u64>().prop_map(Expr::int),
        prop::collection::vec(any::<u32>(), 1..5).prop_map(|digits| Expr::Int(num_bigint::BigUint::new(digits))),
        (0.0f64..1e30).prop_map(decimal),
        prop_oneof![Just(Expr::Const(Constant::Pi)), Just(Expr::Const(Constant::E))],
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Expr::neg),
            (prop::sample::select(BINARY_OPS.to_vec()), inner.clone(), inner.clone())
                .prop_map(|(op, a, b)| Expr::binary(op, a, b)),
            (prop::sample::select(Func::ALL.to_vec()), inner).prop_map(|(f, a)| Expr::call(f, a)),
        ]
    })
}

/// `count` expressions drawn deterministically from [`arb_expr`].
pub fn sample_exprs(count: usize) -> Vec<Expr> {
    let mut runner = TestRunner::deterministic();
    let strategy = arb_expr();
    (0..count)
        .map(|_| strategy.new_tree(&mut runner).expect("strategy never rejects").current())
        .collect()
}

/// A syntactically different tree with the same value wherever `e` is
/// defined: operands of `+`/`*` swapped, `a-b` as `a+(-b)`, `log` as `ln`,
/// neutral elements inserted.
pub fn shuffle(e: &Expr, rng: &mut impl Rng) -> Expr {
    match e {
        Expr::Binary(op, a, b) => {
            let (a, b) = (shuffle(a, rng), shuffle(b, rng));
            match op {
                BinOp::Add | BinOp::Mul if rng.gen_bool(0.5) => Expr::binary(*op, b, a),
                BinOp::Sub if rng.gen_bool(0.5) => Expr::add(a, Expr::neg(b)),
                _ => Expr::binary(*op, a, b),
            }
        }
        Expr::Neg(a) => {
            let a = shuffle(a, rng);
            if rng.gen_bool(0.5) {
                Expr::mul(Expr::neg(Expr::int(1)), a)
            } else {
                Expr::neg(a)
            }
        }
        Expr::Call(f, a) => {
            let f = match f {
                Func::Log if rng.gen_bool(0.5) => Func::Ln,
                Func::Ln if rng.gen_bool(0.5) => Func::Log,
                other => *other,
            };
            Expr::call(f, shuffle(a, rng))
        }
        leaf => match rng.gen_range(0..4) {
            0 => Expr::mul(leaf.clone(), Expr::int(1)),
            1 => Expr::add(Expr::int(0), leaf.clone()),
            _ => leaf.clone(),
        },
    }
}
