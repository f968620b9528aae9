//! Generators shared by the property and acceptance tests.

#![allow(dead_code)]

use issparabolic::exprlang::{BinOp, Expression, Func, Var};
use proptest::prelude::*;
use proptest::sample::select;

pub const VARS: [Var; 3] = [Var::R, Var::T, Var::U];
pub const OPS: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow];

fn literal() -> impl Strategy<Value = f64> {
    prop_oneof![(0u32..100).prop_map(f64::from), 0.0f64..1e3, 1e-9f64..1e-3]
}

/// Arbitrary trees over every operator and function. Literals are
/// non-negative: negation is always an explicit node.
pub fn any_expression() -> impl Strategy<Value = Expression> {
    let leaf = prop_oneof![literal().prop_map(Expression::num), select(VARS.to_vec()).prop_map(Expression::var)];
    leaf.prop_recursive(6, 64, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expression::Neg(Box::new(e))),
            (select(OPS.to_vec()), inner.clone(), inner.clone()).prop_map(|(op, l, r)| Expression::binary(op, l, r)),
            (select(Func::ALL.to_vec()), inner).prop_map(|(f, a)| Expression::call(f, a)),
        ]
    })
}

fn one_plus_square(e: Expression) -> Expression {
    Expression::binary(BinOp::Add, Expression::num(1.0), Expression::binary(BinOp::Pow, e, Expression::num(2.0)))
}

/// Trees that are smooth and finite on all of `ℝ³` (bounded depth keeps
/// them moderate on `[-1, 1]³`).
pub fn smooth_expression() -> impl Strategy<Value = Expression> {
    let leaf = prop_oneof![(0.1f64..3.0).prop_map(Expression::num), select(VARS.to_vec()).prop_map(Expression::var)];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expression::Neg(Box::new(e))),
            (select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul]), inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| Expression::binary(op, l, r)),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Expression::binary(BinOp::Div, l, one_plus_square(r))),
            (inner.clone(), 2u8..=3).prop_map(|(l, k)| Expression::binary(BinOp::Pow, l, Expression::num(k.into()))),
            (select(vec![Func::Sin, Func::Cos, Func::Tanh]), inner.clone()).prop_map(|(f, a)| Expression::call(f, a)),
            inner.clone().prop_map(|e| Expression::call(Func::Exp, Expression::call(Func::Tanh, e))),
            inner.clone().prop_map(|e| Expression::call(Func::Ln, one_plus_square(e))),
            inner.prop_map(|e| Expression::call(Func::Sqrt, one_plus_square(e))),
        ]
    })
}

/// Fourth-order central difference of `expr` in `var` at `(r, t, u)`.
pub fn finite_difference(expr: &Expression, var: Var, point: [f64; 3], h: f64) -> f64 {
    let at = |delta: f64| {
        let mut p = point;
        let idx = VARS.iter().position(|v| *v == var).unwrap();
        p[idx] += delta;
        expr.eval_rtu(p[0], p[1], p[2]).unwrap()
    };
    (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h)
}

/// Relative derivative error, measured against `max(|exact|, 1)`.
pub fn derivative_error(expr: &Expression, var: Var, point: [f64; 3]) -> f64 {
    let exact = expr.derivative(var).eval_rtu(point[0], point[1], point[2]).unwrap();
    let fd = finite_difference(expr, var, point, 1e-3);
    (exact - fd).abs() / exact.abs().max(1.0)
}
