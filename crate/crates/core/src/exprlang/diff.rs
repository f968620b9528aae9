//! Symbolic differentiation with light constant folding.

use super::{BinOp, Expression, Func, Var};

impl Expression {
    /// Exact derivative with respect to `var`.
    pub fn derivative(&self, var: Var) -> Expression {
        use Expression as E;
        match self {
            E::Num(_) => E::Num(0.0),
            E::Var(v) => E::Num(if *v == var { 1.0 } else { 0.0 }),
            E::Neg(e) => neg(e.derivative(var)),
            E::Binary(op, l, r) => {
                let (l, r) = (l.as_ref(), r.as_ref());
                match op {
                    BinOp::Add => add(l.derivative(var), r.derivative(var)),
                    BinOp::Sub => sub(l.derivative(var), r.derivative(var)),
                    BinOp::Mul => add(mul(l.derivative(var), r.clone()), mul(l.clone(), r.derivative(var))),
                    BinOp::Div => {
                        // (l' r - l r') / r^2
                        let num = sub(mul(l.derivative(var), r.clone()), mul(l.clone(), r.derivative(var)));
                        div(num, pow(r.clone(), E::Num(2.0)))
                    }
                    BinOp::Pow => pow_derivative(l, r, var),
                }
            }
            E::Call(func, arg) => {
                let inner = arg.derivative(var);
                if inner.is_zero_literal() {
                    return E::Num(0.0);
                }
                let a = arg.as_ref().clone();
                let outer = match func {
                    Func::Sin => E::call(Func::Cos, a),
                    Func::Cos => neg(E::call(Func::Sin, a)),
                    Func::Exp => E::call(Func::Exp, a),
                    Func::Ln => return div(inner, a),
                    Func::Abs => E::call(Func::Sign, a),
                    Func::Sqrt => return div(inner, mul(E::Num(2.0), E::call(Func::Sqrt, a))),
                    Func::Tanh => sub(E::Num(1.0), pow(E::call(Func::Tanh, a), E::Num(2.0))),
                    Func::Sign => return E::Num(0.0),
                };
                mul(outer, inner)
            }
        }
    }
}

fn pow_derivative(base: &Expression, exponent: &Expression, var: Var) -> Expression {
    let base_dep = base.depends_on(var);
    let exp_dep = exponent.depends_on(var);
    match (base_dep, exp_dep) {
        (false, false) => Expression::Num(0.0),
        // g * f^(g-1) * f'
        (true, false) => mul(
            mul(exponent.clone(), pow(base.clone(), sub(exponent.clone(), Expression::Num(1.0)))),
            base.derivative(var),
        ),
        // f^g * ln(f) * g'
        (false, true) => mul(
            mul(pow(base.clone(), exponent.clone()), Expression::call(Func::Ln, base.clone())),
            exponent.derivative(var),
        ),
        // f^g * (g' ln f + g f' / f)
        (true, true) => mul(
            pow(base.clone(), exponent.clone()),
            add(
                mul(exponent.derivative(var), Expression::call(Func::Ln, base.clone())),
                div(mul(exponent.clone(), base.derivative(var)), base.clone()),
            ),
        ),
    }
}

fn literal(e: &Expression) -> Option<f64> {
    match e {
        Expression::Num(v) => Some(*v),
        _ => None,
    }
}

fn fold(op: BinOp, a: f64, b: f64) -> Option<f64> {
    let v = match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div if b != 0.0 => a / b,
        BinOp::Pow if a > 0.0 || b.fract() == 0.0 && a != 0.0 => a.powf(b),
        _ => return None,
    };
    v.is_finite().then_some(v)
}

fn binary(op: BinOp, l: Expression, r: Expression) -> Expression {
    if let (Some(a), Some(b)) = (literal(&l), literal(&r)) {
        if let Some(v) = fold(op, a, b) {
            return Expression::Num(v);
        }
    }
    Expression::binary(op, l, r)
}

fn neg(e: Expression) -> Expression {
    match e {
        Expression::Num(v) => Expression::Num(-v),
        Expression::Neg(inner) => *inner,
        other => Expression::Neg(Box::new(other)),
    }
}

fn add(l: Expression, r: Expression) -> Expression {
    match (literal(&l), literal(&r)) {
        (Some(0.0), _) => r,
        (_, Some(0.0)) => l,
        _ => binary(BinOp::Add, l, r),
    }
}

fn sub(l: Expression, r: Expression) -> Expression {
    match (literal(&l), literal(&r)) {
        (_, Some(0.0)) => l,
        (Some(0.0), None) => neg(r),
        _ => binary(BinOp::Sub, l, r),
    }
}

fn mul(l: Expression, r: Expression) -> Expression {
    match (literal(&l), literal(&r)) {
        (Some(0.0), _) | (_, Some(0.0)) => Expression::Num(0.0),
        (Some(1.0), _) => r,
        (_, Some(1.0)) => l,
        (Some(-1.0), _) => neg(r),
        (_, Some(-1.0)) => neg(l),
        _ => binary(BinOp::Mul, l, r),
    }
}

fn div(l: Expression, r: Expression) -> Expression {
    match (literal(&l), literal(&r)) {
        (Some(0.0), _) => Expression::Num(0.0),
        (_, Some(1.0)) => l,
        _ => binary(BinOp::Div, l, r),
    }
}

fn pow(base: Expression, exponent: Expression) -> Expression {
    match literal(&exponent) {
        Some(0.0) => Expression::Num(1.0),
        Some(1.0) => base,
        _ => binary(BinOp::Pow, base, exponent),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::Bindings;

    fn d_at(s: &str, var: Var, b: Bindings) -> f64 {
        Expression::parse(s).unwrap().derivative(var).evaluate(&b).unwrap()
    }

    #[test]
    fn polynomial() {
        let b = Bindings::new().with(Var::U, 1.0);
        assert_eq!(d_at("u + u^3", Var::U, b), 4.0);
    }

    #[test]
    fn superlinear_at_origin() {
        // ln(1+u²) + 2u²/(1+u²) vanishes at u = 0
        let b = Bindings::new().with(Var::U, 0.0);
        assert_eq!(d_at("u*ln(1+u^2)", Var::U, b), 0.0);
        let b = Bindings::new().with(Var::U, 1.0);
        let expected = 2f64.ln() + 1.0;
        assert!((d_at("u*ln(1+u^2)", Var::U, b) - expected).abs() < 1e-15);
    }

    #[test]
    fn independent_variable_folds_to_zero() {
        let d = Expression::parse("t").unwrap().derivative(Var::R);
        assert_eq!(d, Expression::Num(0.0));
        let d = Expression::parse("sin(t) * exp(t)").unwrap().derivative(Var::U);
        assert_eq!(d, Expression::Num(0.0));
    }

    #[test]
    fn function_rules() {
        let at = |s: &str, u: f64| d_at(s, Var::U, Bindings::new().with(Var::U, u));
        assert!((at("sin(u)", 0.3) - 0.3f64.cos()).abs() < 1e-15);
        assert!((at("cos(u)", 0.3) + 0.3f64.sin()).abs() < 1e-15);
        assert!((at("exp(2*u)", 0.3) - 2.0 * 0.6f64.exp()).abs() < 1e-14);
        assert!((at("ln(u)", 0.5) - 2.0).abs() < 1e-15);
        assert!((at("sqrt(u)", 4.0) - 0.25).abs() < 1e-15);
        assert!((at("tanh(u)", 0.0) - 1.0).abs() < 1e-15);
        assert_eq!(at("abs(u)", -3.0), -1.0);
        assert!((at("2^u", 1.0) - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((at("u^u", 1.0) - 1.0).abs() < 1e-15);
        assert!((at("1/u", 2.0) + 0.25).abs() < 1e-15);
    }

    #[test]
    fn printed_derivative_reparses() {
        let d = Expression::parse("u*ln(1+u^2) + abs(u)^2.5 / (1 + u^2)").unwrap().derivative(Var::U);
        let back = Expression::parse(&d.to_string()).unwrap();
        let b = Bindings::new().with(Var::U, 0.7);
        assert!((back.evaluate(&b).unwrap() - d.evaluate(&b).unwrap()).abs() < 1e-14);
    }
}
