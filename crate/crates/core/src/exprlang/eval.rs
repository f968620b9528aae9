use thiserror::Error;

use super::{BinOp, Expression, Func, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("variable '{0}' is not bound")]
    Unbound(Var),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Values for the variables `r`, `t`, `u`. Unset variables are unbound.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Bindings {
    pub r: Option<f64>,
    pub t: Option<f64>,
    pub u: Option<f64>,
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rtu(r: f64, t: f64, u: f64) -> Self {
        Self { r: Some(r), t: Some(t), u: Some(u) }
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        match var {
            Var::R => self.r = Some(value),
            Var::T => self.t = Some(value),
            Var::U => self.u = Some(value),
        }
        self
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        match var {
            Var::R => self.r,
            Var::T => self.t,
            Var::U => self.u,
        }
    }
}

fn domain(msg: impl Into<String>) -> EvalError {
    EvalError::Domain(msg.into())
}

fn finite(value: f64, what: &str) -> Result<f64, EvalError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(domain(format!("{what} produced a non-finite value")))
    }
}

impl Expression {
    /// Evaluates the expression. Every intermediate value is finite on
    /// success; anything else is reported as a domain error.
    pub fn evaluate(&self, bindings: &Bindings) -> Result<f64, EvalError> {
        match self {
            Expression::Num(v) => finite(*v, "literal"),
            Expression::Var(v) => {
                let value = bindings.get(*v).ok_or(EvalError::Unbound(*v))?;
                finite(value, v.name())
            }
            Expression::Neg(e) => Ok(-e.evaluate(bindings)?),
            Expression::Call(func, arg) => apply(*func, arg.evaluate(bindings)?),
            Expression::Binary(op, l, r) => {
                let a = l.evaluate(bindings)?;
                let b = r.evaluate(bindings)?;
                match op {
                    BinOp::Add => finite(a + b, "addition"),
                    BinOp::Sub => finite(a - b, "subtraction"),
                    BinOp::Mul => finite(a * b, "multiplication"),
                    BinOp::Div => {
                        if b == 0.0 {
                            Err(domain("division by zero"))
                        } else {
                            finite(a / b, "division")
                        }
                    }
                    BinOp::Pow => power(a, b),
                }
            }
        }
    }

    /// Convenience for expressions of `(r, t, u)`.
    pub fn eval_rtu(&self, r: f64, t: f64, u: f64) -> Result<f64, EvalError> {
        self.evaluate(&Bindings::rtu(r, t, u))
    }
}

fn power(base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(domain(format!("negative base {base} with non-integer exponent {exponent}")));
    }
    if base == 0.0 && exponent < 0.0 {
        return Err(domain("zero raised to a negative power"));
    }
    let value = if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    };
    finite(value, "power")
}

fn apply(func: Func, x: f64) -> Result<f64, EvalError> {
    let value = match func {
        Func::Sin => x.sin(),
        Func::Cos => x.cos(),
        Func::Exp => x.exp(),
        Func::Ln => {
            if x <= 0.0 {
                return Err(domain(format!("ln of non-positive argument {x}")));
            }
            x.ln()
        }
        Func::Abs => x.abs(),
        Func::Sqrt => {
            if x < 0.0 {
                return Err(domain(format!("sqrt of negative argument {x}")));
            }
            x.sqrt()
        }
        Func::Tanh => x.tanh(),
        Func::Sign => {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
    };
    finite(value, func.name())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval_u(s: &str, u: f64) -> Result<f64, EvalError> {
        Expression::parse(s).unwrap().evaluate(&Bindings::new().with(Var::U, u))
    }

    #[test]
    fn basic_values() {
        assert_eq!(eval_u("u + u^3", 1.0).unwrap(), 2.0);
        assert_eq!(eval_u("u*ln(1+u^2)", 0.0).unwrap(), 0.0);
        assert_eq!(eval_u("-u^2", 3.0).unwrap(), -9.0);
        assert_eq!(eval_u("2^3^2", 0.0).unwrap(), 512.0);
        assert_eq!(eval_u("abs(u) + sign(u)", -2.0).unwrap(), 1.0);
        assert!((eval_u("sqrt(u) * tanh(0) + exp(0) + cos(0) + sin(0)", 4.0).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(eval_u("ln(u)", 0.0), Err(EvalError::Domain(_))));
        assert!(matches!(eval_u("sqrt(u)", -1.0), Err(EvalError::Domain(_))));
        assert!(matches!(eval_u("1/u", 0.0), Err(EvalError::Domain(_))));
        assert!(matches!(eval_u("u^0.5", -1.0), Err(EvalError::Domain(_))));
        assert!(matches!(eval_u("u^-1", 0.0), Err(EvalError::Domain(_))));
        assert!(matches!(eval_u("exp(u)", 1000.0), Err(EvalError::Domain(_))));
        assert_eq!(eval_u("u^3", -2.0).unwrap(), -8.0);
    }

    #[test]
    fn unbound_variable() {
        let e = Expression::parse("r + u").unwrap();
        assert_eq!(e.evaluate(&Bindings::new().with(Var::U, 1.0)), Err(EvalError::Unbound(Var::R)));
    }

    #[test]
    fn non_finite_binding_rejected() {
        assert!(matches!(eval_u("u", f64::NAN), Err(EvalError::Domain(_))));
    }
}
