//! Scalar expressions in the variables `r`, `t` and `u`.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?          (right-associative)
//! atom   := number | 'r' | 't' | 'u' | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | ln | abs | sqrt | tanh | sign
//! ```
//!
//! `-u^2` is `-(u^2)`. `sign` only appears in practice as the derivative of
//! `abs`, but it parses like any other function so printed derivatives read
//! back.

mod diff;
mod eval;
mod lexer;
mod parser;

use std::fmt;
use std::str::FromStr;

pub use eval::{Bindings, EvalError};
pub use parser::ParseError;

/// A free variable of an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    R,
    T,
    U,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::R => "r",
            Var::T => "t",
            Var::U => "u",
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Abs,
    Sqrt,
    Tanh,
    Sign,
}

impl Func {
    pub const ALL: [Func; 8] =
        [Func::Sin, Func::Cos, Func::Exp, Func::Ln, Func::Abs, Func::Sqrt, Func::Tanh, Func::Sign];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

/// Expression tree. Immutable once built; cloning copies the tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Num(f64),
    Var(Var),
    Neg(Box<Expression>),
    Binary(BinOp, Box<Expression>, Box<Expression>),
    Call(Func, Box<Expression>),
}

const NEG_PRECEDENCE: u8 = 3;
const ATOM_PRECEDENCE: u8 = 5;

impl Expression {
    pub fn parse(text: &str) -> Result<Expression, ParseError> {
        parser::parse(text)
    }

    pub fn num(value: f64) -> Expression {
        Expression::Num(value)
    }

    pub fn zero() -> Expression {
        Expression::Num(0.0)
    }

    pub fn var(v: Var) -> Expression {
        Expression::Var(v)
    }

    pub fn binary(op: BinOp, lhs: Expression, rhs: Expression) -> Expression {
        Expression::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn call(func: Func, arg: Expression) -> Expression {
        Expression::Call(func, Box::new(arg))
    }

    /// `factor * self`, used to scale disturbance signals.
    pub fn scaled(&self, factor: f64) -> Expression {
        Expression::binary(BinOp::Mul, Expression::Num(factor), self.clone())
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expression::Num(v) if *v == 0.0)
    }

    pub fn depends_on(&self, var: Var) -> bool {
        match self {
            Expression::Num(_) => false,
            Expression::Var(v) => *v == var,
            Expression::Neg(e) | Expression::Call(_, e) => e.depends_on(var),
            Expression::Binary(_, l, r) => l.depends_on(var) || r.depends_on(var),
        }
    }

    /// Variables occurring in the tree, in `r, t, u` order.
    pub fn variables(&self) -> Vec<Var> {
        [Var::R, Var::T, Var::U].into_iter().filter(|v| self.depends_on(*v)).collect()
    }

    fn precedence(&self) -> u8 {
        match self {
            Expression::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => NEG_PRECEDENCE,
            Expression::Num(_) | Expression::Var(_) | Expression::Call(..) => ATOM_PRECEDENCE,
            Expression::Neg(_) => NEG_PRECEDENCE,
            Expression::Binary(op, ..) => op.precedence(),
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expression::Num(v) => {
                if v.is_sign_negative() {
                    write!(f, "-{}", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expression::Var(v) => write!(f, "{v}"),
            Expression::Neg(e) => {
                f.write_str("-")?;
                e.fmt_child(f, e.precedence() < NEG_PRECEDENCE)
            }
            Expression::Call(func, arg) => write!(f, "{}({arg})", func.name()),
            Expression::Binary(op, l, r) => {
                let p = op.precedence();
                let (left_parens, right_parens) = if *op == BinOp::Pow {
                    (l.precedence() <= p, r.precedence() < NEG_PRECEDENCE)
                } else {
                    (l.precedence() < p, r.precedence() <= p)
                };
                l.fmt_child(f, left_parens)?;
                if *op == BinOp::Pow {
                    f.write_str("^")?;
                } else {
                    write!(f, " {} ", op.symbol())?;
                }
                r.fmt_child(f, right_parens)
            }
        }
    }
}

impl FromStr for Expression {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Expression::parse(s)
    }
}
