//! Problem description: coefficient fields, nonlinearities, boundary
//! operator, disturbances, initial data and declared structural constants.
//!
//! All data are radially symmetric. The drift `b` is stored by its radial
//! component, so `b·∇u = b ∂_r u` and `div b = ∂_r b + (n-1) b / r`.

mod inverse;
mod validate;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::exprlang::{EvalError, Expression, Var};
use crate::geometry::BallGeometry;

pub use inverse::{invert_psi, invert_psi_with, INVERSION_MAX_DOUBLINGS};
pub use validate::{
    validate_compatibility, validate_monotonicity, validate_structural, CheckResult, MonotoneRole, ValidationReport,
    Witness, COMPATIBILITY_TOL, ZERO_TOL,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("invalid constants: {0}")]
    InvalidConstants(String),
    #[error("field '{field}' may not depend on variable '{var}'")]
    UnexpectedVariable { field: &'static str, var: Var },
    #[error("evaluating '{field}' at r={r}, t={t}, u={u}: {source}")]
    Evaluation { field: &'static str, r: f64, t: f64, u: f64, source: EvalError },
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { min: usize, got: usize },
    #[error("sampling range [{lo}, {hi}] must contain 0")]
    RangeWithoutZero { lo: f64, hi: f64 },
    #[error("no bracket for psi(u) = {target} within {doublings} doublings")]
    UnboundedInversion { target: f64, doublings: usize },
    #[error("psi inversion for {target} stalled with residual {residual}")]
    InversionInaccurate { target: f64, residual: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// Boundary operator `B[u]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryKind {
    /// `∂u/∂ν + ψ(u)`
    Robin,
    /// `ψ(∂u/∂ν)`
    Neumann,
    /// `ψ(u)`
    Dirichlet,
}

impl BoundaryKind {
    pub const ALL: [BoundaryKind; 3] = [BoundaryKind::Robin, BoundaryKind::Neumann, BoundaryKind::Dirichlet];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryKind::Robin => "robin",
            BoundaryKind::Neumann => "neumann",
            BoundaryKind::Dirichlet => "dirichlet",
        }
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundaryKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "robin" => Ok(BoundaryKind::Robin),
            "neumann" => Ok(BoundaryKind::Neumann),
            "dirichlet" => Ok(BoundaryKind::Dirichlet),
            other => Err(format!("unknown boundary kind '{other}' (expected robin, neumann or dirichlet)")),
        }
    }
}

/// Declared envelope constants of the coefficients.
///
/// `b_lower` is recorded and checked against the sampled drift but enters no
/// bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub a_lower: f64,
    pub a_upper: f64,
    pub b_lower: f64,
    pub b_upper: f64,
    pub c_lower: f64,
    pub trace_constant: f64,
}

impl BoundConstants {
    /// Checks sign and ordering requirements. The two strict coupling
    /// inequalities are reported by [`validate_structural`] instead, so that
    /// violating sets can still be represented and rejected with a reason.
    pub fn new(
        a_lower: f64,
        a_upper: f64,
        b_upper: f64,
        c_lower: f64,
        trace_constant: f64,
    ) -> Result<Self, ProblemError> {
        let c = Self { a_lower, a_upper, b_lower: 0.0, b_upper, c_lower, trace_constant };
        c.check()?;
        Ok(c)
    }

    pub fn with_b_lower(mut self, b_lower: f64) -> Result<Self, ProblemError> {
        self.b_lower = b_lower;
        self.check()?;
        Ok(self)
    }

    fn check(&self) -> Result<(), ProblemError> {
        let all = [self.a_lower, self.a_upper, self.b_lower, self.b_upper, self.c_lower, self.trace_constant];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ProblemError::InvalidConstants("all constants must be finite".into()));
        }
        if !(self.a_lower > 0.0 && self.a_lower <= self.a_upper) {
            return Err(ProblemError::InvalidConstants(format!(
                "need 0 < a_lower <= a_upper, got {} and {}",
                self.a_lower, self.a_upper
            )));
        }
        if !(self.b_lower >= 0.0 && self.b_lower <= self.b_upper) {
            return Err(ProblemError::InvalidConstants(format!(
                "need 0 <= b_lower <= b_upper, got {} and {}",
                self.b_lower, self.b_upper
            )));
        }
        if !(self.c_lower > 0.0) {
            return Err(ProblemError::InvalidConstants(format!("need c_lower > 0, got {}", self.c_lower)));
        }
        if !(self.trace_constant > 0.0) {
            return Err(ProblemError::InvalidConstants(format!(
                "need trace_constant > 0, got {}",
                self.trace_constant
            )));
        }
        Ok(())
    }

    /// `2c̲ - b̄(1 + 2C²)`; must be strictly positive.
    pub fn dissipation_margin(&self) -> f64 {
        let c2 = self.trace_constant * self.trace_constant;
        2.0 * self.c_lower - self.b_upper * (1.0 + 2.0 * c2)
    }

    /// `a̲ - b̄C²`; must be strictly positive.
    pub fn gradient_margin(&self) -> f64 {
        self.a_lower - self.b_upper * self.trace_constant * self.trace_constant
    }

    /// Both strict coupling inequalities hold.
    pub fn coupling_holds(&self) -> bool {
        self.dissipation_margin() > 0.0 && self.gradient_margin() > 0.0
    }
}

/// One problem instance on a ball with radial data.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub geometry: BallGeometry,
    /// Diffusivity `a(r, t)`.
    pub a: Expression,
    /// Radial drift component `b(r, t)`.
    pub b: Expression,
    /// Reaction coefficient `c(r, t)`.
    pub c: Expression,
    /// Nonlinear term `h(r, t, u)`.
    pub h: Expression,
    /// Boundary nonlinearity `ψ(u)`.
    pub psi: Expression,
    /// In-domain disturbance `f(r, t)`.
    pub f: Expression,
    /// Boundary disturbance `d(t)`.
    pub d: Expression,
    /// Initial data `φ(r)`.
    pub phi: Expression,
    pub boundary: BoundaryKind,
    pub constants: BoundConstants,
}

impl ProblemSpec {
    /// Checks that every field only uses the variables it is allowed to.
    pub fn check_variables(&self) -> Result<(), ProblemError> {
        let rules: [(&'static str, &Expression, &[Var]); 8] = [
            ("a", &self.a, &[Var::R, Var::T]),
            ("b", &self.b, &[Var::R, Var::T]),
            ("c", &self.c, &[Var::R, Var::T]),
            ("h", &self.h, &[Var::R, Var::T, Var::U]),
            ("psi", &self.psi, &[Var::U]),
            ("f", &self.f, &[Var::R, Var::T]),
            ("d", &self.d, &[Var::T]),
            ("phi", &self.phi, &[Var::R]),
        ];
        for (field, expr, allowed) in rules {
            if let Some(var) = expr.variables().into_iter().find(|v| !allowed.contains(v)) {
                return Err(ProblemError::UnexpectedVariable { field, var });
            }
        }
        Ok(())
    }

    /// The superlinear example system: `a = c = 1`, `b = 0`,
    /// `h = u ln(1 + u²)`, `ψ = u + u³`, `f = 0`, `d = A sin²(t)` and
    /// `φ = ½(1 - r²/R²)⁴`. The initial data vanish to fourth order at
    /// `r = R`, so both `B[φ] = d(0)` and its first time derivative hold for
    /// all three boundary kinds and `u_tt` stays bounded near `t = 0`.
    pub fn superlinear_example(
        geometry: BallGeometry,
        boundary: BoundaryKind,
        amplitude: f64,
        trace_constant: f64,
    ) -> ProblemSpec {
        let p = |s: &str| Expression::parse(s).expect("built-in expression parses");
        let r = geometry.radius();
        let d = p("sin(t)^2");
        let phi = if r == 1.0 { p("0.5*(1 - r^2)^4") } else { p(&format!("0.5*(1 - r^2/{})^4", r * r)) };
        ProblemSpec {
            geometry,
            a: p("1"),
            b: p("0"),
            c: p("1"),
            h: p("u*ln(1 + u^2)"),
            psi: p("u + u^3"),
            f: p("0"),
            d: if amplitude == 1.0 { d } else { d.scaled(amplitude) },
            phi,
            boundary,
            constants: BoundConstants::new(1.0, 1.0, 0.0, 1.0, trace_constant).expect("valid example constants"),
        }
    }

    pub(crate) fn eval_field(
        field: &'static str,
        expr: &Expression,
        r: f64,
        t: f64,
        u: f64,
    ) -> Result<f64, ProblemError> {
        expr.eval_rtu(r, t, u).map_err(|source| ProblemError::Evaluation { field, r, t, u, source })
    }
}
