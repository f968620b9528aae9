//! Sampling validators for the structural, monotonicity and compatibility
//! conditions. Passing is necessary, not sufficient: the conditions quantify
//! over a continuum and only a finite sample is inspected.

use std::fmt;

use crate::exprlang::{Expression, Var};
use crate::geometry::BallGeometry;

use super::{BoundaryKind, ProblemError, ProblemSpec};

/// Tolerance for "vanishes at zero" checks.
pub const ZERO_TOL: f64 = 1e-12;
/// Tolerance for the compatibility residuals.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

const MIN_SAMPLES: usize = 100;
/// (r, t) points per axis at which an `h` sample sweep over `u` is done.
const NONLINEARITY_RT_POINTS: usize = 6;

/// Where a check was decided: the worst sampled point and the value there.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Witness {
    pub r: Option<f64>,
    pub t: Option<f64>,
    pub u: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Signed slack of the worst sample; negative (or zero for strict
    /// inequalities) means failure.
    pub margin: f64,
    pub witness: Option<Witness>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    /// The report comes from sampling rather than proof.
    pub sampled: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn merge(mut self, other: ValidationReport) -> ValidationReport {
        self.sampled |= other.sampled;
        self.checks.extend(other.checks);
        self
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28} {:<6} {:>14}  detail", "check", "result", "margin")?;
        for c in &self.checks {
            write!(
                f,
                "{:<28} {:<6} {:>14.6e}  {}",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.margin,
                c.detail
            )?;
            if let Some(w) = c.witness {
                let fmt_opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
                write!(f, " [r={}, t={}, u={}, value={:.6e}]", fmt_opt(w.r), fmt_opt(w.t), fmt_opt(w.u), w.value)?;
            }
            writeln!(f)?;
        }
        if self.sampled {
            writeln!(f, "(sampled: passing is necessary, not sufficient)")?;
        }
        Ok(())
    }
}

fn linspace(lo: f64, hi: f64, count: usize) -> impl Iterator<Item = f64> {
    let step = if count > 1 { (hi - lo) / (count - 1) as f64 } else { 0.0 };
    (0..count).map(move |i| if i + 1 == count { hi } else { lo + step * i as f64 })
}

/// Running minimum of a margin with the point where it occurred.
struct Worst {
    margin: f64,
    witness: Witness,
}

impl Worst {
    fn new() -> Self {
        Self { margin: f64::INFINITY, witness: Witness::default() }
    }

    fn update(&mut self, margin: f64, witness: Witness) {
        if margin < self.margin {
            self.margin = margin;
            self.witness = witness;
        }
    }
}

/// Checks the coupling inequalities on the declared constants exactly and the
/// declared envelopes of `a`, `∂_r a`, `b`, `div b` and `c` on a
/// `samples × samples` grid over `[0, R] × [0, horizon]`.
pub fn validate_structural(spec: &ProblemSpec, horizon: f64, samples: usize) -> Result<ValidationReport, ProblemError> {
    if samples < MIN_SAMPLES {
        return Err(ProblemError::TooFewSamples { min: MIN_SAMPLES, got: samples });
    }
    let k = &spec.constants;
    let c2 = k.trace_constant * k.trace_constant;
    let mut checks = Vec::with_capacity(8);

    let lhs = k.b_upper * (1.0 + 2.0 * c2);
    let margin = 2.0 * k.c_lower - lhs;
    checks.push(CheckResult {
        name: "coupling_dissipation",
        passed: margin > 0.0,
        margin,
        witness: None,
        detail: format!("b_upper*(1+2*C^2) = {lhs:.6e} < 2*c_lower = {:.6e}", 2.0 * k.c_lower),
    });
    let lhs = k.b_upper * c2;
    let margin = k.a_lower - lhs;
    checks.push(CheckResult {
        name: "coupling_gradient",
        passed: margin > 0.0,
        margin,
        witness: None,
        detail: format!("b_upper*C^2 = {lhs:.6e} < a_lower = {:.6e}", k.a_lower),
    });

    let geom = &spec.geometry;
    let n = geom.dimension() as f64;
    let da = spec.a.derivative(Var::R);
    let db = spec.b.derivative(Var::R);

    let mut a_low = Worst::new();
    let mut a_high = Worst::new();
    let mut grad_a = Worst::new();
    let mut b_high = Worst::new();
    let mut b_low = Worst::new();
    let mut c_low = Worst::new();

    for t in linspace(0.0, horizon, samples) {
        for r in linspace(0.0, geom.radius(), samples) {
            let at = |field, e: &Expression| ProblemSpec::eval_field(field, e, r, t, 0.0);
            let w = |value| Witness { r: Some(r), t: Some(t), u: None, value };
            let a = at("a", &spec.a)?;
            a_low.update(a - k.a_lower, w(a));
            a_high.update(k.a_upper - a, w(a));
            let ga = at("da/dr", &da)?.abs();
            grad_a.update(k.a_upper - ga, w(ga));
            let b = at("b", &spec.b)?;
            let b_r = at("db/dr", &db)?;
            let div_b = if r == 0.0 { n * b_r } else { b_r + (n - 1.0) * b / r };
            let drift = b.abs() + div_b.abs();
            b_high.update(k.b_upper - drift, w(drift));
            b_low.update(drift - k.b_lower, w(drift));
            let c = at("c", &spec.c)?;
            c_low.update(c - k.c_lower, w(c));
        }
    }

    let envelope = |name, worst: Worst, detail: &str| CheckResult {
        name,
        passed: worst.margin >= 0.0,
        margin: worst.margin,
        witness: Some(worst.witness),
        detail: detail.to_string(),
    };
    checks.push(envelope("a_lower", a_low, "a >= a_lower"));
    checks.push(envelope("a_upper", a_high, "a <= a_upper"));
    checks.push(envelope("grad_a", grad_a, "|da/dr| <= a_upper"));
    checks.push(envelope("drift_upper", b_high, "|b| + |div b| <= b_upper"));
    checks.push(envelope("drift_lower", b_low, "|b| + |div b| >= b_lower"));
    checks.push(envelope("c_lower", c_low, "c >= c_lower"));

    Ok(ValidationReport { checks, sampled: true })
}

/// Which function a monotonicity check applies to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MonotoneRole {
    /// `h(r, t, u)`, sampled additionally over `[0, R] × [0, horizon]`.
    Nonlinearity { geometry: BallGeometry, horizon: f64 },
    /// `ψ(u)`.
    Boundary,
}

/// Samples strict increase in `u`, `g(w) + g(-w) >= 0` and `g(0) = 0` over
/// `u_range`.
pub fn validate_monotonicity(
    expr: &Expression,
    role: MonotoneRole,
    samples: usize,
    u_range: (f64, f64),
) -> Result<ValidationReport, ProblemError> {
    if samples < MIN_SAMPLES {
        return Err(ProblemError::TooFewSamples { min: MIN_SAMPLES, got: samples });
    }
    let (lo, hi) = u_range;
    if !(lo <= 0.0 && hi >= 0.0 && lo < hi) {
        return Err(ProblemError::RangeWithoutZero { lo, hi });
    }
    let field = match role {
        MonotoneRole::Nonlinearity { .. } => "h",
        MonotoneRole::Boundary => "psi",
    };
    let rt_points: Vec<(f64, f64)> = match role {
        MonotoneRole::Nonlinearity { geometry, horizon } => linspace(0.0, horizon, NONLINEARITY_RT_POINTS)
            .flat_map(|t| linspace(0.0, geometry.radius(), NONLINEARITY_RT_POINTS).map(move |r| (r, t)))
            .collect(),
        MonotoneRole::Boundary => vec![(0.0, 0.0)],
    };
    let has_rt = matches!(role, MonotoneRole::Nonlinearity { .. });
    let witness = |r: f64, t: f64, u: f64, value: f64| Witness {
        r: has_rt.then_some(r),
        t: has_rt.then_some(t),
        u: Some(u),
        value,
    };

    let us: Vec<f64> = linspace(lo, hi, samples).collect();
    let half = (-lo).min(hi);
    let ws: Vec<f64> = linspace(0.0, half, samples).collect();

    let mut increase = Worst::new();
    let mut odd = Worst::new();
    let mut zero = Worst::new();
    for &(r, t) in &rt_points {
        let g = |u: f64| ProblemSpec::eval_field(field, expr, r, t, u);
        let mut prev = g(us[0])?;
        for pair in us.windows(2) {
            let next = g(pair[1])?;
            // strict: zero difference counts as failure
            increase.update(next - prev, witness(r, t, pair[1], next));
            prev = next;
        }
        for &w in &ws {
            let (gp, gm) = (g(w)?, g(-w)?);
            let sum = gp + gm;
            // rounding slack relative to the magnitudes involved
            let slack = ZERO_TOL * (1.0 + gp.abs() + gm.abs());
            odd.update(sum + slack, witness(r, t, w, sum));
        }
        let g0 = g(0.0)?;
        zero.update(ZERO_TOL - g0.abs(), witness(r, t, 0.0, g0));
    }

    let checks = vec![
        CheckResult {
            name: "strictly_increasing",
            passed: increase.margin > 0.0,
            margin: increase.margin,
            witness: Some(increase.witness),
            detail: format!("{field}(u) < {field}(v) for sampled u < v"),
        },
        CheckResult {
            name: "odd_balance",
            passed: odd.margin >= 0.0,
            margin: odd.margin,
            witness: Some(odd.witness),
            detail: format!("{field}(w) + {field}(-w) >= 0"),
        },
        CheckResult {
            name: "zero_at_origin",
            passed: zero.margin >= 0.0,
            margin: zero.margin,
            witness: Some(zero.witness),
            detail: format!("{field}(0) = 0"),
        },
    ];
    Ok(ValidationReport { checks, sampled: true })
}

/// Checks `d(0) = 0`, `B[φ](R) = 0` for the configured boundary kind and
/// `φ'(0) = 0`, each to [`COMPATIBILITY_TOL`].
pub fn validate_compatibility(spec: &ProblemSpec) -> Result<ValidationReport, ProblemError> {
    let radius = spec.geometry.radius();
    let dphi = spec.phi.derivative(Var::R);
    let residual_check = |name, residual: f64, r: Option<f64>, t: Option<f64>, detail: String| CheckResult {
        name,
        passed: residual.abs() <= COMPATIBILITY_TOL,
        margin: COMPATIBILITY_TOL - residual.abs(),
        witness: Some(Witness { r, t, u: None, value: residual }),
        detail,
    };

    let d0 = ProblemSpec::eval_field("d", &spec.d, radius, 0.0, 0.0)?;
    let phi_r = ProblemSpec::eval_field("phi", &spec.phi, radius, 0.0, 0.0)?;
    let slope_r = ProblemSpec::eval_field("dphi/dr", &dphi, radius, 0.0, 0.0)?;
    let psi_at = |u: f64| ProblemSpec::eval_field("psi", &spec.psi, radius, 0.0, u);
    let (boundary_residual, detail) = match spec.boundary {
        BoundaryKind::Robin => (slope_r + psi_at(phi_r)?, "phi'(R) + psi(phi(R)) = 0"),
        BoundaryKind::Neumann => (psi_at(slope_r)?, "psi(phi'(R)) = 0"),
        BoundaryKind::Dirichlet => (psi_at(phi_r)?, "psi(phi(R)) = 0"),
    };
    let slope_0 = ProblemSpec::eval_field("dphi/dr", &dphi, 0.0, 0.0, 0.0)?;

    let checks = vec![
        residual_check("initial_disturbance", d0, None, Some(0.0), "d(0) = 0".into()),
        residual_check("boundary_compatibility", boundary_residual, Some(radius), Some(0.0), detail.into()),
        residual_check("origin_symmetry", slope_0, Some(0.0), None, "phi'(0) = 0".into()),
    ];
    Ok(ValidationReport { checks, sampled: false })
}
