//! Closed-form maximum estimates, decay rates and ISS envelopes.
//!
//! Each envelope has the form `‖φ‖ e^{-λT} + gain_d + gain_f` (Dirichlet:
//! `‖φ‖ e^{-λT} + max{gain_d, gain_f}`), with a unit transient prefactor.

use std::io::{self, Write};

use thiserror::Error;

use crate::exprlang::Expression;
use crate::geometry::{ball_volume, sphere_area, BallGeometry};
use crate::problem::{invert_psi, BoundConstants, BoundaryKind, ProblemError};

/// Relative back-off that keeps `λ(ε)` strictly positive at `ε_max`.
pub const EPSILON_BACKOFF: f64 = 1e-3;

/// Absolute tolerance factor for `ψ⁻¹` in bound evaluation.
const INVERSION_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error("infeasible constants: {0}")]
    Infeasible(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Inversion(#[from] ProblemError),
}

/// Disturbance and initial-data magnitudes entering the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DisturbanceMagnitudes {
    /// `sup |f|` over the space-time cylinder.
    pub sup_f: f64,
    /// `sup |d|` over the lateral boundary.
    pub sup_d: f64,
    /// `sup |φ|`.
    pub sup_phi: f64,
    /// `‖φ‖_{L²(B_R)}`.
    pub l2_phi: f64,
}

impl DisturbanceMagnitudes {
    pub fn new(sup_f: f64, sup_d: f64, sup_phi: f64, l2_phi: f64) -> Result<Self, BoundsError> {
        let m = Self { sup_f, sup_d, sup_phi, l2_phi };
        if [sup_f, sup_d, sup_phi, l2_phi].iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(BoundsError::InvalidInput(format!("magnitudes must be finite and nonnegative: {m:?}")));
        }
        Ok(m)
    }
}

/// Which measure multiplies the `v` maximum estimate in the Neumann
/// envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainMeasure {
    /// `√|∂B_R|`
    #[default]
    Sphere,
    /// `√|B_R|`
    Ball,
}

impl std::str::FromStr for GainMeasure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sphere" => Ok(GainMeasure::Sphere),
            "ball" => Ok(GainMeasure::Ball),
            other => Err(format!("unknown gain measure '{other}' (expected sphere or ball)")),
        }
    }
}

impl std::fmt::Display for GainMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GainMeasure::Sphere => "sphere",
            GainMeasure::Ball => "ball",
        })
    }
}

/// ISS envelope evaluated at one horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IssEstimate {
    pub boundary: BoundaryKind,
    pub horizon: f64,
    /// Decay rate `λ` of the transient `‖φ‖ e^{-λT}` (norm, not squared norm).
    pub decay_rate: f64,
    pub transient: f64,
    pub gain_d: f64,
    pub gain_f: f64,
    pub total: f64,
    /// `ε` used by the Neumann envelope.
    pub epsilon: Option<f64>,
    /// Robin only: the alternative exponent `c̲ - 2b̄(1 + 2C²)`, reported for
    /// comparison and not used in `total`.
    pub alternate_exponent: Option<f64>,
}

fn psi_inverse(psi: &Expression, y: f64) -> Result<f64, BoundsError> {
    Ok(invert_psi(psi, y, INVERSION_TOL * y.abs().max(1.0))?)
}

/// Robin maximum estimate `pR² + q` with `p = sup|d| / (2R)` and
/// `q = max{(sup|f| + 2p(ān + Rā + Rb̄)) / c̲, sup|φ|}`.
pub fn max_estimate_robin(consts: &BoundConstants, geom: &BallGeometry, mags: &DisturbanceMagnitudes) -> f64 {
    let r = geom.radius();
    let n = geom.dimension() as f64;
    let p = mags.sup_d / (2.0 * r);
    let q = ((mags.sup_f + 2.0 * p * (consts.a_upper * n + r * consts.a_upper + r * consts.b_upper)) / consts.c_lower)
        .max(mags.sup_phi);
    p * r * r + q
}

/// Dirichlet maximum estimate `max{sup|f| / c̲, ψ⁻¹(sup|d|), sup|φ|}`.
pub fn max_estimate_dirichlet(
    consts: &BoundConstants,
    mags: &DisturbanceMagnitudes,
    psi: &Expression,
) -> Result<f64, BoundsError> {
    let inv = psi_inverse(psi, mags.sup_d)?;
    Ok((mags.sup_f / consts.c_lower).max(inv).max(mags.sup_phi))
}

/// `R₀ = R/2 + (ān + Rā + Rb̄) / (c̲R)`.
pub fn r0_constant(consts: &BoundConstants, geom: &BallGeometry) -> f64 {
    let r = geom.radius();
    let n = geom.dimension() as f64;
    r / 2.0 + (consts.a_upper * n + r * consts.a_upper + r * consts.b_upper) / (consts.c_lower * r)
}

/// `λ_R = (2c̲ - b̄(1 + 2C²)) / 2`, half the squared-norm decay rate.
pub fn decay_rate_robin(consts: &BoundConstants) -> Result<f64, BoundsError> {
    let margin = consts.dissipation_margin();
    if !(margin > 0.0) {
        return Err(BoundsError::Infeasible(format!("2c̲ - b̄(1 + 2C²) = {margin} must be positive")));
    }
    Ok(margin / 2.0)
}

/// `c̲ - 2b̄(1 + 2C²)`.
pub fn alternate_exponent_robin(consts: &BoundConstants) -> f64 {
    let c2 = consts.trace_constant * consts.trace_constant;
    consts.c_lower - 2.0 * consts.b_upper * (1.0 + 2.0 * c2)
}

/// `(2c̲ - b̄) / 2`.
pub fn decay_rate_dirichlet(consts: &BoundConstants) -> Result<f64, BoundsError> {
    let margin = 2.0 * consts.c_lower - consts.b_upper;
    if !(margin > 0.0) {
        return Err(BoundsError::Infeasible(format!("2c̲ - b̄ = {margin} must be positive")));
    }
    Ok(margin / 2.0)
}

/// `λ(ε) = 2c̲ - b̄(1 + 2C²) - 2εC²`.
pub fn neumann_lambda(consts: &BoundConstants, epsilon: f64) -> f64 {
    consts.dissipation_margin() - 2.0 * epsilon * consts.trace_constant * consts.trace_constant
}

/// Gain factor `1 + ā / √(ε λ(ε))`; infinite outside the feasible range.
pub fn gain_factor(consts: &BoundConstants, epsilon: f64) -> f64 {
    let product = epsilon * neumann_lambda(consts, epsilon);
    if product > 0.0 {
        1.0 + consts.a_upper / product.sqrt()
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonChoice {
    pub epsilon: f64,
    /// `λ(ε)`
    pub lambda: f64,
    /// `1 + ā / √(ελ(ε))`
    pub gain_factor: f64,
    /// Upper end of the feasible interval `(0, ε_max]`.
    pub epsilon_max: f64,
}

/// Upper end of the feasible `ε` interval:
/// `min{(2c̲ - b̄(1 + 2C²)) / (2C²) · (1 - δ), (a̲ - b̄C²) / C²}`.
pub fn epsilon_max(consts: &BoundConstants) -> Result<f64, BoundsError> {
    let c2 = consts.trace_constant * consts.trace_constant;
    let rate_cap = consts.dissipation_margin() / (2.0 * c2) * (1.0 - EPSILON_BACKOFF);
    let gradient_cap = consts.gradient_margin() / c2;
    let cap = rate_cap.min(gradient_cap);
    if !(cap > 0.0) {
        return Err(BoundsError::Infeasible(format!(
            "empty ε interval: λ cap {rate_cap}, gradient cap {gradient_cap}"
        )));
    }
    Ok(cap)
}

/// Minimises `g(ε) = 1 + ā / √(ελ(ε))` over the feasible interval by
/// golden-section search.
pub fn choose_epsilon(consts: &BoundConstants) -> Result<EpsilonChoice, BoundsError> {
    let cap = epsilon_max(consts)?;
    let g = |e: f64| gain_factor(consts, e);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, cap);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut g1, mut g2) = (g(x1), g(x2));
    while hi - lo > 1e-13 * cap {
        if g1 <= g2 {
            hi = x2;
            x2 = x1;
            g2 = g1;
            x1 = hi - inv_phi * (hi - lo);
            g1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            g1 = g2;
            x2 = lo + inv_phi * (hi - lo);
            g2 = g(x2);
        }
    }
    let mut epsilon = 0.5 * (lo + hi);
    // g is flat at an interior minimum, so the bracket only locates it to
    // about √eps; polish with Newton steps on (ελ)' = 0 using central
    // differences of ελ, which stay well conditioned there.
    let m = |e: f64| e * neumann_lambda(consts, e);
    let step = 1e-3 * cap;
    for _ in 0..4 {
        let (mp, m0, mm) = (m(epsilon + step), m(epsilon), m(epsilon - step));
        let d1 = (mp - mm) / (2.0 * step);
        let d2 = (mp - 2.0 * m0 + mm) / (step * step);
        if !(d2 < 0.0) {
            break;
        }
        let next = epsilon - d1 / d2;
        if !(next > 0.0 && next <= cap) || g(next) > g(epsilon) {
            break;
        }
        epsilon = next;
    }
    // the minimiser may sit on the right end of the interval
    if g(cap) < g(epsilon) {
        epsilon = cap;
    }
    Ok(EpsilonChoice { epsilon, lambda: neumann_lambda(consts, epsilon), gain_factor: g(epsilon), epsilon_max: cap })
}

fn check_horizon(t: f64) -> Result<(), BoundsError> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(BoundsError::InvalidInput(format!("horizon must be positive, got {t}")));
    }
    Ok(())
}

/// Robin envelope:
/// `‖φ‖ e^{-λ_R T} + R₀√|B_R| sup|d| + (1/c̲)√|B_R| sup|f|`.
pub fn iss_bound_robin(
    consts: &BoundConstants,
    geom: &BallGeometry,
    mags: &DisturbanceMagnitudes,
    horizon: f64,
) -> Result<IssEstimate, BoundsError> {
    check_horizon(horizon)?;
    let lambda = decay_rate_robin(consts)?;
    let root_vol = ball_volume(geom).sqrt();
    let transient = mags.l2_phi * (-lambda * horizon).exp();
    let gain_d = r0_constant(consts, geom) * root_vol * mags.sup_d;
    let gain_f = root_vol * mags.sup_f / consts.c_lower;
    Ok(IssEstimate {
        boundary: BoundaryKind::Robin,
        horizon,
        decay_rate: lambda,
        transient,
        gain_d,
        gain_f,
        total: transient + gain_d + gain_f,
        epsilon: None,
        alternate_exponent: Some(alternate_exponent_robin(consts)),
    })
}

/// Neumann envelope with `ε` from [`choose_epsilon`]:
/// `‖φ‖ e^{-(λ/2)T} + R₀ G √|∂B_R| ψ⁻¹(sup|d|) + (1/c̲) G √|∂B_R| sup|f|`,
/// `G = 1 + ā/√(ελ)`.
pub fn iss_bound_neumann(
    consts: &BoundConstants,
    geom: &BallGeometry,
    mags: &DisturbanceMagnitudes,
    psi: &Expression,
    horizon: f64,
    measure: GainMeasure,
) -> Result<IssEstimate, BoundsError> {
    check_horizon(horizon)?;
    let choice = choose_epsilon(consts)?;
    let root_measure = match measure {
        GainMeasure::Sphere => sphere_area(geom).sqrt(),
        GainMeasure::Ball => ball_volume(geom).sqrt(),
    };
    let rate = choice.lambda / 2.0;
    let transient = mags.l2_phi * (-rate * horizon).exp();
    let scale = choice.gain_factor * root_measure;
    let gain_d = r0_constant(consts, geom) * scale * psi_inverse(psi, mags.sup_d)?;
    let gain_f = scale * mags.sup_f / consts.c_lower;
    Ok(IssEstimate {
        boundary: BoundaryKind::Neumann,
        horizon,
        decay_rate: rate,
        transient,
        gain_d,
        gain_f,
        total: transient + gain_d + gain_f,
        epsilon: Some(choice.epsilon),
        alternate_exponent: None,
    })
}

/// Dirichlet envelope:
/// `‖φ‖ e^{-((2c̲ - b̄)/2)T} + √|B_R| max{sup|f| / c̲, ψ⁻¹(sup|d|)}`.
pub fn iss_bound_dirichlet(
    consts: &BoundConstants,
    geom: &BallGeometry,
    mags: &DisturbanceMagnitudes,
    psi: &Expression,
    horizon: f64,
) -> Result<IssEstimate, BoundsError> {
    check_horizon(horizon)?;
    let lambda = decay_rate_dirichlet(consts)?;
    let root_vol = ball_volume(geom).sqrt();
    let transient = mags.l2_phi * (-lambda * horizon).exp();
    let gain_d = root_vol * psi_inverse(psi, mags.sup_d)?;
    let gain_f = root_vol * mags.sup_f / consts.c_lower;
    Ok(IssEstimate {
        boundary: BoundaryKind::Dirichlet,
        horizon,
        decay_rate: lambda,
        transient,
        gain_d,
        gain_f,
        total: transient + gain_d.max(gain_f),
        epsilon: None,
        alternate_exponent: None,
    })
}

/// Envelope matching `boundary`.
pub fn iss_bound(
    boundary: BoundaryKind,
    consts: &BoundConstants,
    geom: &BallGeometry,
    mags: &DisturbanceMagnitudes,
    psi: &Expression,
    horizon: f64,
    measure: GainMeasure,
) -> Result<IssEstimate, BoundsError> {
    match boundary {
        BoundaryKind::Robin => iss_bound_robin(consts, geom, mags, horizon),
        BoundaryKind::Neumann => iss_bound_neumann(consts, geom, mags, psi, horizon, measure),
        BoundaryKind::Dirichlet => iss_bound_dirichlet(consts, geom, mags, psi, horizon),
    }
}

/// Gain variants of the superlinear example system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleVariant {
    /// `G(y, z) = y/c̲ + (R/2 + (ā/c̲)(n + R)) z`
    Robin,
    /// `G(y, z) = max{y/c̲, ψ⁻¹(z)}` with `ψ(u) = u + u³`
    Dirichlet,
}

/// Gain function `G(y, z)` of the example system.
pub fn example_gain_g(
    variant: ExampleVariant,
    consts: &BoundConstants,
    geom: &BallGeometry,
    y: f64,
    z: f64,
) -> Result<f64, BoundsError> {
    if !(y >= 0.0 && z >= 0.0) {
        return Err(BoundsError::InvalidInput(format!("need y, z >= 0, got {y}, {z}")));
    }
    let r = geom.radius();
    let n = geom.dimension() as f64;
    match variant {
        ExampleVariant::Robin => Ok(y / consts.c_lower + (r / 2.0 + consts.a_upper / consts.c_lower * (n + r)) * z),
        ExampleVariant::Dirichlet => {
            let psi = Expression::parse("u + u^3").expect("built-in expression parses");
            Ok((y / consts.c_lower).max(psi_inverse(&psi, z)?))
        }
    }
}

pub const BOUNDS_HEADER: &str = "T,transient,gain_d,gain_f,total,lambda,epsilon";

/// Writes one row per estimate; `epsilon` is empty where unused.
pub fn write_bounds_csv<W: Write>(estimates: &[IssEstimate], mut out: W) -> io::Result<()> {
    writeln!(out, "{BOUNDS_HEADER}")?;
    for e in estimates {
        let eps = e.epsilon.map(|v| v.to_string()).unwrap_or_default();
        writeln!(out, "{},{},{},{},{},{},{}", e.horizon, e.transient, e.gain_d, e.gain_f, e.total, e.decay_rate, eps)?;
    }
    Ok(())
}
