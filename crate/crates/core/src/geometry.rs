//! Ball geometry: exact measures and the trace-embedding constant.
//!
//! Measures use the half-integer Gamma values that occur for integer
//! dimension. The trace constant is estimated over radially symmetric
//! piecewise-linear functions, with the H¹ norm taken as the sum
//! `‖u‖ + ‖∇u‖`.

use std::f64::consts::PI;

use thiserror::Error;

use crate::tridiag;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("gamma is only defined here for positive integers and half-integers, got {0}")]
    GammaDomain(f64),
    #[error("invalid ball: dimension {n} must be >= 1 and radius {radius} must be positive and finite")]
    InvalidBall { n: usize, radius: f64 },
    #[error("trace estimation needs resolution >= 16, got {0}")]
    ResolutionTooSmall(usize),
    #[error("trace estimation did not converge after {iterations} iterations (best value {best})")]
    TraceNotConverged { best: f64, iterations: usize },
}

/// Ball `B_R ⊂ ℝⁿ` centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallGeometry {
    n: usize,
    radius: f64,
}

impl BallGeometry {
    pub fn new(n: usize, radius: f64) -> Result<Self, GeometryError> {
        if n == 0 || !(radius > 0.0) || !radius.is_finite() {
            return Err(GeometryError::InvalidBall { n, radius });
        }
        Ok(Self { n, radius })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Outer unit normal at a boundary point `x`, i.e. `x / R`.
    pub fn outward_normal(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|xi| xi / self.radius).collect()
    }

    /// `|∂B_1|`, the area of the unit sphere in this dimension.
    pub fn unit_sphere_area(&self) -> f64 {
        unit_sphere_area(self.n)
    }
}

/// Γ(m) for `m` a positive integer or half-integer.
///
/// Integers use `Γ(k) = (k-1)!`; half-integers use
/// `Γ(k + 1/2) = √π · (1/2)(3/2)···(k - 1/2)`, which equals
/// `(2k)! √π / (4ᵏ k!)`. Both are built by the recurrence `Γ(m+1) = m Γ(m)`
/// in the same multiplication order, so the recurrence holds exactly.
pub fn gamma_half_integer(m: f64) -> Result<f64, GeometryError> {
    let twice = 2.0 * m;
    if !(m > 0.0) || !m.is_finite() || twice.fract() != 0.0 {
        return Err(GeometryError::GammaDomain(m));
    }
    let (mut value, mut arg) = if (twice as u64).is_multiple_of(2) { (1.0, 1.0) } else { (PI.sqrt(), 0.5) };
    while arg < m {
        value *= arg;
        arg += 1.0;
    }
    Ok(value)
}

fn unit_sphere_area(n: usize) -> f64 {
    let half = n as f64 / 2.0;
    // n >= 1 so n/2 is a positive half-integer
    2.0 * PI.powf(half) / gamma_half_integer(half).expect("n/2 is a positive half-integer")
}

/// `|B_R| = π^{n/2} Rⁿ / ((n/2) Γ(n/2))`.
pub fn ball_volume(geom: &BallGeometry) -> f64 {
    let half = geom.n as f64 / 2.0;
    let gamma = gamma_half_integer(half).expect("n/2 is a positive half-integer");
    PI.powf(half) * geom.radius.powi(geom.n as i32) / (half * gamma)
}

/// `|∂B_R| = 2π^{n/2} R^{n-1} / Γ(n/2)`.
pub fn sphere_area(geom: &BallGeometry) -> f64 {
    unit_sphere_area(geom.n) * geom.radius.powi(geom.n as i32 - 1)
}

/// Result of [`estimate_trace_constant`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEstimate {
    pub value: f64,
    pub grid_resolution: usize,
    pub converged: bool,
}

impl TraceEstimate {
    /// The estimate multiplied by a safety factor (>= 1 in practice).
    pub fn inflated(&self, safety_factor: f64) -> f64 {
        self.value * safety_factor
    }
}

pub const DEFAULT_TRACE_SAFETY_FACTOR: f64 = 1.1;

/// Search parameters for the trace-constant maximisation.
#[derive(Debug, Clone, Copy)]
pub struct TraceSearch {
    /// Number of starting points for the local refinement.
    pub starts: usize,
    /// Bracket width at which the refinement is considered converged.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TraceSearch {
    fn default() -> Self {
        Self { starts: 48, tol: 1e-10, max_iter: 200 }
    }
}

/// Mass and stiffness matrices of continuous piecewise-linear radial functions
/// on `resolution` uniform cells, including the `|∂B_1| r^{n-1}` weight.
/// Integrals are exact (Gauss–Legendre with enough points).
struct RadialFem {
    mass: Tridiagonal,
    stiffness: Tridiagonal,
    /// Per-cell stiffness weights, so `∫|u'|² = Σ k_e (u_{e+1} - u_e)²`.
    cell_stiffness: Vec<f64>,
}

#[derive(Clone)]
struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    fn zeros(n: usize) -> Self {
        Self { lower: vec![0.0; n], diag: vec![0.0; n], upper: vec![0.0; n] }
    }

    fn quadratic_form(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = self.diag[i] * x[i];
            if i > 0 {
                row += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                row += self.upper[i] * x[i + 1];
            }
            acc += x[i] * row;
        }
        acc
    }
}

impl RadialFem {
    fn assemble(geom: &BallGeometry, resolution: usize) -> Self {
        let nodes = resolution + 1;
        let h = geom.radius / resolution as f64;
        let weight_power = geom.n as i32 - 1;
        let area = geom.unit_sphere_area();
        let (gauss_x, gauss_w) = gauss_legendre(geom.n.div_ceil(2) + 1);
        let mut mass = Tridiagonal::zeros(nodes);
        let mut stiffness = Tridiagonal::zeros(nodes);
        let mut cell_stiffness = Vec::with_capacity(resolution);
        for e in 0..resolution {
            let r0 = e as f64 * h;
            let mut m = [[0.0; 2]; 2];
            let mut weight_integral = 0.0;
            for (&x, &w) in gauss_x.iter().zip(&gauss_w) {
                // map [-1, 1] -> [r0, r0 + h]
                let s = 0.5 * (x + 1.0);
                let r = r0 + s * h;
                let jw = 0.5 * h * w * area * r.powi(weight_power);
                let phi = [1.0 - s, s];
                for a in 0..2 {
                    for b in 0..2 {
                        m[a][b] += jw * phi[a] * phi[b];
                    }
                }
                weight_integral += jw;
            }
            let k = weight_integral / (h * h);
            cell_stiffness.push(k);
            mass.diag[e] += m[0][0];
            mass.diag[e + 1] += m[1][1];
            mass.upper[e] += m[0][1];
            mass.lower[e + 1] += m[1][0];
            stiffness.diag[e] += k;
            stiffness.diag[e + 1] += k;
            stiffness.upper[e] -= k;
            stiffness.lower[e + 1] -= k;
        }
        Self { mass, stiffness, cell_stiffness }
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
fn gauss_legendre(points: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(points);
    let mut ws = Vec::with_capacity(points);
    let m = points as f64;
    for i in 0..points {
        let mut x = (PI * (i as f64 + 0.75) / (m + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(points, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(points, x);
        if d != 0.0 {
            dp = d;
        }
        xs.push(x);
        ws.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (xs, ws)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Norms of a discrete radial function with `values.len() = resolution + 1`
/// equispaced nodes on `[0, R]`: returns `(‖u‖, ‖∇u‖, ‖u‖_{L²(∂B_R)})`.
pub fn radial_h1_parts(geom: &BallGeometry, values: &[f64]) -> (f64, f64, f64) {
    assert!(values.len() >= 2, "need at least one cell");
    let fem = RadialFem::assemble(geom, values.len() - 1);
    h1_parts(&fem, geom, values)
}

fn h1_parts(fem: &RadialFem, geom: &BallGeometry, values: &[f64]) -> (f64, f64, f64) {
    let l2 = fem.mass.quadratic_form(values).max(0.0).sqrt();
    // difference form avoids cancellation for nearly constant data
    let grad =
        fem.cell_stiffness.iter().zip(values.windows(2)).map(|(k, w)| k * (w[1] - w[0]).powi(2)).sum::<f64>().sqrt();
    let trace = sphere_area(geom).sqrt() * values[values.len() - 1].abs();
    (l2, grad, trace)
}

/// Trace quotient `‖u‖_{L²(∂B_R)} / (‖u‖ + ‖∇u‖)` of a discrete radial function.
pub fn trace_quotient(geom: &BallGeometry, values: &[f64]) -> f64 {
    let (l2, grad, trace) = radial_h1_parts(geom, values);
    trace / (l2 + grad)
}

/// Estimates the trace constant over radial piecewise-linear functions on a
/// uniform grid of `resolution` cells.
///
/// Uses `(√A + √B)² = min_θ A/θ + B/(1-θ)`: for fixed `θ` the maximiser of
/// `u_R² / (A/θ + B/(1-θ))` solves one tridiagonal system, so the search
/// reduces to one dimension. `θ` is scanned from several starts and the best
/// is refined by golden-section search.
pub fn estimate_trace_constant(geom: &BallGeometry, resolution: usize) -> Result<TraceEstimate, GeometryError> {
    estimate_trace_constant_with(geom, resolution, &TraceSearch::default())
}

pub fn estimate_trace_constant_with(
    geom: &BallGeometry,
    resolution: usize,
    search: &TraceSearch,
) -> Result<TraceEstimate, GeometryError> {
    if resolution < 16 {
        return Err(GeometryError::ResolutionTooSmall(resolution));
    }
    let fem = RadialFem::assemble(geom, resolution);
    let nodes = resolution + 1;
    let mut rhs = vec![0.0; nodes];
    rhs[nodes - 1] = 1.0;

    let quotient_at = |theta: f64| -> f64 {
        let a = 1.0 / theta;
        let b = 1.0 / (1.0 - theta);
        let lower: Vec<f64> = (0..nodes).map(|i| a * fem.mass.lower[i] + b * fem.stiffness.lower[i]).collect();
        let diag: Vec<f64> = (0..nodes).map(|i| a * fem.mass.diag[i] + b * fem.stiffness.diag[i]).collect();
        let upper: Vec<f64> = (0..nodes).map(|i| a * fem.mass.upper[i] + b * fem.stiffness.upper[i]).collect();
        match tridiag::solve(&lower, &diag, &upper, &rhs) {
            Some(x) => {
                let (l2, grad, trace) = h1_parts(&fem, geom, &x);
                trace / (l2 + grad)
            }
            None => 0.0,
        }
    };

    let starts = search.starts.max(3);
    let thetas: Vec<f64> = (1..=starts).map(|k| k as f64 / (starts + 1) as f64).collect();
    let values: Vec<f64> = thetas.iter().map(|&t| quotient_at(t)).collect();
    let (best_idx, mut best) =
        values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });

    let mut lo = if best_idx == 0 { 1e-12 } else { thetas[best_idx - 1] };
    let mut hi = if best_idx + 1 == thetas.len() { 1.0 - 1e-12 } else { thetas[best_idx + 1] };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = quotient_at(x1);
    let mut f2 = quotient_at(x2);
    let mut iterations = 0;
    while hi - lo > search.tol {
        if iterations >= search.max_iter {
            return Err(GeometryError::TraceNotConverged { best: best.max(f1).max(f2), iterations });
        }
        iterations += 1;
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = quotient_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = quotient_at(x2);
        }
        best = best.max(f1).max(f2);
    }
    Ok(TraceEstimate { value: best, grid_resolution: resolution, converged: true })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(n: usize, r: f64) -> BallGeometry {
        BallGeometry::new(n, r).unwrap()
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_half_integer(1.0).unwrap(), 1.0);
        assert!((gamma_half_integer(0.5).unwrap() - PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half_integer(2.5).unwrap() - 0.75 * PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half_integer(5.0).unwrap(), 24.0);
    }

    #[test]
    fn gamma_closed_form_for_half_integers() {
        // (2k)! √π / (4^k k!)
        for k in 0..10u32 {
            let fact = |m: u32| (1..=m).map(f64::from).product::<f64>();
            let expected = fact(2 * k) * PI.sqrt() / (4f64.powi(k as i32) * fact(k));
            let got = gamma_half_integer(k as f64 + 0.5).unwrap();
            assert!((got - expected).abs() <= 1e-14 * expected, "k={k}");
        }
    }

    #[test]
    fn gamma_rejects_bad_arguments() {
        for m in [0.0, -1.0, 0.3, 1.25, f64::NAN, f64::INFINITY] {
            assert!(matches!(gamma_half_integer(m), Err(GeometryError::GammaDomain(_))), "{m}");
        }
    }

    #[test]
    fn gamma_recurrence_exact() {
        for twice in 1..60 {
            let m = twice as f64 / 2.0;
            let lhs = gamma_half_integer(m + 1.0).unwrap();
            let rhs = m * gamma_half_integer(m).unwrap();
            let ulp = f64::EPSILON * lhs.abs();
            assert!((lhs - rhs).abs() <= 4.0 * ulp, "m={m}");
        }
    }

    #[test]
    fn measures_small_dimensions() {
        assert!((ball_volume(&ball(2, 1.0)) - PI).abs() < 1e-14);
        assert!((ball_volume(&ball(1, 2.0)) - 4.0).abs() < 1e-14);
        assert!((ball_volume(&ball(3, 1.0)) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!((sphere_area(&ball(2, 1.0)) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(&ball(3, 1.0)) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(&ball(1, 5.0)) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_ball_rejected() {
        assert!(BallGeometry::new(0, 1.0).is_err());
        assert!(BallGeometry::new(2, 0.0).is_err());
        assert!(BallGeometry::new(2, f64::NAN).is_err());
    }

    #[test]
    fn normal_is_unit_at_boundary() {
        let g = ball(3, 2.0);
        let nu = g.outward_normal(&[0.0, 2.0, 0.0]);
        assert_eq!(nu, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn constant_function_quotient() {
        // u = 1, n = 2, R = 1: sqrt(2π) / sqrt(π) = sqrt(2)
        let q = trace_quotient(&ball(2, 1.0), &vec![1.0; 65]);
        assert!((q - 2f64.sqrt()).abs() < 1e-13, "{q}");
    }

    #[test]
    fn mass_matrix_is_exact_for_quadratics() {
        // ∫_{B_1} r² dx for n = 3 is 4π/5; u = r is not piecewise linear of
        // course, but u linear in r is exactly representable.
        let g = ball(3, 1.0);
        let res = 8;
        let values: Vec<f64> = (0..=res).map(|i| i as f64 / res as f64).collect();
        let (l2, grad, _) = radial_h1_parts(&g, &values);
        assert!((l2 * l2 - 4.0 * PI / 5.0).abs() < 1e-13);
        assert!((grad * grad - 4.0 * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn estimate_dominates_constant() {
        let est = estimate_trace_constant(&ball(2, 1.0), 64).unwrap();
        assert!(est.converged);
        assert!(est.value >= 2f64.sqrt() * (1.0 - 1e-9));
    }

    #[test]
    fn small_resolution_rejected() {
        assert_eq!(estimate_trace_constant(&ball(2, 1.0), 8), Err(GeometryError::ResolutionTooSmall(8)));
    }

    #[test]
    fn non_convergence_reports_best() {
        let search = TraceSearch { starts: 8, tol: 1e-14, max_iter: 3 };
        match estimate_trace_constant_with(&ball(2, 1.0), 32, &search) {
            Err(GeometryError::TraceNotConverged { best, iterations }) => {
                assert_eq!(iterations, 3);
                assert!(best > 1.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
