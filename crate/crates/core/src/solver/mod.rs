//! Radially symmetric finite-difference solver.
//!
//! Unknowns are nodal values `u_i ≈ u(r_i, t)` on a uniform grid of `[0, R]`.
//! The divergence term uses the conservative radial form with arithmetic
//! face averages of `a`; the origin uses the symmetric stencil
//! `2n a_0 (u_1 - u_0) / Δr²`. The boundary node carries the boundary
//! closure with a second-order one-sided normal derivative. Robin conditions
//! stay nonlinear in the Newton system; Neumann and Dirichlet conditions are
//! pre-inverted through `ψ⁻¹`.

mod export;
mod operator;

use std::fmt;

use thiserror::Error;

use crate::geometry::BallGeometry;
use crate::problem::{ProblemError, ProblemSpec};

pub use export::{write_snapshot_csv, write_snapshots, write_trajectory_csv, TRAJECTORY_HEADER};
pub use operator::BoundaryRow;

use operator::Discretization;

/// Maximum number of times a failing step is split in half.
pub const MAX_HALVINGS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("non-finite initial value {value} at r = {r}")]
    NonFiniteInitial { r: f64, value: f64 },
    #[error("Newton iteration failed at t = {t} (dt = {dt}) after {iterations} iterations, residual {residual:e}")]
    NewtonFailed { t: f64, dt: f64, iterations: usize, residual: f64 },
    #[error("singular Newton system at t = {t}")]
    Singular { t: f64 },
    #[error("state has {got} values but the grid has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },
}

/// Uniform radial grid `r_i = iΔr`, `i = 0..N_r-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    dr: f64,
}

impl RadialGrid {
    pub fn new(geometry: &BallGeometry, node_count: usize) -> Result<Self, SolverError> {
        if node_count < 3 {
            return Err(SolverError::InvalidGrid(format!("need at least 3 radial nodes, got {node_count}")));
        }
        let radius = geometry.radius();
        let cells = node_count - 1;
        let dr = radius / cells as f64;
        let mut nodes: Vec<f64> = (0..node_count).map(|i| radius * i as f64 / cells as f64).collect();
        nodes[cells] = radius;
        Ok(Self { nodes, dr })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dr(&self) -> f64 {
        self.dr
    }

    pub fn radius(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }
}

/// Uniform time grid; the last step is shortened to land on `T` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, horizon: f64) -> Result<Self, SolverError> {
        if !(dt > 0.0) || !dt.is_finite() || !(horizon > 0.0) || !horizon.is_finite() {
            return Err(SolverError::InvalidGrid(format!("need dt > 0 and T > 0, got dt = {dt}, T = {horizon}")));
        }
        if dt > horizon {
            return Err(SolverError::InvalidGrid(format!("dt = {dt} exceeds T = {horizon}")));
        }
        let ratio = horizon / dt;
        // absorb round-off so that T = k·dt gives exactly k steps
        let steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio { ratio.round() } else { ratio.ceil() };
        Ok(Self { dt, horizon, steps: steps as usize })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Time of step `k`.
    pub fn time(&self, k: usize) -> f64 {
        if k >= self.steps {
            self.horizon
        } else {
            k as f64 * self.dt
        }
    }
}

/// Nodal values at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    pub t: f64,
    pub values: Vec<f64>,
}

impl StateField {
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Stored state at a time step.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub state: StateField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeScheme {
    #[default]
    BackwardEuler,
    /// Second order in time; the discrete maximum principle may fail for
    /// large steps.
    CrankNicolson,
}

impl std::str::FromStr for TimeScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "backward_euler" | "backward-euler" | "be" => Ok(TimeScheme::BackwardEuler),
            "crank_nicolson" | "crank-nicolson" | "cn" => Ok(TimeScheme::CrankNicolson),
            other => Err(format!("unknown time scheme '{other}' (expected backward_euler or crank_nicolson)")),
        }
    }
}

impl fmt::Display for TimeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TimeScheme::BackwardEuler => "backward_euler",
            TimeScheme::CrankNicolson => "crank_nicolson",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub newton_tol: f64,
    pub newton_max: usize,
    pub scheme: TimeScheme,
    pub max_halvings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { newton_tol: 1e-10, newton_max: 25, scheme: TimeScheme::BackwardEuler, max_halvings: MAX_HALVINGS }
    }
}

/// Result of [`step_implicit`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: StateField,
    /// Newton iterations summed over all sub-steps.
    pub newton_iters: usize,
    /// Deepest halving level used.
    pub halvings: usize,
}

/// Discrete spatial part `-div(a∇u) + b ∂_r u + c u + h(r,t,u) - f(r,t)`
/// at the nodes `r_0, …, r_{N_r-2}`; the boundary node is governed by
/// [`apply_boundary`] instead.
pub fn spatial_operator(
    spec: &ProblemSpec,
    grid: &RadialGrid,
    state: &StateField,
    t: f64,
) -> Result<Vec<f64>, SolverError> {
    check_len(grid, &state.values)?;
    let disc = Discretization::new(spec, grid);
    let k = disc.coefficients(t)?;
    disc.spatial(&k, &state.values)
}

/// Boundary row at `r = R` and time `t` for the state `state`:
/// Robin `∂u/∂ν + ψ(u_N) - d`, Neumann `∂u/∂ν - ψ⁻¹(d)`, Dirichlet
/// `u_N - ψ⁻¹(d)`, with `∂u/∂ν ≈ (3u_N - 4u_{N-1} + u_{N-2}) / (2Δr)`.
pub fn apply_boundary(
    spec: &ProblemSpec,
    grid: &RadialGrid,
    state: &StateField,
    t: f64,
) -> Result<BoundaryRow, SolverError> {
    check_len(grid, &state.values)?;
    let disc = Discretization::new(spec, grid);
    let target = disc.boundary_target(t)?;
    disc.boundary_row(target, &state.values)
}

/// Advances `state` by `dt`, splitting the step in halves (recursively, at
/// most `opts.max_halvings` levels) when Newton fails.
pub fn step_implicit(
    spec: &ProblemSpec,
    grid: &RadialGrid,
    state: &StateField,
    dt: f64,
    opts: &SolverOptions,
) -> Result<StepOutcome, SolverError> {
    check_len(grid, &state.values)?;
    let disc = Discretization::new(spec, grid);
    step_with(&disc, state, dt, opts)
}

fn step_with(
    disc: &Discretization<'_>,
    state: &StateField,
    dt: f64,
    opts: &SolverOptions,
) -> Result<StepOutcome, SolverError> {
    fn go(
        disc: &Discretization<'_>,
        values: &[f64],
        t0: f64,
        dt: f64,
        depth: usize,
        opts: &SolverOptions,
    ) -> Result<(Vec<f64>, usize, usize), SolverError> {
        match disc.newton_step(values, t0, dt, opts) {
            Ok((u, iters)) => Ok((u, iters, depth)),
            Err(e) if depth >= opts.max_halvings => Err(e),
            Err(_) => {
                let half = 0.5 * dt;
                let (mid, i1, d1) = go(disc, values, t0, half, depth + 1, opts)?;
                let (end, i2, d2) = go(disc, &mid, t0 + half, half, depth + 1, opts)?;
                Ok((end, i1 + i2, d1.max(d2)))
            }
        }
    }
    let (values, newton_iters, halvings) = go(disc, &state.values, state.t, dt, 0, opts)?;
    Ok(StepOutcome { state: StateField { t: state.t + dt, values }, newton_iters, halvings })
}

fn check_len(grid: &RadialGrid, values: &[f64]) -> Result<(), SolverError> {
    if values.len() != grid.len() {
        return Err(SolverError::LengthMismatch { expected: grid.len(), got: values.len() });
    }
    Ok(())
}

/// Time series and snapshots of one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTrajectory {
    pub geometry: BallGeometry,
    pub grid: RadialGrid,
    pub times: Vec<f64>,
    pub l2_norm: Vec<f64>,
    pub sup_norm: Vec<f64>,
    pub boundary_value: Vec<f64>,
    pub max_value: Vec<f64>,
    pub min_value: Vec<f64>,
    pub newton_iters: Vec<usize>,
    pub snapshots: Vec<Snapshot>,
    pub snapshot_stride: usize,
}

impl SolutionTrajectory {
    fn new(geometry: BallGeometry, grid: RadialGrid, snapshot_stride: usize) -> Self {
        Self {
            geometry,
            grid,
            times: Vec::new(),
            l2_norm: Vec::new(),
            sup_norm: Vec::new(),
            boundary_value: Vec::new(),
            max_value: Vec::new(),
            min_value: Vec::new(),
            newton_iters: Vec::new(),
            snapshots: Vec::new(),
            snapshot_stride,
        }
    }

    fn record(&mut self, step: usize, state: &StateField, iters: usize, snapshot: bool) {
        let v = &state.values;
        self.times.push(state.t);
        self.l2_norm.push(l2_norm(state, &self.geometry));
        self.sup_norm.push(sup_norm(state));
        self.boundary_value.push(v[v.len() - 1]);
        self.max_value.push(v.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        self.min_value.push(v.iter().copied().fold(f64::INFINITY, f64::min));
        self.newton_iters.push(iters);
        if snapshot {
            self.snapshots.push(Snapshot { step, state: state.clone() });
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Snapshot whose time is closest to `t`.
    pub fn snapshot_near(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().min_by(|a, b| (a.state.t - t).abs().total_cmp(&(b.state.t - t).abs()))
    }
}

/// Failed solve with the trajectory computed up to the failure.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error} (trajectory retained up to t = {})", partial.final_time())]
pub struct SolveFailure {
    pub error: SolverError,
    pub partial: Box<SolutionTrajectory>,
}

/// Marches from `φ` to `T`, recording norms every step and snapshots every
/// `snapshot_stride` steps (plus the first and last).
pub fn solve(
    spec: &ProblemSpec,
    grid: &RadialGrid,
    time: &TimeGrid,
    snapshot_stride: usize,
    opts: &SolverOptions,
) -> Result<SolutionTrajectory, SolveFailure> {
    let stride = snapshot_stride.max(1);
    let mut traj = SolutionTrajectory::new(spec.geometry, grid.clone(), stride);
    let fail = |error: SolverError, traj: SolutionTrajectory| SolveFailure { error, partial: Box::new(traj) };
    if (grid.radius() - spec.geometry.radius()).abs() > 1e-12 * spec.geometry.radius() {
        return Err(fail(SolverError::InvalidGrid("grid radius differs from the ball radius".into()), traj));
    }
    if !(opts.newton_tol > 0.0) {
        return Err(fail(SolverError::Problem(ProblemError::BadTolerance(opts.newton_tol)), traj));
    }
    let mut values = Vec::with_capacity(grid.len());
    for &r in grid.nodes() {
        match ProblemSpec::eval_field("phi", &spec.phi, r, 0.0, 0.0) {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => return Err(fail(SolverError::NonFiniteInitial { r, value: v }, traj)),
            Err(e) => return Err(fail(e.into(), traj)),
        }
    }
    let mut state = StateField { t: 0.0, values };
    traj.record(0, &state, 0, true);
    let disc = Discretization::new(spec, grid);
    for k in 1..=time.steps() {
        let dt = time.time(k) - time.time(k - 1);
        match step_with(&disc, &state, dt, opts) {
            Ok(out) => {
                state = out.state;
                state.t = time.time(k);
                let snap = k % stride == 0 || k == time.steps();
                traj.record(k, &state, out.newton_iters, snap);
            }
            Err(e) => return Err(fail(e, traj)),
        }
    }
    Ok(traj)
}

/// Nodal quadrature weights `|∂B_1| ∫ χ_i(r) r^{n-1} dr` of the hat
/// functions; these coincide with the composite trapezoid rule for `n ≤ 2`
/// and integrate constants exactly for every `n`.
pub fn l2_weights(geometry: &BallGeometry, node_count: usize) -> Vec<f64> {
    let m = geometry.dimension() as i32 - 1;
    let cells = node_count - 1;
    let h = geometry.radius() / cells as f64;
    let area = geometry.unit_sphere_area();
    let mut w = vec![0.0; node_count];
    let moment = |k: i32, a: f64, b: f64| (b.powi(k + 1) - a.powi(k + 1)) / (k + 1) as f64;
    for e in 0..cells {
        let a = e as f64 * h;
        let b = (e + 1) as f64 * h;
        let i0 = moment(m, a, b);
        let i1 = moment(m + 1, a, b);
        w[e] += area * (b * i0 - i1) / h;
        w[e + 1] += area * (i1 - a * i0) / h;
    }
    w
}

/// `‖u‖_{L²(B_R)}` of a radial nodal field.
pub fn l2_norm(state: &StateField, geometry: &BallGeometry) -> f64 {
    l2_norm_values(&state.values, geometry)
}

pub fn l2_norm_values(values: &[f64], geometry: &BallGeometry) -> f64 {
    let w = l2_weights(geometry, values.len());
    values.iter().zip(&w).map(|(u, w)| w * u * u).sum::<f64>().sqrt()
}

/// `max_i |u_i|`.
pub fn sup_norm(state: &StateField) -> f64 {
    state.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests;
