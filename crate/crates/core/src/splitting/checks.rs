//! Individual verification checks.

use crate::bounds::{max_estimate_dirichlet, max_estimate_robin, BoundsError, DisturbanceMagnitudes, IssEstimate};
use crate::exprlang::Var;
use crate::problem::{invert_psi, BoundaryKind, ProblemSpec};
use crate::solver::SolutionTrajectory;

use super::report::{ClaimResult, ClaimRow, VerificationReport, ViolationKind};
use super::{MagnitudeSeries, SplitError, SplitRun};

/// Weak maximum principle on the discrete parabolic boundary (initial nodes
/// and the boundary node at all recorded times).
///
/// With `f ≤ 0` the maximum over the snapshots is bounded by the maximum of
/// `u₊` on the parabolic boundary; with `f ≥ 0` the minimum is bounded below
/// by the minimum of `u₋`. Both apply when `f ≡ 0`; neither when `f` changes
/// sign on the grid. `tol` is absolute.
pub fn check_max_principle(
    traj: &SolutionTrajectory,
    spec: &ProblemSpec,
    tol: f64,
) -> Result<VerificationReport, SplitError> {
    let (mut f_min, mut f_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &t in &traj.times {
        for &r in traj.grid.nodes() {
            let f = ProblemSpec::eval_field("f", &spec.f, r, t, 0.0)?;
            f_min = f_min.min(f);
            f_max = f_max.max(f);
        }
    }
    let initial = traj
        .snapshots
        .first()
        .filter(|s| s.step == 0)
        .ok_or_else(|| SplitError::Precondition("trajectory has no initial snapshot".into()))?;
    let init_max = initial.state.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let init_min = initial.state.values.iter().copied().fold(f64::INFINITY, f64::min);

    // running extremes of the boundary node over all recorded steps
    let mut upper_bound = Vec::with_capacity(traj.len());
    let mut lower_bound = Vec::with_capacity(traj.len());
    let (mut hi, mut lo) = (init_max.max(0.0), init_min.min(0.0));
    for &b in &traj.boundary_value {
        hi = hi.max(b);
        lo = lo.min(b);
        upper_bound.push(hi);
        lower_bound.push(lo);
    }
    let index_of = |t: f64| traj.times.partition_point(|&s| s < t).min(traj.len() - 1);

    let mut report = VerificationReport::default();
    let range = format!("f in [{f_min:.3e}, {f_max:.3e}]");
    if f_max <= 0.0 {
        let rows = traj
            .snapshots
            .iter()
            .map(|s| {
                let measured = s.state.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                ClaimRow { t: s.state.t, measured, bound: upper_bound[index_of(s.state.t)] }
            })
            .collect();
        report
            .push(ClaimResult::new("max_principle_upper", rows, ViolationKind::Absolute, tol).with_note(range.clone()));
    } else {
        report.push(ClaimResult::not_applicable("max_principle_upper", format!("needs f <= 0; {range}")));
    }
    if f_min >= 0.0 {
        let rows = traj
            .snapshots
            .iter()
            .map(|s| {
                let min = s.state.values.iter().copied().fold(f64::INFINITY, f64::min);
                ClaimRow { t: s.state.t, measured: -min, bound: -lower_bound[index_of(s.state.t)] }
            })
            .collect();
        report.push(ClaimResult::new("max_principle_lower", rows, ViolationKind::Absolute, tol).with_note(range));
    } else {
        report.push(ClaimResult::not_applicable("max_principle_lower", format!("needs f >= 0; {range}")));
    }
    Ok(report)
}

/// Maximum estimate of `v` at every recorded `t > 0`: the running maximum of
/// `sup|v|` against the
/// Robin estimate (Neumann: with `ψ⁻¹(sup|d|)` as boundary data) or the
/// Dirichlet estimate, evaluated with the running disturbance sups.
pub fn check_max_estimate(
    v_traj: &SolutionTrajectory,
    spec: &ProblemSpec,
    mags: &MagnitudeSeries,
    tol: f64,
) -> Result<ClaimResult, SplitError> {
    if mags.times.len() != v_traj.len() {
        return Err(SplitError::Precondition("magnitude series and trajectory lengths differ".into()));
    }
    let mut rows = Vec::with_capacity(v_traj.len());
    let mut running = 0.0f64;
    for k in 0..v_traj.len() {
        running = running.max(v_traj.sup_norm[k]);
        let m = mags.at(k);
        let bound = match spec.boundary {
            BoundaryKind::Robin => max_estimate_robin(&spec.constants, &spec.geometry, &m),
            BoundaryKind::Neumann => {
                let inv = invert_psi(&spec.psi, m.sup_d, 1e-13 * m.sup_d.max(1.0))?;
                let data = DisturbanceMagnitudes { sup_d: inv, ..m };
                max_estimate_robin(&spec.constants, &spec.geometry, &data)
            }
            BoundaryKind::Dirichlet => max_estimate_dirichlet(&spec.constants, &m, &spec.psi)?,
        };
        if k > 0 {
            rows.push(ClaimRow { t: v_traj.times[k], measured: running, bound });
        }
    }
    Ok(ClaimResult::new("max_estimate", rows, ViolationKind::Relative, tol))
}

/// `‖w(t)‖ ≤ ‖φ‖ e^{-λt}` at every recorded `t > 0`.
pub fn check_lyapunov_decay(run: &SplitRun, lambda: f64, tol: f64) -> ClaimResult {
    let w0 = run.w_norm[0];
    let rows = run
        .times()
        .iter()
        .zip(&run.w_norm)
        .skip(1)
        .map(|(&t, &w)| ClaimRow { t, measured: w, bound: w0 * (-lambda * t).exp() })
        .collect();
    ClaimResult::new("lyapunov_decay", rows, ViolationKind::Relative, tol).with_note(format!("rate {lambda:.6}"))
}

/// Gronwall envelope `‖w(t)‖² ≤ ‖φ‖² e^{-λt} + (1/λ) max_{s≤t} V(s)` with
/// `V = forcing · max|v|²`; `lambda` is the squared-norm rate.
pub fn check_lyapunov_gronwall(run: &SplitRun, lambda: f64, forcing: f64, tol: f64) -> ClaimResult {
    let w0 = run.w_norm[0];
    let mut max_v = 0.0f64;
    let mut rows = Vec::with_capacity(run.w_norm.len());
    for (k, &t) in run.times().iter().enumerate() {
        max_v = max_v.max(run.v.sup_norm[k]);
        if k > 0 {
            let bound = (w0 * w0 * (-lambda * t).exp() + forcing * max_v * max_v / lambda).sqrt();
            rows.push(ClaimRow { t, measured: run.w_norm[k], bound });
        }
    }
    ClaimResult::new("lyapunov_gronwall", rows, ViolationKind::Relative, tol)
        .with_note(format!("squared rate {lambda:.6}"))
}

/// Residual of the w-equation, `residual ≤ scale·(Δr² + Δt)`.
pub fn check_w_equation_residual(run: &SplitRun, scale: f64) -> ClaimResult {
    let dr = run.u.grid.dr();
    let times = run.times();
    let rows = (1..times.len())
        .map(|k| {
            let dt = times[k] - times[k - 1];
            ClaimRow { t: times[k], measured: run.residual[k], bound: scale * (dr * dr + dt) }
        })
        .collect();
    ClaimResult::new("w_residual", rows, ViolationKind::Relative, 0.0).with_note(format!("scale {scale}"))
}

/// `‖u(t)‖ ≤ estimate(t).total` at every recorded `t > 0`.
pub fn verify_iss<F>(u_traj: &SolutionTrajectory, estimate: F, tol: f64) -> Result<ClaimResult, SplitError>
where
    F: Fn(f64) -> Result<IssEstimate, BoundsError>,
{
    let mut rows = Vec::with_capacity(u_traj.len());
    for (k, &t) in u_traj.times.iter().enumerate() {
        if t <= 0.0 {
            continue;
        }
        rows.push(ClaimRow { t, measured: u_traj.l2_norm[k], bound: estimate(t)?.total });
    }
    Ok(ClaimResult::new("iss_envelope", rows, ViolationKind::Relative, tol))
}

/// Least-squares decay rate `-d ln y / dt` over `t ∈ [t0, t1]`; `None` with
/// fewer than two usable points.
pub fn decay_slope(times: &[f64], values: &[f64], t0: f64, t1: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, y)| **t >= t0 && **t <= t1 && **y > 0.0)
        .map(|(t, y)| (*t, y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(-sxy / sxx)
}

/// Max-norm residual of the w-equation between consecutive steps.
///
/// Uses a discretization independent of the solver's: the divergence term is
/// expanded as `a w'' + (∂_r a + (n-1)a/r) w'` with central differences, and
/// the spatial part is averaged over both time levels. The boundary row is
/// `∂w/∂ν + ψ(u) - ψ(v)` (Robin), `∂w/∂ν` (Neumann) or `w_N` (Dirichlet).
pub(super) fn w_residual_series(
    spec: &ProblemSpec,
    u: &SolutionTrajectory,
    v: &SolutionTrajectory,
) -> Result<Vec<f64>, SplitError> {
    let nodes = u.grid.nodes();
    let nr = nodes.len();
    let dr = u.grid.dr();
    let n = spec.geometry.dimension() as f64;
    let da_dr = spec.a.derivative(Var::R);
    let eval = |field, expr, r, t, x| ProblemSpec::eval_field(field, expr, r, t, x);

    // spatial part of the w-equation at one time level, nodes 0..N-1
    let spatial = |t: f64, uu: &[f64], vv: &[f64]| -> Result<Vec<f64>, SplitError> {
        let mut out = Vec::with_capacity(nr - 1);
        for i in 0..nr - 1 {
            let r = nodes[i];
            let w = |j: usize| uu[j] - vv[j];
            let a = eval("a", &spec.a, r, t, 0.0)?;
            let c = eval("c", &spec.c, r, t, 0.0)?;
            let mut s = if i == 0 {
                -2.0 * n * a * (w(1) - w(0)) / (dr * dr) + c * w(0)
            } else {
                let b = eval("b", &spec.b, r, t, 0.0)?;
                let ar = eval("da/dr", &da_dr, r, t, 0.0)?;
                let w2 = (w(i + 1) - 2.0 * w(i) + w(i - 1)) / (dr * dr);
                let w1 = (w(i + 1) - w(i - 1)) / (2.0 * dr);
                -(a * w2 + (ar + (n - 1.0) * a / r) * w1) + b * w1 + c * w(i)
            };
            s += eval("h", &spec.h, r, t, uu[i])? - eval("h", &spec.h, r, t, vv[i])?;
            out.push(s);
        }
        Ok(out)
    };

    let mut series = vec![0.0; u.len()];
    let mut prev = spatial(u.times[0], &u.snapshots[0].state.values, &v.snapshots[0].state.values)?;
    #[allow(clippy::needless_range_loop)] // k indexes times and both snapshot lists
    for k in 1..u.len() {
        let (t0, t1) = (u.times[k - 1], u.times[k]);
        let dt = t1 - t0;
        let (u0, v0) = (&u.snapshots[k - 1].state.values, &v.snapshots[k - 1].state.values);
        let (u1, v1) = (&u.snapshots[k].state.values, &v.snapshots[k].state.values);
        let cur = spatial(t1, u1, v1)?;
        let mut worst = 0.0f64;
        for i in 0..nr - 1 {
            let dw = (u1[i] - v1[i]) - (u0[i] - v0[i]);
            worst = worst.max((dw / dt + 0.5 * (cur[i] + prev[i])).abs());
        }
        let last = nr - 1;
        let w = |j: usize| u1[j] - v1[j];
        let slope = (3.0 * w(last) - 4.0 * w(last - 1) + w(last - 2)) / (2.0 * dr);
        let boundary = match spec.boundary {
            BoundaryKind::Robin => {
                slope + eval("psi", &spec.psi, 0.0, 0.0, u1[last])? - eval("psi", &spec.psi, 0.0, 0.0, v1[last])?
            }
            BoundaryKind::Neumann => slope,
            BoundaryKind::Dirichlet => w(last),
        };
        series[k] = worst.max(boundary.abs());
        prev = cur;
    }
    Ok(series)
}
