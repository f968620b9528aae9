use std::f64::consts::PI;

use super::*;
use crate::exprlang::Expression;
use crate::geometry::ball_volume;
use crate::problem::{BoundConstants, BoundaryKind};

fn p(s: &str) -> Expression {
    Expression::parse(s).unwrap()
}

fn linear_spec(n: usize, kind: BoundaryKind) -> ProblemSpec {
    let g = BallGeometry::new(n, 1.0).unwrap();
    let mut spec = ProblemSpec::superlinear_example(g, kind, 0.0, 1.0);
    spec.h = p("0");
    spec.psi = p("u");
    spec.phi = p("0");
    spec
}

#[test]
fn radial_grid_endpoints() {
    let g = BallGeometry::new(3, 0.7).unwrap();
    let grid = RadialGrid::new(&g, 31).unwrap();
    assert_eq!(grid.nodes()[0], 0.0);
    assert_eq!(grid.radius(), 0.7);
    assert!((grid.dr() - 0.7 / 30.0).abs() < 1e-16);
    assert!(RadialGrid::new(&g, 2).is_err());
}

#[test]
fn time_grid_steps() {
    assert_eq!(TimeGrid::new(1e-3, 1.0).unwrap().steps(), 1000);
    assert_eq!(TimeGrid::new(0.3, 1.0).unwrap().steps(), 4);
    let tg = TimeGrid::new(0.3, 1.0).unwrap();
    assert_eq!(tg.time(4), 1.0);
    assert!(TimeGrid::new(2.0, 1.0).is_err());
    assert!(TimeGrid::new(0.0, 1.0).is_err());
}

#[test]
fn l2_norm_examples() {
    let disk = BallGeometry::new(2, 1.0).unwrap();
    let ones = StateField { t: 0.0, values: vec![1.0; 51] };
    assert!((l2_norm(&ones, &disk) - PI.sqrt()).abs() < 1e-14);
    let interval = BallGeometry::new(1, 1.0).unwrap();
    assert!((l2_norm(&ones, &interval) - 2f64.sqrt()).abs() < 1e-14);
    let zeros = StateField { t: 0.0, values: vec![0.0; 51] };
    assert_eq!(l2_norm(&zeros, &disk), 0.0);
    for n in 1..=5 {
        let g = BallGeometry::new(n, 1.3).unwrap();
        let total: f64 = l2_weights(&g, 17).iter().sum();
        assert!((total - ball_volume(&g)).abs() < 1e-13 * total);
    }
}

#[test]
fn sup_norm_examples() {
    assert_eq!(sup_norm(&StateField { t: 0.0, values: vec![-3.0; 4] }), 3.0);
    let ramp: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
    assert_eq!(sup_norm(&StateField { t: 0.0, values: ramp }), 1.0);
    assert_eq!(sup_norm(&StateField { t: 0.0, values: vec![0.5, -2.5, 1.0] }), 2.5);
}

#[test]
fn spatial_operator_constant_state() {
    let spec = {
        let mut s = linear_spec(2, BoundaryKind::Robin);
        s.c = p("2 + r");
        s.h = p("u^3");
        s.f = p("t");
        s
    };
    let grid = RadialGrid::new(&spec.geometry, 11).unwrap();
    let k = 1.5;
    let out = spatial_operator(&spec, &grid, &StateField { t: 0.0, values: vec![k; 11] }, 0.25).unwrap();
    assert_eq!(out.len(), 10);
    for (i, s) in out.iter().enumerate() {
        let r = grid.nodes()[i];
        let expected = (2.0 + r) * k + k * k * k - 0.25;
        assert!((s - expected).abs() < 1e-12, "node {i}: {s} vs {expected}");
    }
}

#[test]
fn spatial_operator_quadratic_is_exact() {
    let mut spec = linear_spec(1, BoundaryKind::Robin);
    spec.c = p("0");
    let grid = RadialGrid::new(&spec.geometry, 21).unwrap();
    let values: Vec<f64> = grid.nodes().iter().map(|r| r * r).collect();
    let out = spatial_operator(&spec, &grid, &StateField { t: 0.0, values }, 0.0).unwrap();
    for s in &out {
        assert!((s + 2.0).abs() < 1e-10, "{s}");
    }
}

#[test]
fn boundary_rows() {
    let g = BallGeometry::new(2, 1.0).unwrap();
    let grid = RadialGrid::new(&g, 11).unwrap();
    let mut spec = ProblemSpec::superlinear_example(g, BoundaryKind::Dirichlet, 0.0, 1.0);
    spec.d = p("0");
    let state = StateField { t: 0.0, values: vec![0.3; 11] };
    let row = apply_boundary(&spec, &grid, &state, 0.0).unwrap();
    assert!((row.residual - 0.3).abs() < 1e-15);

    // slope 1 and u_N = 1 under ψ = u + u³: ∂u/∂ν + ψ(u) = 1 + 2
    spec.boundary = BoundaryKind::Robin;
    spec.d = p("3");
    let linear: Vec<f64> = grid.nodes().to_vec();
    let row = apply_boundary(&spec, &grid, &StateField { t: 0.0, values: linear.clone() }, 0.0).unwrap();
    assert!(row.residual.abs() < 1e-12, "{}", row.residual);

    // Neumann with d = 10 forces slope 2
    spec.boundary = BoundaryKind::Neumann;
    spec.d = p("10");
    let slope2: Vec<f64> = linear.iter().map(|r| 2.0 * r).collect();
    let row = apply_boundary(&spec, &grid, &StateField { t: 0.0, values: slope2 }, 0.0).unwrap();
    assert!(row.residual.abs() < 1e-10, "{}", row.residual);
}

#[test]
fn zero_is_an_equilibrium() {
    for kind in BoundaryKind::ALL {
        let g = BallGeometry::new(2, 1.0).unwrap();
        let mut spec = ProblemSpec::superlinear_example(g, kind, 0.0, 1.0);
        spec.phi = p("0");
        let grid = RadialGrid::new(&g, 21).unwrap();
        let tg = TimeGrid::new(0.05, 0.5).unwrap();
        let traj = solve(&spec, &grid, &tg, 1, &SolverOptions::default()).unwrap();
        assert!(traj.newton_iters.iter().all(|&k| k <= 1));
        for s in &traj.snapshots {
            assert!(s.state.values.iter().all(|v| v.abs() <= 1e-10));
        }
    }
}

#[test]
fn linear_problem_needs_one_newton_iteration() {
    for kind in BoundaryKind::ALL {
        let mut spec = linear_spec(2, kind);
        spec.phi = p("(1 - r^2)^2");
        spec.d = p("sin(t)");
        let grid = RadialGrid::new(&spec.geometry, 41).unwrap();
        let state = StateField { t: 0.0, values: grid.nodes().iter().map(|r| (1.0 - r * r).powi(2)).collect() };
        let out = step_implicit(&spec, &grid, &state, 0.01, &SolverOptions::default()).unwrap();
        assert_eq!(out.newton_iters, 1, "{kind}");
        assert_eq!(out.halvings, 0);
    }
}

#[test]
fn example_newton_iterations_are_few() {
    let g = BallGeometry::new(2, 1.0).unwrap();
    let spec = ProblemSpec::superlinear_example(g, BoundaryKind::Robin, 1.0, 1.0);
    let grid = RadialGrid::new(&g, 101).unwrap();
    let tg = TimeGrid::new(1e-3, 0.2).unwrap();
    let traj = solve(&spec, &grid, &tg, 50, &SolverOptions::default()).unwrap();
    assert!(traj.newton_iters.iter().all(|&k| k <= 5), "{:?}", traj.newton_iters.iter().max());
    assert_eq!(traj.times.len(), 201);
    assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(traj.snapshots.first().unwrap().step, 0);
    assert_eq!(traj.snapshots.last().unwrap().step, 200);
}

#[test]
fn forced_failure_keeps_partial_trajectory() {
    let g = BallGeometry::new(2, 1.0).unwrap();
    let spec = ProblemSpec::superlinear_example(g, BoundaryKind::Robin, 50.0, 1.0);
    let grid = RadialGrid::new(&g, 41).unwrap();
    let tg = TimeGrid::new(2.0, 4.0).unwrap();
    let opts = SolverOptions { newton_max: 1, max_halvings: 0, ..SolverOptions::default() };
    let err = solve(&spec, &grid, &tg, 1, &opts).unwrap_err();
    assert!(matches!(err.error, SolverError::NewtonFailed { .. }), "{err}");
    assert_eq!(err.partial.times, vec![0.0]);
}

#[test]
fn positivity_with_nonnegative_data() {
    let g = BallGeometry::new(3, 1.0).unwrap();
    let mut spec = ProblemSpec::superlinear_example(g, BoundaryKind::Robin, 1.0, 1.0);
    spec.f = p("1 + sin(3*t)");
    spec.phi = p("0");
    let grid = RadialGrid::new(&g, 41).unwrap();
    let tg = TimeGrid::new(0.01, 1.0).unwrap();
    let opts = SolverOptions::default();
    let traj = solve(&spec, &grid, &tg, 1, &opts).unwrap();
    let min = traj.min_value.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min >= -10.0 * opts.newton_tol, "{min}");
    for i in 0..traj.len() {
        assert!(traj.l2_norm[i] <= traj.sup_norm[i] * ball_volume(&g).sqrt() * (1.0 + 1e-14));
    }
}

/// Manufactured solution `e^{-t}(1 - r²)²` with `h = u³` and Robin `ψ = u + u³`.
fn mms_spec(n: usize) -> ProblemSpec {
    let g = BallGeometry::new(n, 1.0).unwrap();
    let lap = format!("(-4 + 12*r^2 - 4*{}*(1 - r^2))", n - 1);
    ProblemSpec {
        geometry: g,
        a: p("1"),
        b: p("0"),
        c: p("1"),
        h: p("u^3"),
        psi: p("u + u^3"),
        f: p(&format!("-exp(-t)*{lap} + exp(-3*t)*(1 - r^2)^6")),
        d: p("0"),
        phi: p("(1 - r^2)^2"),
        boundary: BoundaryKind::Robin,
        constants: BoundConstants::new(1.0, 1.0, 0.0, 1.0, 1.0).unwrap(),
    }
}

fn mms_error(spec: &ProblemSpec, nr: usize, dt: f64, horizon: f64, scheme: TimeScheme) -> f64 {
    let grid = RadialGrid::new(&spec.geometry, nr).unwrap();
    let tg = TimeGrid::new(dt, horizon).unwrap();
    let opts = SolverOptions { scheme, newton_tol: 1e-12, ..SolverOptions::default() };
    let traj = solve(spec, &grid, &tg, 1, &opts).unwrap();
    traj.snapshots
        .iter()
        .map(|s| {
            let err: Vec<f64> = grid
                .nodes()
                .iter()
                .zip(&s.state.values)
                .map(|(r, u)| u - (-s.state.t).exp() * (1.0 - r * r).powi(2))
                .collect();
            l2_norm_values(&err, &spec.geometry)
        })
        .fold(0.0, f64::max)
}

#[test]
fn manufactured_solution_spatial_order() {
    let spec = mms_spec(2);
    let e1 = mms_error(&spec, 11, 0.01, 0.2, TimeScheme::CrankNicolson);
    let e2 = mms_error(&spec, 21, 0.0025, 0.2, TimeScheme::CrankNicolson);
    let order = (e1 / e2).log2();
    assert!(order > 1.7, "order {order} ({e1}, {e2})");
}

#[test]
fn crank_nicolson_matches_backward_euler_limit() {
    let spec = mms_spec(1);
    let be = mms_error(&spec, 41, 0.01, 0.2, TimeScheme::BackwardEuler);
    let cn = mms_error(&spec, 41, 0.01, 0.2, TimeScheme::CrankNicolson);
    assert!(cn < be, "cn {cn} be {be}");
}

#[test]
fn trajectory_csv_format() {
    let spec = linear_spec(1, BoundaryKind::Dirichlet);
    let grid = RadialGrid::new(&spec.geometry, 5).unwrap();
    let traj = solve(&spec, &grid, &TimeGrid::new(0.5, 1.0).unwrap(), 1, &SolverOptions::default()).unwrap();
    let mut buf = Vec::new();
    write_trajectory_csv(&traj, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], TRAJECTORY_HEADER);
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[1], "0,0,0,0,0");
    let mut buf = Vec::new();
    write_snapshot_csv(grid.nodes(), &traj.snapshots[0].state, &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("r,u\n0,0\n0.25,0\n"));
}
