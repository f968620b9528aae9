use super::*;
use crate::bounds::{iss_bound_robin, DisturbanceMagnitudes};
use crate::geometry::BallGeometry;
use crate::solver::SolverOptions;

fn p(s: &str) -> Expression {
    Expression::parse(s).unwrap()
}

fn example(n: usize, kind: BoundaryKind, amplitude: f64) -> ProblemSpec {
    ProblemSpec::superlinear_example(BallGeometry::new(n, 1.0).unwrap(), kind, amplitude, 1.0)
}

fn split(spec: &ProblemSpec, nr: usize, dt: f64, horizon: f64) -> SplitRun {
    let grid = RadialGrid::new(&spec.geometry, nr).unwrap();
    run_split(spec, &grid, &TimeGrid::new(dt, horizon).unwrap(), &SolverOptions::default()).unwrap()
}

#[test]
fn v_spec_zeroes_initial_data_only() {
    let mut spec = example(2, BoundaryKind::Robin, 1.0);
    spec.phi = p("1 - r^2");
    let v = build_v_spec(&spec);
    assert_eq!(v.phi, p("0"));
    assert_eq!(ProblemSpec { phi: spec.phi.clone(), ..v.clone() }, spec);
    assert_eq!(build_v_spec(&v), v);
    spec.phi = p("0");
    assert_eq!(build_v_spec(&spec), spec);
}

#[test]
fn splitting_pipeline_identity() {
    let spec = example(2, BoundaryKind::Robin, 1.0);
    let grid = RadialGrid::new(&spec.geometry, 21).unwrap();
    let tg = TimeGrid::new(0.01, 0.2).unwrap();
    let opts = SolverOptions::default();
    let restored = ProblemSpec { phi: spec.phi.clone(), ..build_v_spec(&spec) };
    let a = solve(&spec, &grid, &tg, 1, &opts).unwrap();
    let b = solve(&restored, &grid, &tg, 1, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn zero_initial_data_gives_zero_w() {
    let mut spec = example(2, BoundaryKind::Robin, 1.0);
    spec.phi = p("0");
    let run = split(&spec, 21, 0.01, 0.3);
    assert!(run.w_norm.iter().all(|&w| w == 0.0));
    assert!(run.residual.iter().all(|&r| r == 0.0));
    assert!(check_lyapunov_decay(&run, 100.0, 0.0).passed());
}

#[test]
fn max_principle_heat_bump() {
    let mut spec = example(2, BoundaryKind::Dirichlet, 0.0);
    spec.h = p("0");
    spec.f = p("-1");
    spec.d = p("0");
    spec.phi = p("exp(-10*r^2) - exp(-10)");
    let grid = RadialGrid::new(&spec.geometry, 41).unwrap();
    let traj = solve(&spec, &grid, &TimeGrid::new(0.01, 0.5).unwrap(), 1, &SolverOptions::default()).unwrap();
    let report = check_max_principle(&traj, &spec, 1e-9).unwrap();
    assert!(report.passed(), "{report}");
    assert!(report.get("max_principle_upper").unwrap().applicable);
    assert!(!report.get("max_principle_lower").unwrap().applicable);

    let mut corrupted = traj.clone();
    let mid = corrupted.snapshots.len() / 2;
    corrupted.snapshots[mid].state.values[5] = 10.0;
    assert!(!check_max_principle(&corrupted, &spec, 1e-9).unwrap().passed());
}

#[test]
fn max_principle_zero_solution() {
    let mut spec = example(1, BoundaryKind::Robin, 0.0);
    spec.phi = p("0");
    let grid = RadialGrid::new(&spec.geometry, 11).unwrap();
    let traj = solve(&spec, &grid, &TimeGrid::new(0.1, 0.5).unwrap(), 1, &SolverOptions::default()).unwrap();
    let report = check_max_principle(&traj, &spec, 0.0).unwrap();
    assert!(report.passed());
    assert_eq!(report.claims.iter().filter(|c| c.applicable).count(), 2);
}

#[test]
fn max_estimate_example_and_negative_control() {
    let spec = example(2, BoundaryKind::Robin, 1.0);
    let run = split(&spec, 51, 0.01, 1.0);
    let mags = MagnitudeSeries::sample(&spec, &run.u.grid, run.times(), &SupOverrides::default()).unwrap();
    let claim = check_max_estimate(&run.v, &spec, &mags.without_initial(), 0.02).unwrap();
    assert!(claim.passed());
    assert!(claim.worst().unwrap().margin() > 0.0);
    let mut scaled = claim.clone();
    scaled.rows.iter_mut().for_each(|r| r.bound /= 1e6);
    assert!(!scaled.passed());
}

#[test]
fn lyapunov_decay_slope() {
    let mut spec = example(2, BoundaryKind::Robin, 0.0);
    spec.phi = p("0.5*(1 - r^2)^2");
    let run = split(&spec, 41, 0.005, 2.0);
    let claim = check_lyapunov_decay(&run, 1.0, 0.02);
    assert!(claim.passed(), "{:?}", claim.worst());
    let slope = decay_slope(run.times(), &run.u.l2_norm, 0.5, 2.0).unwrap();
    assert!(slope >= 1.0 - 0.05, "{slope}");
    assert!(!check_lyapunov_decay(&run, 10.0 * slope, 0.02).passed());
}

#[test]
fn decay_slope_of_exponential() {
    let t: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
    let y: Vec<f64> = t.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
    assert!((decay_slope(&t, &y, 0.0, 5.0).unwrap() - 0.7).abs() < 1e-12);
    assert!(decay_slope(&t, &y, 10.0, 11.0).is_none());
}

#[test]
fn w_residual_shrinks_under_refinement() {
    let spec = example(2, BoundaryKind::Robin, 1.0);
    let coarse = split(&spec, 21, 0.0025, 0.5);
    let fine = split(&spec, 41, 0.000625, 0.5);
    let rc = coarse.residual.iter().copied().fold(0.0, f64::max);
    let rf = fine.residual.iter().copied().fold(0.0, f64::max);
    assert!(rc / rf >= 3.0);
    assert!(check_w_equation_residual(&coarse, DEFAULT_RESIDUAL_SCALE).passed());
}

#[test]
fn mismatched_strides_are_rejected() {
    let spec = example(2, BoundaryKind::Robin, 1.0);
    let grid = RadialGrid::new(&spec.geometry, 11).unwrap();
    let tg = TimeGrid::new(0.1, 0.5).unwrap();
    let opts = SolverOptions::default();
    let u = solve(&spec, &grid, &tg, 2, &opts).unwrap();
    let v = solve(&build_v_spec(&spec), &grid, &tg, 1, &opts).unwrap();
    assert!(matches!(SplitRun::from_trajectories(&spec, u, v), Err(SplitError::Precondition(_))));
}

#[test]
fn iss_envelope_and_negative_control() {
    let spec = example(2, BoundaryKind::Robin, 1.0);
    let run = split(&spec, 41, 0.01, 1.0);
    let mags = MagnitudeSeries::sample(&spec, &run.u.grid, run.times(), &SupOverrides::default()).unwrap();
    let est = |t: f64| iss_bound_robin(&spec.constants, &spec.geometry, &mags.at_time(t), t);
    let claim = verify_iss(&run.u, est, 0.02).unwrap();
    assert!(claim.passed());
    let tiny = |t: f64| {
        let mut e = iss_bound_robin(&spec.constants, &spec.geometry, &mags.at_time(t), t)?;
        e.total /= 1e6;
        Ok(e)
    };
    assert!(!verify_iss(&run.u, tiny, 0.02).unwrap().passed());
}

#[test]
fn zero_scenario_passes_everything() {
    let mut spec = example(2, BoundaryKind::Robin, 0.0);
    spec.phi = p("0");
    let grid = RadialGrid::new(&spec.geometry, 21).unwrap();
    let v = verify_spec(
        &spec,
        &grid,
        &TimeGrid::new(0.05, 0.5).unwrap(),
        &SolverOptions::default(),
        &VerifyConfig::default(),
    )
    .unwrap();
    assert!(v.report.passed(), "{}", v.report);
}

#[test]
fn full_pipeline_on_each_boundary_kind() {
    for kind in BoundaryKind::ALL {
        let spec = example(2, kind, 1.0);
        let grid = RadialGrid::new(&spec.geometry, 41).unwrap();
        let v = verify_spec(
            &spec,
            &grid,
            &TimeGrid::new(0.005, 1.0).unwrap(),
            &SolverOptions::default(),
            &VerifyConfig::default(),
        )
        .unwrap();
        assert!(v.report.passed(), "{kind}\n{}", v.report);
    }
}

#[test]
fn sup_override_below_true_sup_violates() {
    let spec = example(2, BoundaryKind::Robin, 2.0);
    let grid = RadialGrid::new(&spec.geometry, 41).unwrap();
    let cfg = VerifyConfig { overrides: SupOverrides { sup_f: None, sup_d: Some(1e-6) }, ..VerifyConfig::default() };
    let v = verify_spec(&spec, &grid, &TimeGrid::new(0.01, 2.0).unwrap(), &SolverOptions::default(), &cfg).unwrap();
    assert!(!v.report.passed());
}

#[test]
fn checks_are_monotone_in_tol() {
    let spec = example(2, BoundaryKind::Robin, 1.0);
    let run = split(&spec, 21, 0.02, 1.0);
    let claim = check_lyapunov_decay(&run, 1.3, 0.0);
    let worst = claim.max_violation();
    for tol in [0.0, 0.01, 0.1, 1.0] {
        let c = check_lyapunov_decay(&run, 1.3, tol);
        assert_eq!(c.passed(), worst <= tol);
    }
}

#[test]
fn magnitude_series_running_sup() {
    let spec = example(1, BoundaryKind::Robin, 2.0);
    let grid = RadialGrid::new(&spec.geometry, 11).unwrap();
    let times = [0.0, 0.5, 1.0, 1.5, 2.0];
    let m = MagnitudeSeries::sample(&spec, &grid, &times, &SupOverrides::default()).unwrap();
    assert_eq!(m.sup_d[0], 0.0);
    assert!(m.sup_d.windows(2).all(|w| w[1] >= w[0]));
    assert!((m.sup_d[3] - 2.0 * 1.5f64.sin().powi(2)).abs() < 1e-14);
    assert_eq!(m.at_time(1.2), DisturbanceMagnitudes { sup_d: m.sup_d[2], ..m.at(2) });
    let o =
        MagnitudeSeries::sample(&spec, &grid, &times, &SupOverrides { sup_f: Some(3.0), sup_d: Some(4.0) }).unwrap();
    assert!(o.sup_d.iter().all(|&v| v == 4.0) && o.sup_f.iter().all(|&v| v == 3.0));
    assert!((m.sup_phi - 0.5).abs() < 1e-15);
}
