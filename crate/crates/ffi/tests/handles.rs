use std::ffi::{CStr, CString};
use std::ptr;

use issparabolic_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(isp_last_error()) }.to_string_lossy().into_owned()
}

fn parse(text: &str) -> *mut IspExpression {
    let c = CString::new(text).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { isp_expression_parse(c.as_ptr(), &mut out) }, IspStatus::Ok);
    out
}

#[test]
fn expression_round_trip() {
    let e = parse("u*ln(1 + u^2)");
    let mut v = 0.0;
    unsafe {
        assert_eq!(isp_expression_eval(e, 0.0, 0.0, 1.0, &mut v), IspStatus::Ok);
        assert!((v - 2f64.ln()).abs() < 1e-15);
        let mut needed = 0usize;
        assert_eq!(isp_expression_to_string(e, ptr::null_mut(), 0, &mut needed), IspStatus::BufferTooSmall);
        let mut buf = vec![0 as std::ffi::c_char; needed];
        assert_eq!(isp_expression_to_string(e, buf.as_mut_ptr(), needed, &mut needed), IspStatus::Ok);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap(), "u * ln(1 + u^2)");
        let mut d = ptr::null_mut();
        assert_eq!(isp_expression_derivative(e, IspVariable::R, &mut d), IspStatus::Ok);
        assert_eq!(isp_expression_eval(d, 0.3, 0.0, 1.0, &mut v), IspStatus::Ok);
        assert_eq!(v, 0.0);
        isp_expression_free(d);
        isp_expression_free(e);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut out = ptr::null_mut();
        let bad = CString::new("sin(").unwrap();
        assert_eq!(isp_expression_parse(bad.as_ptr(), &mut out), IspStatus::ParseError);
        assert!(out.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(isp_expression_parse(ptr::null(), &mut out), IspStatus::NullPointer);
        assert!(last_error().contains("text"));
        let invalid = [0xffu8, 0];
        assert_eq!(isp_expression_parse(invalid.as_ptr().cast(), &mut out), IspStatus::InvalidUtf8);
        let e = parse("ln(u)");
        let mut v = 0.0;
        assert_eq!(isp_expression_eval(e, 0.0, 0.0, -1.0, &mut v), IspStatus::EvalError);
        isp_expression_free(e);
        isp_expression_free(ptr::null_mut());
        isp_scenario_free(ptr::null_mut());
        isp_trajectory_free(ptr::null_mut());
        assert_eq!(isp_trajectory_len(ptr::null()), 0);
        let path = CString::new("/nonexistent.scenario").unwrap();
        let mut s = ptr::null_mut();
        assert_eq!(isp_scenario_load(path.as_ptr(), &mut s), IspStatus::LoadError);
        assert!(last_error().contains("/nonexistent.scenario"));
    }
}

#[test]
fn errors_are_thread_local() {
    unsafe {
        let bad = CString::new("(").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(isp_expression_parse(bad.as_ptr(), &mut out), IspStatus::ParseError);
    }
    let main_msg = last_error();
    let other = std::thread::spawn(last_error).join().unwrap();
    assert!(other.is_empty());
    assert_eq!(last_error(), main_msg);
}

#[test]
fn scenario_simulate_and_verify() {
    let text = CString::new(
        issparabolic::scenario::EXAMPLE_DIRICHLET.replace("nr = 201", "nr = 41").replace("dt = 0.001", "dt = 0.01"),
    )
    .unwrap();
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(isp_scenario_parse(text.as_ptr(), &mut s), IspStatus::Ok);
        let mut c = 0.0;
        assert_eq!(isp_scenario_trace_constant(s, &mut c), IspStatus::Ok);
        assert!((c - 1.1 * 2f64.sqrt()).abs() < 1e-6);
        assert_eq!(isp_scenario_validate(s), IspStatus::Ok);

        let mut t = ptr::null_mut();
        assert_eq!(isp_simulate(s, &mut t), IspStatus::Ok);
        let n = isp_trajectory_len(t);
        assert_eq!(n, 201);
        let mut l2 = vec![0.0; n];
        assert_eq!(isp_trajectory_copy_column(t, IspColumn::L2Norm, l2.as_mut_ptr(), n), IspStatus::Ok);
        assert!(l2.iter().all(|v| v.is_finite() && *v > 0.0));
        assert_eq!(isp_trajectory_copy_column(t, IspColumn::Time, l2.as_mut_ptr(), n - 1), IspStatus::BufferTooSmall);
        isp_trajectory_free(t);

        let dir = tempfile::tempdir().unwrap();
        let dir_c = CString::new(dir.path().to_str().unwrap()).unwrap();
        let (mut passed, mut total) = (0, 0);
        assert_eq!(isp_verify_iss(s, dir_c.as_ptr(), &mut passed, &mut total), IspStatus::Ok, "{}", last_error());
        assert_eq!(passed, total);
        assert!(total >= 6);
        assert!(dir.path().join("report.csv").exists());
        isp_scenario_free(s);
    }
}

#[test]
fn verify_negative_control_and_failed_solve() {
    let base = issparabolic::scenario::EXAMPLE_ROBIN.replace("nr = 201", "nr = 41").replace("dt = 0.001", "dt = 0.01");
    let under = CString::new(base.replace("d = sin(t)^2", "d = 2 * sin(t)^2\nsup_d_override = 0.000001")).unwrap();
    let huge = CString::new(
        base.replace("dt = 0.01", "dt = 2").replace("snapshot_stride = 100", "snapshot_stride = 1\nnewton_max = 1"),
    )
    .unwrap();
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(isp_scenario_parse(under.as_ptr(), &mut s), IspStatus::Ok);
        assert_eq!(isp_verify_iss(s, ptr::null(), ptr::null_mut(), ptr::null_mut()), IspStatus::BoundViolated);
        assert!(last_error().starts_with("violated:"));
        isp_scenario_free(s);

        assert_eq!(isp_scenario_parse(huge.as_ptr(), &mut s), IspStatus::Ok);
        let mut t = ptr::null_mut();
        assert_eq!(isp_simulate(s, &mut t), IspStatus::SolverFailed);
        assert!(!t.is_null());
        assert_eq!(isp_trajectory_len(t), 1);
        isp_trajectory_free(t);
        isp_scenario_free(s);
    }
}

#[test]
fn iss_bound_through_abi() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(isp_scenario_example(IspBoundaryKind::Neumann, 1.0, &mut s), IspStatus::Ok);
        let mut est = std::mem::zeroed::<IspIssEstimate>();
        assert_eq!(isp_scenario_iss_bound(s, 0.0, 1.0, 0.5, 0.3, 1.0, &mut est), IspStatus::Ok);
        assert!(est.epsilon > 0.0 && est.total > est.transient);
        assert_eq!(isp_scenario_iss_bound(s, -1.0, 1.0, 0.5, 0.3, 1.0, &mut est), IspStatus::InvalidArgument);
        isp_scenario_free(s);
    }
}
