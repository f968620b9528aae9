use crate::exprlang::{Bindings, Expression, Var};

use super::ProblemError;

pub const INVERSION_MAX_DOUBLINGS: usize = 60;

/// Solves `ψ(u) = y` for strictly increasing `ψ`.
///
/// Brackets by doubling outward from `[-1, 1]`, bisects, then polishes with
/// Newton steps that must stay inside the bracket.
pub fn invert_psi(psi: &Expression, y: f64, tol: f64) -> Result<f64, ProblemError> {
    invert_psi_with(psi, &psi.derivative(Var::U), y, tol)
}

/// As [`invert_psi`] with a precomputed derivative `dpsi`.
pub fn invert_psi_with(psi: &Expression, dpsi: &Expression, y: f64, tol: f64) -> Result<f64, ProblemError> {
    if !(tol > 0.0) {
        return Err(ProblemError::BadTolerance(tol));
    }
    let eval = |expr: &Expression, field: &'static str, u: f64| {
        expr.evaluate(&Bindings::new().with(Var::U, u)).map_err(|source| ProblemError::Evaluation {
            field,
            r: f64::NAN,
            t: f64::NAN,
            u,
            source,
        })
    };
    let residual = |u: f64| eval(psi, "psi", u).map(|v| v - y);

    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut r_lo = residual(lo)?;
    let mut doublings = 0;
    while r_lo > 0.0 {
        if doublings == INVERSION_MAX_DOUBLINGS {
            return Err(ProblemError::UnboundedInversion { target: y, doublings });
        }
        hi = lo;
        lo *= 2.0;
        r_lo = residual(lo)?;
        doublings += 1;
    }
    let mut r_hi = residual(hi)?;
    while r_hi < 0.0 {
        if doublings == INVERSION_MAX_DOUBLINGS {
            return Err(ProblemError::UnboundedInversion { target: y, doublings });
        }
        lo = hi;
        hi *= 2.0;
        r_hi = residual(hi)?;
        doublings += 1;
    }
    if r_lo == 0.0 {
        return Ok(lo);
    }
    if r_hi == 0.0 {
        return Ok(hi);
    }

    let mut best = (lo, r_lo.abs());
    if r_hi.abs() < best.1 {
        best = (hi, r_hi.abs());
    }
    while best.1 > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let r_mid = residual(mid)?;
        if r_mid.abs() < best.1 {
            best = (mid, r_mid.abs());
        }
        if r_mid == 0.0 {
            return Ok(mid);
        }
        if r_mid < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Newton polish inside the final bracket
    let mut u = best.0;
    for _ in 0..8 {
        let r = residual(u)?;
        if r == 0.0 {
            best = (u, 0.0);
            break;
        }
        let slope = eval(dpsi, "dpsi/du", u)?;
        if !(slope > 0.0) {
            break;
        }
        let next = u - r / slope;
        if next < lo || next > hi || next == u {
            break;
        }
        let r_next = residual(next)?;
        if r_next.abs() >= best.1 {
            break;
        }
        best = (next, r_next.abs());
        u = next;
    }

    if best.1 <= tol {
        Ok(best.0)
    } else {
        Err(ProblemError::InversionInaccurate { target: y, residual: best.1 })
    }
}
