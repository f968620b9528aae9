//! Discrete radial operator, boundary closure and Newton step.

use crate::exprlang::{Expression, Var};
use crate::problem::{invert_psi_with, BoundaryKind, ProblemError, ProblemSpec};
use crate::tridiag;

use super::{RadialGrid, SolverError, SolverOptions, TimeScheme};

/// Boundary row `g(u_{N-2}, u_{N-1}, u_N) = 0` with its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRow {
    pub residual: f64,
    /// `∂g/∂u_{N-2}`
    pub d_second: f64,
    /// `∂g/∂u_{N-1}`
    pub d_first: f64,
    /// `∂g/∂u_N`
    pub d_last: f64,
}

/// Nodal coefficient values at one time level.
#[derive(Debug, Clone)]
pub(crate) struct Coefficients {
    t: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    f: Vec<f64>,
}

/// Problem bound to a grid with cached derivatives and stencil weights.
#[derive(Debug, Clone)]
pub(crate) struct Discretization<'a> {
    spec: &'a ProblemSpec,
    grid: &'a RadialGrid,
    dh_du: Expression,
    dpsi_du: Expression,
    /// `(r_{i+1/2} / r_i)^{n-1}`
    plus: Vec<f64>,
    /// `(r_{i-1/2} / r_i)^{n-1}`
    minus: Vec<f64>,
}

fn eval(field: &'static str, expr: &Expression, r: f64, t: f64, u: f64) -> Result<f64, SolverError> {
    ProblemSpec::eval_field(field, expr, r, t, u).map_err(SolverError::from)
}

impl<'a> Discretization<'a> {
    pub(crate) fn new(spec: &'a ProblemSpec, grid: &'a RadialGrid) -> Self {
        let power = spec.geometry.dimension() as i32 - 1;
        let nr = grid.len();
        let mut plus = vec![0.0; nr];
        let mut minus = vec![0.0; nr];
        for i in 1..nr {
            let fi = i as f64;
            plus[i] = ((fi + 0.5) / fi).powi(power);
            minus[i] = ((fi - 0.5) / fi).powi(power);
        }
        Self { spec, grid, dh_du: spec.h.derivative(Var::U), dpsi_du: spec.psi.derivative(Var::U), plus, minus }
    }

    pub(crate) fn coefficients(&self, t: f64) -> Result<Coefficients, SolverError> {
        let nodes = self.grid.nodes();
        let mut out = Coefficients {
            t,
            a: Vec::with_capacity(nodes.len()),
            b: Vec::with_capacity(nodes.len()),
            c: Vec::with_capacity(nodes.len()),
            f: Vec::with_capacity(nodes.len()),
        };
        for &r in nodes {
            out.a.push(eval("a", &self.spec.a, r, t, 0.0)?);
            out.b.push(eval("b", &self.spec.b, r, t, 0.0)?);
            out.c.push(eval("c", &self.spec.c, r, t, 0.0)?);
            out.f.push(eval("f", &self.spec.f, r, t, 0.0)?);
        }
        Ok(out)
    }

    /// Linear stencil of row `i < N`: `(lower, diag, upper)` of
    /// `-div(a∇u) + b u_r + c u`.
    fn stencil(&self, k: &Coefficients, i: usize) -> (f64, f64, f64) {
        let dr = self.grid.dr();
        let inv_dr2 = 1.0 / (dr * dr);
        if i == 0 {
            let n = self.spec.geometry.dimension() as f64;
            let w = 2.0 * n * k.a[0] * inv_dr2;
            return (0.0, w + k.c[0], -w);
        }
        let p = self.plus[i] * 0.5 * (k.a[i] + k.a[i + 1]) * inv_dr2;
        let m = self.minus[i] * 0.5 * (k.a[i] + k.a[i - 1]) * inv_dr2;
        let drift = k.b[i] / (2.0 * dr);
        (-m - drift, p + m + k.c[i], -p + drift)
    }

    /// Spatial part `-div(a∇u) + b u_r + c u + h - f` at nodes `0..N`.
    pub(crate) fn spatial(&self, k: &Coefficients, u: &[f64]) -> Result<Vec<f64>, SolverError> {
        let nodes = self.grid.nodes();
        let last = nodes.len() - 1;
        let mut out = Vec::with_capacity(last);
        for i in 0..last {
            let (l, d, up) = self.stencil(k, i);
            let mut s = d * u[i] + up * u[i + 1] - k.f[i];
            if i > 0 {
                s += l * u[i - 1];
            }
            s += eval("h", &self.spec.h, nodes[i], k.t, u[i])?;
            out.push(s);
        }
        Ok(out)
    }

    /// Value the boundary closure prescribes, where it is pre-inverted.
    pub(crate) fn boundary_target(&self, t: f64) -> Result<f64, SolverError> {
        let d = eval("d", &self.spec.d, self.grid.radius(), t, 0.0)?;
        match self.spec.boundary {
            BoundaryKind::Robin => Ok(d),
            BoundaryKind::Neumann | BoundaryKind::Dirichlet => {
                let tol = 1e-12 * d.abs().max(1.0);
                invert_psi_with(&self.spec.psi, &self.dpsi_du, d, tol).map_err(SolverError::from)
            }
        }
    }

    pub(crate) fn boundary_row(&self, target: f64, u: &[f64]) -> Result<BoundaryRow, SolverError> {
        let n = u.len() - 1;
        let inv = 1.0 / (2.0 * self.grid.dr());
        let slope = (3.0 * u[n] - 4.0 * u[n - 1] + u[n - 2]) * inv;
        Ok(match self.spec.boundary {
            BoundaryKind::Robin => {
                let psi = eval("psi", &self.spec.psi, 0.0, 0.0, u[n])?;
                let dpsi = eval("dpsi/du", &self.dpsi_du, 0.0, 0.0, u[n])?;
                BoundaryRow {
                    residual: slope + psi - target,
                    d_second: inv,
                    d_first: -4.0 * inv,
                    d_last: 3.0 * inv + dpsi,
                }
            }
            BoundaryKind::Neumann => {
                BoundaryRow { residual: slope - target, d_second: inv, d_first: -4.0 * inv, d_last: 3.0 * inv }
            }
            BoundaryKind::Dirichlet => {
                BoundaryRow { residual: u[n] - target, d_second: 0.0, d_first: 0.0, d_last: 1.0 }
            }
        })
    }

    /// One time step from `(t0, old)` to `t0 + dt` by Newton iteration.
    ///
    /// Interior rows are `u - u_old + dt·[θ S(u, t1) + (1-θ) S(u_old, t0)]`,
    /// the last row is the boundary closure at `t1`.
    pub(crate) fn newton_step(
        &self,
        old: &[f64],
        t0: f64,
        dt: f64,
        opts: &SolverOptions,
    ) -> Result<(Vec<f64>, usize), SolverError> {
        let t1 = t0 + dt;
        let theta = match opts.scheme {
            TimeScheme::BackwardEuler => 1.0,
            TimeScheme::CrankNicolson => 0.5,
        };
        let k1 = self.coefficients(t1)?;
        let explicit = if theta < 1.0 {
            let k0 = self.coefficients(t0)?;
            self.spatial(&k0, old)?.into_iter().map(|s| (1.0 - theta) * dt * s).collect()
        } else {
            vec![0.0; old.len() - 1]
        };
        let target = self.boundary_target(t1)?;
        let nodes = self.grid.nodes();
        let nr = nodes.len();
        let last = nr - 1;

        let residual = |u: &[f64]| -> Result<(Vec<f64>, BoundaryRow), SolverError> {
            let s = self.spatial(&k1, u)?;
            let mut res: Vec<f64> = (0..last).map(|i| u[i] - old[i] + theta * dt * s[i] + explicit[i]).collect();
            let row = self.boundary_row(target, u)?;
            res.push(row.residual);
            Ok((res, row))
        };
        let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));

        let mut u = old.to_vec();
        let (mut res, mut row) = residual(&u)?;
        let mut norm = max_abs(&res);
        let mut iterations = 0;
        let mut growths = 0;
        let mut lower = vec![0.0; nr];
        let mut diag = vec![0.0; nr];
        let mut upper = vec![0.0; nr];
        while norm > opts.newton_tol || !norm.is_finite() {
            if iterations >= opts.newton_max || growths >= 3 || !norm.is_finite() {
                return Err(SolverError::NewtonFailed { t: t1, dt, iterations, residual: norm });
            }
            for i in 0..last {
                let (l, d, up) = self.stencil(&k1, i);
                let dh = eval("dh/du", &self.dh_du, nodes[i], t1, u[i])?;
                lower[i] = theta * dt * l;
                diag[i] = 1.0 + theta * dt * (d + dh);
                upper[i] = theta * dt * up;
            }
            // eliminate the u_{N-2} entry of the boundary row with row N-1
            let mut rhs: Vec<f64> = res.iter().map(|v| -v).collect();
            let (mut b_first, mut b_last) = (row.d_first, row.d_last);
            if row.d_second != 0.0 {
                let pivot = lower[last - 1];
                if pivot == 0.0 {
                    return Err(SolverError::Singular { t: t1 });
                }
                let factor = row.d_second / pivot;
                b_first -= factor * diag[last - 1];
                b_last -= factor * upper[last - 1];
                rhs[last] -= factor * rhs[last - 1];
            }
            lower[last] = b_first;
            diag[last] = b_last;
            upper[last] = 0.0;
            let delta = tridiag::solve(&lower, &diag, &upper, &rhs).ok_or(SolverError::Singular { t: t1 })?;
            for (ui, di) in u.iter_mut().zip(&delta) {
                *ui += di;
            }
            iterations += 1;
            let next = match residual(&u) {
                Ok(next) => next,
                Err(SolverError::Problem(ProblemError::Evaluation { .. })) => {
                    return Err(SolverError::NewtonFailed { t: t1, dt, iterations, residual: f64::INFINITY })
                }
                Err(e) => return Err(e),
            };
            let new_norm = max_abs(&next.0);
            growths = if new_norm > norm { growths + 1 } else { 0 };
            (res, row) = next;
            norm = new_norm;
        }
        Ok((u, iterations))
    }
}
