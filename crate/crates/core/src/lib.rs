//! Simulation and stability verification for nonlinear parabolic equations
//! on an n-dimensional ball.
//!
//! The toolkit solves
//!
//! ```text
//! u_t - div(a ∇u) + b·∇u + c u + h(x, t, u) = f     in B_R × (0, T]
//! B[u] = d                                           on ∂B_R × (0, T]
//! u(·, 0) = φ                                        in B_R
//! ```
//!
//! with a Robin (`∂u/∂ν + ψ(u)`), Neumann (`ψ(∂u/∂ν)`) or Dirichlet (`ψ(u)`)
//! boundary operator, restricted to radially symmetric data, and checks the
//! computed solutions against closed-form maximum estimates and
//! input-to-state stability envelopes.
//!
//! Modules:
//!
//! * [`geometry`]: ball and sphere measures, trace-constant estimation.
//! * [`exprlang`]: the expression language used for coefficients and data.
//! * [`problem`]: problem description and structural validators.
//! * [`solver`]: radial finite-difference solver with implicit time stepping.
//! * [`bounds`]: closed-form maximum estimates and ISS envelopes.
//! * [`splitting`]: the `u = v + w` decomposition and verification checks.
//! * [`scenario`] / [`cli`]: scenario files and command-line front end.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod exprlang;
pub mod geometry;
pub mod problem;
pub mod scenario;
pub mod solver;
pub mod splitting;

mod tridiag;

pub use exprlang::Expression;
pub use geometry::BallGeometry;
pub use problem::{BoundConstants, BoundaryKind, ProblemSpec};
