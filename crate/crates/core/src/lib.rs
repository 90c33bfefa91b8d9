//! Numerical workbench for functional equations of the form
//! `f(F(x, y)) = H[f(x), f(y), x, y]` on an interval `[a, b]` with boundary
//! data `f(a) = A`, `f(b) = B`.
//!
//! The solver expands the orbit of the endpoints under the two slice maps
//! `t -> F(a, t)` and `t -> F(t, b)` and propagates the boundary values
//! along it, then reconstructs a tabulated solution and measures equation
//! residuals both on the boundary set Γ (the two edges `{a} x [a,b]` and
//! `[a,b] x {b}`) and on the full square. A large residual on the square
//! combined with a consistent table on Γ flags the instance as
//! overdetermined: the boundary-restricted equation pins the candidate
//! down, but no function satisfies the equation everywhere.
//!
//! Modules:
//! - [`exprdsl`]: the arithmetic expression DSL for `F`, `H`, and
//!   closed-form references.
//! - [`dynsys`]: orbit expansion, contraction estimates, epsilon-nets.
//! - [`hypotheses`]: grid verification of the standing assumptions.
//! - [`solver`]: boundary-value propagation and reconstruction.
//! - [`verify`]: residual scans and closed-form comparison.
//!
//! The grid scans parallelize with rayon when the `parallel` feature
//! (default) is enabled; results are bit-identical with and without it.

pub mod dynsys;
pub mod exprdsl;
pub mod hypotheses;
pub mod parallel;
pub mod solver;
pub mod verify;

mod numfmt;
