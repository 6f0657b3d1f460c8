//! Space-time Chebyshev spectral collocation for the 3D nonlinear
//! convection-diffusion equation
//!
//! ```text
//!   u_t - a(u) Lap(u) + b(u) . grad(u) = f(u)        on [0,T] x Omega
//!   u = g on the boundary,   u(0, .) = h
//! ```
//!
//! discretized simultaneously in time and space on Chebyshev-Gauss-Lobatto
//! grids, so a single nonlinear solve covers the whole time horizon. The
//! crate provides two solver paths over the same discretization:
//!
//! * **full grid** ([`fullgrid`]): matrix-free Kronecker operator
//!   application, Newton with line search, restarted GMRES;
//! * **tensor train** ([`tt`], [`tensorized`], [`step_newton`]): the reduced
//!   nonlinear system tensorized into TT format, solved by a step-truncation
//!   TT-Newton method whose rounding tolerance tightens adaptively with the
//!   Newton residual, keeping iterates on a low-rank manifold.
//!
//! The [`problems`] module ships canonical benchmark instances (a synthetic
//! tensor root-finding task, a manufactured nonlinear convection-diffusion
//! problem and a 3D viscous Burgers problem with exact solutions), and
//! [`experiment`] drives them from the `ttcolloc` binary. See the crate
//! examples for runnable walk-throughs of each capability.

pub mod chebyshev;
pub mod experiment;
pub mod field;
pub mod fullgrid;
pub mod krylov;
pub mod problem;
pub mod problems;
pub mod step_newton;
pub mod tensorized;
pub mod tt;

pub use chebyshev::ChebyshevGrid1D;
pub use field::{DenseField, Factor, KroneckerTerm};
pub use problem::{IndexSplit, ProblemSpec, SpaceTimeGrids};
pub use tt::{TTMatrix, TTTensor};
