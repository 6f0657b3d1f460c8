//! Canonical benchmark problems: the synthetic tensor root-finding task,
//! the manufactured nonlinear convection-diffusion problem, and the 3D
//! viscous Burgers problem, each with its exact solution.

use crate::problem::ProblemSpec;
use crate::step_newton::TTSystem;
use crate::tt::cross::tt_coefficient;
use crate::tt::{TTMatrix, TTTensor, TtError};
use std::f64::consts::PI;

/// Manufactured nonlinear convection-diffusion problem on
/// `[0,1] x [-2,2]^3` with
/// `u_exact = exp(-0.1 t) sin(pi x) sin(pi y) sin(pi z)`,
/// `a(u) = 1 + u^2`, `b(u) = [u, 1, 1]`, `f(u) = u - u^3`.
///
/// The stated coefficients do not make `u_exact` an exact solution on their
/// own, so the PDE defect of `u_exact` is moved into the right-hand side as
/// a source term (method of manufactured solutions); IC and BC are sampled
/// from `u_exact`.
pub fn manufactured_ncd() -> ProblemSpec {
    fn u(t: f64, x: f64, y: f64, z: f64) -> f64 {
        (-0.1 * t).exp() * (PI * x).sin() * (PI * y).sin() * (PI * z).sin()
    }
    fn source(t: f64, x: f64, y: f64, z: f64) -> f64 {
        let e = (-0.1 * t).exp();
        let (sx, sy, sz) = ((PI * x).sin(), (PI * y).sin(), (PI * z).sin());
        let (cx, cy, cz) = ((PI * x).cos(), (PI * y).cos(), (PI * z).cos());
        let u = e * sx * sy * sz;
        let u_t = -0.1 * u;
        let u_x = PI * e * cx * sy * sz;
        let u_y = PI * e * sx * cy * sz;
        let u_z = PI * e * sx * sy * cz;
        let lap = -3.0 * PI * PI * u;
        // u_t - a(u) lap + b(u).grad - f(u)
        u_t - (1.0 + u * u) * lap + (u * u_x + u_y + u_z) - (u - u * u * u)
    }
    ProblemSpec {
        name: "manufactured",
        diffusion: Box::new(|u| 1.0 + u * u),
        diffusion_du: Box::new(|u| 2.0 * u),
        convection: [
            Box::new(|u| u),
            Box::new(|_| 1.0),
            Box::new(|_| 1.0),
        ],
        convection_du: [
            Box::new(|_| 1.0),
            Box::new(|_| 0.0),
            Box::new(|_| 0.0),
        ],
        forcing: Box::new(|u| u - u * u * u),
        forcing_du: Box::new(|u| 1.0 - 3.0 * u * u),
        source: Some(Box::new(source)),
        boundary: Box::new(u),
        initial: Box::new(|x, y, z| u(0.0, x, y, z)),
        time_interval: (0.0, 1.0),
        space_intervals: [(-2.0, 2.0); 3],
        exact: Some(Box::new(u)),
    }
}

/// 3D viscous Burgers problem `u_t + u (u_x + u_y + u_z) = Lap(u)` on
/// `[0,1] x [0,6]^3`, i.e. `a = 1`, `b(u) = [u, u, u]`, `f = 0`, with the
/// travelling-front exact solution
/// `u = (2/3) pi E sin(w) / (5 + E cos(w))`,
/// `E = exp(-pi^2 t / 3)`, `w = pi (x + y + z) / 3`.
pub fn burgers3d() -> ProblemSpec {
    fn u(t: f64, x: f64, y: f64, z: f64) -> f64 {
        let e = (-PI * PI * t / 3.0).exp();
        let w = PI * (x + y + z) / 3.0;
        (2.0 / 3.0) * PI * e * w.sin() / (5.0 + e * w.cos())
    }
    ProblemSpec {
        name: "burgers",
        diffusion: Box::new(|_| 1.0),
        diffusion_du: Box::new(|_| 0.0),
        convection: [Box::new(|u| u), Box::new(|u| u), Box::new(|u| u)],
        convection_du: [Box::new(|_| 1.0), Box::new(|_| 1.0), Box::new(|_| 1.0)],
        forcing: Box::new(|_| 0.0),
        forcing_du: Box::new(|_| 0.0),
        source: None,
        boundary: Box::new(u),
        initial: Box::new(|x, y, z| u(0.0, x, y, z)),
        time_interval: (0.0, 1.0),
        space_intervals: [(0.0, 6.0); 3],
        exact: Some(Box::new(u)),
    }
}

/// Homogeneous linear heat problem (`a = 1`, `b = 0`, `f = 0`, `g = h = 0`)
/// whose solution is identically zero. Handy as a smoke test.
pub fn linear_heat() -> ProblemSpec {
    ProblemSpec {
        name: "linear-heat",
        diffusion: Box::new(|_| 1.0),
        diffusion_du: Box::new(|_| 0.0),
        convection: [Box::new(|_| 0.0), Box::new(|_| 0.0), Box::new(|_| 0.0)],
        convection_du: [Box::new(|_| 0.0), Box::new(|_| 0.0), Box::new(|_| 0.0)],
        forcing: Box::new(|_| 0.0),
        forcing_du: Box::new(|_| 0.0),
        source: None,
        boundary: Box::new(|_, _, _, _| 0.0),
        initial: Box::new(|_, _, _| 0.0),
        time_interval: (0.0, 1.0),
        space_intervals: [(-1.0, 1.0); 3],
        exact: Some(Box::new(|_, _, _, _| 0.0)),
    }
}

/// Linear heat problem with a nonzero separable exact solution
/// `u = exp(-3 pi^2 t / 4) cos(pi x / 2) cos(pi y / 2) cos(pi z / 2)`
/// on `[0,1] x [-1,1]^3` (homogeneous BC, nonzero IC).
pub fn linear_heat_with_data() -> ProblemSpec {
    fn u(t: f64, x: f64, y: f64, z: f64) -> f64 {
        (-0.75 * PI * PI * t).exp()
            * (0.5 * PI * x).cos()
            * (0.5 * PI * y).cos()
            * (0.5 * PI * z).cos()
    }
    ProblemSpec {
        name: "linear-heat-cos",
        diffusion: Box::new(|_| 1.0),
        diffusion_du: Box::new(|_| 0.0),
        convection: [Box::new(|_| 0.0), Box::new(|_| 0.0), Box::new(|_| 0.0)],
        convection_du: [Box::new(|_| 0.0), Box::new(|_| 0.0), Box::new(|_| 0.0)],
        forcing: Box::new(|_| 0.0),
        forcing_du: Box::new(|_| 0.0),
        source: None,
        boundary: Box::new(u),
        initial: Box::new(|x, y, z| u(0.0, x, y, z)),
        time_interval: (0.0, 1.0),
        space_intervals: [(-1.0, 1.0); 3],
        exact: Some(Box::new(u)),
    }
}

/// Nonlinear 2-D `(t, x)` test problem used with singleton `y`/`z` grids;
/// exercises every coefficient path of the reduced system at oracle scale.
pub fn test_2d_nonlinear() -> ProblemSpec {
    fn g(t: f64, x: f64, _y: f64, _z: f64) -> f64 {
        0.3 * (-t).exp() * (0.5 * PI * x).cos()
    }
    ProblemSpec {
        name: "test-2d",
        diffusion: Box::new(|u| 1.0 + u * u),
        diffusion_du: Box::new(|u| 2.0 * u),
        convection: [Box::new(|u| u), Box::new(|_| 0.0), Box::new(|_| 0.0)],
        convection_du: [Box::new(|_| 1.0), Box::new(|_| 0.0), Box::new(|_| 0.0)],
        forcing: Box::new(|u| u - u * u * u),
        forcing_du: Box::new(|u| 1.0 - 3.0 * u * u),
        source: None,
        boundary: Box::new(g),
        initial: Box::new(|x, y, z| g(0.0, x, y, z)),
        time_interval: (0.0, 1.0),
        space_intervals: [(-1.0, 1.0); 3],
        exact: None,
    }
}

/// The synthetic tensor root-finding task: find `Y` with
/// `q(Y) = exp(-Y) - Y^3 - G = 0` where `G = exp(-Y_exact) - Y_exact^3`
/// for a deterministic pseudo-random low-rank `Y_exact`.
pub struct Experiment1 {
    pub y_exact: TTTensor,
    /// `G = exp(-Y_exact) - Y_exact^3`, built by TT elementwise arithmetic.
    pub rhs: TTTensor,
    seed: u64,
}

impl Experiment1 {
    /// `Y_exact` comes from TT cores with entries uniform in `[0, 1]`
    /// (rounded at 1e-12 to canonicalize), normalized so the largest tensor
    /// entry is 1. Every run with the same seed, mode sizes and ranks sees
    /// the same instance.
    pub fn new(seed: u64, mode_sizes: &[usize], ranks: &[usize]) -> Result<Self, TtError> {
        let raw = TTTensor::random_uniform(seed, mode_sizes, ranks)?.round(1e-12);
        let max_entry = raw
            .to_dense()?
            .as_slice()
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let y_exact = raw.scale(1.0 / max_entry);
        let exp_part = tt_coefficient(|v| (-v).exp(), &y_exact, 1e-12, seed ^ 0x9e37)?;
        let y3 = y_exact
            .hadamard(&y_exact)?
            .round(1e-12)
            .hadamard(&y_exact)?
            .round(1e-12);
        let rhs = exp_part.sub(&y3)?.round(1e-12);
        Ok(Self { y_exact, rhs, seed })
    }

    /// Relative error of an iterate against the known root.
    pub fn error_vs_exact(&self, y: &TTTensor) -> Result<f64, TtError> {
        Ok(y.sub(&self.y_exact)?.norm() / self.y_exact.norm())
    }

    /// A rank-one constant initial guess.
    pub fn initial_guess(&self) -> TTTensor {
        TTTensor::constant(&self.y_exact.mode_sizes(), 1.0)
    }
}

impl TTSystem for Experiment1 {
    fn residual(&self, y: &TTTensor, eps: f64) -> Result<TTTensor, TtError> {
        let exp_part = tt_coefficient(|v| (-v).exp(), y, eps, self.seed ^ 0x51a)?;
        let y3 = y.hadamard(y)?.round(eps).hadamard(y)?.round(eps);
        Ok(exp_part.sub(&y3)?.sub(&self.rhs)?.round(eps))
    }

    fn jacobian(&self, y: &TTTensor, eps: f64) -> Result<TTMatrix, TtError> {
        // q'(y) = -exp(-y) - 3 y^2, elementwise
        let deriv = tt_coefficient(|v| -(-v).exp() - 3.0 * v * v, y, eps, self.seed ^ 0xd1a)?;
        Ok(TTMatrix::diag(&deriv))
    }
}

/// Experiment-1 instance at the paper's scale: 16^4 modes, exact ranks (3,3,3).
pub fn experiment1_rootfind(seed: u64) -> Result<Experiment1, TtError> {
    Experiment1::new(seed, &[16, 16, 16, 16], &[3, 3, 3])
}
