//! Step-truncation TT-Newton: Newton's method over tensor-train iterates
//! where every candidate step is recompressed ("truncated") at a tolerance
//! that tightens adaptively with the Newton residual,
//!
//! ```text
//!   eps_k = max(eps_floor, min(eps_{k-1}, ||G_k|| / ||G_0||, ||delta|| / ||U||))
//! ```
//!
//! so early iterations stay aggressively low-rank while late iterations
//! allow just enough rank to realize the requested accuracy.

use crate::tt::{tt_linear_solve, TTMatrix, TTTensor, TtError, TtKrylovOptions};
use std::time::Instant;
use thiserror::Error;

pub use crate::fullgrid::StopReason;

#[derive(Debug, Error)]
pub enum TtNewtonError {
    #[error(transparent)]
    Tt(#[from] TtError),
    #[error("residual norm is not finite at iteration {0}")]
    NonFinite(usize),
}

/// A nonlinear system in TT form: residual and Jacobian evaluated and
/// recompressed at the current truncation tolerance.
pub trait TTSystem {
    fn residual(&self, u: &TTTensor, eps: f64) -> Result<TTTensor, TtError>;
    fn jacobian(&self, u: &TTTensor, eps: f64) -> Result<TTMatrix, TtError>;
}

#[derive(Debug, Clone)]
pub struct StepNewtonOptions {
    /// Initial truncation tolerance `eps_TT^0`.
    pub eps0: f64,
    /// Adaptive tolerance update on (step truncation); off reproduces the
    /// fixed-eps TT-Newton variant.
    pub adaptive: bool,
    /// Floor under the adaptive tolerance; rounding below unit round-off is
    /// meaningless.
    pub eps_floor: f64,
    pub tol_res: f64,
    pub tol_update: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Restart length of the inner TT-GMRES.
    pub restart: usize,
    pub max_linear_iter: usize,
}

impl Default for StepNewtonOptions {
    fn default() -> Self {
        Self {
            eps0: 1e-1,
            adaptive: true,
            eps_floor: 1e-12,
            tol_res: 1e-6,
            tol_update: 1e-6,
            max_iter: 40,
            max_halvings: 20,
            restart: 30,
            max_linear_iter: 600,
        }
    }
}

/// One row of the iteration history.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    /// `||G(U^k)||` at the accepted iterate.
    pub residual_norm: f64,
    /// `||delta^k||` of the Newton correction (zero for the initial row).
    pub update_norm: f64,
    /// Truncation tolerance in force during the iteration.
    pub eps: f64,
    pub ranks: Vec<usize>,
    pub compression_ratio: f64,
    pub step_factor: f64,
    pub linear_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct StepTruncationState {
    pub history: Vec<IterationRecord>,
    pub residual_norm_0: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub final_relative_residual: f64,
    pub final_eps: f64,
    pub wall_seconds: f64,
}

impl StepTruncationState {
    pub fn max_rank(&self) -> usize {
        self.history
            .iter()
            .flat_map(|r| r.ranks.iter().copied())
            .max()
            .unwrap_or(1)
    }

    pub fn eps_trace(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.eps).collect()
    }
}

/// Runs the step-truncation TT-Newton iteration on `system` from `u0`.
pub fn step_truncation_newton(
    system: &dyn TTSystem,
    u0: &TTTensor,
    opts: &StepNewtonOptions,
) -> Result<(TTTensor, StepTruncationState), TtNewtonError> {
    assert!(opts.eps0 > 0.0, "eps0 must be positive");
    let start = Instant::now();
    let mut eps_k = opts.eps0;
    let mut u = u0.round(eps_k);
    let mut g = system.residual(&u, eps_k)?;
    let mut g_norm = g.norm();
    let g0_norm = g_norm;

    let mut state = StepTruncationState {
        history: vec![IterationRecord {
            residual_norm: g_norm,
            update_norm: 0.0,
            eps: eps_k,
            ranks: u.ranks(),
            compression_ratio: u.compression_ratio(),
            step_factor: 0.0,
            linear_iterations: 0,
        }],
        residual_norm_0: g0_norm,
        iterations: 0,
        converged: false,
        stop: StopReason::MaxIterations,
        final_relative_residual: 1.0,
        final_eps: eps_k,
        wall_seconds: 0.0,
    };

    if g0_norm == 0.0 {
        state.converged = true;
        state.stop = StopReason::ResidualTol;
        state.final_relative_residual = 0.0;
        state.wall_seconds = start.elapsed().as_secs_f64();
        return Ok((u, state));
    }

    for k in 0..opts.max_iter {
        if !g_norm.is_finite() {
            return Err(TtNewtonError::NonFinite(k));
        }
        let rel = g_norm / g0_norm;
        if rel < opts.tol_res {
            state.converged = true;
            state.stop = StopReason::ResidualTol;
            break;
        }

        let jac = system.jacobian(&u, eps_k)?;
        let eta = (0.5 * rel).min(1e-2);
        let lin = tt_linear_solve(
            &jac,
            &g.scale(-1.0),
            &TtKrylovOptions {
                tol: eta,
                max_iter: opts.max_linear_iter,
                restart: opts.restart,
                round_eps: eps_k / 10.0,
            },
        )?;
        let delta = lin.solution;
        let delta_norm = delta.norm();
        let u_norm = u.norm();

        // line search with the truncation step: every candidate is
        // recompressed at eps_k before its residual is measured
        let mut s = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand = u.add(&delta.scale(s))?.round(eps_k);
            let gc = system.residual(&cand, eps_k)?;
            let gc_norm = gc.norm();
            if gc_norm.is_finite() && gc_norm <= g_norm {
                accepted = Some((cand, gc, gc_norm, s));
                break;
            }
            s *= 0.5;
        }
        let Some((cand, gc, gc_norm, s_used)) = accepted else {
            state.stop = StopReason::LineSearchStall;
            break;
        };

        u = cand;
        g = gc;
        g_norm = gc_norm;
        state.iterations += 1;
        state.history.push(IterationRecord {
            residual_norm: g_norm,
            update_norm: delta_norm,
            eps: eps_k,
            ranks: u.ranks(),
            compression_ratio: u.compression_ratio(),
            step_factor: s_used,
            linear_iterations: lin.iterations,
        });

        let update_ratio = delta_norm / u_norm.max(f64::MIN_POSITIVE);
        if update_ratio < opts.tol_update {
            state.converged = true;
            state.stop = StopReason::UpdateTol;
            break;
        }

        if opts.adaptive {
            eps_k = eps_k
                .min(g_norm / g0_norm)
                .min(update_ratio)
                .max(opts.eps_floor);
        }
    }

    if !state.converged && g_norm / g0_norm < opts.tol_res {
        state.converged = true;
        state.stop = StopReason::ResidualTol;
    }
    state.final_relative_residual = g_norm / g0_norm;
    state.final_eps = eps_k;
    state.wall_seconds = start.elapsed().as_secs_f64();
    Ok((u, state))
}
