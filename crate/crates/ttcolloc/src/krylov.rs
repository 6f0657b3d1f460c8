//! Restarted GMRES over [`DenseField`] vectors, with modified Gram-Schmidt
//! orthogonalization and Givens rotations for the least-squares update.
//!
//! The space-time Jacobian is nonsymmetric, so this is the workhorse linear
//! solver of the full-grid Newton path. The operator is supplied as a
//! closure; nothing here ever sees an assembled matrix.

use crate::field::DenseField;
use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KrylovError {
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("operator produced a field of shape {got:?}, expected {expected:?}")]
    OperatorShape {
        expected: [usize; 4],
        got: [usize; 4],
    },
    #[error("non-finite value encountered during iteration")]
    NonFinite,
}

#[derive(Debug, Clone)]
pub struct KrylovOptions {
    /// Relative residual target: stop once `||A x - b|| <= tol * ||b||`.
    pub tol: f64,
    /// Cap on the total number of inner iterations across restarts.
    pub max_iter: usize,
    /// Krylov subspace dimension per restart cycle.
    pub restart: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 10_000,
            restart: 50,
        }
    }
}

/// Outcome of a GMRES run. Non-convergence is reported, not fatal: the best
/// iterate is always returned so a Newton line search can still make use of
/// the inexact direction.
#[derive(Debug, Clone)]
pub struct KrylovOutcome {
    pub solution: DenseField,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `apply(x) = rhs` with restarted GMRES starting from the zero field.
pub fn krylov_solve<F>(
    apply: F,
    rhs: &DenseField,
    opts: &KrylovOptions,
) -> Result<KrylovOutcome, KrylovError>
where
    F: Fn(&DenseField) -> DenseField,
{
    if !(opts.tol > 0.0) {
        return Err(KrylovError::BadTolerance(opts.tol));
    }
    let shape = rhs.shape();
    let b_norm = rhs.norm();
    if b_norm == 0.0 {
        return Ok(KrylovOutcome {
            solution: DenseField::zeros(shape),
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let m = opts.restart.max(1);

    let mut x = DenseField::zeros(shape);
    let mut total_iters = 0;
    let mut best = x.clone();
    let mut best_rel = 1.0;

    'outer: loop {
        // Explicit residual at the start of each cycle.
        let ax = apply(&x);
        if ax.shape() != shape {
            return Err(KrylovError::OperatorShape {
                expected: shape,
                got: ax.shape(),
            });
        }
        let r = rhs.sub(&ax);
        let beta = r.norm();
        if !beta.is_finite() {
            return Err(KrylovError::NonFinite);
        }
        let rel = beta / b_norm;
        if rel < best_rel {
            best_rel = rel;
            best = x.clone();
        }
        if rel <= opts.tol {
            return Ok(KrylovOutcome {
                solution: x,
                iterations: total_iters,
                relative_residual: rel,
                converged: true,
            });
        }
        if total_iters >= opts.max_iter {
            break;
        }

        let mut basis: Vec<DenseField> = vec![r.scale(1.0 / beta)];
        let mut h = Array2::<f64>::zeros((m + 1, m));
        // Givens rotation pairs and the rotated rhs of the small system.
        let mut cs = vec![0.0_f64; m];
        let mut sn = vec![0.0_f64; m];
        let mut g = vec![0.0_f64; m + 1];
        g[0] = beta;

        let mut j_used = 0;
        for j in 0..m {
            let mut w = apply(&basis[j]);
            // modified Gram-Schmidt
            for (i, v) in basis.iter().enumerate() {
                let hij = w.dot(v);
                h[[i, j]] = hij;
                w.axpy(-hij, v);
            }
            let h_next = w.norm();
            h[[j + 1, j]] = h_next;
            if !h_next.is_finite() {
                return Err(KrylovError::NonFinite);
            }

            // apply accumulated rotations to the new column
            for i in 0..j {
                let tmp = cs[i] * h[[i, j]] + sn[i] * h[[i + 1, j]];
                h[[i + 1, j]] = -sn[i] * h[[i, j]] + cs[i] * h[[i + 1, j]];
                h[[i, j]] = tmp;
            }
            let denom = (h[[j, j]] * h[[j, j]] + h_next * h_next).sqrt();
            if denom == 0.0 {
                // exact breakdown: solution lies in the current subspace
                j_used = j;
                total_iters += 1;
                break;
            }
            cs[j] = h[[j, j]] / denom;
            sn[j] = h_next / denom;
            h[[j, j]] = denom;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];

            total_iters += 1;
            j_used = j + 1;
            let rel_est = g[j + 1].abs() / b_norm;
            if rel_est <= opts.tol || total_iters >= opts.max_iter {
                break;
            }
            if h_next == 0.0 {
                break;
            }
            basis.push(w.scale(1.0 / h_next));
        }

        if j_used == 0 {
            break 'outer;
        }
        // back substitution for y in the j_used x j_used triangular system
        let mut y = vec![0.0_f64; j_used];
        for i in (0..j_used).rev() {
            let mut sum = g[i];
            for k in i + 1..j_used {
                sum -= h[[i, k]] * y[k];
            }
            y[i] = sum / h[[i, i]];
        }
        for (i, yi) in y.iter().enumerate() {
            x.axpy(*yi, &basis[i]);
        }
        if total_iters >= opts.max_iter {
            let ax = apply(&x);
            let rel = rhs.sub(&ax).norm() / b_norm;
            if rel < best_rel {
                best_rel = rel;
                best = x.clone();
            }
            if rel <= opts.tol {
                return Ok(KrylovOutcome {
                    solution: x,
                    iterations: total_iters,
                    relative_residual: rel,
                    converged: true,
                });
            }
            break;
        }
    }

    Ok(KrylovOutcome {
        solution: best,
        iterations: total_iters,
        relative_residual: best_rel,
        converged: false,
    })
}
