//! GMRES with the Krylov basis kept in TT form. Every operator application
//! and orthogonalization step is followed by a rounding at a fraction of
//! the requested tolerance, so basis ranks stay bounded while the recurrence
//! stays accurate enough for the residual estimate.

use super::matrix::TTMatrix;
use super::{TTTensor, TtError};
use ndarray::Array2;

#[derive(Debug, Clone)]
pub struct TtKrylovOptions {
    /// Relative residual target.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    /// Rounding tolerance applied to Krylov vectors (typically `eps / 10`).
    pub round_eps: f64,
}

impl TtKrylovOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            max_iter: 400,
            restart: 30,
            round_eps: tol / 10.0,
        }
    }
}

#[derive(Debug)]
pub struct TtKrylovOutcome {
    pub solution: TTTensor,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solves `A x = rhs` by restarted TT-GMRES from the zero tensor.
pub fn tt_linear_solve(
    a: &TTMatrix,
    rhs: &TTTensor,
    opts: &TtKrylovOptions,
) -> Result<TtKrylovOutcome, TtError> {
    if a.in_sizes() != a.out_sizes() {
        return Err(TtError::ModeMismatch(a.in_sizes(), a.out_sizes()));
    }
    if a.in_sizes() != rhs.mode_sizes() {
        return Err(TtError::ModeMismatch(a.in_sizes(), rhs.mode_sizes()));
    }
    let modes = rhs.mode_sizes();
    let b_norm = rhs.norm();
    if b_norm == 0.0 {
        return Ok(TtKrylovOutcome {
            solution: TTTensor::zeros(&modes),
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        });
    }
    let m = opts.restart.max(1);
    let round_eps = opts.round_eps;

    let mut x = TTTensor::zeros(&modes);
    let mut total = 0;
    let mut best = x.clone();
    let mut best_rel = f64::INFINITY;

    loop {
        let r = rhs.sub(&a.matvec(&x)?)?.round(round_eps);
        let beta = r.norm();
        if !beta.is_finite() {
            return Err(TtError::NonFinite("tt-gmres residual"));
        }
        let rel = beta / b_norm;
        if rel < best_rel {
            best_rel = rel;
            best = x.clone();
        }
        if rel <= opts.tol {
            return Ok(TtKrylovOutcome {
                solution: x,
                iterations: total,
                relative_residual: rel,
                converged: true,
            });
        }
        if total >= opts.max_iter {
            break;
        }

        let mut basis: Vec<TTTensor> = vec![r.scale(1.0 / beta)];
        let mut h = Array2::<f64>::zeros((m + 1, m));
        let mut cs = vec![0.0_f64; m];
        let mut sn = vec![0.0_f64; m];
        let mut g = vec![0.0_f64; m + 1];
        g[0] = beta;

        let mut j_used = 0;
        for j in 0..m {
            let mut w = a.matvec(&basis[j])?.round(round_eps);
            for (i, v) in basis.iter().enumerate() {
                let hij = w.dot(v)?;
                h[[i, j]] = hij;
                if hij != 0.0 {
                    w = w.sub(&v.scale(hij))?.round(round_eps);
                }
            }
            let h_next = w.norm();
            h[[j + 1, j]] = h_next;

            for i in 0..j {
                let tmp = cs[i] * h[[i, j]] + sn[i] * h[[i + 1, j]];
                h[[i + 1, j]] = -sn[i] * h[[i, j]] + cs[i] * h[[i + 1, j]];
                h[[i, j]] = tmp;
            }
            let denom = (h[[j, j]] * h[[j, j]] + h_next * h_next).sqrt();
            if denom == 0.0 {
                j_used = j;
                total += 1;
                break;
            }
            cs[j] = h[[j, j]] / denom;
            sn[j] = h_next / denom;
            h[[j, j]] = denom;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];

            total += 1;
            j_used = j + 1;
            if g[j + 1].abs() / b_norm <= opts.tol || total >= opts.max_iter || h_next == 0.0 {
                break;
            }
            basis.push(w.scale(1.0 / h_next));
        }

        if j_used == 0 {
            break;
        }
        let mut y = vec![0.0_f64; j_used];
        for i in (0..j_used).rev() {
            let mut sum = g[i];
            for k in i + 1..j_used {
                sum -= h[[i, k]] * y[k];
            }
            y[i] = sum / h[[i, i]];
        }
        for (i, yi) in y.iter().enumerate() {
            if *yi != 0.0 {
                x = x.add(&basis[i].scale(*yi))?.round(round_eps);
            }
        }
        if total >= opts.max_iter {
            let rel = rhs.sub(&a.matvec(&x)?)?.norm() / b_norm;
            if rel < best_rel {
                best_rel = rel;
                best = x.clone();
            }
            if rel <= opts.tol {
                return Ok(TtKrylovOutcome {
                    solution: x,
                    iterations: total,
                    relative_residual: rel,
                    converged: true,
                });
            }
            break;
        }
    }

    Ok(TtKrylovOutcome {
        solution: best,
        iterations: total,
        relative_residual: best_rel,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_system_returns_rhs() {
        let rhs = TTTensor::random_uniform(80, &[3, 4, 3, 2], &[2, 2, 2]).unwrap();
        let id = TTMatrix::identity(&[3, 4, 3, 2]);
        let out = tt_linear_solve(&id, &rhs, &TtKrylovOptions::new(1e-10)).unwrap();
        assert!(out.converged);
        assert!(out.solution.sub(&rhs).unwrap().norm() <= 1e-9 * rhs.norm());
    }

    #[test]
    fn constant_diagonal_halves_rhs() {
        let modes = [3, 3, 3, 3];
        let rhs = TTTensor::random_uniform(81, &modes, &[2, 2, 2]).unwrap();
        let two = TTMatrix::diag(&TTTensor::constant(&modes, 2.0));
        let out = tt_linear_solve(&two, &rhs, &TtKrylovOptions::new(1e-10)).unwrap();
        assert!(out.converged);
        let want = rhs.scale(0.5);
        assert!(out.solution.sub(&want).unwrap().norm() <= 1e-8 * want.norm());
    }

    #[test]
    fn diagonal_system_matches_dense_solve() {
        // well-conditioned positive diagonal operator
        let modes = [3, 3, 3, 3];
        let shift = TTTensor::random_uniform(82, &modes, &[2, 2, 2]).unwrap();
        let diag = TTTensor::constant(&modes, 3.0).add(&shift).unwrap();
        let a = TTMatrix::diag(&diag);
        let rhs = TTTensor::random_uniform(83, &modes, &[2, 2, 2]).unwrap();
        let out = tt_linear_solve(&a, &rhs, &TtKrylovOptions::new(1e-9)).unwrap();
        assert!(out.converged);

        let dd = diag.to_dense().unwrap();
        let rd = rhs.to_dense().unwrap();
        let want: Vec<f64> = rd
            .as_slice()
            .iter()
            .zip(dd.as_slice())
            .map(|(r, d)| r / d)
            .collect();
        let got = out.solution.to_dense().unwrap();
        let err: f64 = got
            .as_slice()
            .iter()
            .zip(&want)
            .map(|(g, w)| (g - w) * (g - w))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = want.iter().map(|w| w * w).sum::<f64>().sqrt();
        assert!(err <= 1e-7 * scale, "relative error {}", err / scale);
    }

    #[test]
    fn residual_contract_on_convergence() {
        let modes = [4, 4, 4, 4];
        let shift = TTTensor::random_uniform(84, &modes, &[3, 3, 3]).unwrap();
        let diag = TTTensor::constant(&modes, 2.0).add(&shift).unwrap();
        let a = TTMatrix::diag(&diag);
        let rhs = TTTensor::random_uniform(85, &modes, &[2, 2, 2]).unwrap();
        let tol = 1e-7;
        let out = tt_linear_solve(&a, &rhs, &TtKrylovOptions::new(tol)).unwrap();
        assert!(out.converged);
        let resid = rhs
            .sub(&a.matvec(&out.solution).unwrap())
            .unwrap()
            .norm();
        assert!(resid <= tol * rhs.norm() * 1.5, "residual {resid}");
    }
}
