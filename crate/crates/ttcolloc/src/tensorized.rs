//! Tensorization of the reduced nonlinear system: the interior-restricted
//! space-time operators in TT-matrix form, the boundary term, and the
//! residual/Jacobian assembly consumed by the step-truncation TT-Newton
//! driver.
//!
//! Interior operators slice the 1-D matrices to the interior index sets
//! `I_t = 1..N` (the final-time plane is interior) and `I_s = 1..N-1`. The
//! boundary term is carried by "map" operators whose factors keep all
//! columns but only interior rows, applied to the boundary-value tensor
//! `G_bc`; their products are fixed across Newton iterations and are
//! precomputed once.

use crate::field::Factor;
use crate::problem::{IndexSplit, ProblemError, ProblemSpec, SpaceTimeGrids};
use crate::step_newton::TTSystem;
use crate::tt::cross::{tt_coefficient, tt_cross, CrossOptions};
use crate::tt::{TTMatrix, TTTensor, TtError};
use ndarray::{s, Array2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorizeError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Tt(#[from] TtError),
    #[error("boundary tensor cross interpolation stalled at error {achieved:e} (target {target:e})")]
    BoundaryCross { achieved: f64, target: f64 },
}

/// Interior-restricted operators and precomputed boundary contributions.
pub struct TTOperatorSet {
    /// Time derivative on interior nodes, rank 1.
    pub a_t: TTMatrix,
    /// Spatial Laplacian on interior nodes, rank 3.
    pub laplacian: TTMatrix,
    /// First spatial derivatives on interior nodes, rank 1 each.
    pub gradients: [TTMatrix; 3],
    /// Full-grid boundary-value tensor (g/h on BC/IC nodes, zero inside).
    pub g_bc: TTTensor,
    /// `A_t_map * G_bc` in interior shape.
    pub bc_time: TTTensor,
    /// `L_map * G_bc` in interior shape.
    pub bc_laplacian: TTTensor,
    /// `grad_i_map * G_bc` in interior shape.
    pub bc_gradients: [TTTensor; 3],
    /// Achieved cross-interpolation error of `g_bc`.
    pub boundary_error: f64,
}

/// Magnitude of the problem's boundary/initial data, probed at random
/// domain points. Anchors the absolute acceptance floor of the boundary
/// cross interpolation: when a grid happens to sample the data at its
/// zeros, the boundary tensor is round-off noise and only an absolute
/// tolerance is meaningful.
fn problem_data_scale(problem: &ProblemSpec, seed: u64) -> f64 {
    use rand::prelude::*;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0xda7a_5ca1e);
    let (t0, t1) = problem.time_interval;
    let mut scale = 0.0_f64;
    for _ in 0..256 {
        let t = rng.random_range(t0..=t1);
        let mut p = [0.0; 3];
        for (k, v) in p.iter_mut().enumerate() {
            let (a, b) = problem.space_intervals[k];
            *v = rng.random_range(a..=b);
        }
        scale = scale.max((problem.initial)(p[0], p[1], p[2]).abs());
        // project onto a random face for the boundary data
        let axis = rng.random_range(0..3);
        let (a, b) = problem.space_intervals[axis];
        p[axis] = if rng.random_bool(0.5) { a } else { b };
        scale = scale.max((problem.boundary)(t, p[0], p[1], p[2]).abs());
    }
    scale
}

fn interior_matrix(m: &Array2<f64>, rows: std::ops::Range<usize>) -> Array2<f64> {
    m.slice(s![rows.clone(), rows]).to_owned()
}

fn map_matrix(m: &Array2<f64>, rows: std::ops::Range<usize>) -> Array2<f64> {
    m.slice(s![rows, ..]).to_owned()
}

fn selector(n: usize, rows: std::ops::Range<usize>) -> Array2<f64> {
    Array2::eye(n).slice(s![rows, ..]).to_owned()
}

/// Builds the TT-format boundary-value tensor by cross interpolation over
/// the full grid.
pub fn build_boundary_tensor(
    problem: &ProblemSpec,
    grids: &SpaceTimeGrids,
    split: &IndexSplit,
    eps_cross: f64,
    seed: u64,
) -> Result<(TTTensor, f64), TensorizeError> {
    let shape = grids.shape();
    let eval = |idx: &[usize]| -> f64 {
        let idx4 = [idx[0], idx[1], idx[2], idx[3]];
        if split.is_interior(idx4) {
            return 0.0;
        }
        let (t, x, y, z) = grids.node(idx4);
        if idx4[0] == 0 {
            (problem.initial)(x, y, z)
        } else {
            (problem.boundary)(t, x, y, z)
        }
    };
    let mut opts = CrossOptions::with_seed(eps_cross, seed);
    opts.rank_cap = 96;
    opts.abs_tol = eps_cross * problem_data_scale(problem, seed);
    let out = tt_cross(&eval, &shape, &opts)?;
    if !out.converged {
        return Err(TensorizeError::BoundaryCross {
            achieved: out.achieved_error,
            target: eps_cross,
        });
    }
    Ok((out.tensor, out.achieved_error))
}

/// Assembles the interior operators and boundary contributions for one
/// problem/grid pair.
pub fn build_tt_operators(
    problem: &ProblemSpec,
    grids: &SpaceTimeGrids,
    split: &IndexSplit,
    eps_cross: f64,
    seed: u64,
) -> Result<TTOperatorSet, TensorizeError> {
    let shape = grids.shape();
    assert!(
        shape.iter().all(|&n| n >= 3),
        "the TT path needs at least 3 points per mode"
    );
    let n = shape[0];
    let t_rows = 1..n;
    let s_rows = |m: usize| 1..shape[m] - 1;

    let d1 = |m: usize| &grids.grids[m].d1;
    let d2 = |m: usize| &grids.grids[m].d2;
    let int_len =
        |m: usize| if m == 0 { shape[0] - 1 } else { shape[m] - 2 };

    let a_t = TTMatrix::from_kronecker(&[
        Factor::Matrix(interior_matrix(d1(0), t_rows.clone())),
        Factor::Identity(int_len(1)),
        Factor::Identity(int_len(2)),
        Factor::Identity(int_len(3)),
    ]);

    let lap_term = |axis: usize| -> TTMatrix {
        let mut factors = vec![Factor::Identity(int_len(0))];
        for m in 1..4 {
            factors.push(if m == axis {
                Factor::Matrix(interior_matrix(d2(m), s_rows(m)))
            } else {
                Factor::Identity(int_len(m))
            });
        }
        TTMatrix::from_kronecker(&factors)
    };
    let laplacian = lap_term(1).add(&lap_term(2))?.add(&lap_term(3))?;

    let grad_term = |axis: usize| -> TTMatrix {
        let mut factors = vec![Factor::Identity(int_len(0))];
        for m in 1..4 {
            factors.push(if m == axis {
                Factor::Matrix(interior_matrix(d1(m), s_rows(m)))
            } else {
                Factor::Identity(int_len(m))
            });
        }
        TTMatrix::from_kronecker(&factors)
    };
    let gradients = [grad_term(1), grad_term(2), grad_term(3)];

    // map operators: interior rows, all columns
    let a_t_map = TTMatrix::from_kronecker(&[
        Factor::Matrix(map_matrix(d1(0), t_rows.clone())),
        Factor::Matrix(selector(shape[1], s_rows(1))),
        Factor::Matrix(selector(shape[2], s_rows(2))),
        Factor::Matrix(selector(shape[3], s_rows(3))),
    ]);
    let lap_map_term = |axis: usize| -> TTMatrix {
        let mut factors = vec![Factor::Matrix(selector(shape[0], t_rows.clone()))];
        for m in 1..4 {
            factors.push(if m == axis {
                Factor::Matrix(map_matrix(d2(m), s_rows(m)))
            } else {
                Factor::Matrix(selector(shape[m], s_rows(m)))
            });
        }
        TTMatrix::from_kronecker(&factors)
    };
    let grad_map_term = |axis: usize| -> TTMatrix {
        let mut factors = vec![Factor::Matrix(selector(shape[0], t_rows.clone()))];
        for m in 1..4 {
            factors.push(if m == axis {
                Factor::Matrix(map_matrix(d1(m), s_rows(m)))
            } else {
                Factor::Matrix(selector(shape[m], s_rows(m)))
            });
        }
        TTMatrix::from_kronecker(&factors)
    };

    let (g_bc, boundary_error) = build_boundary_tensor(problem, grids, split, eps_cross, seed)?;

    let bc_time = a_t_map.matvec(&g_bc)?.round(1e-13);
    let bc_laplacian = lap_map_term(1)
        .matvec(&g_bc)?
        .add(&lap_map_term(2).matvec(&g_bc)?)?
        .add(&lap_map_term(3).matvec(&g_bc)?)?
        .round(1e-13);
    let bc_gradients = [
        grad_map_term(1).matvec(&g_bc)?.round(1e-13),
        grad_map_term(2).matvec(&g_bc)?.round(1e-13),
        grad_map_term(3).matvec(&g_bc)?.round(1e-13),
    ];

    Ok(TTOperatorSet {
        a_t,
        laplacian,
        gradients,
        g_bc,
        bc_time,
        bc_laplacian,
        bc_gradients,
        boundary_error,
    })
}

/// The nonlinear convection-diffusion system in TT form.
pub struct NcdTtSystem<'a> {
    pub problem: &'a ProblemSpec,
    pub grids: &'a SpaceTimeGrids,
    pub split: IndexSplit,
    pub ops: TTOperatorSet,
    /// Manufactured source on interior nodes, cross-interpolated once.
    pub source_int: Option<TTTensor>,
    seed: u64,
}

impl<'a> NcdTtSystem<'a> {
    pub fn new(
        problem: &'a ProblemSpec,
        grids: &'a SpaceTimeGrids,
        eps_cross: f64,
        seed: u64,
    ) -> Result<Self, TensorizeError> {
        let split = IndexSplit::new(grids.shape())?;
        let ops = build_tt_operators(problem, grids, &split, eps_cross, seed)?;
        let source_int = match &problem.source {
            None => None,
            Some(src) => {
                let eval = |idx: &[usize]| -> f64 {
                    let full = split.to_full([idx[0], idx[1], idx[2], idx[3]]);
                    let (t, x, y, z) = grids.node(full);
                    src(t, x, y, z)
                };
                let opts = CrossOptions::with_seed(eps_cross, seed ^ 0x50c5);
                let out = tt_cross(&eval, &split.interior_shape(), &opts)?;
                if !out.converged {
                    return Err(TensorizeError::BoundaryCross {
                        achieved: out.achieved_error,
                        target: eps_cross,
                    });
                }
                Some(out.tensor)
            }
        };
        Ok(Self {
            problem,
            grids,
            split,
            ops,
            source_int,
            seed,
        })
    }

    /// Initial guess: the initial condition broadcast along time, built by
    /// cross interpolation on the interior and rounded at `eps0`.
    pub fn initial_guess(&self, eps0: f64) -> Result<TTTensor, TensorizeError> {
        let eval = |idx: &[usize]| -> f64 {
            let full = self.split.to_full([idx[0], idx[1], idx[2], idx[3]]);
            let (_, x, y, z) = self.grids.node(full);
            (self.problem.initial)(x, y, z)
        };
        let eps = eps0.min(1e-8);
        let mut opts = CrossOptions::with_seed(eps, self.seed ^ 0x1c5);
        opts.abs_tol = eps * problem_data_scale(self.problem, self.seed);
        let out = tt_cross(&eval, &self.split.interior_shape(), &opts)?;
        if !out.converged {
            return Err(TensorizeError::BoundaryCross {
                achieved: out.achieved_error,
                target: eps0,
            });
        }
        Ok(out.tensor.round(eps0))
    }

    /// `L u` including the boundary contribution (what the continuous
    /// Laplacian sees at interior nodes).
    fn laplacian_of(&self, u: &TTTensor, eps: f64) -> Result<TTTensor, TtError> {
        Ok(self
            .ops
            .laplacian
            .matvec(u)?
            .add(&self.ops.bc_laplacian)?
            .round(eps))
    }

    fn gradient_of(&self, u: &TTTensor, axis: usize, eps: f64) -> Result<TTTensor, TtError> {
        Ok(self.ops.gradients[axis]
            .matvec(u)?
            .add(&self.ops.bc_gradients[axis])?
            .round(eps))
    }

    fn coefficient(
        &self,
        f: &(dyn Fn(f64) -> f64 + Send + Sync),
        u: &TTTensor,
        eps: f64,
        salt: u64,
    ) -> Result<TTTensor, TtError> {
        tt_coefficient(f, u, eps, self.seed ^ salt)
    }
}

impl TTSystem for NcdTtSystem<'_> {
    /// `G(U) = A_t U + w_t - a(U) o (L U + w_L)
    ///        + sum_i b_i(U) o (grad_i U + w_i) - f(U) - s`
    /// with every term recompressed at `eps`.
    fn residual(&self, u: &TTTensor, eps: f64) -> Result<TTTensor, TtError> {
        let p = self.problem;
        let mut r = self.ops.a_t.matvec(u)?.add(&self.ops.bc_time)?.round(eps);

        let lap = self.laplacian_of(u, eps)?;
        let a_u = self.coefficient(&p.diffusion, u, eps, 0xa0)?;
        r = r.sub(&a_u.hadamard(&lap)?.round(eps))?.round(eps);

        for axis in 0..3 {
            let grad = self.gradient_of(u, axis, eps)?;
            let b_u = self.coefficient(&p.convection[axis], u, eps, 0xb0 + axis as u64)?;
            r = r.add(&b_u.hadamard(&grad)?.round(eps))?.round(eps);
        }

        let f_u = self.coefficient(&p.forcing, u, eps, 0xf0)?;
        r = r.sub(&f_u)?.round(eps);
        if let Some(src) = &self.source_int {
            r = r.sub(src)?.round(eps);
        }
        Ok(r)
    }

    /// `J(U) = A_t - diag(a(U)) L + sum_i diag(b_i(U)) grad_i
    ///        + diag(-a'(U) o (L U) + sum_i b_i'(U) o (grad_i U) - f'(U))`,
    /// recompressed at `eps`.
    fn jacobian(&self, u: &TTTensor, eps: f64) -> Result<TTMatrix, TtError> {
        let p = self.problem;
        let lap = self.laplacian_of(u, eps)?;
        let a_u = self.coefficient(&p.diffusion, u, eps, 0xa0)?;
        let a_du = self.coefficient(&p.diffusion_du, u, eps, 0xa1)?;

        let mut j = self
            .ops
            .a_t
            .sub(&TTMatrix::diag(&a_u).matmul(&self.ops.laplacian)?)?
            .round(eps);

        let mut diag_term = a_du.hadamard(&lap)?.scale(-1.0).round(eps);
        for axis in 0..3 {
            let grad = self.gradient_of(u, axis, eps)?;
            let b_u = self.coefficient(&p.convection[axis], u, eps, 0xb0 + axis as u64)?;
            let b_du = self.coefficient(&p.convection_du[axis], u, eps, 0xc0 + axis as u64)?;
            j = j
                .add(&TTMatrix::diag(&b_u).matmul(&self.ops.gradients[axis])?)?
                .round(eps);
            diag_term = diag_term.add(&b_du.hadamard(&grad)?.round(eps))?.round(eps);
        }
        let f_du = self.coefficient(&p.forcing_du, u, eps, 0xf1)?;
        diag_term = diag_term.sub(&f_du)?.round(eps);

        j = j.add(&TTMatrix::diag(&diag_term))?.round(eps);
        Ok(j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::DenseField;
    use crate::fullgrid::FullGridSystem;
    use crate::problems;
    use ndarray::Array1;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dense_kron(mats: &[Array2<f64>]) -> Array2<f64> {
        let mut big = Array2::from_elem((1, 1), 1.0);
        for m in mats {
            let (br, bc) = big.dim();
            let (mr, mc) = m.dim();
            let mut next = Array2::zeros((br * mr, bc * mc));
            for i in 0..br {
                for j in 0..bc {
                    for p in 0..mr {
                        for q in 0..mc {
                            next[[i * mr + p, j * mc + q]] = big[[i, j]] * m[[p, q]];
                        }
                    }
                }
            }
            big = next;
        }
        big
    }

    #[test]
    fn densified_time_operator_matches_kronecker_oracle() {
        let problem = problems::linear_heat();
        let grids = SpaceTimeGrids::for_problem(&problem, 3).unwrap();
        let split = IndexSplit::new(grids.shape()).unwrap();
        let ops = build_tt_operators(&problem, &grids, &split, 1e-10, 0).unwrap();
        assert_eq!(ops.a_t.ranks(), vec![1, 1, 1]);
        assert!(ops.laplacian.max_rank() <= 3);

        let st_int = grids.grids[0].d1.slice(s![1..3, 1..3]).to_owned();
        let eye1 = Array2::eye(1);
        let want = dense_kron(&[st_int, eye1.clone(), eye1.clone(), eye1]);
        let got = ops.a_t.to_dense_matrix(1 << 16).unwrap();
        let err = (&want - &got).mapv(f64::abs).sum();
        assert!(err < 1e-12, "a_t oracle mismatch {err}");
    }

    #[test]
    fn laplacian_with_boundary_term_kills_linear_fields() {
        let problem = problems::linear_heat();
        let grids = SpaceTimeGrids::for_problem(&problem, 5).unwrap();
        let split = IndexSplit::new(grids.shape()).unwrap();
        let ops = build_tt_operators(&problem, &grids, &split, 1e-10, 0).unwrap();

        // linear-in-space field on the full grid
        let linear = |x: f64, y: f64, z: f64| 2.0 * x + 3.0 * y - z + 5.0;
        let full = DenseField::from_fn(grids.shape(), |idx| {
            let (_, x, y, z) = grids.node(idx);
            linear(x, y, z)
        });
        let boundary_part = DenseField::from_fn(grids.shape(), |idx| {
            if split.is_interior(idx) {
                0.0
            } else {
                full.get(idx)
            }
        });
        let interior_part = split.restrict(&full);

        let u_int = TTTensor::from_dense(&interior_part, 1e-13);
        let g_like = TTTensor::from_dense(&boundary_part, 1e-13);

        // rebuild the map contribution for this synthetic boundary field
        let lap_map = |axis: usize| -> TTMatrix {
            let n = grids.shape()[0];
            let mut factors = vec![Factor::Matrix(selector(n, 1..n))];
            for m in 1..4 {
                factors.push(if m == axis {
                    Factor::Matrix(map_matrix(&grids.grids[m].d2, 1..n - 1))
                } else {
                    Factor::Matrix(selector(n, 1..n - 1))
                });
            }
            TTMatrix::from_kronecker(&factors)
        };
        let w = lap_map(1)
            .matvec(&g_like)
            .unwrap()
            .add(&lap_map(2).matvec(&g_like).unwrap())
            .unwrap()
            .add(&lap_map(3).matvec(&g_like).unwrap())
            .unwrap();
        let total = ops.laplacian.matvec(&u_int).unwrap().add(&w).unwrap();
        assert!(total.norm() < 1e-9, "laplacian on linear field: {}", total.norm());
    }

    #[test]
    fn boundary_tensor_homogeneous_is_zero_and_map_kills_it() {
        let problem = problems::linear_heat();
        let grids = SpaceTimeGrids::for_problem(&problem, 4).unwrap();
        let split = IndexSplit::new(grids.shape()).unwrap();
        let ops = build_tt_operators(&problem, &grids, &split, 1e-10, 1).unwrap();
        assert_eq!(ops.g_bc.norm(), 0.0);
        assert_eq!(ops.bc_time.norm(), 0.0);
        assert_eq!(ops.bc_laplacian.norm(), 0.0);
    }

    #[test]
    fn boundary_tensor_matches_dense_boundary_values() {
        let problem = problems::manufactured_ncd();
        let grids = SpaceTimeGrids::for_problem(&problem, 6).unwrap();
        let split = IndexSplit::new(grids.shape()).unwrap();
        let eps = 1e-8;
        let (g_bc, achieved) =
            build_boundary_tensor(&problem, &grids, &split, eps, 3).unwrap();
        assert!(achieved <= eps);
        let dense = g_bc.to_dense().unwrap();
        let want = crate::fullgrid::boundary_values(&problem, &grids, &split);
        let rel = dense.sub(&want).norm() / want.norm();
        assert!(rel <= 50.0 * eps, "boundary tensor error {rel}");
    }

    #[test]
    fn tt_residual_matches_fullgrid_oracle() {
        for problem in [problems::manufactured_ncd(), problems::burgers3d()] {
            let grids = SpaceTimeGrids::for_problem(&problem, 5).unwrap();
            let sys_dense = FullGridSystem::new(&problem, &grids).unwrap();
            let eps = 1e-10;
            let sys_tt = NcdTtSystem::new(&problem, &grids, eps, 7).unwrap();

            let mut rng = ChaCha8Rng::seed_from_u64(123);
            let u_dense = DenseField::from_fn(sys_dense.split.interior_shape(), |_| {
                rng.random_range(-0.4..0.4)
            });
            let u_tt = TTTensor::from_dense(&u_dense, 1e-13);

            let want = sys_dense.residual(&u_dense).unwrap();
            let got = sys_tt.residual(&u_tt, eps).unwrap().to_dense().unwrap();
            let rel = got.sub(&want).norm() / want.norm();
            assert!(rel <= 100.0 * eps, "{}: tt residual error {rel}", problem.name);
        }
    }

    #[test]
    fn tt_jacobian_matches_fullgrid_oracle() {
        for problem in [problems::manufactured_ncd(), problems::burgers3d()] {
            let grids = SpaceTimeGrids::for_problem(&problem, 5).unwrap();
            let sys_dense = FullGridSystem::new(&problem, &grids).unwrap();
            let eps = 1e-10;
            let sys_tt = NcdTtSystem::new(&problem, &grids, eps, 8).unwrap();

            let mut rng = ChaCha8Rng::seed_from_u64(321);
            let shape = sys_dense.split.interior_shape();
            let u_dense = DenseField::from_fn(shape, |_| rng.random_range(-0.4..0.4));
            let v_dense = DenseField::from_fn(shape, |_| rng.random_range(-1.0..1.0));
            let u_tt = TTTensor::from_dense(&u_dense, 1e-13);

            let want = sys_dense.jacobian_apply(&u_dense, &v_dense).unwrap();
            let j = sys_tt.jacobian(&u_tt, eps).unwrap();
            let jd = j.to_dense_matrix(1 << 22).unwrap();
            let v_flat = Array1::from(v_dense.as_slice().to_vec());
            let got = jd.dot(&v_flat);
            let want_flat = Array1::from(want.as_slice().to_vec());
            let num = (&got - &want_flat).mapv(|v| v * v).sum().sqrt();
            let den = want_flat.mapv(|v| v * v).sum().sqrt();
            assert!(
                num / den <= 100.0 * eps,
                "{}: tt jacobian error {}",
                problem.name,
                num / den
            );
        }
    }

    #[test]
    fn zero_state_zero_residual_for_homogeneous_problem() {
        let problem = problems::linear_heat();
        let grids = SpaceTimeGrids::for_problem(&problem, 4).unwrap();
        let sys = NcdTtSystem::new(&problem, &grids, 1e-10, 9).unwrap();
        let u = TTTensor::zeros(&sys.split.interior_shape());
        let r = sys.residual(&u, 1e-10).unwrap();
        assert!(r.norm() < 1e-12);
    }
}
