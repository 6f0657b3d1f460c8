//! Tensor-train engine for 4-way tensors and operators: construction,
//! arithmetic, rounding, maxvol-based cross interpolation, diagonal lifting
//! and a low-rank GMRES.
//!
//! A tensor train stores a d-way tensor as a chain of 3-way cores
//! `G_k` of shape `(r_{k-1}, n_k, r_k)` with `r_0 = r_d = 1`, so that element
//! `(i_1, .., i_d)` is the matrix product `G_1(i_1) G_2(i_2) .. G_d(i_d)`.
//! The chain dimensions `r_k` are the TT ranks; storage is linear in `d`
//! for fixed ranks.

pub mod cross;
pub mod gmres;
mod io;
mod matrix;
mod round;

pub use cross::{maxvol, tt_cross, CrossOptions, CrossResult};
pub use gmres::{tt_linear_solve, TtKrylovOptions, TtKrylovOutcome};
pub use matrix::{OpCore, TTMatrix};

use crate::field::DenseField;
use ndarray::{Array2, Array3, ArrayView2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Element cap for densification (2^24 by default).
pub const DENSE_CAP: usize = 1 << 24;

#[derive(Debug, Error)]
pub enum TtError {
    #[error("mode sizes do not match: {0:?} vs {1:?}")]
    ModeMismatch(Vec<usize>, Vec<usize>),
    #[error("core {index} has leading rank {got}, expected {expected}")]
    BrokenRankChain {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("densifying {elements} elements exceeds the cap of {cap}")]
    SizeCap { elements: usize, cap: usize },
    #[error("dense conversion requires 4 modes, tensor has {0}")]
    NotFourWay(usize),
    #[error("linear algebra backend failure: {0}")]
    Backend(String),
    #[error("cross interpolation: {0}")]
    Cross(String),
    #[error("cross interpolation hit the rank cap {cap} at validation error {achieved:e} (target {target:e})")]
    CrossRankCap {
        cap: usize,
        achieved: f64,
        target: f64,
    },
    #[error("maxvol needs a tall matrix with full column rank ({0})")]
    RankDeficient(String),
    #[error("non-finite values produced in {0}")]
    NonFinite(&'static str),
    #[error("serialization: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed TT file: {0}")]
    BadFile(String),
}

/// Tensor in train format; immutable after construction.
#[derive(Debug, Clone)]
pub struct TTTensor {
    cores: Vec<Array3<f64>>,
}

impl TTTensor {
    pub fn from_cores(cores: Vec<Array3<f64>>) -> Result<Self, TtError> {
        assert!(!cores.is_empty());
        if cores[0].dim().0 != 1 {
            return Err(TtError::BrokenRankChain {
                index: 0,
                expected: 1,
                got: cores[0].dim().0,
            });
        }
        if cores[cores.len() - 1].dim().2 != 1 {
            return Err(TtError::BrokenRankChain {
                index: cores.len() - 1,
                expected: 1,
                got: cores[cores.len() - 1].dim().2,
            });
        }
        for k in 1..cores.len() {
            if cores[k].dim().0 != cores[k - 1].dim().2 {
                return Err(TtError::BrokenRankChain {
                    index: k,
                    expected: cores[k - 1].dim().2,
                    got: cores[k].dim().0,
                });
            }
        }
        Ok(Self { cores })
    }

    pub fn cores(&self) -> &[Array3<f64>] {
        &self.cores
    }

    pub fn ndim(&self) -> usize {
        self.cores.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.dim().1).collect()
    }

    /// The chain ranks `(r_1, .., r_{d-1})`.
    pub fn ranks(&self) -> Vec<usize> {
        self.cores[..self.cores.len() - 1]
            .iter()
            .map(|c| c.dim().2)
            .collect()
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    /// All-zero tensor at ranks (1, .., 1).
    pub fn zeros(mode_sizes: &[usize]) -> Self {
        let cores = mode_sizes
            .iter()
            .map(|&n| Array3::zeros((1, n, 1)))
            .collect();
        Self { cores }
    }

    /// Constant tensor at ranks (1, .., 1).
    pub fn constant(mode_sizes: &[usize], value: f64) -> Self {
        let mut cores: Vec<Array3<f64>> = mode_sizes
            .iter()
            .map(|&n| Array3::from_elem((1, n, 1), 1.0))
            .collect();
        cores[0].fill(value);
        Self { cores }
    }

    /// Separable tensor `u(i_1..i_d) = f_1(i_1) .. f_d(i_d)`.
    pub fn rank_one(factors: &[Vec<f64>]) -> Self {
        let cores = factors
            .iter()
            .map(|f| {
                Array3::from_shape_vec((1, f.len(), 1), f.clone()).expect("factor shape")
            })
            .collect();
        Self { cores }
    }

    /// Deterministic pseudo-random tensor with core entries uniform in [0, 1].
    pub fn random_uniform(seed: u64, mode_sizes: &[usize], ranks: &[usize]) -> Result<Self, TtError> {
        assert_eq!(ranks.len() + 1, mode_sizes.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = mode_sizes.len();
        let rank_at = |k: usize| -> usize {
            if k == 0 || k == d {
                1
            } else {
                ranks[k - 1]
            }
        };
        let cores = (0..d)
            .map(|k| {
                Array3::from_shape_fn((rank_at(k), mode_sizes[k], rank_at(k + 1)), |_| {
                    rng.random_range(0.0..1.0)
                })
            })
            .collect();
        Self::from_cores(cores)
    }

    /// Element access by multi-index: the product `G_1(i_1) .. G_d(i_d)`.
    pub fn get(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.cores.len());
        let first = &self.cores[0];
        let mut v: Vec<f64> = (0..first.dim().2).map(|b| first[[0, idx[0], b]]).collect();
        for (k, core) in self.cores.iter().enumerate().skip(1) {
            let (rl, _, rr) = core.dim();
            let mut next = vec![0.0; rr];
            for b in 0..rr {
                let mut sum = 0.0;
                for a in 0..rl {
                    sum += v[a] * core[[a, idx[k], b]];
                }
                next[b] = sum;
            }
            v = next;
        }
        v[0]
    }

    pub fn element_count(&self) -> usize {
        self.mode_sizes().iter().product()
    }

    /// TT storage size over full tensor size; may exceed 1 for high ranks.
    pub fn compression_ratio(&self) -> f64 {
        let stored: usize = self.cores.iter().map(|c| c.len()).sum();
        stored as f64 / self.element_count() as f64
    }

    /// Frobenius norm via a right-orthogonalization sweep (exact up to
    /// round-off, no cancellation).
    pub fn norm(&self) -> f64 {
        let mut copy = self.clone();
        round::right_orthogonalize(&mut copy.cores);
        copy.cores[0].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Inner product by core-wise contraction.
    pub fn dot(&self, other: &Self) -> Result<f64, TtError> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(TtError::ModeMismatch(
                self.mode_sizes(),
                other.mode_sizes(),
            ));
        }
        // v[a, b] accumulates the partial contraction of the leading modes
        let mut v = Array2::<f64>::ones((1, 1));
        for (xc, yc) in self.cores.iter().zip(&other.cores) {
            let (rx, n, rx2) = xc.dim();
            let (ry, _, ry2) = yc.dim();
            let x2 = flatten_view(xc, rx, n * rx2);
            // t[b, (i a2)] = sum_a v[a, b] x[a, (i a2)]
            let t = v.t().dot(&x2);
            let t3 = t.to_shape((ry * n, rx2)).expect("reshape");
            let y2 = flatten_view(yc, ry * n, ry2);
            // v'[a2, b2] = sum_(b i) t[(b i), a2] y[(b i), b2]
            v = t3.t().dot(&y2);
        }
        Ok(v[[0, 0]])
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.cores[0].mapv_inplace(|v| alpha * v);
        out
    }

    /// Sum of two trains; ranks add.
    pub fn add(&self, other: &Self) -> Result<Self, TtError> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(TtError::ModeMismatch(
                self.mode_sizes(),
                other.mode_sizes(),
            ));
        }
        let d = self.cores.len();
        if d == 1 {
            let sum = &self.cores[0] + &other.cores[0];
            return Ok(Self { cores: vec![sum] });
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let a = &self.cores[k];
            let b = &other.cores[k];
            let (al, n, ar) = a.dim();
            let (bl, _, br) = b.dim();
            let core = if k == 0 {
                let mut c = Array3::zeros((1, n, ar + br));
                for i in 0..n {
                    for j in 0..ar {
                        c[[0, i, j]] = a[[0, i, j]];
                    }
                    for j in 0..br {
                        c[[0, i, ar + j]] = b[[0, i, j]];
                    }
                }
                c
            } else if k == d - 1 {
                let mut c = Array3::zeros((al + bl, n, 1));
                for i in 0..n {
                    for j in 0..al {
                        c[[j, i, 0]] = a[[j, i, 0]];
                    }
                    for j in 0..bl {
                        c[[al + j, i, 0]] = b[[j, i, 0]];
                    }
                }
                c
            } else {
                let mut c = Array3::zeros((al + bl, n, ar + br));
                for i in 0..n {
                    for p in 0..al {
                        for q in 0..ar {
                            c[[p, i, q]] = a[[p, i, q]];
                        }
                    }
                    for p in 0..bl {
                        for q in 0..br {
                            c[[al + p, i, ar + q]] = b[[p, i, q]];
                        }
                    }
                }
                c
            };
            cores.push(core);
        }
        Ok(Self { cores })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, TtError> {
        self.add(&other.scale(-1.0))
    }

    /// Elementwise product; ranks multiply.
    pub fn hadamard(&self, other: &Self) -> Result<Self, TtError> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(TtError::ModeMismatch(
                self.mode_sizes(),
                other.mode_sizes(),
            ));
        }
        let mut cores = Vec::with_capacity(self.cores.len());
        for (a, b) in self.cores.iter().zip(&other.cores) {
            let (al, n, ar) = a.dim();
            let (bl, _, br) = b.dim();
            let mut c = Array3::zeros((al * bl, n, ar * br));
            for i in 0..n {
                for p in 0..al {
                    for q in 0..ar {
                        let av = a[[p, i, q]];
                        if av == 0.0 {
                            continue;
                        }
                        for s in 0..bl {
                            for t in 0..br {
                                c[[p * bl + s, i, q * br + t]] = av * b[[s, i, t]];
                            }
                        }
                    }
                }
            }
            cores.push(c);
        }
        Ok(Self { cores })
    }

    /// TT rounding: two passes (orthogonalization, then truncated SVDs) with
    /// the relative Frobenius bound `||x - round(x, eps)|| <= eps ||x||`.
    pub fn round(&self, eps: f64) -> Self {
        round::round(self, eps)
    }

    /// TT-SVD of a dense 4-way field with per-unfolding threshold
    /// `eps ||field|| / sqrt(3)`.
    pub fn from_dense(field: &DenseField, eps: f64) -> Self {
        let shape = field.shape();
        let norm = field.norm();
        let delta = if norm > 0.0 {
            eps * norm / (3.0_f64).sqrt()
        } else {
            0.0
        };
        let mut cores = Vec::with_capacity(4);
        let mut r_left = 1usize;
        let mut rest: usize = shape.iter().product();
        let mut work: Vec<f64> = field.as_slice().to_vec();
        for (k, &nk) in shape.iter().enumerate().take(3) {
            rest /= nk;
            let rows = r_left * nk;
            let m = Array2::from_shape_vec((rows, rest), work).expect("unfolding shape");
            let (u, s, vt) = round::truncated_svd(&m, delta);
            let r = s.len();
            cores.push(
                u.to_shape((r_left, nk, r))
                    .expect("core shape")
                    .to_owned(),
            );
            // carry diag(s) * vt into the next unfolding
            let mut carry = vt;
            for (i, &si) in s.iter().enumerate() {
                carry.row_mut(i).mapv_inplace(|v| si * v);
            }
            work = carry.into_raw_vec_and_offset().0;
            r_left = r;
            let _ = k;
        }
        let last = Array2::from_shape_vec((r_left * shape[3], 1), work).expect("last core");
        cores.push(
            last.to_shape((r_left, shape[3], 1))
                .expect("core shape")
                .to_owned(),
        );
        Self { cores }
    }

    /// Exact contraction back to a dense field (4-way tensors only).
    pub fn to_dense(&self) -> Result<DenseField, TtError> {
        self.to_dense_capped(DENSE_CAP)
    }

    pub fn to_dense_capped(&self, cap: usize) -> Result<DenseField, TtError> {
        if self.ndim() != 4 {
            return Err(TtError::NotFourWay(self.ndim()));
        }
        let elements = self.element_count();
        if elements > cap {
            return Err(TtError::SizeCap { elements, cap });
        }
        let modes = self.mode_sizes();
        let first = &self.cores[0];
        let mut acc = flatten_view(first, modes[0], first.dim().2).to_owned();
        for core in self.cores.iter().skip(1) {
            let (rl, n, rr) = core.dim();
            let rhs = flatten_view(core, rl, n * rr);
            let next = acc.dot(&rhs); // (prod, n * rr)
            let prod = next.nrows() * n;
            acc = next.into_shape_with_order((prod, rr)).expect("reshape");
        }
        let values = acc.into_raw_vec_and_offset().0;
        DenseField::from_values([modes[0], modes[1], modes[2], modes[3]], values)
            .map_err(|_| TtError::NonFinite("to_dense"))
    }
}

/// Reshapes a core to a 2-D view without copying (cores are standard layout).
pub(crate) fn flatten_view(core: &Array3<f64>, rows: usize, cols: usize) -> ArrayView2<'_, f64> {
    debug_assert_eq!(core.len(), rows * cols);
    ArrayView2::from_shape((rows, cols), core.as_slice().expect("standard layout")).unwrap()
}
