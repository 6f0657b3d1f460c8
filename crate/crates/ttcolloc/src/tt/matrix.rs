//! Operators in tensor-train form: four-way cores `(r, n_out, n_in, r')`
//! with identity cores tagged explicitly so Kronecker-structured operators
//! stay rank 1 without storing identity blocks densely.

use super::{TTTensor, TtError};
use crate::field::Factor;
use ndarray::{Array2, Array3, Array4};

/// One core of a TT operator.
#[derive(Debug, Clone)]
pub enum OpCore {
    /// Identity factor of the given size, `(1, n, n, 1)` with unit diagonal.
    Eye(usize),
    Dense(Array4<f64>),
}

impl OpCore {
    pub fn ranks(&self) -> (usize, usize) {
        match self {
            OpCore::Eye(_) => (1, 1),
            OpCore::Dense(c) => (c.dim().0, c.dim().3),
        }
    }

    /// (rows, cols) of the mode this core acts on.
    pub fn sizes(&self) -> (usize, usize) {
        match self {
            OpCore::Eye(n) => (*n, *n),
            OpCore::Dense(c) => (c.dim().1, c.dim().2),
        }
    }

    pub fn to_dense(&self) -> Array4<f64> {
        match self {
            OpCore::Eye(n) => {
                let mut c = Array4::zeros((1, *n, *n, 1));
                for i in 0..*n {
                    c[[0, i, i, 0]] = 1.0;
                }
                c
            }
            OpCore::Dense(c) => c.clone(),
        }
    }
}

/// Linear operator in TT-matrix form. A sum of Kronecker products has one
/// term per rank; `diag`-lifted coefficient tensors multiply in with rank
/// products.
#[derive(Debug, Clone)]
pub struct TTMatrix {
    cores: Vec<OpCore>,
}

impl TTMatrix {
    pub fn from_cores(cores: Vec<OpCore>) -> Result<Self, TtError> {
        assert!(!cores.is_empty());
        if cores[0].ranks().0 != 1 {
            return Err(TtError::BrokenRankChain {
                index: 0,
                expected: 1,
                got: cores[0].ranks().0,
            });
        }
        let last = cores.len() - 1;
        if cores[last].ranks().1 != 1 {
            return Err(TtError::BrokenRankChain {
                index: last,
                expected: 1,
                got: cores[last].ranks().1,
            });
        }
        for k in 1..cores.len() {
            if cores[k].ranks().0 != cores[k - 1].ranks().1 {
                return Err(TtError::BrokenRankChain {
                    index: k,
                    expected: cores[k - 1].ranks().1,
                    got: cores[k].ranks().0,
                });
            }
        }
        Ok(Self { cores })
    }

    pub fn cores(&self) -> &[OpCore] {
        &self.cores
    }

    pub fn identity(mode_sizes: &[usize]) -> Self {
        Self {
            cores: mode_sizes.iter().map(|&n| OpCore::Eye(n)).collect(),
        }
    }

    /// Rank-1 operator from one Kronecker term; identity factors stay tagged.
    pub fn from_kronecker(factors: &[Factor]) -> Self {
        let cores = factors
            .iter()
            .map(|f| match f {
                Factor::Identity(n) => OpCore::Eye(*n),
                Factor::Matrix(m) => {
                    let (rows, cols) = m.dim();
                    let mut c = Array4::zeros((1, rows, cols, 1));
                    c.slice_mut(ndarray::s![0, .., .., 0]).assign(m);
                    OpCore::Dense(c)
                }
            })
            .collect();
        Self { cores }
    }

    /// Lifts a TT vector to the operator acting as elementwise
    /// multiplication by it: each core `G(a, i, b)` becomes
    /// `Ghat(a, i, i, b)` with zero off-diagonal.
    pub fn diag(v: &TTTensor) -> Self {
        let cores = v
            .cores()
            .iter()
            .map(|g| {
                let (rl, n, rr) = g.dim();
                let mut c = Array4::zeros((rl, n, n, rr));
                for a in 0..rl {
                    for i in 0..n {
                        for b in 0..rr {
                            c[[a, i, i, b]] = g[[a, i, b]];
                        }
                    }
                }
                OpCore::Dense(c)
            })
            .collect();
        Self { cores }
    }

    pub fn ndim(&self) -> usize {
        self.cores.len()
    }

    pub fn out_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.sizes().0).collect()
    }

    pub fn in_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.sizes().1).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.cores[..self.cores.len() - 1]
            .iter()
            .map(|c| c.ranks().1)
            .collect()
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut cores = self.cores.clone();
        cores[0] = match &cores[0] {
            OpCore::Dense(c) => OpCore::Dense(c.mapv(|v| alpha * v)),
            eye @ OpCore::Eye(_) => OpCore::Dense(eye.to_dense().mapv(|v| alpha * v)),
        };
        Self { cores }
    }

    /// Exact operator application; output ranks are the elementwise products
    /// of the operator and argument ranks.
    pub fn matvec(&self, x: &TTTensor) -> Result<TTTensor, TtError> {
        if self.in_sizes() != x.mode_sizes() {
            return Err(TtError::ModeMismatch(self.in_sizes(), x.mode_sizes()));
        }
        let mut out = Vec::with_capacity(self.cores.len());
        for (a_core, x_core) in self.cores.iter().zip(x.cores()) {
            match a_core {
                OpCore::Eye(_) => out.push(x_core.clone()),
                OpCore::Dense(a) => {
                    let (ra, no, ni, ra2) = a.dim();
                    let (rx, _, rx2) = x_core.dim();
                    // P[(a i a2), (b b2)] = sum_j A[a, i, j, a2] X[b, j, b2]
                    let a_perm = a
                        .view()
                        .permuted_axes([0, 1, 3, 2])
                        .as_standard_layout()
                        .into_owned()
                        .into_shape_with_order((ra * no * ra2, ni))
                        .expect("matvec lhs reshape");
                    let x_perm = x_core
                        .view()
                        .permuted_axes([1, 0, 2])
                        .as_standard_layout()
                        .into_owned()
                        .into_shape_with_order((ni, rx * rx2))
                        .expect("matvec rhs reshape");
                    let p = a_perm.dot(&x_perm);
                    let mut core = Array3::zeros((ra * rx, no, ra2 * rx2));
                    for a_i in 0..ra {
                        for i in 0..no {
                            for a2 in 0..ra2 {
                                let row = (a_i * no + i) * ra2 + a2;
                                for b in 0..rx {
                                    for b2 in 0..rx2 {
                                        core[[a_i * rx + b, i, a2 * rx2 + b2]] =
                                            p[[row, b * rx2 + b2]];
                                    }
                                }
                            }
                        }
                    }
                    out.push(core);
                }
            }
        }
        TTTensor::from_cores(out)
    }

    /// Operator product `self * other` (apply `other` first).
    pub fn matmul(&self, other: &Self) -> Result<Self, TtError> {
        if self.in_sizes() != other.out_sizes() {
            return Err(TtError::ModeMismatch(self.in_sizes(), other.out_sizes()));
        }
        let mut cores = Vec::with_capacity(self.cores.len());
        for (a_core, b_core) in self.cores.iter().zip(&other.cores) {
            let core = match (a_core, b_core) {
                (OpCore::Eye(_), b) => b.clone(),
                (a, OpCore::Eye(_)) => a.clone(),
                (OpCore::Dense(a), OpCore::Dense(b)) => {
                    let (ra, no, nm, ra2) = a.dim();
                    let (rb, _, ni, rb2) = b.dim();
                    // C[(a b), i, k, (a2 b2)] = sum_j A[a,i,j,a2] B[b,j,k,b2]
                    let a_perm = a
                        .view()
                        .permuted_axes([0, 1, 3, 2])
                        .as_standard_layout()
                        .into_owned()
                        .into_shape_with_order((ra * no * ra2, nm))
                        .expect("matmul lhs");
                    let b_perm = b
                        .view()
                        .permuted_axes([1, 0, 2, 3])
                        .as_standard_layout()
                        .into_owned()
                        .into_shape_with_order((nm, rb * ni * rb2))
                        .expect("matmul rhs");
                    let p = a_perm.dot(&b_perm);
                    let mut c = Array4::zeros((ra * rb, no, ni, ra2 * rb2));
                    for ai in 0..ra {
                        for i in 0..no {
                            for a2 in 0..ra2 {
                                let row = (ai * no + i) * ra2 + a2;
                                for bi in 0..rb {
                                    for k in 0..ni {
                                        for b2 in 0..rb2 {
                                            c[[ai * rb + bi, i, k, a2 * rb2 + b2]] =
                                                p[[row, (bi * ni + k) * rb2 + b2]];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    OpCore::Dense(c)
                }
            };
            cores.push(core);
        }
        Self::from_cores(cores)
    }

    /// Operator sum; ranks add (identity cores are materialized).
    pub fn add(&self, other: &Self) -> Result<Self, TtError> {
        if self.in_sizes() != other.in_sizes() || self.out_sizes() != other.out_sizes() {
            return Err(TtError::ModeMismatch(self.in_sizes(), other.in_sizes()));
        }
        let d = self.cores.len();
        if d == 1 {
            let sum = &self.cores[0].to_dense() + &other.cores[0].to_dense();
            return Ok(Self {
                cores: vec![OpCore::Dense(sum)],
            });
        }
        let mut cores = Vec::with_capacity(d);
        for k in 0..d {
            let a = self.cores[k].to_dense();
            let b = other.cores[k].to_dense();
            let (al, no, ni, ar) = a.dim();
            let (bl, _, _, br) = b.dim();
            let core = if k == 0 {
                let mut c = Array4::zeros((1, no, ni, ar + br));
                c.slice_mut(ndarray::s![.., .., .., ..ar]).assign(&a);
                c.slice_mut(ndarray::s![.., .., .., ar..]).assign(&b);
                c
            } else if k == d - 1 {
                let mut c = Array4::zeros((al + bl, no, ni, 1));
                c.slice_mut(ndarray::s![..al, .., .., ..]).assign(&a);
                c.slice_mut(ndarray::s![al.., .., .., ..]).assign(&b);
                c
            } else {
                let mut c = Array4::zeros((al + bl, no, ni, ar + br));
                c.slice_mut(ndarray::s![..al, .., .., ..ar]).assign(&a);
                c.slice_mut(ndarray::s![al.., .., .., ar..]).assign(&b);
                c
            };
            cores.push(OpCore::Dense(core));
        }
        Ok(Self { cores })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, TtError> {
        self.add(&other.scale(-1.0))
    }

    /// TT-matrix recompression: each core's row/column pair is folded into a
    /// single mode, the folded train is rounded as a tensor, and the cores
    /// are unfolded back.
    pub fn round(&self, eps: f64) -> Self {
        let folded: Vec<Array3<f64>> = self
            .cores
            .iter()
            .map(|c| {
                let dense = c.to_dense();
                let (rl, no, ni, rr) = dense.dim();
                dense
                    .into_shape_with_order((rl, no * ni, rr))
                    .expect("fold")
            })
            .collect();
        let tensor = TTTensor::from_cores(folded).expect("folded train");
        let rounded = tensor.round(eps);
        let sizes: Vec<(usize, usize)> = self.cores.iter().map(|c| c.sizes()).collect();
        let cores = rounded
            .cores()
            .iter()
            .zip(sizes)
            .map(|(g, (no, ni))| {
                let (rl, _, rr) = g.dim();
                OpCore::Dense(
                    g.clone()
                        .into_shape_with_order((rl, no, ni, rr))
                        .expect("unfold"),
                )
            })
            .collect();
        Self { cores }
    }

    /// Materializes the operator as a dense matrix (oracle scale only).
    pub fn to_dense_matrix(&self, cap: usize) -> Result<Array2<f64>, TtError> {
        let rows: usize = self.out_sizes().iter().product();
        let cols: usize = self.in_sizes().iter().product();
        if rows * cols > cap {
            return Err(TtError::SizeCap {
                elements: rows * cols,
                cap,
            });
        }
        // acc[(i..), (j..), b] accumulates partial products over leading cores
        let mut acc = Array3::from_elem((1, 1, 1), 1.0);
        for core in &self.cores {
            let dense = core.to_dense();
            let (rl, no, ni, rr) = dense.dim();
            let (ar, ac, _) = acc.dim();
            let mut next = Array3::zeros((ar * no, ac * ni, rr));
            for big_i in 0..ar {
                for big_j in 0..ac {
                    for a in 0..rl {
                        let w = acc[[big_i, big_j, a]];
                        if w == 0.0 {
                            continue;
                        }
                        for i in 0..no {
                            for j in 0..ni {
                                for b in 0..rr {
                                    next[[big_i * no + i, big_j * ni + j, b]] +=
                                        w * dense[[a, i, j, b]];
                                }
                            }
                        }
                    }
                }
            }
            acc = next;
        }
        Ok(acc
            .into_shape_with_order((rows, cols))
            .expect("dense matrix shape"))
    }
}
