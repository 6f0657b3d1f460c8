//! Four-way fields over the space-time grid and matrix-free application of
//! Kronecker-structured operators.
//!
//! A [`DenseField`] stores values in lexicographic `(t, x, y, z)` order with
//! `t` slowest and `z` fastest. That single flattening convention is shared
//! by every module in the crate, matching the Kronecker order
//! `A_t = S_t (x) I (x) I (x) I` of the space-time operators. Operators never
//! materialize the `(N+1)^4 x (N+1)^4` matrices; they act as 1-D matrix
//! contractions along tensor modes.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: [usize; 4],
        got: [usize; 4],
    },
    #[error("value count {got} does not match shape {shape:?} ({expected} values)")]
    BadLength {
        shape: [usize; 4],
        expected: usize,
        got: usize,
    },
    #[error("non-finite value at linear index {0}")]
    NonFinite(usize),
    #[error("factor for mode {mode} has {cols} columns but the field mode size is {size}")]
    FactorMismatch {
        mode: usize,
        cols: usize,
        size: usize,
    },
}

/// Dense 4-way array of solution values indexed `(t, x, y, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseField {
    shape: [usize; 4],
    values: Vec<f64>,
}

impl DenseField {
    pub fn zeros(shape: [usize; 4]) -> Self {
        let len = shape.iter().product();
        Self {
            shape,
            values: vec![0.0; len],
        }
    }

    pub fn from_values(shape: [usize; 4], values: Vec<f64>) -> Result<Self, FieldError> {
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(FieldError::BadLength {
                shape,
                expected,
                got: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(pos));
        }
        Ok(Self { shape, values })
    }

    /// Builds a field by evaluating `f` at every multi-index.
    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut([usize; 4]) -> f64) -> Self {
        let mut out = Self::zeros(shape);
        let mut pos = 0;
        for t in 0..shape[0] {
            for x in 0..shape[1] {
                for y in 0..shape[2] {
                    for z in 0..shape[3] {
                        out.values[pos] = f([t, x, y, z]);
                        pos += 1;
                    }
                }
            }
        }
        out
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn linear_index(&self, idx: [usize; 4]) -> usize {
        ((idx[0] * self.shape[1] + idx[1]) * self.shape[2] + idx[2]) * self.shape[3] + idx[3]
    }

    #[inline]
    pub fn get(&self, idx: [usize; 4]) -> f64 {
        self.values[self.linear_index(idx)]
    }

    #[inline]
    pub fn set(&mut self, idx: [usize; 4], value: f64) {
        let i = self.linear_index(idx);
        self.values[i] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            shape: self.shape,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn scale_in_place(&mut self, alpha: f64) {
        for v in &mut self.values {
            *v *= alpha;
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        Self {
            shape: self.shape,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        Self {
            shape: self.shape,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Contracts `matrix` (shape `out x n_mode`) against the given mode,
    /// leaving all other modes untouched. This is the action of
    /// `I (x) .. (x) M (x) .. (x) I` without forming the Kronecker product.
    pub fn apply_mode(&self, mode: usize, matrix: &Array2<f64>) -> Result<Self, FieldError> {
        assert!(mode < 4);
        let nk = self.shape[mode];
        if matrix.ncols() != nk {
            return Err(FieldError::FactorMismatch {
                mode,
                cols: matrix.ncols(),
                size: nk,
            });
        }
        let out_k = matrix.nrows();
        let left: usize = self.shape[..mode].iter().product();
        let right: usize = self.shape[mode + 1..].iter().product();
        let mut out_shape = self.shape;
        out_shape[mode] = out_k;
        let mut out = DenseField::zeros(out_shape);

        if right == 1 {
            // (left, nk) * M^T  ->  (left, out_k) in one gemm
            let src = ArrayView2::from_shape((left, nk), &self.values).unwrap();
            let mut dst = ArrayViewMut2::from_shape((left, out_k), &mut out.values).unwrap();
            general_mat_mul(1.0, &src, &matrix.t(), 0.0, &mut dst);
        } else {
            for l in 0..left {
                let src = ArrayView2::from_shape(
                    (nk, right),
                    &self.values[l * nk * right..(l + 1) * nk * right],
                )
                .unwrap();
                let mut dst = ArrayViewMut2::from_shape(
                    (out_k, right),
                    &mut out.values[l * out_k * right..(l + 1) * out_k * right],
                )
                .unwrap();
                general_mat_mul(1.0, &matrix.view(), &src, 0.0, &mut dst);
            }
        }
        Ok(out)
    }
}

/// One Kronecker factor of a space-time operator.
#[derive(Debug, Clone)]
pub enum Factor {
    /// Identity of the given size; skipped at zero cost during application.
    Identity(usize),
    /// Explicit matrix acting on one mode (rows may differ from columns).
    Matrix(Array2<f64>),
}

impl Factor {
    pub fn in_size(&self) -> usize {
        match self {
            Factor::Identity(n) => *n,
            Factor::Matrix(m) => m.ncols(),
        }
    }

    pub fn out_size(&self) -> usize {
        match self {
            Factor::Identity(n) => *n,
            Factor::Matrix(m) => m.nrows(),
        }
    }

    /// Materializes the factor as a dense matrix (used by oracles and the
    /// tensor-train operator constructors).
    pub fn to_matrix(&self) -> Array2<f64> {
        match self {
            Factor::Identity(n) => Array2::eye(*n),
            Factor::Matrix(m) => m.clone(),
        }
    }
}

/// A scaled Kronecker product `scale * F_t (x) F_x (x) F_y (x) F_z`.
#[derive(Debug, Clone)]
pub struct KroneckerTerm {
    pub factors: [Factor; 4],
    pub scale: f64,
}

impl KroneckerTerm {
    pub fn new(factors: [Factor; 4]) -> Self {
        Self {
            factors,
            scale: 1.0,
        }
    }

    pub fn scaled(factors: [Factor; 4], scale: f64) -> Self {
        Self { factors, scale }
    }
}

/// Applies a Kronecker term to a field without assembling the big matrix.
pub fn kron_apply(term: &KroneckerTerm, field: &DenseField) -> Result<DenseField, FieldError> {
    let shape = field.shape();
    for (mode, factor) in term.factors.iter().enumerate() {
        if factor.in_size() != shape[mode] {
            return Err(FieldError::FactorMismatch {
                mode,
                cols: factor.in_size(),
                size: shape[mode],
            });
        }
    }
    let mut current = field.clone();
    for (mode, factor) in term.factors.iter().enumerate() {
        if let Factor::Matrix(m) = factor {
            current = current.apply_mode(mode, m)?;
        }
    }
    if term.scale != 1.0 {
        current.scale_in_place(term.scale);
    }
    Ok(current)
}

/// Elementwise product, the action of `diag(weights)`.
pub fn pointwise_scale(weights: &DenseField, field: &DenseField) -> Result<DenseField, FieldError> {
    if weights.shape() != field.shape() {
        return Err(FieldError::ShapeMismatch {
            expected: weights.shape(),
            got: field.shape(),
        });
    }
    let values = weights
        .as_slice()
        .iter()
        .zip(field.as_slice())
        .map(|(w, v)| w * v)
        .collect();
    Ok(DenseField {
        shape: field.shape(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebyshev::ChebyshevGrid1D;
    use ndarray::Array1;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_field(shape: [usize; 4], rng: &mut impl Rng) -> DenseField {
        DenseField::from_fn(shape, |_| rng.random_range(-1.0..1.0))
    }

    fn random_matrix(n: usize, rng: &mut impl Rng) -> Array2<f64> {
        Array2::from_shape_fn((n, n), |_| rng.random_range(-1.0..1.0))
    }

    /// Brute-force oracle: assemble the full Kronecker matrix and multiply
    /// the flattened field.
    fn kron_apply_dense(term: &KroneckerTerm, field: &DenseField) -> Vec<f64> {
        let mats: Vec<Array2<f64>> = term.factors.iter().map(|f| f.to_matrix()).collect();
        let mut big = Array2::from_elem((1, 1), 1.0);
        for m in &mats {
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
        let v = Array1::from(field.as_slice().to_vec());
        (big.dot(&v) * term.scale).to_vec()
    }

    #[test]
    fn identity_factors_return_field() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = random_field([2, 3, 2, 4], &mut rng);
        let term = KroneckerTerm::new([
            Factor::Identity(2),
            Factor::Identity(3),
            Factor::Identity(2),
            Factor::Identity(4),
        ]);
        let g = kron_apply(&term, &f).unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn time_derivative_kills_constant_in_time() {
        let grid = ChebyshevGrid1D::new(5, (0.0, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spatial = random_field([1, 3, 3, 3], &mut rng);
        let f = DenseField::from_fn([5, 3, 3, 3], |[_, x, y, z]| spatial.get([0, x, y, z]));
        let term = KroneckerTerm::new([
            Factor::Matrix(grid.d1.clone()),
            Factor::Identity(3),
            Factor::Identity(3),
            Factor::Identity(3),
        ]);
        let g = kron_apply(&term, &f).unwrap();
        for v in g.as_slice() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn matches_dense_kronecker_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = random_field([2, 2, 2, 2], &mut rng);
        let term = KroneckerTerm::scaled(
            [
                Factor::Matrix(random_matrix(2, &mut rng)),
                Factor::Matrix(random_matrix(2, &mut rng)),
                Factor::Matrix(random_matrix(2, &mut rng)),
                Factor::Matrix(random_matrix(2, &mut rng)),
            ],
            -1.75,
        );
        let got = kron_apply(&term, &f).unwrap();
        let want = kron_apply_dense(&term, &f);
        for (g, w) in got.as_slice().iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{g} vs {w}");
        }
    }

    #[test]
    fn mixed_identity_and_matrix_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_field([3, 2, 4, 2], &mut rng);
        let term = KroneckerTerm::new([
            Factor::Identity(3),
            Factor::Matrix(random_matrix(2, &mut rng)),
            Factor::Identity(4),
            Factor::Matrix(random_matrix(2, &mut rng)),
        ]);
        let got = kron_apply(&term, &f).unwrap();
        let want = kron_apply_dense(&term, &f);
        for (g, w) in got.as_slice().iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn kron_apply_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = random_field([2, 3, 2, 3], &mut rng);
        let v = random_field([2, 3, 2, 3], &mut rng);
        let term = KroneckerTerm::new([
            Factor::Matrix(random_matrix(2, &mut rng)),
            Factor::Identity(3),
            Factor::Matrix(random_matrix(2, &mut rng)),
            Factor::Identity(3),
        ]);
        let (alpha, beta) = (0.7, -2.3);
        let mut comb = u.scale(alpha);
        comb.axpy(beta, &v);
        let lhs = kron_apply(&term, &comb).unwrap();
        let mut rhs = kron_apply(&term, &u).unwrap().scale(alpha);
        rhs.axpy(beta, &kron_apply(&term, &v).unwrap());
        for (a, b) in lhs.as_slice().iter().zip(rhs.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn first_derivative_twice_equals_second_derivative() {
        let grid = ChebyshevGrid1D::new(7, (-2.0, 2.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let f = random_field([2, 7, 2, 2], &mut rng);
        let once = f.apply_mode(1, &grid.d1).unwrap();
        let twice = once.apply_mode(1, &grid.d1).unwrap();
        let direct = f.apply_mode(1, &grid.d2).unwrap();
        let scale = direct.norm().max(1e-30);
        let diff = twice.sub(&direct).norm();
        assert!(diff / scale < 1e-10);
    }

    #[test]
    fn pointwise_scale_matches_diag_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = random_field([2, 2, 2, 2], &mut rng);
        let v = random_field([2, 2, 2, 2], &mut rng);
        let got = pointwise_scale(&w, &v).unwrap();
        for i in 0..16 {
            assert!((got.as_slice()[i] - w.as_slice()[i] * v.as_slice()[i]).abs() < 1e-15);
        }
        let ones = DenseField::from_fn([2, 2, 2, 2], |_| 1.0);
        assert_eq!(pointwise_scale(&ones, &v).unwrap(), v);
        let zeros = DenseField::zeros([2, 2, 2, 2]);
        assert!(pointwise_scale(&zeros, &v).unwrap().norm() == 0.0);
    }

    #[test]
    fn shape_errors_are_reported() {
        let f = DenseField::zeros([2, 2, 2, 2]);
        let g = DenseField::zeros([2, 2, 2, 3]);
        assert!(pointwise_scale(&f, &g).is_err());
        let term = KroneckerTerm::new([
            Factor::Identity(3),
            Factor::Identity(2),
            Factor::Identity(2),
            Factor::Identity(2),
        ]);
        assert!(kron_apply(&term, &f).is_err());
        assert!(DenseField::from_values([1, 1, 1, 2], vec![1.0, f64::NAN]).is_err());
        assert!(DenseField::from_values([1, 1, 1, 2], vec![1.0]).is_err());
    }
}
