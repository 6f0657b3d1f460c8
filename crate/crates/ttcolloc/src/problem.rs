//! Problem descriptions, space-time grids and the boundary/interior node
//! split.

use crate::chebyshev::{ChebyshevGrid1D, GridError};
use crate::field::DenseField;
use thiserror::Error;

pub type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SpaceTimeFn = Box<dyn Fn(f64, f64, f64, f64) -> f64 + Send + Sync>;
pub type SpaceFn = Box<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("initial and boundary data disagree at t=0, node ({x}, {y}, {z}): g={g}, h={h}")]
    Incompatible {
        x: f64,
        y: f64,
        z: f64,
        g: f64,
        h: f64,
    },
    #[error("interior split needs at least 3 points per non-degenerate mode, got {0}")]
    NoInterior(usize),
}

/// Coefficient functions, data and domain of one nonlinear
/// convection-diffusion problem
///
/// ```text
///   u_t - a(u) Lap(u) + b(u) . grad(u) = f(u) + s(t,x,y,z)
/// ```
///
/// with Dirichlet data `g` on the space boundary and initial state `h`. The
/// optional source `s` carries the manufactured-solution correction; it is
/// independent of `u` and therefore absent from the Jacobian.
pub struct ProblemSpec {
    pub name: &'static str,
    pub diffusion: ScalarFn,
    pub diffusion_du: ScalarFn,
    pub convection: [ScalarFn; 3],
    pub convection_du: [ScalarFn; 3],
    pub forcing: ScalarFn,
    pub forcing_du: ScalarFn,
    pub source: Option<SpaceTimeFn>,
    pub boundary: SpaceTimeFn,
    pub initial: SpaceFn,
    pub time_interval: (f64, f64),
    pub space_intervals: [(f64, f64); 3],
    pub exact: Option<SpaceTimeFn>,
}

impl ProblemSpec {
    /// Verifies g(0, .) = h(.) at every spatial boundary node of the grids.
    pub fn check_compatibility(&self, grids: &SpaceTimeGrids) -> Result<(), ProblemError> {
        let t0 = self.time_interval.0;
        let shape = grids.shape();
        for ix in 0..shape[1] {
            for iy in 0..shape[2] {
                for iz in 0..shape[3] {
                    let on_boundary = grids.is_space_boundary([ix, iy, iz]);
                    if !on_boundary {
                        continue;
                    }
                    let x = grids.grids[1].nodes[ix];
                    let y = grids.grids[2].nodes[iy];
                    let z = grids.grids[3].nodes[iz];
                    let g = (self.boundary)(t0, x, y, z);
                    let h = (self.initial)(x, y, z);
                    if (g - h).abs() > 1e-10 {
                        return Err(ProblemError::Incompatible { x, y, z, g, h });
                    }
                }
            }
        }
        Ok(())
    }
}

/// The four 1-D collocation grids of the space-time discretization, in
/// `(t, x, y, z)` order.
#[derive(Debug, Clone)]
pub struct SpaceTimeGrids {
    pub grids: [ChebyshevGrid1D; 4],
}

impl SpaceTimeGrids {
    pub fn new(grids: [ChebyshevGrid1D; 4]) -> Self {
        Self { grids }
    }

    /// Cubic grid with `n_points` collocation points along every dimension
    /// of the problem's domain.
    pub fn for_problem(problem: &ProblemSpec, n_points: usize) -> Result<Self, GridError> {
        let t = ChebyshevGrid1D::new(n_points, problem.time_interval)?;
        let x = ChebyshevGrid1D::new(n_points, problem.space_intervals[0])?;
        let y = ChebyshevGrid1D::new(n_points, problem.space_intervals[1])?;
        let z = ChebyshevGrid1D::new(n_points, problem.space_intervals[2])?;
        Ok(Self {
            grids: [t, x, y, z],
        })
    }

    pub fn shape(&self) -> [usize; 4] {
        [
            self.grids[0].len(),
            self.grids[1].len(),
            self.grids[2].len(),
            self.grids[3].len(),
        ]
    }

    pub fn node(&self, idx: [usize; 4]) -> (f64, f64, f64, f64) {
        (
            self.grids[0].nodes[idx[0]],
            self.grids[1].nodes[idx[1]],
            self.grids[2].nodes[idx[2]],
            self.grids[3].nodes[idx[3]],
        )
    }

    /// True when the spatial multi-index lies on the boundary of the spatial
    /// box. Singleton modes have no boundary.
    pub fn is_space_boundary(&self, space_idx: [usize; 3]) -> bool {
        for (k, &i) in space_idx.iter().enumerate() {
            let n = self.grids[k + 1].len();
            if n > 1 && (i == 0 || i == n - 1) {
                return true;
            }
        }
        false
    }

    /// Samples a space-time function at every grid node.
    pub fn sample(&self, f: &dyn Fn(f64, f64, f64, f64) -> f64) -> DenseField {
        DenseField::from_fn(self.shape(), |idx| {
            let (t, x, y, z) = self.node(idx);
            f(t, x, y, z)
        })
    }
}

/// Partition of the space-time grid into BC/IC nodes and interior nodes.
///
/// The `t = 0` plane is boundary (the initial condition is treated like a
/// boundary condition) while the final-time plane is interior; spatial
/// boundary planes are boundary at every time level. The interior set is
/// the index box `1..n_t` x `1..n-1` x `1..n-1` x `1..n-1`, of size
/// `N (N-1)^3` for `N + 1` points per dimension. Modes of size one are
/// treated as fully interior, which lets lower-dimensional analogues reuse
/// the 4-way machinery.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSplit {
    full_shape: [usize; 4],
    start: [usize; 4],
    len: [usize; 4],
}

impl IndexSplit {
    pub fn new(full_shape: [usize; 4]) -> Result<Self, ProblemError> {
        let mut start = [0usize; 4];
        let mut len = [0usize; 4];
        for mode in 0..4 {
            let n = full_shape[mode];
            if n == 1 {
                start[mode] = 0;
                len[mode] = 1;
            } else if mode == 0 {
                if n < 2 {
                    return Err(ProblemError::NoInterior(n));
                }
                start[mode] = 1;
                len[mode] = n - 1;
            } else {
                if n < 3 {
                    return Err(ProblemError::NoInterior(n));
                }
                start[mode] = 1;
                len[mode] = n - 2;
            }
        }
        Ok(Self {
            full_shape,
            start,
            len,
        })
    }

    pub fn full_shape(&self) -> [usize; 4] {
        self.full_shape
    }

    pub fn interior_shape(&self) -> [usize; 4] {
        self.len
    }

    /// First interior index along each mode.
    pub fn interior_start(&self) -> [usize; 4] {
        self.start
    }

    pub fn interior_count(&self) -> usize {
        self.len.iter().product()
    }

    pub fn boundary_count(&self) -> usize {
        self.full_shape.iter().product::<usize>() - self.interior_count()
    }

    pub fn is_interior(&self, idx: [usize; 4]) -> bool {
        (0..4).all(|m| idx[m] >= self.start[m] && idx[m] < self.start[m] + self.len[m])
    }

    /// Maps a full-grid multi-index to the interior multi-index, when interior.
    pub fn to_interior(&self, idx: [usize; 4]) -> Option<[usize; 4]> {
        if self.is_interior(idx) {
            Some([
                idx[0] - self.start[0],
                idx[1] - self.start[1],
                idx[2] - self.start[2],
                idx[3] - self.start[3],
            ])
        } else {
            None
        }
    }

    pub fn to_full(&self, interior_idx: [usize; 4]) -> [usize; 4] {
        [
            interior_idx[0] + self.start[0],
            interior_idx[1] + self.start[1],
            interior_idx[2] + self.start[2],
            interior_idx[3] + self.start[3],
        ]
    }

    /// Copies the interior block of a full field into interior shape.
    pub fn restrict(&self, full: &DenseField) -> DenseField {
        debug_assert_eq!(full.shape(), self.full_shape);
        let mut out = DenseField::zeros(self.len);
        for it in 0..self.len[0] {
            for ix in 0..self.len[1] {
                for iy in 0..self.len[2] {
                    for iz in 0..self.len[3] {
                        let idx = [it, ix, iy, iz];
                        out.set(idx, full.get(self.to_full(idx)));
                    }
                }
            }
        }
        out
    }

    /// Embeds interior values into a copy of `background` (a full-shape
    /// field, typically the boundary-values field or zeros).
    pub fn embed(&self, interior: &DenseField, background: &DenseField) -> DenseField {
        debug_assert_eq!(interior.shape(), self.len);
        debug_assert_eq!(background.shape(), self.full_shape);
        let mut out = background.clone();
        for it in 0..self.len[0] {
            for ix in 0..self.len[1] {
                for iy in 0..self.len[2] {
                    for iz in 0..self.len[3] {
                        let idx = [it, ix, iy, iz];
                        out.set(self.to_full(idx), interior.get(idx));
                    }
                }
            }
        }
        out
    }

    pub fn embed_zero(&self, interior: &DenseField) -> DenseField {
        let zeros = DenseField::zeros(self.full_shape);
        self.embed(interior, &zeros)
    }
}

/// Split for a cubic grid with `n_points` collocation points per dimension.
pub fn split_indices(n_points: usize) -> Result<IndexSplit, ProblemError> {
    IndexSplit::new([n_points; 4])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interior_count_formula() {
        // N + 1 = 3 points per dim: N (N-1)^3 = 2 * 1 = 2
        let split = split_indices(3).unwrap();
        assert_eq!(split.interior_count(), 2);
        // N + 1 = 5 points per dim: 4 * 27 = 108
        let split = split_indices(5).unwrap();
        assert_eq!(split.interior_count(), 108);
        assert_eq!(
            split.boundary_count() + split.interior_count(),
            5usize.pow(4)
        );
    }

    #[test]
    fn interior_count_by_enumeration() {
        let split = split_indices(5).unwrap();
        let mut count = 0;
        for t in 0..5 {
            for x in 0..5 {
                for y in 0..5 {
                    for z in 0..5 {
                        if split.is_interior([t, x, y, z]) {
                            count += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(count, 108);
    }

    #[test]
    fn paper_2d_example_has_six_interior_nodes() {
        // 4 collocation points in (t, x), singleton y and z: the worked
        // example's grid u_1..u_16 with interior {u6, u7, u8, u10, u11, u12}.
        let split = IndexSplit::new([4, 4, 1, 1]).unwrap();
        assert_eq!(split.interior_count(), 6);
        // final-time column is interior, t=0 and x-boundary are not
        assert!(split.is_interior([3, 1, 0, 0]));
        assert!(split.is_interior([3, 2, 0, 0]));
        assert!(!split.is_interior([0, 1, 0, 0]));
        assert!(!split.is_interior([2, 0, 0, 0]));
        assert!(!split.is_interior([2, 3, 0, 0]));
    }

    #[test]
    fn rejects_too_small_grids() {
        assert!(split_indices(2).is_err());
        assert!(IndexSplit::new([2, 3, 3, 3]).is_ok());
        assert!(IndexSplit::new([3, 2, 3, 3]).is_err());
    }

    #[test]
    fn embed_restrict_roundtrip() {
        let split = split_indices(4).unwrap();
        let interior = DenseField::from_fn(split.interior_shape(), |idx| {
            (idx[0] * 27 + idx[1] * 9 + idx[2] * 3 + idx[3]) as f64 + 1.0
        });
        let background = DenseField::from_fn([4; 4], |_| -5.0);
        let full = split.embed(&interior, &background);
        assert_eq!(split.restrict(&full), interior);
        // boundary untouched
        assert_eq!(full.get([0, 0, 0, 0]), -5.0);
        assert_eq!(full.get([3, 3, 3, 3]), -5.0);
        // final time plane interior
        assert_eq!(full.get([3, 1, 1, 1]), interior.get([2, 0, 0, 0]));
    }
}
