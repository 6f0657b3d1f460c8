//! TT rounding: an orthogonalization sweep followed by a truncated-SVD
//! sweep in the opposite direction, with the error budget split evenly
//! across the d-1 unfoldings so that
//! `||x - round(x, eps)||_F <= eps ||x||_F`.

use super::{flatten_view, TTTensor};
use ndarray::{Array2, Array3};
use ndarray_linalg::{JobSvd, SVDDC};

/// Thin SVD via LAPACK divide-and-conquer.
fn svd_thin(m: &Array2<f64>) -> (Array2<f64>, Vec<f64>, Array2<f64>) {
    let (u, s, vt) = m
        .svddc(JobSvd::Some)
        .expect("LAPACK SVD failed on a finite matrix");
    (u.expect("U requested"), s.to_vec(), vt.expect("VT requested"))
}

/// Truncates at absolute Frobenius budget `delta`: keeps the smallest rank
/// whose discarded tail satisfies `sum sigma_i^2 <= delta^2` (at least 1).
pub(crate) fn truncated_svd(
    m: &Array2<f64>,
    delta: f64,
) -> (Array2<f64>, Vec<f64>, Array2<f64>) {
    let (u, s, vt) = svd_thin(m);
    let mut keep = s.len();
    let budget = delta * delta;
    let mut tail = 0.0;
    while keep > 1 {
        let candidate = tail + s[keep - 1] * s[keep - 1];
        if candidate <= budget {
            tail = candidate;
            keep -= 1;
        } else {
            break;
        }
    }
    // drop exactly-zero trailing values even when delta is 0
    while keep > 1 && s[keep - 1] == 0.0 {
        keep -= 1;
    }
    let u_r = u.slice(ndarray::s![.., ..keep]).to_owned();
    let vt_r = vt.slice(ndarray::s![..keep, ..]).to_owned();
    (u_r, s[..keep].to_vec(), vt_r)
}

/// Right-to-left sweep leaving cores 1..d-1 with orthonormal rows in their
/// `(r_{k-1}) x (n_k r_k)` unfolding; core 0 carries the whole norm.
pub(crate) fn right_orthogonalize(cores: &mut [Array3<f64>]) {
    let d = cores.len();
    for k in (1..d).rev() {
        let (rl, n, rr) = cores[k].dim();
        let m = flatten_view(&cores[k], rl, n * rr).to_owned();
        // M = U S V^T: the V^T rows become the orthogonal core, U S flows left
        let (u, s, vt) = svd_thin(&m);
        let rank = s.len();
        cores[k] = vt
            .into_shape_with_order((rank, n, rr))
            .expect("core reshape");
        let mut carry = u; // (rl, rank)
        for (j, &sj) in s.iter().enumerate() {
            carry.column_mut(j).mapv_inplace(|v| sj * v);
        }
        let (pl, pn, _) = cores[k - 1].dim();
        let prev = flatten_view(&cores[k - 1], pl * pn, rl);
        cores[k - 1] = prev
            .dot(&carry)
            .into_shape_with_order((pl, pn, rank))
            .expect("carry reshape");
    }
}

pub(crate) fn round(x: &TTTensor, eps: f64) -> TTTensor {
    assert!(eps >= 0.0, "rounding tolerance must be non-negative");
    let d = x.cores().len();
    let mut cores: Vec<Array3<f64>> = x.cores().to_vec();
    if d == 1 {
        return TTTensor::from_cores(cores).expect("single core");
    }
    right_orthogonalize(&mut cores);
    let norm: f64 = cores[0].iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return TTTensor::zeros(&x.mode_sizes());
    }
    let delta = eps * norm / ((d - 1) as f64).sqrt();

    for k in 0..d - 1 {
        let (rl, n, rr) = cores[k].dim();
        let m = flatten_view(&cores[k], rl * n, rr).to_owned();
        let (u, s, vt) = truncated_svd(&m, delta);
        let rank = s.len();
        cores[k] = u.into_shape_with_order((rl, n, rank)).expect("core reshape");
        let mut carry = vt; // (rank, rr)
        for (i, &si) in s.iter().enumerate() {
            carry.row_mut(i).mapv_inplace(|v| si * v);
        }
        let (_, nn, nr) = cores[k + 1].dim();
        let next = flatten_view(&cores[k + 1], rr, nn * nr);
        cores[k + 1] = carry
            .dot(&next)
            .into_shape_with_order((rank, nn, nr))
            .expect("carry reshape");
    }
    TTTensor::from_cores(cores).expect("rounded cores")
}
