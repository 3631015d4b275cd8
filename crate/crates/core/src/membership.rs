//! Gaussian memberships of points to cluster centers, their bandwidths, the
//! Frobenius mismatch between two membership matrices and its gradient with
//! respect to the low-dimensional points.

use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{CbmapError, Result};
use crate::linalg::{median, squared_distance};

/// Loss values at or below this are treated as an exact match.
pub const LOSS_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaEstimate {
    pub value: f64,
    pub space: Space,
}

/// `n x k` matrix of Gaussian memberships in `(0, 1]`, with the bandwidth used.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    pub values: Array2<f64>,
    pub sigma: f64,
}

impl MembershipMatrix {
    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// Mean over centers of the per-center median point distance.
///
/// `distances` is `n x k` (points by centers); every point contributes to
/// every center's median.
pub fn sigma_high(distances: ArrayView2<f64>) -> Result<SigmaEstimate> {
    let (n, k) = distances.dim();
    if n == 0 || k == 0 {
        return Err(CbmapError::Degenerate("empty distance matrix".into()));
    }
    let mut column = Vec::with_capacity(n);
    let mut total = 0.0;
    for col in distances.columns() {
        column.clear();
        column.extend(col.iter().copied());
        total += median(&mut column);
    }
    let value = total / k as f64;
    if value.is_nan() || value <= 0.0 {
        return Err(CbmapError::Degenerate(
            "high-dimensional bandwidth is zero: points coincide with the cluster centers".into(),
        ));
    }
    Ok(SigmaEstimate {
        value,
        space: Space::High,
    })
}

/// Mean over centers of the median distance to the other `k - 1` centers.
pub fn sigma_low(centers: ArrayView2<f64>) -> Result<SigmaEstimate> {
    let k = centers.nrows();
    if k < 2 {
        return Err(CbmapError::InvalidParameter(format!(
            "low-dimensional bandwidth needs at least 2 centers, got {k}"
        )));
    }
    let centers = centers.as_standard_layout();
    let row = |i: usize| centers.row(i).to_slice().expect("standard layout");
    let mut others = Vec::with_capacity(k - 1);
    let mut total = 0.0;
    for j in 0..k {
        others.clear();
        others.extend(
            (0..k)
                .filter(|&i| i != j)
                .map(|i| squared_distance(row(j), row(i)).sqrt()),
        );
        total += median(&mut others);
    }
    let value = total / k as f64;
    if value.is_nan() || value <= 0.0 {
        return Err(CbmapError::Degenerate(
            "low-dimensional bandwidth is zero: cluster centers coincide".into(),
        ));
    }
    Ok(SigmaEstimate {
        value,
        space: Space::Low,
    })
}

/// `exp(-d^2 / (2 sigma^2))` entrywise.
pub fn membership_matrix(distances: ArrayView2<f64>, sigma: f64) -> Result<MembershipMatrix> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(CbmapError::InvalidParameter(format!(
            "bandwidth must be positive and finite, got {sigma}"
        )));
    }
    let scale = -1.0 / (2.0 * sigma * sigma);
    Ok(MembershipMatrix {
        values: distances.mapv(|d| (d * d * scale).exp()),
        sigma,
    })
}

/// Same as [`membership_matrix`] but from squared distances.
pub(crate) fn membership_from_squared(sq: &Array2<f64>, sigma: f64) -> Array2<f64> {
    let scale = -1.0 / (2.0 * sigma * sigma);
    sq.mapv(|d2| (d2 * scale).exp())
}

/// Frobenius norm of `low - high`.
pub fn frobenius_loss(low: &MembershipMatrix, high: &MembershipMatrix) -> Result<f64> {
    if low.dim() != high.dim() {
        return Err(CbmapError::shapes(low.dim(), high.dim()));
    }
    Ok(frobenius_distance(&low.values, &high.values))
}

pub(crate) fn frobenius_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    Zip::from(a)
        .and(b)
        .fold(0.0, |acc, x, y| {
            let t = x - y;
            acc + t * t
        })
        .sqrt()
}

/// Gradient of the Frobenius loss with respect to each low-dimensional point.
///
/// `grad[i, l] = sum_j -((uL_ij - uH_ij) / F) * uL_ij * (y_il - c_jl) / sigma_low^2`,
/// with centers and bandwidth held fixed. Returns zeros when `loss <= LOSS_EPSILON`.
pub fn loss_gradient(
    points: ArrayView2<f64>,
    centers: ArrayView2<f64>,
    sigma_low: f64,
    low: &MembershipMatrix,
    high: &MembershipMatrix,
    loss: f64,
) -> Result<Array2<f64>> {
    let (n, m) = points.dim();
    let k = centers.nrows();
    if centers.ncols() != m {
        return Err(CbmapError::shapes(points.dim(), centers.dim()));
    }
    if low.dim() != (n, k) {
        return Err(CbmapError::shapes(low.dim(), (n, k)));
    }
    if high.dim() != (n, k) {
        return Err(CbmapError::shapes(high.dim(), (n, k)));
    }
    if sigma_low.is_nan() || sigma_low <= 0.0 {
        return Err(CbmapError::InvalidParameter(format!(
            "bandwidth must be positive, got {sigma_low}"
        )));
    }
    Ok(gradient_unchecked(
        points,
        centers,
        sigma_low,
        &low.values,
        &high.values,
        loss,
    ))
}

pub(crate) fn gradient_unchecked(
    points: ArrayView2<f64>,
    centers: ArrayView2<f64>,
    sigma_low: f64,
    low: &Array2<f64>,
    high: &Array2<f64>,
    loss: f64,
) -> Array2<f64> {
    let mut grad = Array2::zeros(points.dim());
    if loss <= LOSS_EPSILON {
        return grad;
    }
    let coef = -1.0 / (loss * sigma_low * sigma_low);
    for (i, mut g) in grad.outer_iter_mut().enumerate() {
        let y = points.row(i);
        for (j, c) in centers.outer_iter().enumerate() {
            let ul = low[[i, j]];
            let w = coef * (ul - high[[i, j]]) * ul;
            for ((gl, yl), cl) in g.iter_mut().zip(y).zip(c) {
                *gl += w * (yl - cl);
            }
        }
    }
    grad
}
