//! Dense-matrix primitives: pairwise distances, column z-scoring and PCA.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{CbmapError, Result};

/// A dense `n x d` matrix of finite features with `n >= 1` and `d >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(Array2<f64>);

impl DataMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, d) = values.dim();
        if n == 0 || d == 0 {
            return Err(CbmapError::Degenerate(format!(
                "data matrix must be non-empty, got {n}x{d}"
            )));
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(CbmapError::NonFinite { row, col });
        }
        Ok(DataMatrix(values))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(CbmapError::InvalidParameter(format!(
                "row {i} has {} values, expected {d}",
                r.len()
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), d), flat)
            .map_err(|e| CbmapError::InvalidParameter(e.to_string()))?;
        Self::new(values)
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Fitted principal component projection.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    /// Column means of the training data (length `d`).
    pub mean: Array1<f64>,
    /// `m x d`, orthonormal rows in order of decreasing explained variance.
    pub components: Array2<f64>,
    /// Variance captured by each component (length `m`, non-increasing).
    pub explained_variance: Array1<f64>,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.components.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.components.nrows()
    }
}

/// Squared Euclidean distance between two equal-length slices.
#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x - y;
            t * t
        })
        .sum()
}

/// Row-to-row squared distances without a shape check. Rows must be contiguous.
pub(crate) fn squared_distance_matrix(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let a = a.as_standard_layout();
    let b = b.as_standard_layout();
    let (n, k) = (a.nrows(), b.nrows());
    let mut out = Array2::zeros((n, k));
    for (arow, mut orow) in a.outer_iter().zip(out.outer_iter_mut()) {
        let arow = arow.as_slice().expect("standard layout");
        for (brow, o) in b.outer_iter().zip(orow.iter_mut()) {
            *o = squared_distance(arow, brow.as_slice().expect("standard layout"));
        }
    }
    out
}

/// `n x k` matrix of Euclidean distances between the rows of `a` and the rows of `b`.
pub fn euclidean_distance_matrix(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    if a.ncols() != b.ncols() {
        return Err(CbmapError::shapes(a.dim(), b.dim()));
    }
    let mut d = squared_distance_matrix(a, b);
    d.mapv_inplace(f64::sqrt);
    Ok(d)
}

/// Per-column mean and population standard deviation.
pub(crate) fn column_moments(m: ArrayView2<f64>) -> (Array1<f64>, Array1<f64>) {
    let n = m.nrows() as f64;
    let mean = m.sum_axis(Axis(0)) / n;
    let mut var = Array1::<f64>::zeros(m.ncols());
    for row in m.outer_iter() {
        for ((v, x), mu) in var.iter_mut().zip(row).zip(&mean) {
            let t = x - mu;
            *v += t * t;
        }
    }
    let std = var.mapv(|v| (v / n).sqrt());
    (mean, std)
}

/// Z-score each column using the population standard deviation.
///
/// Zero-variance columns map to all zeros. A column counts as constant when
/// its spread is at rounding level relative to its magnitude.
pub fn zscore_normalize(m: ArrayView2<f64>) -> Array2<f64> {
    let (mean, std) = column_moments(m);
    let scale = m.fold_axis(Axis(0), 0.0f64, |acc, x| acc.max(x.abs()));
    let keep: Vec<bool> = std
        .iter()
        .zip(&scale)
        .map(|(s, sc)| *s > 8.0 * f64::EPSILON * sc)
        .collect();
    let mut out = m.to_owned();
    for mut row in out.outer_iter_mut() {
        for (((x, mu), s), keep) in row.iter_mut().zip(&mean).zip(&std).zip(&keep) {
            *x = if *keep { (*x - mu) / s } else { 0.0 };
        }
    }
    out
}

/// Principal component analysis via SVD of the column-centered data.
///
/// Each component's sign is fixed so that its largest-magnitude entry is positive.
pub fn pca_fit(x: ArrayView2<f64>, n_components: usize) -> Result<PcaModel> {
    let (n, d) = x.dim();
    if n_components == 0 || n_components > n.min(d) {
        return Err(CbmapError::InvalidParameter(format!(
            "PCA target dimension {n_components} must be in 1..={} for {n}x{d} data",
            n.min(d)
        )));
    }
    let mean = x.sum_axis(Axis(0)) / n as f64;
    let centered = DMatrix::from_fn(n, d, |i, j| x[[i, j]] - mean[j]);
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");

    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let denom = (n.max(2) - 1) as f64;
    let mut components = Array2::zeros((n_components, d));
    let mut explained_variance = Array1::zeros(n_components);
    for (c, &idx) in order.iter().take(n_components).enumerate() {
        let s = svd.singular_values[idx];
        explained_variance[c] = s * s / denom;
        let mut pivot = 0;
        for j in 0..d {
            if v_t[(idx, j)].abs() > v_t[(idx, pivot)].abs() {
                pivot = j;
            }
        }
        let sign = if v_t[(idx, pivot)] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            components[[c, j]] = sign * v_t[(idx, j)];
        }
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

/// Project rows of `x` onto the fitted components: `(x - mean) * components^T`.
pub fn pca_transform(model: &PcaModel, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    if x.ncols() != model.input_dim() {
        return Err(CbmapError::shapes(x.dim(), model.components.dim()));
    }
    let centered = &x - &model.mean;
    Ok(centered.dot(&model.components.t()))
}

/// Median of a slice. Even-length slices average the two central values.
pub(crate) fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let n = values.len();
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    }
}
