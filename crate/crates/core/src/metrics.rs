//! Embedding quality: global score and k-nearest-neighbour accuracy.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CbmapError, Result};
use crate::linalg::{pca_fit, pca_transform, squared_distance};

/// Neighbour count used for the accuracy metric.
pub const DEFAULT_KNN_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "gs")]
    pub global_score: f64,
    #[serde(rename = "acc")]
    pub knn_accuracy: Option<f64>,
    pub runtime_seconds: f64,
}

fn centered(a: ArrayView2<f64>) -> Array2<f64> {
    let mean = a.mean_axis(Axis(0)).expect("non-empty");
    &a - &mean
}

fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Smallest `||X_c - Y_c A||_F` over linear maps `A`, with both sides column-centered.
fn min_reconstruction_error(xc: &DMatrix<f64>, yc: &Array2<f64>) -> f64 {
    let yc = to_dmatrix(yc);
    let svd = yc.clone().svd(true, true);
    let max_sv = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let eps = max_sv * (yc.nrows().max(yc.ncols()) as f64) * f64::EPSILON;
    let coef = svd
        .solve(xc, eps)
        .expect("both singular vector sets were computed");
    (xc - &yc * coef).norm()
}

/// Global score of an embedding `y` of the data `x`.
///
/// `GS = exp(-(MRE(y) - MRE_pca) / MRE_pca)` where `MRE(y)` is the least-squares
/// error of linearly reconstructing the centered data from the centered
/// embedding and `MRE_pca` is the same quantity for the rank-`m` PCA projection.
/// PCA itself scores exactly 1 and every other embedding scores at most 1.
pub fn global_score(x: ArrayView2<f64>, y: ArrayView2<f64>) -> Result<f64> {
    let (n, d) = x.dim();
    let m = y.ncols();
    if y.nrows() != n {
        return Err(CbmapError::shapes(x.dim(), y.dim()));
    }
    if n == 0 || m == 0 || m >= d {
        return Err(CbmapError::InvalidParameter(format!(
            "global score needs a lower-dimensional embedding: data is {n}x{d}, embedding {n}x{m}"
        )));
    }
    let xc = centered(x);
    let pca = pca_fit(x, m.min(n))?;
    let z = pca_transform(&pca, x)?;
    let residual = &xc - &z.dot(&pca.components);
    let mre_pca = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = xc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if mre_pca.is_nan() || mre_pca <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(CbmapError::Degenerate(format!(
            "data has rank <= {m}, so the PCA reconstruction is exact; reduce the embedding dimension"
        )));
    }
    let mre = min_reconstruction_error(&to_dmatrix(&xc), &centered(y));
    Ok((-(mre - mre_pca) / mre_pca).exp())
}

/// Stratified train/test holdout.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for HoldoutSpec {
    fn default() -> Self {
        HoldoutSpec {
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Split indices per class: each class contributes `round(fraction * size)`
/// members to the test side, at least one and leaving at least one for training.
pub fn stratified_split(labels: &[usize], spec: &HoldoutSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(CbmapError::InvalidParameter(format!(
            "test fraction must lie in (0, 1), got {}",
            spec.test_fraction
        )));
    }
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in classes {
        if members.len() < 2 {
            return Err(CbmapError::InvalidParameter(format!(
                "class {class} has {} member(s); stratified holdout needs at least 2",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n_test = ((members.len() as f64 * spec.test_fraction).round() as usize)
            .clamp(1, members.len() - 1);
        test.extend_from_slice(&members[..n_test]);
        train.extend_from_slice(&members[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Brute-force Euclidean k-nearest-neighbour majority vote.
#[derive(Debug, Clone)]
pub struct KnnClassifier {
    train: Array2<f64>,
    labels: Vec<usize>,
    k: usize,
}

impl KnnClassifier {
    pub fn new(train: ArrayView2<f64>, labels: &[usize], k: usize) -> Result<Self> {
        if train.nrows() != labels.len() {
            return Err(CbmapError::DimensionMismatch {
                left: format!("{} training rows", train.nrows()),
                right: format!("{} labels", labels.len()),
            });
        }
        if k == 0 || k > train.nrows() {
            return Err(CbmapError::InvalidParameter(format!(
                "k={k} neighbours requested from {} training points",
                train.nrows()
            )));
        }
        Ok(KnnClassifier {
            train: train.as_standard_layout().into_owned(),
            labels: labels.to_vec(),
            k,
        })
    }

    /// Majority label among the `k` nearest training points (distance ties go to
    /// the lower index). Among tied vote counts the label of the nearest neighbour wins.
    fn predict_one(&self, query: &[f64], scratch: &mut Vec<(f64, usize)>) -> usize {
        scratch.clear();
        scratch.extend(self.train.outer_iter().enumerate().map(|(i, row)| {
            (
                squared_distance(query, row.as_slice().expect("standard layout")),
                i,
            )
        }));
        let by_distance =
            |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if scratch.len() > self.k {
            scratch.select_nth_unstable_by(self.k - 1, by_distance);
            scratch.truncate(self.k);
        }
        scratch.sort_by(by_distance);

        let mut votes: Vec<(usize, usize)> = Vec::with_capacity(self.k);
        for &(_, i) in scratch.iter() {
            let label = self.labels[i];
            match votes.iter_mut().find(|(l, _)| *l == label) {
                Some(v) => v.1 += 1,
                None => votes.push((label, 1)),
            }
        }
        // `votes` is in order of first appearance, i.e. nearest first, so the
        // first maximum is the tie-break winner.
        let best = votes.iter().map(|v| v.1).max().expect("k >= 1");
        votes.iter().find(|v| v.1 == best).expect("max exists").0
    }

    pub fn predict(&self, queries: ArrayView2<f64>) -> Result<Vec<usize>> {
        if queries.ncols() != self.train.ncols() {
            return Err(CbmapError::shapes(queries.dim(), self.train.dim()));
        }
        let queries = queries.as_standard_layout();
        let mut scratch = Vec::with_capacity(self.train.nrows());
        Ok(queries
            .outer_iter()
            .map(|q| self.predict_one(q.as_slice().expect("standard layout"), &mut scratch))
            .collect())
    }
}

/// Fraction of correct predictions.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len().max(1) as f64
}

/// Test-set accuracy of a k-NN classifier trained on a stratified holdout split of `y`.
pub fn knn_accuracy(
    y: ArrayView2<f64>,
    labels: &[usize],
    k: usize,
    split: &HoldoutSpec,
) -> Result<f64> {
    if y.nrows() != labels.len() {
        return Err(CbmapError::DimensionMismatch {
            left: format!("{} embedded rows", y.nrows()),
            right: format!("{} labels", labels.len()),
        });
    }
    if y.nrows() < k + 1 {
        return Err(CbmapError::InvalidParameter(format!(
            "k-NN accuracy with k={k} needs at least {} rows, got {}",
            k + 1,
            y.nrows()
        )));
    }
    let (train, test) = stratified_split(labels, split)?;
    let train_y = y.select(Axis(0), &train);
    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let clf = KnnClassifier::new(train_y.view(), &train_labels, k)?;
    let predicted = clf.predict(y.select(Axis(0), &test).view())?;
    let truth: Vec<usize> = test.iter().map(|&i| labels[i]).collect();
    Ok(accuracy(&predicted, &truth))
}
