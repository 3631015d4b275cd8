//! k-means clustering (Lloyd full-batch and mini-batch) with k-means++ seeding.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CbmapError, Result};
use crate::linalg::squared_distance;

/// Data-size threshold below which `Auto` runs full-batch Lloyd iterations.
pub const FULL_BATCH_MAX_ROWS: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KmeansMode {
    /// Full-batch below [`FULL_BATCH_MAX_ROWS`] rows, mini-batch otherwise.
    #[default]
    Auto,
    FullBatch,
    MiniBatch,
}

impl KmeansMode {
    pub fn resolve(self, n_rows: usize) -> KmeansMode {
        match self {
            KmeansMode::Auto if n_rows < FULL_BATCH_MAX_ROWS => KmeansMode::FullBatch,
            KmeansMode::Auto => KmeansMode::MiniBatch,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmeansConfig {
    pub k: usize,
    pub mode: KmeansMode,
    /// Mini-batch size.
    pub batch_size: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Restarts; the lowest-inertia run wins. Full-batch only.
    pub n_init: usize,
}

impl KmeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        KmeansConfig {
            k,
            mode: KmeansMode::Auto,
            batch_size: 1024,
            max_iters: 100,
            seed,
            n_init: 3,
        }
    }

    pub fn with_mode(mut self, mode: KmeansMode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// `k x d` cluster centers.
    pub centers: Array2<f64>,
    /// Cluster index of each input row.
    pub labels: Vec<usize>,
    /// Sum of squared distances from each row to its assigned center.
    pub inertia: f64,
}

impl ClusterAssignment {
    pub fn k(&self) -> usize {
        self.centers.nrows()
    }
}

/// Index and squared distance of the nearest center. Ties go to the lowest index.
#[inline]
fn nearest(point: &[f64], centers: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centers.outer_iter().enumerate() {
        let d = squared_distance(point, c.as_slice().expect("standard layout"));
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign_all(x: &Array2<f64>, centers: &Array2<f64>) -> (Vec<usize>, Vec<f64>) {
    x.outer_iter()
        .map(|row| nearest(row.as_slice().expect("standard layout"), centers))
        .unzip()
}

/// Nearest-center label for every row of `x`. Ties go to the smallest center index.
pub fn assign_labels(x: ArrayView2<f64>, centers: ArrayView2<f64>) -> Result<Vec<usize>> {
    if x.ncols() != centers.ncols() {
        return Err(CbmapError::shapes(x.dim(), centers.dim()));
    }
    if centers.nrows() == 0 {
        return Err(CbmapError::InvalidParameter("no centers given".into()));
    }
    let x = x.as_standard_layout().into_owned();
    let centers = centers.as_standard_layout().into_owned();
    Ok(assign_all(&x, &centers).0)
}

/// Fit k-means to the rows of `x`.
pub fn kmeans_fit(x: ArrayView2<f64>, cfg: &KmeansConfig) -> Result<ClusterAssignment> {
    let (n, d) = x.dim();
    if n == 0 || d == 0 {
        return Err(CbmapError::Degenerate("k-means on empty input".into()));
    }
    if cfg.k == 0 || cfg.k > n {
        return Err(CbmapError::InvalidParameter(format!(
            "cluster count k={} must be in 1..={n}",
            cfg.k
        )));
    }
    if cfg.max_iters == 0 || cfg.batch_size == 0 || cfg.n_init == 0 {
        return Err(CbmapError::InvalidParameter(
            "max_iters, batch_size and n_init must be positive".into(),
        ));
    }
    let x = x.as_standard_layout().into_owned();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    match cfg.mode.resolve(n) {
        KmeansMode::MiniBatch => {
            let centers = kmeans_plus_plus(&x, cfg.k, &mut rng);
            let centers = mini_batch(&x, centers, cfg.batch_size, cfg.max_iters, &mut rng);
            Ok(finalize(&x, centers))
        }
        _ => {
            let mut best: Option<ClusterAssignment> = None;
            for _ in 0..cfg.n_init {
                let centers = kmeans_plus_plus(&x, cfg.k, &mut rng);
                let centers = lloyd(&x, centers, cfg.max_iters, None);
                let run = finalize(&x, centers);
                if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
                    best = Some(run);
                }
            }
            Ok(best.expect("n_init >= 1"))
        }
    }
}

/// k-means++ seeding: each new center is drawn with probability proportional
/// to its squared distance from the nearest center chosen so far.
fn kmeans_plus_plus(x: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = x.nrows();
    let mut centers = Array2::zeros((k, x.ncols()));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&x.row(first));
    let row = |i: usize| x.row(i).to_slice().expect("standard layout");
    let mut d2: Vec<f64> = (0..n)
        .map(|i| squared_distance(row(i), row(first)))
        .collect();

    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut cum = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                cum += w;
                pick = Some(i);
                if cum > target {
                    break;
                }
            }
            pick.expect("positive total weight")
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(c).assign(&x.row(pick));
        for (i, w) in d2.iter_mut().enumerate() {
            *w = w.min(squared_distance(row(i), row(pick)));
        }
    }
    centers
}

fn cluster_means(x: &Array2<f64>, labels: &[usize], centers: &mut Array2<f64>) -> Vec<usize> {
    let k = centers.nrows();
    let mut sums = Array2::<f64>::zeros(centers.dim());
    let mut counts = vec![0usize; k];
    for (row, &l) in x.outer_iter().zip(labels) {
        let mut s = sums.row_mut(l);
        s += &row;
        counts[l] += 1;
    }
    for (j, &c) in counts.iter().enumerate() {
        if c > 0 {
            let mean = &sums.row(j) / c as f64;
            centers.row_mut(j).assign(&mean);
        }
    }
    counts
}

/// Move each empty center onto the point farthest from its assigned center,
/// taking points only from clusters that keep at least one member.
fn reseed_empty(
    x: &Array2<f64>,
    centers: &mut Array2<f64>,
    labels: &mut [usize],
    dist2: &mut [f64],
    counts: &mut [usize],
) {
    while let Some(empty) = counts.iter().position(|&c| c == 0) {
        let donor = (0..labels.len())
            .filter(|&i| counts[labels[i]] >= 2)
            .max_by(|&a, &b| dist2[a].total_cmp(&dist2[b]).then(b.cmp(&a)));
        let Some(i) = donor else { break };
        centers.row_mut(empty).assign(&x.row(i));
        counts[labels[i]] -= 1;
        counts[empty] += 1;
        labels[i] = empty;
        dist2[i] = 0.0;
    }
}

/// Lloyd iterations; stops when the assignment is unchanged or after `max_iters`.
/// Records the inertia of each assignment step into `trace` when given.
pub(crate) fn lloyd(
    x: &Array2<f64>,
    mut centers: Array2<f64>,
    max_iters: usize,
    mut trace: Option<&mut Vec<f64>>,
) -> Array2<f64> {
    let mut labels: Vec<usize> = Vec::new();
    for _ in 0..max_iters {
        let (mut new_labels, mut dist2) = assign_all(x, &centers);
        if let Some(t) = trace.as_deref_mut() {
            t.push(dist2.iter().sum());
        }
        if new_labels == labels {
            break;
        }
        let mut counts = cluster_means(x, &new_labels, &mut centers);
        reseed_empty(x, &mut centers, &mut new_labels, &mut dist2, &mut counts);
        labels = new_labels;
    }
    centers
}

fn mini_batch(
    x: &Array2<f64>,
    mut centers: Array2<f64>,
    batch_size: usize,
    max_iters: usize,
    rng: &mut ChaCha8Rng,
) -> Array2<f64> {
    let n = x.nrows();
    let k = centers.nrows();
    let mut counts = vec![0usize; k];
    let mut batch: Vec<usize> = Vec::with_capacity(batch_size.min(n));
    let mut sums = Array2::<f64>::zeros(centers.dim());
    let mut batch_counts = vec![0usize; k];

    for _ in 0..max_iters {
        batch.clear();
        if batch_size >= n {
            batch.extend(0..n);
        } else {
            batch.extend((0..batch_size).map(|_| rng.random_range(0..n)));
        }
        sums.fill(0.0);
        batch_counts.iter_mut().for_each(|c| *c = 0);
        for &i in &batch {
            let row = x.row(i);
            let (j, _) = nearest(row.as_slice().expect("standard layout"), &centers);
            let mut s = sums.row_mut(j);
            s += &row;
            batch_counts[j] += 1;
        }
        for j in 0..k {
            let b = batch_counts[j];
            if b == 0 {
                continue;
            }
            let old = counts[j] as f64;
            counts[j] += b;
            let total = counts[j] as f64;
            let updated = (&centers.row(j) * old + sums.row(j)) / total;
            centers.row_mut(j).assign(&updated);
        }
    }
    centers
}

fn finalize(x: &Array2<f64>, mut centers: Array2<f64>) -> ClusterAssignment {
    let (mut labels, mut dist2) = assign_all(x, &centers);
    let mut counts = vec![0usize; centers.nrows()];
    for &l in &labels {
        counts[l] += 1;
    }
    reseed_empty(x, &mut centers, &mut labels, &mut dist2, &mut counts);
    let inertia = dist2.iter().sum();
    ClusterAssignment {
        centers,
        labels,
        inertia,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Axis};
    use rand_distr::StandardNormal;

    fn two_blobs(seed: u64, per: usize) -> (Array2<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((2 * per, 2));
        let mut truth = Vec::new();
        for i in 0..2 * per {
            let blob = i / per;
            let base = if blob == 0 { 0.0 } else { 10.0 };
            // uniform in a disc of radius 0.5
            let r = 0.5 * rng.random::<f64>().sqrt();
            let a = std::f64::consts::TAU * rng.random::<f64>();
            x[[i, 0]] = base + r * a.cos();
            x[[i, 1]] = base + r * a.sin();
            truth.push(blob);
        }
        (x, truth)
    }

    #[test]
    fn k_equals_n_gives_zero_inertia() {
        let x = array![[0.0, 0.0], [1.0, 5.0], [3.0, -2.0], [7.0, 7.0]];
        let cfg = KmeansConfig::new(4, 1).with_mode(KmeansMode::FullBatch);
        let fit = kmeans_fit(x.view(), &cfg).unwrap();
        assert_eq!(fit.inertia, 0.0);
        let mut seen = fit.labels.clone();
        seen.sort_unstable();
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn single_cluster_is_column_mean() {
        let x = array![[0.0, 1.0], [2.0, 3.0], [4.0, 8.0]];
        let fit = kmeans_fit(x.view(), &KmeansConfig::new(1, 9)).unwrap();
        let mean = x.mean_axis(Axis(0)).unwrap();
        for (a, b) in fit.centers.row(0).iter().zip(mean.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_blobs_recovered() {
        let (x, truth) = two_blobs(4, 100);
        let cfg = KmeansConfig::new(2, 17).with_mode(KmeansMode::FullBatch);
        let fit = kmeans_fit(x.view(), &cfg).unwrap();
        // oracle: exact per-blob sample means
        for blob in 0..2 {
            let members: Vec<usize> = (0..x.nrows()).filter(|&i| truth[i] == blob).collect();
            let mx = members.iter().map(|&i| x[[i, 0]]).sum::<f64>() / members.len() as f64;
            let my = members.iter().map(|&i| x[[i, 1]]).sum::<f64>() / members.len() as f64;
            let label = fit.labels[members[0]];
            assert!(members.iter().all(|&i| fit.labels[i] == label));
            let c = fit.centers.row(label);
            assert!(((c[0] - mx).powi(2) + (c[1] - my).powi(2)).sqrt() < 0.2);
        }
        assert_ne!(fit.labels[0], fit.labels[150]);
    }

    #[test]
    fn full_batch_centers_are_member_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((120, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let cfg = KmeansConfig::new(5, 3).with_mode(KmeansMode::FullBatch);
        let fit = kmeans_fit(x.view(), &cfg).unwrap();
        for j in 0..5 {
            let members: Vec<usize> = (0..120).filter(|&i| fit.labels[i] == j).collect();
            assert!(!members.is_empty());
            for col in 0..3 {
                let mean = members.iter().map(|&i| x[[i, col]]).sum::<f64>() / members.len() as f64;
                assert!((fit.centers[[j, col]] - mean).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn lloyd_inertia_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = Array2::from_shape_fn((300, 2), |_| rng.sample::<f64, _>(StandardNormal));
        let init = kmeans_plus_plus(&x, 8, &mut rng);
        let mut trace = Vec::new();
        lloyd(&x, init, 100, Some(&mut trace));
        assert!(trace.len() > 2);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "{trace:?}");
        }
    }

    #[test]
    fn assign_labels_cases() {
        let centers = array![[0.0, 0.0], [2.0, 0.0], [5.0, 5.0]];
        let x = array![[5.0, 5.0], [1.0, 0.0]];
        assert_eq!(assign_labels(x.view(), centers.view()).unwrap(), vec![2, 0]);
        assert!(assign_labels(array![[1.0]].view(), centers.view()).is_err());
    }

    #[test]
    fn assign_labels_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let x = Array2::from_shape_fn((10, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let c = Array2::from_shape_fn((3, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let got = assign_labels(x.view(), c.view()).unwrap();
        for i in 0..10 {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for j in 0..3 {
                let mut d = 0.0;
                for l in 0..3 {
                    d += (x[[i, l]] - c[[j, l]]).powi(2);
                }
                if d < best_d {
                    best_d = d;
                    best = j;
                }
            }
            assert_eq!(got[i], best);
        }
    }

    #[test]
    fn errors() {
        let x = array![[0.0], [1.0]];
        assert!(kmeans_fit(x.view(), &KmeansConfig::new(3, 0)).is_err());
        assert!(kmeans_fit(
            Array2::<f64>::zeros((0, 2)).view(),
            &KmeansConfig::new(1, 0)
        )
        .is_err());
    }

    #[test]
    fn mini_batch_agrees_with_full_batch_on_blobs() {
        let (x, _) = two_blobs(8, 300);
        for seed in 0..5 {
            let full = kmeans_fit(
                x.view(),
                &KmeansConfig::new(2, seed).with_mode(KmeansMode::FullBatch),
            )
            .unwrap();
            let mut cfg = KmeansConfig::new(2, seed).with_mode(KmeansMode::MiniBatch);
            cfg.batch_size = 64;
            let mini = kmeans_fit(x.view(), &cfg).unwrap();
            let same = full.labels.iter().zip(&mini.labels).all(|(a, b)| a == b);
            let swapped = full.labels.iter().zip(&mini.labels).all(|(a, b)| a != b);
            assert!(same || swapped, "seed {seed}");
        }
    }

    #[test]
    fn all_clusters_populated_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let k = 12;
        let x = Array2::from_shape_fn((10 * k * 3, 4), |_| rng.sample::<f64, _>(StandardNormal));
        for mode in [KmeansMode::FullBatch, KmeansMode::MiniBatch] {
            let mut cfg = KmeansConfig::new(k, 5).with_mode(mode);
            cfg.batch_size = 32;
            let a = kmeans_fit(x.view(), &cfg).unwrap();
            let b = kmeans_fit(x.view(), &cfg).unwrap();
            assert_eq!(a, b);
            let mut seen = vec![false; k];
            for &l in &a.labels {
                seen[l] = true;
            }
            assert!(seen.iter().all(|&s| s), "{mode:?}");
        }
    }

    #[test]
    fn auto_mode_threshold() {
        assert_eq!(KmeansMode::Auto.resolve(4999), KmeansMode::FullBatch);
        assert_eq!(KmeansMode::Auto.resolve(5000), KmeansMode::MiniBatch);
        assert_eq!(KmeansMode::MiniBatch.resolve(10), KmeansMode::MiniBatch);
    }
}
