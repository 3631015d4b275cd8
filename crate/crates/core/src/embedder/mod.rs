//! The fitting loop and out-of-sample transform.
//!
//! A fit clusters the input, derives Gaussian memberships of every point to
//! the high-dimensional centers, places matching centers in the target space
//! and then moves the embedded points with Adam until their memberships to the
//! low-dimensional centers reproduce the high-dimensional ones. After every
//! step the low-dimensional centers are re-estimated from the embedded cluster
//! members and z-scored, and the low-dimensional bandwidth is recomputed.

pub mod adam;
mod model;

use log::{debug, warn};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use adam::{adam_update, AdamState};
pub use model::{CbmapModel, InputScaler, MODEL_VERSION};

use crate::clustering::{kmeans_fit, KmeansConfig, KmeansMode};
use crate::error::{CbmapError, Result};
use crate::linalg::{
    euclidean_distance_matrix, pca_fit, pca_transform, squared_distance_matrix, zscore_normalize,
    DataMatrix,
};
use crate::membership::{
    frobenius_distance, gradient_unchecked, membership_from_squared, membership_matrix, sigma_high,
    sigma_low,
};

fn is_positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

// Independent random streams derived from one seed.
const STREAM_CENTER_INIT: u64 = 1;
const STREAM_EMBEDDING_INIT: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterInit {
    #[default]
    Pca,
    Random,
}

impl std::str::FromStr for CenterInit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pca" => Ok(CenterInit::Pca),
            "random" => Ok(CenterInit::Random),
            other => Err(format!(
                "unknown center init '{other}', expected pca or random"
            )),
        }
    }
}

/// k-means settings other than the cluster count and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringOptions {
    pub mode: KmeansMode,
    pub batch_size: usize,
    pub max_iters: usize,
    pub n_init: usize,
}

impl Default for ClusteringOptions {
    fn default() -> Self {
        let base = KmeansConfig::new(1, 0);
        ClusteringOptions {
            mode: base.mode,
            batch_size: base.batch_size,
            max_iters: base.max_iters,
            n_init: base.n_init,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbmapConfig {
    /// Number of clusters. There is no default.
    pub n_clusters: usize,
    pub out_dim: usize,
    pub max_iter: usize,
    pub learning_rate: f64,
    pub center_init: CenterInit,
    pub clustering: ClusteringOptions,
    /// Std of the Gaussian jitter around each point's initial center.
    pub init_noise_std: f64,
    /// Z-score input columns before clustering.
    #[serde(default)]
    pub standardize: bool,
    pub seed: u64,
}

impl CbmapConfig {
    pub fn new(n_clusters: usize) -> Self {
        CbmapConfig {
            n_clusters,
            out_dim: 2,
            max_iter: 500,
            learning_rate: 0.1,
            center_init: CenterInit::Pca,
            clustering: ClusteringOptions::default(),
            init_noise_std: 0.1,
            standardize: false,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn kmeans_config(&self) -> KmeansConfig {
        KmeansConfig {
            k: self.n_clusters,
            mode: self.clustering.mode,
            batch_size: self.clustering.batch_size,
            max_iters: self.clustering.max_iters,
            seed: self.seed,
            n_init: self.clustering.n_init,
        }
    }

    fn validate(&self, n: usize, d: usize) -> Result<()> {
        if self.n_clusters < 2 {
            return Err(CbmapError::InvalidParameter(format!(
                "n_clusters must be at least 2, got {}",
                self.n_clusters
            )));
        }
        if self.n_clusters > n {
            return Err(CbmapError::InvalidParameter(format!(
                "n_clusters={} exceeds the number of rows {n}",
                self.n_clusters
            )));
        }
        if self.out_dim == 0 || self.out_dim >= d {
            return Err(CbmapError::InvalidParameter(format!(
                "output dimension {} must be in 1..{d} for {d}-dimensional input",
                self.out_dim
            )));
        }
        if self.max_iter == 0 {
            return Err(CbmapError::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        if !is_positive(self.learning_rate) || !is_positive(self.init_noise_std) {
            return Err(CbmapError::InvalidParameter(
                "learning_rate and init_noise_std must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// `n x m` embedding.
    pub embedding: Array2<f64>,
    /// Loss before each optimization step.
    pub loss_history: Vec<f64>,
    pub model: CbmapModel,
    /// High-dimensional cluster label of each row.
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformOptions {
    pub iters: usize,
    pub seed: u64,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions {
            iters: 300,
            seed: 0,
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Place each point at its cluster's low-dimensional center plus Gaussian noise.
pub fn init_embedding(
    labels: &[usize],
    centers_low: ArrayView2<f64>,
    noise_std: f64,
    seed: u64,
) -> Result<Array2<f64>> {
    init_with_rng(
        labels,
        centers_low,
        noise_std,
        &mut stream_rng(seed, STREAM_EMBEDDING_INIT),
    )
}

fn init_with_rng(
    labels: &[usize],
    centers_low: ArrayView2<f64>,
    noise_std: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Array2<f64>> {
    let (k, m) = centers_low.dim();
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(CbmapError::InvalidParameter(format!(
            "label {bad} out of range for {k} centers"
        )));
    }
    if !is_positive(noise_std) {
        return Err(CbmapError::InvalidParameter(format!(
            "noise std must be positive, got {noise_std}"
        )));
    }
    let mut y = Array2::zeros((labels.len(), m));
    for (mut row, &l) in y.outer_iter_mut().zip(labels) {
        for (v, c) in row.iter_mut().zip(centers_low.row(l)) {
            *v = c + noise_std * rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(y)
}

/// Mean of the embedded points of each cluster. Clusters with no members keep
/// their row from `previous`.
pub fn update_centers(
    points: ArrayView2<f64>,
    labels: &[usize],
    previous: ArrayView2<f64>,
) -> Array2<f64> {
    let (k, m) = previous.dim();
    let mut sums = Array2::<f64>::zeros((k, m));
    let mut counts = vec![0usize; k];
    for (row, &l) in points.outer_iter().zip(labels) {
        let mut s = sums.row_mut(l);
        s += &row;
        counts[l] += 1;
    }
    let mut out = previous.to_owned();
    for (j, &c) in counts.iter().enumerate() {
        if c > 0 {
            let mean = &sums.row(j) / c as f64;
            out.row_mut(j).assign(&mean);
        }
    }
    out
}

fn initial_low_centers(
    centers_high: &Array2<f64>,
    cfg: &CbmapConfig,
) -> Result<(Array2<f64>, Option<crate::linalg::PcaModel>)> {
    let (k, _) = centers_high.dim();
    let m = cfg.out_dim;
    let use_pca = match cfg.center_init {
        CenterInit::Pca if k <= m => {
            warn!("n_clusters={k} <= output dimension {m}; using random center initialization");
            false
        }
        CenterInit::Pca => true,
        CenterInit::Random => false,
    };
    if use_pca {
        let pca = pca_fit(centers_high.view(), m)?;
        let projected = pca_transform(&pca, centers_high.view())?;
        Ok((zscore_normalize(projected.view()), Some(pca)))
    } else {
        let mut rng = stream_rng(cfg.seed, STREAM_CENTER_INIT);
        let drawn = Array2::from_shape_fn((k, m), |_| rng.sample::<f64, _>(StandardNormal));
        Ok((zscore_normalize(drawn.view()), None))
    }
}

/// Fit an embedding of the rows of `x`.
pub fn fit(x: &DataMatrix, cfg: &CbmapConfig) -> Result<FitResult> {
    let (n, d) = (x.nrows(), x.ncols());
    cfg.validate(n, d)?;

    let input_scaler = cfg.standardize.then(|| InputScaler::fit(x.view()));
    let scaled;
    let data = match &input_scaler {
        Some(s) => {
            scaled = s.apply(x.view());
            scaled.view()
        }
        None => x.view(),
    };

    let clusters = kmeans_fit(data, &cfg.kmeans_config())?;
    let labels = clusters.labels;
    let centers_high = clusters.centers;

    let dist_high = euclidean_distance_matrix(data, centers_high.view())?;
    let sigma_h = sigma_high(dist_high.view())?.value;
    let u_high = membership_matrix(dist_high.view(), sigma_h)?.values;
    drop(dist_high);

    let (mut centers_low, center_pca) = initial_low_centers(&centers_high, cfg)?;
    let mut sigma_l = sigma_low(centers_low.view())?.value;

    let mut y = init_embedding(&labels, centers_low.view(), cfg.init_noise_std, cfg.seed)?;
    let mut adam = AdamState::zeros(y.dim());
    let mut loss_history = Vec::with_capacity(cfg.max_iter);

    for step in 1..=cfg.max_iter {
        let sq = squared_distance_matrix(y.view(), centers_low.view());
        let u_low = membership_from_squared(&sq, sigma_l);
        let loss = frobenius_distance(&u_low, &u_high);
        loss_history.push(loss);

        let grad = gradient_unchecked(y.view(), centers_low.view(), sigma_l, &u_low, &u_high, loss);
        adam_update(&mut y, &grad, &mut adam, cfg.learning_rate, step as u32);

        let updated = update_centers(y.view(), &labels, centers_low.view());
        centers_low = zscore_normalize(updated.view());
        sigma_l = sigma_low(centers_low.view())?.value;
        if step % 100 == 0 {
            debug!("iteration {step}: loss {loss:.6}, sigma_low {sigma_l:.6}");
        }
    }

    Ok(FitResult {
        embedding: y,
        loss_history,
        model: CbmapModel {
            centers_high,
            centers_low,
            sigma_high: sigma_h,
            sigma_low: sigma_l,
            config: cfg.clone(),
            center_pca,
            input_scaler,
        },
        labels,
    })
}

/// Embed new rows against a fitted model, keeping its centers and bandwidths fixed.
pub fn transform(
    model: &CbmapModel,
    x: &DataMatrix,
    opts: &TransformOptions,
) -> Result<Array2<f64>> {
    if x.ncols() != model.input_dim() {
        return Err(CbmapError::DimensionMismatch {
            left: format!("input has {} columns", x.ncols()),
            right: format!("model expects {} columns", model.input_dim()),
        });
    }
    let scaled;
    let data = match &model.input_scaler {
        Some(s) => {
            scaled = s.apply(x.view());
            scaled.view()
        }
        None => x.view(),
    };
    let dist_high = euclidean_distance_matrix(data, model.centers_high.view())?;
    let u_high = membership_matrix(dist_high.view(), model.sigma_high)?.values;

    let start: Vec<usize> = u_high
        .outer_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &u)| {
                    if u > best.1 {
                        (j, u)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect();
    let noise = model.config.init_noise_std;
    let mut y = init_embedding(&start, model.centers_low.view(), noise, opts.seed)?;

    let centers = model.centers_low.view();
    let sigma_l = model.sigma_low;
    let mut adam = AdamState::zeros(y.dim());
    for step in 1..=opts.iters {
        let sq = squared_distance_matrix(y.view(), centers);
        let u_low = membership_from_squared(&sq, sigma_l);
        let loss = frobenius_distance(&u_low, &u_high);
        let grad = gradient_unchecked(y.view(), centers, sigma_l, &u_low, &u_high, loss);
        adam_update(
            &mut y,
            &grad,
            &mut adam,
            model.config.learning_rate,
            step as u32,
        );
    }
    Ok(y)
}
