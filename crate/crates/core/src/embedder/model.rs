use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::CbmapConfig;
use crate::error::{CbmapError, Result};
use crate::linalg::PcaModel;

/// Schema version written to and required from model JSON documents.
pub const MODEL_VERSION: u32 = 1;

/// Column standardization applied to inputs before clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub mean: Vec<f64>,
    /// Population standard deviation; zero marks a constant column.
    pub std: Vec<f64>,
}

impl InputScaler {
    pub(crate) fn fit(x: ndarray::ArrayView2<f64>) -> Self {
        let (mean, std) = crate::linalg::column_moments(x);
        InputScaler {
            mean: mean.to_vec(),
            std: std.to_vec(),
        }
    }

    pub fn apply(&self, x: ndarray::ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.outer_iter_mut() {
            for ((v, mu), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = if *s > 0.0 { (*v - mu) / s } else { 0.0 };
            }
        }
        out
    }
}

/// Everything needed to embed new points after a fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CbmapModel {
    /// `k x d` high-dimensional cluster centers.
    pub centers_high: Array2<f64>,
    /// `k x m` low-dimensional cluster centers at the end of the fit.
    pub centers_low: Array2<f64>,
    pub sigma_high: f64,
    pub sigma_low: f64,
    pub config: CbmapConfig,
    /// PCA fitted on the high-dimensional centers, when used for initialization.
    pub center_pca: Option<PcaModel>,
    pub input_scaler: Option<InputScaler>,
}

#[derive(Serialize, Deserialize)]
struct PcaDocument {
    mean: Vec<f64>,
    components: Vec<f64>,
    #[serde(default)]
    explained_variance: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    version: u32,
    k: usize,
    d: usize,
    m: usize,
    centers_high: Vec<f64>,
    centers_low: Vec<f64>,
    sigma_high: f64,
    sigma_low: f64,
    config: CbmapConfig,
    center_pca: Option<PcaDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_scaler: Option<InputScaler>,
}

fn row_major(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

fn reshape(name: &str, values: Vec<f64>, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let len = values.len();
    Array2::from_shape_vec((rows, cols), values).map_err(|_| {
        CbmapError::InvalidParameter(format!(
            "model field {name} has {len} values, expected {rows}x{cols}"
        ))
    })
}

impl CbmapModel {
    pub fn n_clusters(&self) -> usize {
        self.centers_high.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.centers_high.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.centers_low.ncols()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            version: MODEL_VERSION,
            k: self.n_clusters(),
            d: self.input_dim(),
            m: self.output_dim(),
            centers_high: row_major(&self.centers_high),
            centers_low: row_major(&self.centers_low),
            sigma_high: self.sigma_high,
            sigma_low: self.sigma_low,
            config: self.config.clone(),
            center_pca: self.center_pca.as_ref().map(|p| PcaDocument {
                mean: p.mean.to_vec(),
                components: row_major(&p.components),
                explained_variance: p.explained_variance.to_vec(),
            }),
            input_scaler: self.input_scaler.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: serde_json::Value = serde_json::from_str(text)?;
        let found = raw.get("version").and_then(serde_json::Value::as_u64);
        match found {
            Some(v) if v == u64::from(MODEL_VERSION) => {}
            Some(v) => {
                return Err(CbmapError::ModelVersion {
                    expected: MODEL_VERSION,
                    found: u32::try_from(v).unwrap_or(u32::MAX),
                })
            }
            None => {
                return Err(CbmapError::InvalidParameter(format!(
                    "model document has no version field (expected version {MODEL_VERSION})"
                )))
            }
        }
        let doc: ModelDocument = serde_json::from_value(raw)?;
        let (k, d, m) = (doc.k, doc.d, doc.m);
        let center_pca = doc
            .center_pca
            .map(|p| -> Result<PcaModel> {
                let rows = p.components.len().checked_div(d).unwrap_or(0);
                Ok(PcaModel {
                    mean: Array1::from(p.mean),
                    components: reshape("center_pca.components", p.components, rows, d)?,
                    explained_variance: Array1::from(p.explained_variance),
                })
            })
            .transpose()?;
        let model = CbmapModel {
            centers_high: reshape("centers_high", doc.centers_high, k, d)?,
            centers_low: reshape("centers_low", doc.centers_low, k, m)?,
            sigma_high: doc.sigma_high,
            sigma_low: doc.sigma_low,
            config: doc.config,
            center_pca,
            input_scaler: doc.input_scaler,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let finite = |a: &Array2<f64>| a.iter().all(|v| v.is_finite());
        if !(self.sigma_high > 0.0 && self.sigma_low > 0.0)
            || !self.sigma_high.is_finite()
            || !self.sigma_low.is_finite()
        {
            return Err(CbmapError::InvalidParameter(
                "model bandwidths must be positive and finite".into(),
            ));
        }
        if !finite(&self.centers_high) || !finite(&self.centers_low) {
            return Err(CbmapError::InvalidParameter(
                "model centers contain non-finite values".into(),
            ));
        }
        if self.n_clusters() < 2 || self.output_dim() == 0 || self.input_dim() == 0 {
            return Err(CbmapError::InvalidParameter(format!(
                "model shape k={} d={} m={} is invalid",
                self.n_clusters(),
                self.input_dim(),
                self.output_dim()
            )));
        }
        if let Some(s) = &self.input_scaler {
            if s.mean.len() != self.input_dim() || s.std.len() != self.input_dim() {
                return Err(CbmapError::InvalidParameter(
                    "input scaler width does not match model input dimension".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| CbmapError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CbmapError::io(path, e))?;
        Self::from_json(&text)
    }
}
