//! Toy manifold generators and CSV ingestion.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CbmapError, Result};
use crate::linalg::DataMatrix;

/// Number of quantile-free bins used for the synthetic parameter labels.
pub const PARAM_LABEL_BINS: usize = 4;

/// Polar cap removed from the severed sphere: colatitude below this is discarded.
pub const SPHERE_CAP_COLATITUDE: f64 = PI / 8.0;
/// Longitudes above this fraction of a full turn are discarded.
pub const SPHERE_WEDGE_FRACTION: f64 = 0.94;

/// Cuboid edge lengths along x, y and z.
pub const CUBOID_EDGES: [f64; 3] = [2.0, 1.0, 1.0];

/// Integer class codes with the original label text for each code.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub codes: Vec<usize>,
    /// `names[c]` is the text of class code `c`.
    pub names: Vec<String>,
}

impl Labels {
    /// Encode text labels as integers in first-seen order.
    pub fn encode<S: AsRef<str>>(values: &[S]) -> Self {
        let mut names: Vec<String> = Vec::new();
        let codes = values
            .iter()
            .map(|v| {
                let v = v.as_ref();
                match names.iter().position(|n| n == v) {
                    Some(c) => c,
                    None => {
                        names.push(v.to_string());
                        names.len() - 1
                    }
                }
            })
            .collect();
        Labels { codes, names }
    }

    fn from_codes(codes: Vec<usize>) -> Self {
        let n_classes = codes.iter().max().map_or(0, |m| m + 1);
        Labels {
            codes,
            names: (0..n_classes).map(|c| c.to_string()).collect(),
        }
    }

    pub fn name(&self, row: usize) -> &str {
        &self.names[self.codes[row]]
    }

    pub fn n_classes(&self) -> usize {
        self.names.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub data: DataMatrix,
    /// Feature column names, one per data column.
    pub columns: Vec<String>,
    pub labels: Option<Labels>,
}

impl LabeledDataset {
    pub fn new(name: impl Into<String>, data: DataMatrix, labels: Option<Labels>) -> Result<Self> {
        let columns = (0..data.ncols()).map(|j| format!("x{j}")).collect();
        Self::with_columns(name, data, columns, labels)
    }

    pub fn with_columns(
        name: impl Into<String>,
        data: DataMatrix,
        columns: Vec<String>,
        labels: Option<Labels>,
    ) -> Result<Self> {
        if columns.len() != data.ncols() {
            return Err(CbmapError::InvalidParameter(format!(
                "{} column names for {} columns",
                columns.len(),
                data.ncols()
            )));
        }
        if let Some(l) = &labels {
            if l.codes.len() != data.nrows() {
                return Err(CbmapError::DimensionMismatch {
                    left: format!("{} labels", l.codes.len()),
                    right: format!("{} rows", data.nrows()),
                });
            }
        }
        Ok(LabeledDataset {
            name: name.into(),
            data,
            columns,
            labels,
        })
    }

    pub fn label_codes(&self) -> Option<&[usize]> {
        self.labels.as_ref().map(|l| l.codes.as_slice())
    }
}

fn bin(value: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let f = ((value - lo) / (hi - lo)).clamp(0.0, 1.0);
    ((f * bins as f64) as usize).min(bins - 1)
}

fn xyz(name: &str, values: Array2<f64>, codes: Vec<usize>) -> LabeledDataset {
    let data = DataMatrix::new(values).expect("generators produce finite non-empty data");
    let columns = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
    LabeledDataset::with_columns(name, data, columns, Some(Labels::from_codes(codes)))
        .expect("consistent generator output")
}

fn add_noise(values: &mut Array2<f64>, noise_std: f64, rng: &mut ChaCha8Rng) {
    if noise_std > 0.0 {
        values.mapv_inplace(|v| v + noise_std * rng.sample::<f64, _>(StandardNormal));
    }
}

/// S-shaped 2-D sheet in 3-D. Labels bin the curve parameter into 4 classes.
pub fn make_s_curve(n: usize, noise_std: f64, seed: u64) -> LabeledDataset {
    let n = n.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Array2::zeros((n, 3));
    let mut codes = Vec::with_capacity(n);
    for mut row in values.outer_iter_mut() {
        let t = 3.0 * PI * (rng.random::<f64>() - 0.5);
        row[0] = t.sin();
        row[1] = 2.0 * rng.random::<f64>();
        row[2] = t.signum() * (t.cos() - 1.0);
        codes.push(bin(t, -1.5 * PI, 1.5 * PI, PARAM_LABEL_BINS));
    }
    add_noise(&mut values, noise_std, &mut rng);
    xyz("s_curve", values, codes)
}

/// Rolled-up 2-D sheet in 3-D. Labels bin the roll parameter into 4 classes.
pub fn make_swiss_roll(n: usize, noise_std: f64, seed: u64) -> LabeledDataset {
    let n = n.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Array2::zeros((n, 3));
    let mut codes = Vec::with_capacity(n);
    for mut row in values.outer_iter_mut() {
        let t = 1.5 * PI * (1.0 + 2.0 * rng.random::<f64>());
        row[0] = t * t.cos();
        row[1] = 21.0 * rng.random::<f64>();
        row[2] = t * t.sin();
        codes.push(bin(t, 1.5 * PI, 4.5 * PI, PARAM_LABEL_BINS));
    }
    add_noise(&mut values, noise_std, &mut rng);
    xyz("swiss_roll", values, codes)
}

/// One candidate point of the severed sphere: `(colatitude, longitude)` drawn
/// uniformly, or `None` when it falls in the removed cap or wedge.
pub(crate) fn sphere_candidate(rng: &mut ChaCha8Rng) -> Option<(f64, f64)> {
    let phi = 2.0 * PI * rng.random::<f64>();
    let theta = PI * rng.random::<f64>();
    let kept = theta >= SPHERE_CAP_COLATITUDE && phi <= 2.0 * PI * SPHERE_WEDGE_FRACTION;
    kept.then_some((theta, phi))
}

/// Unit sphere with the top cap and a longitudinal wedge removed, `n` points.
/// Labels bin the longitude into 4 classes.
pub fn make_severed_sphere(n: usize, seed: u64) -> LabeledDataset {
    let n = n.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Array2::zeros((n, 3));
    let mut codes = Vec::with_capacity(n);
    let mut filled = 0;
    while filled < n {
        let Some((theta, phi)) = sphere_candidate(&mut rng) else {
            continue;
        };
        let mut row = values.row_mut(filled);
        row[0] = theta.sin() * phi.cos();
        row[1] = theta.sin() * phi.sin();
        row[2] = theta.cos();
        codes.push(bin(
            phi,
            0.0,
            2.0 * PI * SPHERE_WEDGE_FRACTION,
            PARAM_LABEL_BINS,
        ));
        filled += 1;
    }
    xyz("sphere", values, codes)
}

/// Lower corner of cuboid `label` for a given face gap.
pub fn cuboid_origin(label: usize, gap: f64) -> [f64; 3] {
    let (i, j) = ((label % 2) as f64, (label / 2) as f64);
    [
        i * (CUBOID_EDGES[0] + gap),
        j * (CUBOID_EDGES[1] + gap),
        0.0,
    ]
}

/// Four uniformly filled boxes on a 2x2 grid in the x-y plane whose facing
/// sides are `gap` apart. Rows are grouped by box, labels `0..4`.
pub fn make_cuboids(n_per_cluster: usize, gap: f64, seed: u64) -> Result<LabeledDataset> {
    if n_per_cluster == 0 || !gap.is_finite() || gap <= 0.0 {
        return Err(CbmapError::InvalidParameter(format!(
            "cuboids need n_per_cluster >= 1 and a positive gap, got {n_per_cluster} and {gap}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Array2::zeros((4 * n_per_cluster, 3));
    let mut codes = Vec::with_capacity(4 * n_per_cluster);
    for (r, mut row) in values.outer_iter_mut().enumerate() {
        let label = r / n_per_cluster;
        let origin = cuboid_origin(label, gap);
        for c in 0..3 {
            row[c] = origin[c] + CUBOID_EDGES[c] * rng.random::<f64>();
        }
        codes.push(label);
    }
    Ok(xyz("cuboids", values, codes))
}

/// Which CSV column holds class labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => LabelColumn::Index(i),
            Err(_) => LabelColumn::Name(s.to_string()),
        })
    }
}

/// Load a numeric CSV, optionally splitting out a label column.
pub fn load_csv(
    path: impl AsRef<Path>,
    has_header: bool,
    label_column: Option<&LabelColumn>,
) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| CbmapError::io(path, e))?;
    let name = path
        .file_stem()
        .map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned());
    let mut ds = read_csv(file, &path.display().to_string(), has_header, label_column)?;
    ds.name = name;
    Ok(ds)
}

pub fn read_csv<R: Read>(
    reader: R,
    source: &str,
    has_header: bool,
    label_column: Option<&LabelColumn>,
) -> Result<LabeledDataset> {
    let parse_err = |message: String| CbmapError::Parse {
        path: source.to_string(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = rdr.records();
    let mut header: Option<Vec<String>> = None;
    let mut width = None;
    if has_header {
        match records.next() {
            Some(rec) => {
                let rec = rec.map_err(|e| parse_err(e.to_string()))?;
                width = Some(rec.len());
                header = Some(rec.iter().map(str::to_string).collect());
            }
            None => return Err(parse_err("file is empty".into())),
        }
    }

    let mut label_idx: Option<usize> = None;
    let mut rows: Vec<f64> = Vec::new();
    let mut label_text: Vec<String> = Vec::new();
    let mut n_rows = 0;
    for rec in records {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        let w = *width.get_or_insert(rec.len());
        if rec.len() != w {
            return Err(parse_err(format!(
                "line {line}: expected {w} fields, found {}",
                rec.len()
            )));
        }
        if n_rows == 0 {
            label_idx =
                resolve_label_column(label_column, header.as_deref(), w).map_err(&parse_err)?;
        }
        for (col, cell) in rec.iter().enumerate() {
            if Some(col) == label_idx {
                label_text.push(cell.to_string());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(format!(
                    "line {line}, column {}: '{cell}' is not a number",
                    col + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(parse_err(format!(
                    "line {line}, column {}: non-finite value '{cell}'",
                    col + 1
                )));
            }
            rows.push(v);
        }
        n_rows += 1;
    }
    let width = width.unwrap_or(0);
    let n_features = width - usize::from(label_idx.is_some());
    if n_rows == 0 || n_features == 0 {
        return Err(parse_err("no numeric data rows".into()));
    }
    let columns = match &header {
        Some(h) => h
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != label_idx)
            .map(|(_, s)| s.clone())
            .collect(),
        None => (0..n_features).map(|j| format!("x{j}")).collect(),
    };
    let values =
        Array2::from_shape_vec((n_rows, n_features), rows).map_err(|e| parse_err(e.to_string()))?;
    let labels = label_idx.map(|_| Labels::encode(&label_text));
    LabeledDataset::with_columns(source, DataMatrix::new(values)?, columns, labels)
}

fn resolve_label_column(
    spec: Option<&LabelColumn>,
    header: Option<&[String]>,
    width: usize,
) -> std::result::Result<Option<usize>, String> {
    match spec {
        None => Ok(None),
        Some(LabelColumn::Index(i)) if *i < width => Ok(Some(*i)),
        Some(LabelColumn::Index(i)) => Err(format!(
            "label column index {i} out of range for {width} columns"
        )),
        Some(LabelColumn::Name(name)) => header
            .and_then(|h| h.iter().position(|c| c == name))
            .map(Some)
            .ok_or_else(|| format!("no column named '{name}'")),
    }
}

/// Write features and, when present, a trailing `label` column.
pub fn write_csv_to<W: Write>(dataset: &LabeledDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| CbmapError::Parse {
        path: dataset.name.clone(),
        message: e.to_string(),
    };
    let mut header: Vec<&str> = dataset.columns.iter().map(String::as_str).collect();
    if dataset.labels.is_some() {
        header.push("label");
    }
    w.write_record(&header).map_err(to_err)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for (i, row) in dataset.data.as_array().outer_iter().enumerate() {
        record.clear();
        record.extend(row.iter().map(|v| format!("{v:?}")));
        if let Some(l) = &dataset.labels {
            record.push(l.name(i).to_string());
        }
        w.write_record(&record).map_err(to_err)?;
    }
    w.flush().map_err(|e| CbmapError::io(&dataset.name, e))?;
    Ok(())
}

pub fn write_csv(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| CbmapError::io(path, e))?;
    write_csv_to(dataset, std::io::BufWriter::new(file))
}
