//! Command-line front end. `run` parses arguments, executes one command and
//! returns the process exit code: 0 on success, 1 on runtime or data errors,
//! 2 on usage errors.

mod manifest;

use std::ffi::OsString;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use ndarray::Array2;
use serde::Serialize;

pub use manifest::RunManifest;

use crate::clustering::KmeansMode;
use crate::datasets::{
    load_csv, make_cuboids, make_s_curve, make_severed_sphere, make_swiss_roll, write_csv,
    LabelColumn, LabeledDataset,
};
use crate::embedder::{fit, transform, CbmapConfig, CbmapModel, CenterInit, TransformOptions};
use crate::error::{CbmapError, Result};
use crate::linalg::DataMatrix;
use crate::metrics::{global_score, knn_accuracy, HoldoutSpec, MetricReport, DEFAULT_KNN_K};
use crate::plot::scatter_svg;

/// Row count at which `--k auto` switches from 20 to 40 clusters.
pub const AUTO_K_THRESHOLD: usize = 5000;

#[derive(Debug, Parser)]
#[command(
    name = "cbmap",
    version,
    about = "Clustering-based manifold approximation and projection"
)]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a toy dataset as CSV.
    Generate(GenerateArgs),
    /// Fit an embedding and write it with the model and loss history.
    Fit(FitArgs),
    /// Embed new data with a previously fitted model.
    Transform(TransformArgs),
    /// Fit over a grid of cluster counts and seeds and report metrics.
    Benchmark(BenchmarkArgs),
    /// Draw a 2-D embedding as an SVG scatter plot.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum DatasetName {
    #[value(name = "s_curve")]
    SCurve,
    #[value(name = "swiss_roll")]
    SwissRoll,
    Sphere,
    Cuboids,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    dataset: DatasetName,
    /// Number of points (s_curve, swiss_roll, sphere).
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Points per box (cuboids).
    #[arg(long = "n-per", default_value_t = 1000)]
    n_per: usize,
    /// Gaussian noise std (s_curve, swiss_roll).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Distance between facing box sides (cuboids).
    #[arg(long, default_value_t = 2.0)]
    gap: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long = "out")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KSpec {
    Auto,
    Fixed(usize),
}

impl FromStr for KSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KSpec::Auto);
        }
        s.parse()
            .map(KSpec::Fixed)
            .map_err(|_| format!("expected an integer or 'auto', got '{s}'"))
    }
}

impl KSpec {
    fn resolve(self, n_rows: usize) -> usize {
        match self {
            KSpec::Fixed(k) => k,
            KSpec::Auto if n_rows < AUTO_K_THRESHOLD => 20,
            KSpec::Auto => 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KmeansModeArg {
    Auto,
    Full,
    MiniBatch,
}

impl From<KmeansModeArg> for KmeansMode {
    fn from(m: KmeansModeArg) -> Self {
        match m {
            KmeansModeArg::Auto => KmeansMode::Auto,
            KmeansModeArg::Full => KmeansMode::FullBatch,
            KmeansModeArg::MiniBatch => KmeansMode::MiniBatch,
        }
    }
}

#[derive(Debug, Args)]
struct InputArgs {
    input: PathBuf,
    /// Label column by name or zero-based index. Defaults to a column named `label` if present.
    #[arg(long = "label-col")]
    label_col: Option<LabelColumn>,
    /// The input has no header row.
    #[arg(long = "no-header")]
    no_header: bool,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    /// Embedding dimension.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long = "max-iter", default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value = "pca")]
    init: CenterInit,
    /// Z-score input columns before clustering.
    #[arg(long)]
    standardize: bool,
    #[arg(long, value_enum, default_value = "auto")]
    kmeans: KmeansModeArg,
}

impl EmbedArgs {
    fn config(&self, k: usize, seed: u64) -> CbmapConfig {
        let mut cfg = CbmapConfig::new(k).with_seed(seed);
        cfg.out_dim = self.dim;
        cfg.max_iter = self.max_iter;
        cfg.learning_rate = self.lr;
        cfg.center_init = self.init;
        cfg.standardize = self.standardize;
        cfg.clustering.mode = self.kmeans.into();
        cfg
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Number of clusters, or `auto` (20 below 5000 rows, 40 otherwise).
    #[arg(long)]
    k: KSpec,
    #[command(flatten)]
    embed: EmbedArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Embedding CSV. Defaults to `<input stem>.embedding.csv` next to the input.
    #[arg(short, long = "out")]
    out: Option<PathBuf>,
    /// Model JSON. Defaults to `<out stem>.model.json`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Loss history CSV. Defaults to `<out stem>.loss.csv`.
    #[arg(long)]
    loss: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TransformArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 300)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long = "out")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma-separated cluster counts.
    #[arg(long, value_delimiter = ',', default_values_t = vec![5, 10, 20, 40])]
    k: Vec<usize>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0])]
    seeds: Vec<u64>,
    #[command(flatten)]
    embed: EmbedArgs,
    #[arg(short, long = "out")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(short, long = "out")]
    out: Option<PathBuf>,
}

/// Parse `args` (including the program name), run the command and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();

    let recorded: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(&cli.command, &recorded) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(command: &Command, argv: &[String]) -> Result<()> {
    let started = Instant::now();
    let mut manifest = match command {
        Command::Generate(a) => cmd_generate(a)?,
        Command::Fit(a) => cmd_fit(a)?,
        Command::Transform(a) => cmd_transform(a)?,
        Command::Benchmark(a) => cmd_benchmark(a)?,
        Command::Plot(a) => cmd_plot(a)?,
    };
    manifest.argv = argv.to_vec();
    manifest.elapsed_s = started.elapsed().as_secs_f64();
    let primary = manifest
        .outputs
        .first()
        .cloned()
        .expect("every command writes an output");
    manifest.write_next_to(Path::new(&primary))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}"))
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

/// The first line's fields, when the file has a header.
fn header_fields(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path).map_err(|e| CbmapError::io(path, e))?;
    let mut line = String::new();
    BufReader::new(file)
        .read_line(&mut line)
        .map_err(|e| CbmapError::io(path, e))?;
    Ok(line
        .trim_end()
        .split(',')
        .map(|s| s.trim().to_string())
        .collect())
}

fn load_input(args: &InputArgs) -> Result<LabeledDataset> {
    let has_header = !args.no_header;
    let label = match &args.label_col {
        Some(l) => Some(l.clone()),
        None if has_header && header_fields(&args.input)?.iter().any(|h| h == "label") => {
            Some(LabelColumn::Name("label".into()))
        }
        None => None,
    };
    load_csv(&args.input, has_header, label.as_ref())
}

fn embedding_dataset(
    name: &str,
    y: Array2<f64>,
    source: &LabeledDataset,
) -> Result<LabeledDataset> {
    let columns = (0..y.ncols()).map(|j| format!("dim_{j}")).collect();
    LabeledDataset::with_columns(name, DataMatrix::new(y)?, columns, source.labels.clone())
}

fn evaluate(
    x: &DataMatrix,
    y: &Array2<f64>,
    labels: Option<&[usize]>,
    seed: u64,
    runtime: f64,
) -> Option<MetricReport> {
    let gs = match global_score(x.view(), y.view()) {
        Ok(gs) => gs,
        Err(e) => {
            warn!("global score unavailable: {e}");
            return None;
        }
    };
    let acc = labels.and_then(|l| {
        knn_accuracy(
            y.view(),
            l,
            DEFAULT_KNN_K,
            &HoldoutSpec {
                seed,
                ..Default::default()
            },
        )
        .map_err(|e| warn!("k-NN accuracy unavailable: {e}"))
        .ok()
    });
    Some(MetricReport {
        global_score: gs,
        knn_accuracy: acc,
        runtime_seconds: runtime,
    })
}

fn cmd_generate(a: &GenerateArgs) -> Result<RunManifest> {
    let ds = match a.dataset {
        DatasetName::SCurve => make_s_curve(a.n, a.noise, a.seed),
        DatasetName::SwissRoll => make_swiss_roll(a.n, a.noise, a.seed),
        DatasetName::Sphere => make_severed_sphere(a.n, a.seed),
        DatasetName::Cuboids => make_cuboids(a.n_per, a.gap, a.seed)?,
    };
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{}.csv", ds.name)));
    write_csv(&ds, &out)?;
    info!("wrote {} rows to {}", ds.data.nrows(), out.display());
    Ok(RunManifest::new(
        "generate",
        serde_json::json!({
            "dataset": a.dataset, "n": a.n, "n_per": a.n_per, "noise": a.noise, "gap": a.gap,
        }),
        a.seed,
        vec![],
        vec![path_string(&out)],
    ))
}

fn cmd_fit(a: &FitArgs) -> Result<RunManifest> {
    let ds = load_input(&a.input)?;
    let k = a.k.resolve(ds.data.nrows());
    let cfg = a.embed.config(k, a.seed);
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| with_suffix(&a.input.input, ".embedding.csv"));
    let model_path = a
        .model
        .clone()
        .unwrap_or_else(|| with_suffix(&out, ".model.json"));
    let loss_path = a
        .loss
        .clone()
        .unwrap_or_else(|| with_suffix(&out, ".loss.csv"));

    let started = Instant::now();
    let result = fit(&ds.data, &cfg)?;
    let runtime = started.elapsed().as_secs_f64();
    info!(
        "fit {}x{} with k={k}: loss {:.5} -> {:.5} in {runtime:.3}s",
        ds.data.nrows(),
        ds.data.ncols(),
        result.loss_history.first().copied().unwrap_or(f64::NAN),
        result.loss_history.last().copied().unwrap_or(f64::NAN),
    );

    let metrics = evaluate(
        &ds.data,
        &result.embedding,
        ds.label_codes(),
        a.seed,
        runtime,
    );
    write_csv(
        &embedding_dataset("embedding", result.embedding.clone(), &ds)?,
        &out,
    )?;
    result.model.save(&model_path)?;
    write_loss(&result.loss_history, &loss_path)?;

    let mut m = RunManifest::new(
        "fit",
        serde_json::to_value(&cfg)?,
        a.seed,
        vec![path_string(&a.input.input)],
        vec![
            path_string(&out),
            path_string(&model_path),
            path_string(&loss_path),
        ],
    );
    m.metrics = metrics.map(|r| serde_json::to_value(r).expect("plain struct"));
    Ok(m)
}

fn write_loss(history: &[f64], path: &Path) -> Result<()> {
    let mut text = String::from("iteration,loss\n");
    for (i, f) in history.iter().enumerate() {
        text.push_str(&format!("{},{f:?}\n", i + 1));
    }
    fs::write(path, text).map_err(|e| CbmapError::io(path, e))
}

fn cmd_transform(a: &TransformArgs) -> Result<RunManifest> {
    let model = CbmapModel::load(&a.model)?;
    let ds = load_input(&a.input)?;
    let opts = TransformOptions {
        iters: a.iters,
        seed: a.seed,
    };
    let y = transform(&model, &ds.data, &opts)?;
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| with_suffix(&a.input.input, ".transformed.csv"));
    write_csv(&embedding_dataset("embedding", y, &ds)?, &out)?;
    Ok(RunManifest::new(
        "transform",
        serde_json::json!({ "model": path_string(&a.model), "iters": a.iters }),
        a.seed,
        vec![path_string(&a.input.input), path_string(&a.model)],
        vec![path_string(&out)],
    ))
}

#[derive(Debug, Serialize)]
struct BenchmarkEntry {
    k: usize,
    seed: u64,
    n: usize,
    #[serde(flatten)]
    report: MetricReport,
}

fn cmd_benchmark(a: &BenchmarkArgs) -> Result<RunManifest> {
    let ds = load_input(&a.input)?;
    let mut entries = Vec::new();
    for &k in &a.k {
        for &seed in &a.seeds {
            let cfg = a.embed.config(k, seed);
            let started = Instant::now();
            let result = fit(&ds.data, &cfg)?;
            let runtime = started.elapsed().as_secs_f64();
            let gs = global_score(ds.data.view(), result.embedding.view())?;
            let acc = ds
                .label_codes()
                .map(|l| {
                    knn_accuracy(
                        result.embedding.view(),
                        l,
                        DEFAULT_KNN_K,
                        &HoldoutSpec {
                            seed,
                            ..Default::default()
                        },
                    )
                })
                .transpose()?;
            info!("k={k} seed={seed}: gs={gs:.4} acc={acc:?} {runtime:.3}s");
            entries.push(BenchmarkEntry {
                k,
                seed,
                n: ds.data.nrows(),
                report: MetricReport {
                    global_score: gs,
                    knn_accuracy: acc,
                    runtime_seconds: runtime,
                },
            });
        }
    }
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| with_suffix(&a.input.input, ".benchmark.json"));
    let text = serde_json::to_string_pretty(&entries)?;
    fs::write(&out, text).map_err(|e| CbmapError::io(&out, e))?;
    let mut m = RunManifest::new(
        "benchmark",
        serde_json::json!({ "k": a.k, "seeds": a.seeds, "fit": a.embed.config(0, 0) }),
        a.seeds.first().copied().unwrap_or(0),
        vec![path_string(&a.input.input)],
        vec![path_string(&out)],
    );
    m.metrics = Some(serde_json::to_value(&entries)?);
    Ok(m)
}

fn cmd_plot(a: &PlotArgs) -> Result<RunManifest> {
    let ds = load_input(&a.input)?;
    let svg = scatter_svg(ds.data.view(), ds.label_codes(), &ds.name)?;
    let out = a
        .out
        .clone()
        .unwrap_or_else(|| with_suffix(&a.input.input, ".svg"));
    fs::write(&out, svg).map_err(|e| CbmapError::io(&out, e))?;
    Ok(RunManifest::new(
        "plot",
        serde_json::json!({}),
        0,
        vec![path_string(&a.input.input)],
        vec![path_string(&out)],
    ))
}
