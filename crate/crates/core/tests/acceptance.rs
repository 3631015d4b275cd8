//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! per criterion and exits non-zero if any failed.
//!
//! Run with `cargo test -p cbmap --test acceptance`.

use std::cell::RefCell;
use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use cbmap::datasets::{
    make_cuboids, make_s_curve, make_severed_sphere, make_swiss_roll, LabeledDataset,
};
use cbmap::linalg::{euclidean_distance_matrix, pca_fit, pca_transform, DataMatrix};
use cbmap::membership::{
    frobenius_loss, loss_gradient, membership_matrix, sigma_high, MembershipMatrix,
};
use cbmap::metrics::{
    accuracy, global_score, knn_accuracy, stratified_split, HoldoutSpec, KnnClassifier,
    DEFAULT_KNN_K,
};
use cbmap::{fit, transform, CbmapConfig, CenterInit, FitResult, TransformOptions};
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GS_ANCHOR_TOL: f64 = 1e-9;
const GS_ANCHOR_MAX: Duration = Duration::from_secs(1);
const S_CURVE_GS_MIN: f64 = 0.90;
const GS_TREND_SLACK: f64 = 0.02;
const S_CURVE_MAX: Duration = Duration::from_secs(30);
const CUBOID_ACC_MIN: f64 = 0.99;
const CUBOID_GS_MIN: f64 = 0.95;
const CUBOID_MAX: Duration = Duration::from_secs(60);
const GAP_SWEEP: [f64; 4] = [4.0, 2.0, 1.0, 0.25];
const GRADIENT_CONFIGS: usize = 50;
const GRADIENT_MIN_LOSS: f64 = 0.01;
const GRADIENT_REL_TOL: f64 = 1e-4;
const GRADIENT_MAX: Duration = Duration::from_secs(5);
const TRANSFER_ACC_GAP: f64 = 0.05;
const INIT_GS_GAP: f64 = 0.10;
const INIT_SEEDS: [u64; 3] = [0, 1, 2];
const SCALING_BAND: (f64, f64) = (1.2, 4.0);
const LOSS_FINAL_RATIO: f64 = 0.9;
const LOSS_WINDOW: usize = 50;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

thread_local! {
    /// Loss histories of every fit made by the suite, checked by the descent criterion.
    static HISTORIES: RefCell<Vec<(String, Vec<f64>)>> = const { RefCell::new(Vec::new()) };
}

fn fit_logged(
    name: &str,
    x: &DataMatrix,
    cfg: &CbmapConfig,
) -> Result<(FitResult, Duration), String> {
    let start = Instant::now();
    let result = fit(x, cfg).map_err(|e| format!("{name}: {e}"))?;
    let elapsed = start.elapsed();
    HISTORIES.with(|h| {
        h.borrow_mut()
            .push((name.to_string(), result.loss_history.clone()))
    });
    Ok((result, elapsed))
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn toy_datasets() -> Result<Vec<LabeledDataset>, String> {
    Ok(vec![
        make_s_curve(1000, 0.0, 0),
        make_swiss_roll(1000, 0.0, 0),
        make_severed_sphere(720, 0),
        make_cuboids(1000, 2.0, 0).map_err(|e| e.to_string())?,
    ])
}

fn gs_anchor() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for ds in toy_datasets()? {
        let start = Instant::now();
        let x = ds.data.view();
        let pca = pca_fit(x, 2).map_err(|e| e.to_string())?;
        let y = pca_transform(&pca, x).map_err(|e| e.to_string())?;
        let gs = global_score(x, y.view()).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        ok &= (gs - 1.0).abs() <= GS_ANCHOR_TOL && elapsed < GS_ANCHOR_MAX;
        details.push(format!(
            "{} |GS-1|={:.1e} ({:.3}s)",
            ds.name,
            (gs - 1.0).abs(),
            elapsed.as_secs_f64()
        ));
    }
    check(ok, details.join(", "))
}

fn s_curve_scores() -> Outcome {
    let ds = make_s_curve(1000, 0.0, 0);
    let mut gs = Vec::new();
    let mut slowest = Duration::ZERO;
    for k in [5, 20] {
        let (r, t) = fit_logged(&format!("s_curve k={k}"), &ds.data, &CbmapConfig::new(k))?;
        gs.push(global_score(ds.data.view(), r.embedding.view()).map_err(|e| e.to_string())?);
        slowest = slowest.max(t);
    }
    check(
        gs[0] >= S_CURVE_GS_MIN && gs[1] >= gs[0] - GS_TREND_SLACK && slowest < S_CURVE_MAX,
        format!(
            "GS(k=5)={:.4} GS(k=20)={:.4} slowest fit {:.2}s",
            gs[0],
            gs[1],
            slowest.as_secs_f64()
        ),
    )
}

fn cuboids_scores() -> Outcome {
    let ds = make_cuboids(1000, 2.0, 0).map_err(|e| e.to_string())?;
    let (r, t) = fit_logged("cuboids gap=2 k=20", &ds.data, &CbmapConfig::new(20))?;
    let gs = global_score(ds.data.view(), r.embedding.view()).map_err(|e| e.to_string())?;
    let labels = ds.label_codes().expect("cuboids are labelled");
    let acc = knn_accuracy(
        r.embedding.view(),
        labels,
        DEFAULT_KNN_K,
        &HoldoutSpec::default(),
    )
    .map_err(|e| e.to_string())?;
    check(
        acc >= CUBOID_ACC_MIN && gs >= CUBOID_GS_MIN && t < CUBOID_MAX,
        format!("ACC={acc:.4} GS={gs:.4} fit {:.2}s", t.as_secs_f64()),
    )
}

fn mean_pairwise_centroid_distance(y: &Array2<f64>, labels: &[usize]) -> f64 {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut centroids = Array2::<f64>::zeros((k, y.ncols()));
    let mut counts = vec![0.0; k];
    for (row, &l) in y.outer_iter().zip(labels) {
        let mut c = centroids.row_mut(l);
        c += &row;
        counts[l] += 1.0;
    }
    for (mut c, n) in centroids.outer_iter_mut().zip(&counts) {
        c /= *n;
    }
    let d = euclidean_distance_matrix(centroids.view(), centroids.view()).expect("same width");
    let pairs = (k * (k - 1) / 2) as f64;
    let mut total = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            total += d[[i, j]];
        }
    }
    total / pairs
}

fn gap_tracking() -> Outcome {
    let mut distances = Vec::new();
    for gap in GAP_SWEEP {
        let ds = make_cuboids(1000, gap, 0).map_err(|e| e.to_string())?;
        let (r, _) = fit_logged(
            &format!("cuboids gap={gap} k=20"),
            &ds.data,
            &CbmapConfig::new(20),
        )?;
        distances.push(mean_pairwise_centroid_distance(
            &r.embedding,
            ds.label_codes().expect("labelled"),
        ));
    }
    let decreasing = distances.windows(2).all(|w| w[1] < w[0]);
    let shown: Vec<String> = GAP_SWEEP
        .iter()
        .zip(&distances)
        .map(|(g, d)| format!("gap {g}: {d:.4}"))
        .collect();
    check(decreasing, shown.join(", "))
}

fn standard_normal(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_fn(shape, |_| rng.sample(rand_distr::StandardNormal))
}

fn loss_at(y: &Array2<f64>, centers: &Array2<f64>, sigma: f64, high: &MembershipMatrix) -> f64 {
    let d = euclidean_distance_matrix(y.view(), centers.view()).expect("same width");
    let low = membership_matrix(d.view(), sigma).expect("positive sigma");
    frobenius_loss(&low, high).expect("same shape")
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut accepted, mut worst) = (0, 0.0f64);
    let h = 1e-6;
    while accepted < GRADIENT_CONFIGS {
        let n = rng.random_range(1..=8);
        let k = rng.random_range(2..=4);
        let d = rng.random_range(3..=5);
        let x = standard_normal(&mut rng, (n, d));
        let ch = standard_normal(&mut rng, (k, d));
        let dh = euclidean_distance_matrix(x.view(), ch.view()).map_err(|e| e.to_string())?;
        let Ok(sh) = sigma_high(dh.view()) else {
            continue;
        };
        let high = membership_matrix(dh.view(), sh.value).map_err(|e| e.to_string())?;

        let y = standard_normal(&mut rng, (n, 2));
        let cl = standard_normal(&mut rng, (k, 2));
        let sigma_l = rng.random_range(0.5..2.0);
        let dl = euclidean_distance_matrix(y.view(), cl.view()).map_err(|e| e.to_string())?;
        let low = membership_matrix(dl.view(), sigma_l).map_err(|e| e.to_string())?;
        let loss = frobenius_loss(&low, &high).map_err(|e| e.to_string())?;
        if loss <= GRADIENT_MIN_LOSS {
            continue;
        }
        let analytic = loss_gradient(y.view(), cl.view(), sigma_l, &low, &high, loss)
            .map_err(|e| e.to_string())?;
        let mut numeric = Array2::zeros(y.dim());
        for idx in ndarray::indices(y.dim()) {
            let (mut plus, mut minus) = (y.clone(), y.clone());
            plus[idx] += h;
            minus[idx] -= h;
            numeric[idx] = (loss_at(&plus, &cl, sigma_l, &high)
                - loss_at(&minus, &cl, sigma_l, &high))
                / (2.0 * h);
        }
        let err = (&analytic - &numeric).mapv(|v| v * v).sum().sqrt();
        let scale = numeric.mapv(|v| v * v).sum().sqrt().max(1e-8);
        worst = worst.max(err / scale);
        accepted += 1;
    }
    let elapsed = start.elapsed();
    check(
        worst <= GRADIENT_REL_TOL && elapsed < GRADIENT_MAX,
        format!(
            "{accepted} configs, worst relative error {worst:.2e} ({:.3}s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn subset(x: &DataMatrix, rows: &[usize]) -> DataMatrix {
    DataMatrix::new(x.as_array().select(Axis(0), rows)).expect("finite rows")
}

fn out_of_sample() -> Outcome {
    let ds = make_swiss_roll(1000, 0.0, 0);
    let labels = ds.label_codes().expect("labelled");
    let (train, test) =
        stratified_split(labels, &HoldoutSpec::default()).map_err(|e| e.to_string())?;
    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let test_labels: Vec<usize> = test.iter().map(|&i| labels[i]).collect();

    let (r, _) = fit_logged(
        "swiss_roll train split k=20",
        &subset(&ds.data, &train),
        &CbmapConfig::new(20),
    )?;
    let train_acc = knn_accuracy(
        r.embedding.view(),
        &train_labels,
        DEFAULT_KNN_K,
        &HoldoutSpec::default(),
    )
    .map_err(|e| e.to_string())?;
    let y_test = transform(
        &r.model,
        &subset(&ds.data, &test),
        &TransformOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let clf = KnnClassifier::new(r.embedding.view(), &train_labels, DEFAULT_KNN_K)
        .map_err(|e| e.to_string())?;
    let test_acc = accuracy(
        &clf.predict(y_test.view()).map_err(|e| e.to_string())?,
        &test_labels,
    );
    check(
        (train_acc - test_acc).abs() <= TRANSFER_ACC_GAP,
        format!("train ACC={train_acc:.4} test ACC={test_acc:.4}"),
    )
}

fn init_robustness() -> Outcome {
    let ds = make_s_curve(1000, 0.0, 0);
    let mut details = Vec::new();
    let mut ok = true;
    for seed in INIT_SEEDS {
        let mut gs = [0.0; 2];
        for (slot, init) in [CenterInit::Pca, CenterInit::Random]
            .into_iter()
            .enumerate()
        {
            let cfg = CbmapConfig {
                center_init: init,
                ..CbmapConfig::new(20).with_seed(seed)
            };
            let (r, _) = fit_logged(
                &format!("s_curve k=20 {init:?} seed={seed}"),
                &ds.data,
                &cfg,
            )?;
            gs[slot] =
                global_score(ds.data.view(), r.embedding.view()).map_err(|e| e.to_string())?;
        }
        ok &= (gs[0] - gs[1]).abs() <= INIT_GS_GAP;
        details.push(format!("seed {seed}: pca {:.4} random {:.4}", gs[0], gs[1]));
    }
    check(ok, details.join(", "))
}

fn median_fit_time(n: usize) -> Result<Duration, String> {
    let ds = make_swiss_roll(n, 0.0, 0);
    let mut times = Vec::new();
    for rep in 0..3 {
        let (_, t) = fit_logged(
            &format!("swiss_roll n={n} run {rep}"),
            &ds.data,
            &CbmapConfig::new(20),
        )?;
        times.push(t);
    }
    times.sort();
    Ok(times[1])
}

fn scaling() -> Outcome {
    let small = median_fit_time(1000)?;
    let large = median_fit_time(2000)?;
    let ratio = large.as_secs_f64() / small.as_secs_f64();
    check(
        (SCALING_BAND.0..=SCALING_BAND.1).contains(&ratio),
        format!(
            "n=1000 {:.3}s, n=2000 {:.3}s, ratio {ratio:.2}",
            small.as_secs_f64(),
            large.as_secs_f64()
        ),
    )
}

fn loss_descent() -> Outcome {
    HISTORIES.with(|h| {
        let h = h.borrow();
        let mut failures = Vec::new();
        let mut worst_ratio = 0.0f64;
        for (name, loss) in h.iter() {
            let (first, last) = (loss[0], *loss.last().expect("non-empty"));
            let w = LOSS_WINDOW.min(loss.len());
            let head = loss[..w].iter().sum::<f64>() / w as f64;
            let tail = loss[loss.len() - w..].iter().sum::<f64>() / w as f64;
            worst_ratio = worst_ratio.max(last / first);
            if last > LOSS_FINAL_RATIO * first || tail > head {
                failures.push(format!("{name}: {first:.4} -> {last:.4}"));
            }
        }
        let summary = format!("{} fits, worst final/initial {worst_ratio:.3}", h.len());
        if failures.is_empty() {
            Ok(summary)
        } else {
            Err(format!("{summary}; {}", failures.join(", ")))
        }
    })
}

fn cli(args: &[&str]) -> Result<(), String> {
    match cbmap::cli::run(std::iter::once("cbmap").chain(args.iter().copied())) {
        0 => Ok(()),
        code => Err(format!("`cbmap {}` exited with {code}", args.join(" "))),
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let path = |run: usize, name: &str| dir.path().join(format!("run{run}")).join(name);
    let mut compared = 0;
    for run in 0..2 {
        fs::create_dir_all(dir.path().join(format!("run{run}"))).map_err(|e| e.to_string())?;
        let p = |name: &str| path(run, name).to_string_lossy().into_owned();
        cli(&[
            "generate",
            "s_curve",
            "--n",
            "1000",
            "--seed",
            "0",
            "-o",
            &p("s_curve.csv"),
        ])?;
        cli(&[
            "generate",
            "cuboids",
            "--n-per",
            "1000",
            "--gap",
            "2",
            "--seed",
            "0",
            "-o",
            &p("cuboids.csv"),
        ])?;
        cli(&[
            "generate",
            "swiss_roll",
            "--n",
            "1000",
            "--seed",
            "0",
            "-o",
            &p("swiss_roll.csv"),
        ])?;
        cli(&[
            "fit",
            &p("s_curve.csv"),
            "--k",
            "5",
            "--seed",
            "0",
            "-o",
            &p("s_curve.emb.csv"),
        ])?;
        cli(&[
            "fit",
            &p("cuboids.csv"),
            "--k",
            "20",
            "--seed",
            "0",
            "-o",
            &p("cuboids.emb.csv"),
        ])?;
        cli(&[
            "fit",
            &p("swiss_roll.csv"),
            "--k",
            "20",
            "--seed",
            "0",
            "-o",
            &p("swiss_roll.emb.csv"),
        ])?;
        cli(&[
            "transform",
            &p("swiss_roll.csv"),
            "--model",
            &p("swiss_roll.emb.model.json"),
            "--seed",
            "0",
            "-o",
            &p("swiss_roll.transformed.csv"),
        ])?;
        cli(&["plot", &p("cuboids.emb.csv"), "-o", &p("cuboids.svg")])?;
    }
    let mut differing = Vec::new();
    for entry in fs::read_dir(dir.path().join("run0")).map_err(|e| e.to_string())? {
        let name = entry
            .map_err(|e| e.to_string())?
            .file_name()
            .to_string_lossy()
            .into_owned();
        if name.ends_with(".manifest.json") {
            continue;
        }
        compared += 1;
        let a = fs::read(path(0, &name)).map_err(|e| e.to_string())?;
        let b = fs::read(path(1, &name)).map_err(|e| e.to_string())?;
        if a != b {
            differing.push(name);
        }
    }
    check(
        differing.is_empty() && compared > 0,
        format!("{compared} output files compared, differing: {differing:?}"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("GS anchor: PCA scores 1 on every toy dataset", gs_anchor),
        ("S-curve GS with k=5 and k=20", s_curve_scores),
        ("Cuboids ACC and GS with k=20", cuboids_scores),
        ("Gap tracking on cuboids", gap_tracking),
        (
            "Analytic gradient matches finite differences",
            gradient_check,
        ),
        ("Out-of-sample consistency on Swiss roll", out_of_sample),
        ("PCA vs random center initialization", init_robustness),
        ("Fit time scaling in n", scaling),
        ("Loss descent on every acceptance fit", loss_descent),
        ("Byte-identical repeated CLI runs", determinism),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = criterion();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!(
        "{} of {} acceptance criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
