use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use stitchnorm::geometry::{angle_error_unoriented, evaluate, MetricReport, PointCloud, SpatialIndex};
use stitchnorm::io::{
    self, to_json, write_atomic, Backend, BenchRecord, EstimateReport, RunConfig, StageTimingsMs,
    TimingStats,
};
use stitchnorm::patchnet::{
    self, sample_training_patches, AttentionScale, NetConfig, NetworkParams, PatchNet,
    TrainConfig,
};
use stitchnorm::stitching::{
    naive_select_rows, run_pipeline, JetEstimator, NetEstimator, PatchEstimator, PcaEstimator,
    PipelineConfig, PipelineRun, StitchConfig,
};
use stitchnorm::{Error, Result, Vec3};

#[derive(Parser)]
#[command(name = "stitchnorm", version, about = "Patch-stitched point cloud normal estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate normals for one or more `.xyz` clouds.
    Estimate(EstimateArgs),
    /// Time the pipeline over one or more patch counts.
    Bench(BenchArgs),
    /// Color a cloud by the angle between predicted and reference normals.
    Heatmap(HeatmapArgs),
    /// Train the patch network and write an STNW checkpoint.
    Train(TrainArgs),
    /// Write an analytic test surface as `.xyz` + `.normals`.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Pca,
    Jet,
    Net,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Pca => Backend::Pca,
            BackendArg::Jet => Backend::Jet,
            BackendArg::Net => Backend::Net,
        }
    }
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// Points per patch (K).
    #[arg(long, default_value_t = 256)]
    patch_size: usize,
    /// Target overlap K·M/N used to pick M when `--patch-count` is absent.
    #[arg(long, default_value_t = 12.0)]
    overlap: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "jet")]
    backend: BackendArg,
    /// STNW weights, required by the net backend.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Distance-weight sigma as a fraction of each patch radius.
    #[arg(long, default_value_t = 1.0 / 3.0)]
    sigma_ratio: f64,
    /// Override the feature-graph size stored with the weights.
    #[arg(long)]
    k_graph: Option<usize>,
    /// Select with the nested-loop reference instead of the sparse index.
    #[arg(long)]
    naive_stitch: bool,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input clouds; `<stem>.normals` and `<stem>.pidx` next to each are used
    /// for evaluation when present.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Patch count (M).
    #[arg(long)]
    patch_count: Option<usize>,
    /// Evaluation subset ids; only with a single input.
    #[arg(long)]
    subset: Option<PathBuf>,
    #[arg(long, short, default_value = ".")]
    out_dir: PathBuf,
    /// Also write `<stem>.heatmap.ply` when reference normals exist.
    #[arg(long)]
    heatmap: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Patch counts to compare, comma separated.
    #[arg(long, value_delimiter = ',')]
    patch_count: Vec<usize>,
    /// Timed runs per configuration after one warm-up run; at least 3.
    #[arg(long, default_value_t = 3)]
    runs: usize,
    /// Also time the nested-loop stitch and report the speedup.
    #[arg(long)]
    compare_naive: bool,
    /// Time the nested-loop stitch on this many evenly spaced rows and scale
    /// to the whole cloud; 0 runs it on every row.
    #[arg(long, default_value_t = 0)]
    naive_rows: usize,
    #[arg(long, default_value = "bench")]
    name: String,
    /// Machine-readable records.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct HeatmapArgs {
    #[arg(long)]
    xyz: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Patch,
    Head,
}

#[derive(Args)]
struct TrainArgs {
    /// Training clouds with `<stem>.normals` alongside.
    inputs: Vec<PathBuf>,
    /// Dataset directory used with `--split`.
    #[arg(long, requires = "split")]
    data_dir: Option<PathBuf>,
    /// Shape list, one name per line.
    #[arg(long, requires = "data_dir")]
    split: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    patch_size: usize,
    #[arg(long, default_value_t = 20)]
    patches_per_shape: usize,
    #[arg(long, default_value_t = 1000)]
    steps: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 48)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    k_graph: usize,
    #[arg(long, default_value_t = 8)]
    heads: usize,
    #[arg(long, value_enum, default_value = "patch")]
    attention_scale: ScaleArg,
    /// Randomly rotate sampled patches.
    #[arg(long)]
    augment: bool,
    /// Train without expert dropout.
    #[arg(long)]
    no_dropout: bool,
    /// Continue from this checkpoint; architecture flags are then ignored.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SurfaceArg {
    Sphere,
    Plane,
    Wave,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "sphere")]
    shape: SurfaceArg,
    #[arg(long, default_value_t = 10_000)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path without extension.
    #[arg(long, short)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => cmd_estimate(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Heatmap(a) => cmd_heatmap(a),
        Command::Train(a) => cmd_train(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn stem(path: &Path) -> Result<String> {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| Error::Config(format!("{} has no file name", path.display())))
}

/// A cloud plus whatever reference data sits next to it.
struct Input {
    name: String,
    cloud: PointCloud,
    subset: Option<Vec<usize>>,
}

fn load_input(path: &Path, subset: Option<&Path>) -> Result<Input> {
    let name = stem(path)?;
    let is_xyz = path.extension().is_some_and(|e| e == "xyz");
    let (cloud, pidx) = if is_xyz && path.with_extension("normals").exists() {
        let shape = io::load_shape(path.parent().unwrap_or(Path::new(".")), &name)?;
        (shape.cloud, shape.subset)
    } else {
        let positions = io::read_xyz(path)?;
        if positions.is_empty() {
            return Err(Error::Data {
                path: path.to_path_buf(),
                msg: "no points".into(),
            });
        }
        (PointCloud::new(positions)?, None)
    };
    let subset = match subset {
        Some(p) => Some(io::read_pidx(p, cloud.len())?),
        None => pidx,
    };
    Ok(Input { name, cloud, subset })
}

fn make_config(a: &PipelineArgs, patch_count: usize) -> RunConfig {
    RunConfig {
        patch_size: a.patch_size,
        patch_count,
        seed: a.seed,
        backend: a.backend.into(),
        weights: a.weights.clone(),
        sigma_ratio: a.sigma_ratio,
        k_graph: a.k_graph,
        subset: None,
        naive_stitch: a.naive_stitch,
        output_dir: None,
    }
}

fn patch_count_for(a: &PipelineArgs, n: usize) -> Result<usize> {
    if !(a.overlap > 0.0 && a.overlap.is_finite()) {
        return Err(Error::Config(format!("overlap must be positive, got {}", a.overlap)));
    }
    let k = a.patch_size.min(n).max(1);
    Ok(((a.overlap * n as f64 / k as f64).round() as usize).clamp(1, n))
}

/// Checks the config and loads weights before any compute.
fn make_estimator(cfg: &RunConfig) -> Result<Box<dyn PatchEstimator>> {
    cfg.validate()?;
    Ok(match cfg.backend {
        Backend::Pca => Box::new(PcaEstimator),
        Backend::Jet => Box::new(JetEstimator),
        Backend::Net => {
            let path = cfg.weights.as_deref().expect("validated");
            let (mut params, _) = patchnet::weights::load(path)?;
            if let Some(k) = cfg.k_graph {
                params.config.k_graph = k;
            }
            Box::new(NetEstimator::new(PatchNet::new(params)?))
        }
    })
}

fn pipeline_config(cfg: &RunConfig) -> PipelineConfig {
    PipelineConfig {
        stitch: StitchConfig {
            sigma_ratio: cfg.sigma_ratio,
            ..StitchConfig::default()
        },
        naive_stitch: cfg.naive_stitch,
    }
}

fn metrics_for(input: &Input, normals: &[Vec3]) -> Result<Option<MetricReport>> {
    input
        .cloud
        .gt_normals()
        .map(|gt| evaluate(normals, gt, input.subset.as_deref()))
        .transpose()
}

fn cmd_estimate(a: EstimateArgs) -> Result<()> {
    if a.subset.is_some() && a.inputs.len() > 1 {
        return Err(Error::Config("--subset needs exactly one input".into()));
    }
    // Fail on bad flags or weights before reading any cloud.
    let mut base = make_config(&a.pipeline, a.patch_count.unwrap_or(1));
    base.subset = a.subset.clone();
    base.output_dir = Some(a.out_dir.clone());
    let estimator = make_estimator(&base)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::Io {
        path: a.out_dir.clone(),
        source: e,
    })?;

    for path in &a.inputs {
        let input = load_input(path, a.subset.as_deref())?;
        let n = input.cloud.len();
        let mut cfg = base.clone();
        cfg.patch_count = match a.patch_count {
            Some(m) => m,
            None => patch_count_for(&a.pipeline, n)?,
        };
        let run = run_pipeline(&input.cloud, &cfg.plan(), estimator.as_ref(), &pipeline_config(&cfg))?;
        let normals = &run.result.normals;
        let metrics = metrics_for(&input, normals)?;

        let out = a.out_dir.join(format!("{}.normals", input.name));
        io::write_normals(&out, normals)?;
        if a.heatmap {
            if let Some(gt) = input.cloud.gt_normals() {
                let errors = angle_errors(normals, gt)?;
                let ply = a.out_dir.join(format!("{}.heatmap.ply", input.name));
                io::write_heatmap_ply(&ply, input.cloud.positions(), &errors)?;
            } else {
                log::warn!("{}: no reference normals, heatmap skipped", input.name);
            }
        }
        let report = EstimateReport {
            shape: input.name.clone(),
            config: cfg,
            n_points: n,
            metrics,
            overlap: run.overlap,
            max_overlap: run.max_overlap,
            uncovered: run.result.uncovered.len(),
            timings_ms: StageTimingsMs::from(&run.timings),
        };
        let json = to_json(&report)?;
        write_atomic(&a.out_dir.join(format!("{}.report.json", input.name)), json.as_bytes())?;
        match &report.metrics {
            Some(m) => println!(
                "{}: rmse {:.4} deg, pgp5 {:.4}, pgp10 {:.4} over {} points",
                input.name, m.rmse_deg, m.pgp5, m.pgp10, m.n_evaluated
            ),
            None => println!("{}: {} normals written to {}", input.name, n, out.display()),
        }
    }
    Ok(())
}

fn angle_errors(pred: &[Vec3], gt: &[Vec3]) -> Result<Vec<f64>> {
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predicted normals for {} reference normals",
            pred.len(),
            gt.len()
        )));
    }
    pred.iter()
        .zip(gt)
        .map(|(p, g)| angle_error_unoriented(p, g))
        .collect()
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Nested-loop selection time for the patches and predictions of `run`.
fn naive_stitch_ms(cloud: &PointCloud, run: &PipelineRun, cfg: &StitchConfig, rows: usize) -> Result<f64> {
    let n = cloud.len();
    let sample: Vec<usize> = if rows == 0 || rows >= n {
        (0..n).collect()
    } else {
        (0..rows).map(|i| i * n / rows).collect()
    };
    let t = Instant::now();
    naive_select_rows(cloud, &run.patches, &run.predictions, cfg, &sample)?;
    Ok(ms(t.elapsed()) * n as f64 / sample.len() as f64)
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    if a.runs < 3 {
        return Err(Error::Config(format!("bench needs at least 3 runs, got {}", a.runs)));
    }
    let mut base = make_config(&a.pipeline, 1);
    base.naive_stitch = a.pipeline.naive_stitch;
    let estimator = make_estimator(&base)?;
    let inputs = a
        .inputs
        .iter()
        .map(|p| load_input(p, None))
        .collect::<Result<Vec<_>>>()?;
    let total_points: usize = inputs.iter().map(|i| i.cloud.len()).sum();
    let counts: Vec<Option<usize>> = if a.patch_count.is_empty() {
        vec![None]
    } else {
        a.patch_count.iter().copied().map(Some).collect()
    };

    let mut records = Vec::new();
    for m in counts {
        let mut totals = Vec::with_capacity(a.runs);
        let mut inference = Vec::with_capacity(a.runs);
        let mut stitching = Vec::with_capacity(a.runs);
        let mut reports = Vec::new();
        let mut overlap = 0.0;
        let mut max_overlap = 0;
        let mut naive_ms = 0.0;
        let mut sparse_ms = 0.0;
        let mut cfg = base.clone();
        for run_idx in 0..=a.runs {
            let (mut total, mut inf, mut st) = (0.0, 0.0, 0.0);
            for input in &inputs {
                let n = input.cloud.len();
                cfg.patch_count = match m {
                    Some(m) => m,
                    None => patch_count_for(&a.pipeline, n)?,
                };
                let pc = pipeline_config(&cfg);
                let run = run_pipeline(&input.cloud, &cfg.plan(), estimator.as_ref(), &pc)?;
                let t = &run.timings;
                total += ms(t.total());
                inf += ms(t.sample + t.extract + t.estimate);
                st += ms(t.stitching());
                if run_idx == 0 {
                    // warm-up: collect metrics and the naive comparison once
                    if let Some(r) = metrics_for(input, &run.result.normals)? {
                        reports.push((input.name.clone(), r));
                    }
                    overlap = run.overlap;
                    max_overlap = max_overlap.max(run.max_overlap);
                    if a.compare_naive {
                        naive_ms += naive_stitch_ms(&input.cloud, &run, &pc.stitch, a.naive_rows)?;
                        sparse_ms += ms(t.stitching());
                    }
                }
            }
            if run_idx > 0 {
                let per = |v: f64| v / total_points as f64;
                totals.push(per(total));
                inference.push(per(inf));
                stitching.push(per(st));
            }
        }
        if inputs.len() > 1 {
            overlap = inputs
                .iter()
                .map(|i| cfg.patch_size as f64 * cfg.patch_count as f64 / i.cloud.len() as f64)
                .sum::<f64>()
                / inputs.len() as f64;
        }
        records.push(BenchRecord {
            dataset: a.name.clone(),
            config: cfg.clone(),
            n_points: total_points,
            reports,
            ms_per_point: TimingStats::from_samples(&totals),
            inference_ms_per_point: TimingStats::from_samples(&inference),
            stitch_ms_per_point: TimingStats::from_samples(&stitching),
            overlap,
            max_overlap,
            naive_speedup: a.compare_naive.then(|| naive_ms / sparse_ms.max(1e-9)),
        });
    }

    print!("{}", bench_table(&records));
    if let Some(path) = &a.json {
        write_atomic(path, to_json(&records)?.as_bytes())?;
    }
    Ok(())
}

fn bench_table(records: &[BenchRecord]) -> String {
    let header = [
        "dataset", "backend", "K", "M", "overlap", "peak", "ms/pt", "var", "infer", "stitch",
        "rmse", "speedup",
    ];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for r in records {
        let rmse = if r.reports.is_empty() {
            "-".to_string()
        } else {
            let mean = r.reports.iter().map(|(_, m)| m.rmse_deg).sum::<f64>() / r.reports.len() as f64;
            format!("{mean:.3}")
        };
        rows.push(vec![
            r.dataset.clone(),
            r.config.backend.to_string(),
            r.config.patch_size.to_string(),
            r.config.patch_count.to_string(),
            format!("{:.2}", r.overlap),
            r.max_overlap.to_string(),
            format!("{:.5}", r.ms_per_point.mean),
            format!("{:.2e}", r.ms_per_point.variance),
            format!("{:.5}", r.inference_ms_per_point.mean),
            format!("{:.5}", r.stitch_ms_per_point.mean),
            rmse,
            r.naive_speedup.map_or("-".to_string(), |s| format!("{s:.1}x")),
        ]);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn cmd_heatmap(a: HeatmapArgs) -> Result<()> {
    let positions = io::read_xyz(&a.xyz)?;
    let pred = io::read_normals(&a.pred)?;
    let gt = io::read_normals(&a.gt)?;
    if positions.len() != pred.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} points but {} predicted normals",
            positions.len(),
            pred.len()
        )));
    }
    let errors = angle_errors(&pred, &gt)?;
    io::write_heatmap_ply(&a.out, &positions, &errors)?;
    let mean = errors.iter().sum::<f64>() / errors.len().max(1) as f64;
    println!("{} vertices, mean error {mean:.3} deg", errors.len());
    Ok(())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let cfg = TrainConfig {
        lr: a.lr,
        batch_size: a.batch_size,
        steps: a.steps,
        seed: a.seed,
        augment: a.augment,
        dropout: !a.no_dropout,
        ..TrainConfig::default()
    };
    if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
        return Err(Error::Config(format!("learning rate must be non-negative, got {}", cfg.lr)));
    }
    let (params, adam) = match &a.resume {
        Some(path) => {
            let (p, adam) = patchnet::weights::load(path)?;
            (p, adam)
        }
        None => {
            let config = NetConfig {
                n_heads: a.heads,
                k_graph: a.k_graph,
                attention_scale: match a.attention_scale {
                    ScaleArg::Patch => AttentionScale::PatchSize,
                    ScaleArg::Head => AttentionScale::HeadDim,
                },
            };
            config.validate()?;
            (NetworkParams::init(config, a.seed), None)
        }
    };

    let mut clouds: Vec<(String, PointCloud)> = Vec::new();
    if let (Some(dir), Some(split)) = (&a.data_dir, &a.split) {
        for s in io::load_dataset(dir, split)? {
            clouds.push((s.name, s.cloud));
        }
    }
    for path in &a.inputs {
        let dir = path.parent().unwrap_or(Path::new("."));
        let s = io::load_shape(dir, &stem(path)?)?;
        clouds.push((s.name, s.cloud));
    }
    if clouds.is_empty() {
        return Err(Error::Config("no training data; pass clouds or --data-dir/--split".into()));
    }
    let mut data = Vec::new();
    for (i, (name, cloud)) in clouds.iter().enumerate() {
        let index = SpatialIndex::build(cloud)?;
        let count = a.patches_per_shape.min(cloud.len());
        let k = a.patch_size.min(cloud.len());
        let seed = stitchnorm::seed::derive_seed(a.seed, &format!("shape{i}"));
        data.extend(sample_training_patches(cloud, &index, count, k, seed)?);
        info!("{name}: {count} patches");
    }

    let t = Instant::now();
    let outcome = patchnet::train(params, &data, &cfg, adam)?;
    let last = outcome.losses.last().copied();
    patchnet::weights::save(&a.out, &outcome.params, Some(&outcome.adam))?;
    match last {
        Some(l) => println!(
            "{} steps on {} patches in {:.1} s, final batch loss {l:.5}, wrote {}",
            outcome.losses.len(),
            data.len(),
            t.elapsed().as_secs_f64(),
            a.out.display()
        ),
        None => println!("0 steps, wrote {}", a.out.display()),
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let cloud = match a.shape {
        SurfaceArg::Sphere => io::synthetic::fibonacci_sphere(a.points)?,
        SurfaceArg::Plane => io::synthetic::plane(a.points, a.seed)?,
        SurfaceArg::Wave => io::synthetic::wave(a.points, 0.2, a.seed)?,
    };
    let xyz = a.out.with_extension("xyz");
    io::write_xyz(&xyz, cloud.positions())?;
    io::write_normals(&a.out.with_extension("normals"), cloud.gt_normals().expect("analytic normals"))?;
    println!("{} points written to {}", cloud.len(), xyz.display());
    Ok(())
}
