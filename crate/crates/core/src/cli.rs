//! The `graspkit` command-line interface.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use crate::config::{ConfigError, ResolvedConfig, RunManifest};
use crate::data::{
    make_splits, parse_cornell, parse_jacquard, read_split_file, write_split_file, AugmentSpec,
    ChannelMode, DataError, DatasetKind, ParseReport, SampleRecord, Split, SplitMode,
};
use crate::eval::{ablation_matrix, evaluate_records, EvalError, EvalReport};
use crate::grasp::{decode_grasps, encode_grasp_maps, rectangle_from_planar, GraspError};
use crate::net::{load_checkpoint, NetError, Network, NetworkPredictor};
use crate::train::{sweep_scale_factor, train, TrainError, TrainOptions};
use crate::viz;
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Grasp(#[from] GraspError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Parser)]
#[command(
    name = "graspkit",
    version,
    about = "Grasp detection: Gaussian grasp-map encoding, a lightweight generative network, and rectangle-metric evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a grasp detection model on a Cornell- or Jacquard-format dataset
    Train(TrainArgs),
    /// Evaluate a checkpoint with the rectangle metric
    Evaluate(EvaluateArgs),
    /// Predict grasps for images: heatmaps, overlay and grasp records
    Predict(PredictArgs),
    /// Render the encoded target maps for one dataset sample
    EncodeViz(EncodeVizArgs),
    /// Train and evaluate the four component-ablation settings
    Ablate(AblateArgs),
    /// Train and evaluate one model per Gaussian scale factor T
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DatasetArg {
    Cornell,
    Jacquard,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InputArg {
    D,
    Rgb,
    Rgbd,
}

impl InputArg {
    fn mode(self) -> ChannelMode {
        match self {
            InputArg::D => ChannelMode::D,
            InputArg::Rgb => ChannelMode::Rgb,
            InputArg::Rgbd => ChannelMode::Rgbd,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    Image,
    Object,
}

impl SplitArg {
    fn mode(self) -> SplitMode {
        match self {
            SplitArg::Image => SplitMode::ImageWise,
            SplitArg::Object => SplitMode::ObjectWise,
        }
    }
}

/// Flags shared by every training-like command.
#[derive(Args, Debug, Clone)]
struct CommonTrainArgs {
    /// Dataset family
    #[arg(long, value_enum)]
    dataset: DatasetArg,
    /// Dataset root directory
    #[arg(long)]
    data_dir: PathBuf,
    /// Input channels
    #[arg(long, value_enum)]
    input: Option<InputArg>,
    /// Square network input size (multiple of 4)
    #[arg(long)]
    input_size: Option<usize>,
    /// Split strategy
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    /// Test fraction in (0, 1)
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Training epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// Batch size
    #[arg(long)]
    batch_size: Option<usize>,
    /// Learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// Gaussian scale factor T (sets T_x = T_y)
    #[arg(long)]
    gauss_t: Option<f64>,
    /// Width normalization constant in pixels
    #[arg(long)]
    w_max: Option<f64>,
    /// Disable the Gaussian grasp representation (flat binary quality)
    #[arg(long)]
    no_ggr: bool,
    /// Replace the receptive-field block with a residual block
    #[arg(long)]
    no_rfbm: bool,
    /// Replace attention fusion with plain concat + conv
    #[arg(long)]
    no_mdafn: bool,
    /// Disable online augmentation (defaults: Cornell on, Jacquard off)
    #[arg(long)]
    no_augment: bool,
    /// Keep an epoch checkpoint every N epochs
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Config file (TOML); flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonTrainArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Checkpoint directory
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum)]
    dataset: DatasetArg,
    #[arg(long)]
    data_dir: PathBuf,
    /// Evaluate exactly the ids in this split file
    #[arg(long)]
    split_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Decoded grasps given the chance to match
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Checkpoint directory
    #[arg(long)]
    checkpoint: PathBuf,
    /// Depth image(s), 16-bit millimeter PNG
    #[arg(long, num_args = 1..)]
    depth: Vec<PathBuf>,
    /// RGB image(s), index-matched with --depth for RGB-D checkpoints
    #[arg(long, num_args = 0..)]
    rgb: Vec<PathBuf>,
    /// Grasps to decode per image
    #[arg(long, default_value_t = 1)]
    top_k: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EncodeVizArgs {
    #[arg(long, value_enum)]
    dataset: DatasetArg,
    #[arg(long)]
    data_dir: PathBuf,
    /// Sample id to render
    #[arg(long)]
    sample_id: String,
    #[arg(long)]
    gauss_t: Option<f64>,
    #[arg(long)]
    w_max: Option<f64>,
    /// Binary quality fill instead of Gaussian
    #[arg(long)]
    binary: bool,
    #[arg(long)]
    input_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    common: CommonTrainArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonTrainArgs,
    /// Comma-separated scale factors, e.g. 4,8,16,32,64
    #[arg(long)]
    values: String,
}

/// Parses arguments from the process environment and runs the selected
/// command, returning the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Predict(args) => cmd_predict(args),
        Command::EncodeViz(args) => cmd_encode_viz(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn parse_dataset(kind: DatasetArg, dir: &Path) -> Result<ParseReport, CliError> {
    let report = match kind {
        DatasetArg::Cornell => parse_cornell(dir)?,
        DatasetArg::Jacquard => parse_jacquard(dir)?,
    };
    if !report.warnings.is_empty() {
        eprintln!(
            "warning: skipped {} rectangle(s) and {} sample(s) while parsing",
            report.skipped_rectangles, report.skipped_samples
        );
    }
    Ok(report)
}

/// Applies CLI flags over the (file-over-default) resolved config.
fn resolve(common: &CommonTrainArgs) -> Result<ResolvedConfig, CliError> {
    let mut cfg = ResolvedConfig::load(common.config.as_deref())?;
    if let Some(input) = common.input {
        cfg.input.channels = input.mode();
    }
    if let Some(size) = common.input_size {
        cfg.input.size = size;
    }
    if let Some(split) = common.split {
        cfg.split_mode = split.mode();
    }
    if let Some(f) = common.test_fraction {
        if !(f > 0.0 && f < 1.0) {
            return Err(CliError::Usage(format!(
                "--test-fraction must lie in (0, 1), got {f}"
            )));
        }
        cfg.test_fraction = f;
    }
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
        cfg.augment.seed = seed;
    }
    if let Some(epochs) = common.epochs {
        cfg.train.epochs = epochs;
    }
    if let Some(bs) = common.batch_size {
        cfg.train.batch_size = bs;
    }
    if let Some(lr) = common.lr {
        cfg.train.learning_rate = lr;
    }
    if let Some(t) = common.gauss_t {
        if t <= 0.0 {
            return Err(CliError::Usage(format!("--gauss-t must be positive, got {t}")));
        }
        cfg.encoder.t_x = t;
        cfg.encoder.t_y = t;
    }
    if let Some(w) = common.w_max {
        cfg.encoder.w_max = w;
    }
    if common.no_ggr {
        cfg.encoder.mode = crate::grasp::EncodeMode::Binary;
    }
    cfg.network.in_channels = cfg.input.channels.channels();
    cfg.network.rfb_enabled = !common.no_rfbm;
    cfg.network.mdafn_enabled = !common.no_mdafn;
    Ok(cfg)
}

fn train_options(cfg: &ResolvedConfig, common: &CommonTrainArgs) -> TrainOptions {
    let augment = if common.no_augment {
        None
    } else {
        match common.dataset {
            // the small corpus is augmented online; the large one is not
            DatasetArg::Cornell => Some(AugmentSpec {
                seed: cfg.train.seed,
                ..cfg.augment
            }),
            DatasetArg::Jacquard => None,
        }
    };
    let mut opts = TrainOptions::new(common.out.clone());
    opts.train = cfg.train;
    opts.loss = cfg.loss;
    opts.encoder = cfg.encoder;
    opts.input = cfg.input;
    opts.augment = augment;
    opts.criteria = cfg.eval;
    opts.decode = cfg.decode;
    opts.split_mode = cfg.split_mode;
    if let Some(every) = common.checkpoint_every {
        opts.checkpoint_every = every;
    }
    opts
}

fn prepare_run(
    command: &str,
    common: &CommonTrainArgs,
) -> Result<(ResolvedConfig, ParseReport, Split, TrainOptions), CliError> {
    let cfg = resolve(common)?;
    RunManifest::new(command, cfg.train.seed, &common.out, cfg.clone()).write(&common.out)?;
    let report = parse_dataset(common.dataset, &common.data_dir)?;
    let split = make_splits(
        &report.records,
        cfg.split_mode,
        cfg.test_fraction,
        cfg.train.seed,
    )?;
    write_split_file(&common.out.join("split_train.txt"), &split.train_ids)?;
    write_split_file(&common.out.join("split_test.txt"), &split.test_ids)?;
    let opts = train_options(&cfg, common);
    Ok((cfg, report, split, opts))
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let (cfg, report, split, opts) = prepare_run("train", &args.common)?;
    let mut net = Network::<f32>::new(cfg.network, cfg.train.seed)?;
    println!(
        "training {} parameters on {} samples ({} held out)",
        net.param_count(),
        split.train_ids.len(),
        split.test_ids.len()
    );
    let outcome = train(&mut net, &report.records, &split, &opts)?;
    println!(
        "done: {} epoch(s), best val accuracy {:.4} at epoch {}",
        outcome.epochs_run, outcome.best_val_accuracy, outcome.best_epoch
    );
    println!("best checkpoint: {}", outcome.best_checkpoint.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let mut cfg = ResolvedConfig::load(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(split) = args.split {
        cfg.split_mode = split.mode();
    }
    if let Some(f) = args.test_fraction {
        if !(f > 0.0 && f < 1.0) {
            return Err(CliError::Usage(format!(
                "--test-fraction must lie in (0, 1), got {f}"
            )));
        }
        cfg.test_fraction = f;
    }
    if let Some(k) = args.top_k {
        cfg.eval.top_k = k.max(1);
    }

    let (net, meta) = load_checkpoint::<f32>(&args.checkpoint)?;
    cfg.input = meta.input;
    cfg.encoder = meta.encoder;
    cfg.decode = meta.decode;
    cfg.network = meta.network;
    RunManifest::new("evaluate", cfg.train.seed, &args.out, cfg.clone()).write(&args.out)?;

    let report = parse_dataset(args.dataset, &args.data_dir)?;
    let ids = match &args.split_file {
        Some(path) => read_split_file(path)?,
        None => {
            make_splits(
                &report.records,
                cfg.split_mode,
                cfg.test_fraction,
                cfg.train.seed,
            )?
            .test_ids
        }
    };
    let predictor = NetworkPredictor {
        net: &net,
        w_max: cfg.encoder.w_max,
        decode: cfg.decode,
        top_k: cfg.eval.top_k,
    };
    let eval = evaluate_records(
        &predictor,
        &report.records,
        &ids,
        &cfg.input,
        &cfg.eval,
        cfg.split_mode,
    )?;
    write_report(&args.out, &eval)?;
    println!(
        "accuracy {:.1} ({}/{} matched, {} failed)",
        eval.accuracy * 100.0,
        eval.matched_count(),
        eval.per_sample.len(),
        eval.failed.len()
    );
    Ok(())
}

fn write_report(out: &Path, eval: &EvalReport) -> Result<(), CliError> {
    let path = out.join("eval_report.txt");
    std::fs::write(&path, eval.to_text()).map_err(io_err(&path))?;
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    if args.depth.is_empty() && args.rgb.is_empty() {
        return Err(CliError::Usage(
            "predict needs at least one --depth or --rgb image".into(),
        ));
    }
    let (net, meta) = load_checkpoint::<f32>(&args.checkpoint)?;
    let cfg = ResolvedConfig {
        input: meta.input,
        network: meta.network,
        encoder: meta.encoder,
        decode: meta.decode,
        ..ResolvedConfig::load_defaults()
    };
    RunManifest::new("predict", args.seed.unwrap_or(0), &args.out, cfg.clone())
        .write(&args.out)?;

    let n = args.depth.len().max(args.rgb.len());
    let mut succeeded = 0usize;
    for i in 0..n {
        let depth_path = args.depth.get(i);
        let rgb_path = args.rgb.get(i);
        let stem = depth_path
            .or(rgb_path)
            .and_then(|p| p.file_stem())
            .and_then(|s| s.to_str())
            .unwrap_or("image")
            .to_string();
        match predict_one(
            &net,
            &cfg,
            depth_path.map(|p| p.as_path()),
            rgb_path.map(|p| p.as_path()),
            args.top_k,
            &args.out,
            &stem,
        ) {
            Ok(()) => succeeded += 1,
            Err(e) => eprintln!("error on {stem}: {e}"),
        }
    }
    if succeeded == 0 {
        return Err(CliError::Usage("no image could be processed".into()).into_runtime());
    }
    println!("predicted {succeeded}/{n} image(s) into {}", args.out.display());
    Ok(())
}

impl CliError {
    /// Downgrades a usage-shaped error discovered mid-run to a runtime
    /// failure (exit 1), e.g. every input file failing to load.
    fn into_runtime(self) -> Self {
        match self {
            CliError::Usage(msg) => CliError::Io {
                path: PathBuf::from("."),
                source: std::io::Error::other(msg),
            },
            other => other,
        }
    }
}

fn predict_one(
    net: &Network<f32>,
    cfg: &ResolvedConfig,
    depth: Option<&Path>,
    rgb: Option<&Path>,
    top_k: usize,
    out: &Path,
    stem: &str,
) -> Result<(), CliError> {
    let record = SampleRecord {
        sample_id: stem.to_string(),
        object_id: stem.to_string(),
        rgb_path: rgb.map(|p| p.to_path_buf()),
        depth_path: depth
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|| PathBuf::from("missing-depth")),
        grasp_rects: Vec::new(),
        source: DatasetKind::Cornell,
    };
    let (input, _) = crate::data::assemble_input(&record, &cfg.input)?;
    let mut maps = net.predict_maps(&input)?;
    maps.quality.mapv_inplace(|v| v.clamp(0.0, 1.0));
    let grasps = decode_grasps(&maps, top_k, cfg.decode.smooth_sigma, cfg.encoder.w_max)?;

    viz::save_heatmap(&out.join(format!("{stem}_quality.png")), &maps.quality)?;
    viz::save_angle_heatmap(&out.join(format!("{stem}_angle.png")), &maps)?;
    viz::save_heatmap(&out.join(format!("{stem}_width.png")), &maps.width)?;
    let base = viz::input_to_rgb(&input);
    let mut rects = Vec::new();
    let mut records_text = String::new();
    for g in &grasps {
        let safe = crate::grasp::PlanarGrasp::new(
            g.u(),
            g.v(),
            g.phi(),
            g.width().max(1.0),
            g.quality(),
        )?;
        rects.push(rectangle_from_planar(&safe, cfg.decode.jaw_ratio)?);
        let line = serde_json::json!({
            "u": g.u(),
            "v": g.v(),
            "phi": g.phi(),
            "width": g.width(),
            "quality": g.quality(),
        });
        let _ = writeln!(records_text, "{line}");
    }
    viz::save_overlay(&out.join(format!("{stem}_overlay.png")), &base, &rects)?;
    let rec_path = out.join(format!("{stem}_grasps.jsonl"));
    std::fs::write(&rec_path, records_text).map_err(io_err(&rec_path))?;
    Ok(())
}

fn cmd_encode_viz(args: EncodeVizArgs) -> Result<(), CliError> {
    let mut cfg = ResolvedConfig::load(args.config.as_deref())?;
    if let Some(t) = args.gauss_t {
        cfg.encoder.t_x = t;
        cfg.encoder.t_y = t;
    }
    if let Some(w) = args.w_max {
        cfg.encoder.w_max = w;
    }
    if args.binary {
        cfg.encoder.mode = crate::grasp::EncodeMode::Binary;
    }
    if let Some(size) = args.input_size {
        cfg.input.size = size;
    }
    RunManifest::new("encode-viz", args.seed.unwrap_or(0), &args.out, cfg.clone())
        .write(&args.out)?;
    let report = parse_dataset(args.dataset, &args.data_dir)?;
    let Some(record) = report
        .records
        .iter()
        .find(|r| r.sample_id == args.sample_id)
    else {
        return Err(CliError::Data(DataError::Split(format!(
            "unknown sample id {}",
            args.sample_id
        ))));
    };
    let (input, labels) = crate::data::assemble_input(record, &cfg.input)?;
    let maps = encode_grasp_maps(&labels, &cfg.encoder, (cfg.input.size, cfg.input.size))?;
    let stem = &args.sample_id;
    viz::save_heatmap(&args.out.join(format!("{stem}_quality.png")), &maps.quality)?;
    viz::save_angle_heatmap(&args.out.join(format!("{stem}_angle.png")), &maps)?;
    viz::save_heatmap(&args.out.join(format!("{stem}_width.png")), &maps.width)?;
    viz::save_overlay(
        &args.out.join(format!("{stem}_labels.png")),
        &viz::input_to_rgb(&input),
        &labels,
    )?;
    println!(
        "encoded {} label(s) for {stem} into {}",
        labels.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<(), CliError> {
    let (cfg, report, split, opts) = prepare_run("ablate", &args.common)?;
    let rows = ablation_matrix(cfg.network, &report.records, &split, &opts)?;
    let mut table = String::from("ggr\trfbm\tmdafn\taccuracy\treference\n");
    for r in &rows {
        let _ = writeln!(
            table,
            "{}\t{}\t{}\t{:.4}\t{:.1}",
            r.ggr, r.rfbm, r.mdafn, r.accuracy, r.reference
        );
    }
    let path = args.common.out.join("ablation.tsv");
    std::fs::write(&path, &table).map_err(io_err(&path))?;
    print!("{table}");
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let values: Result<Vec<f64>, _> = args
        .values
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>())
        .collect();
    let values = values.map_err(|e| CliError::Usage(format!("bad --values: {e}")))?;
    if values.is_empty() {
        return Err(CliError::Usage("--values must name at least one scale factor".into()));
    }
    let (cfg, report, split, opts) = prepare_run("sweep", &args.common)?;
    let rows = sweep_scale_factor(cfg.network, &report.records, &split, &opts, &values)?;
    let mut table = String::from("t\taccuracy\treference\n");
    for r in &rows {
        let reference = r
            .reference
            .map(|v| format!("{v:.1}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(table, "{}\t{:.4}\t{}", r.t, r.accuracy, reference);
    }
    let path = args.common.out.join("sweep.tsv");
    std::fs::write(&path, &table).map_err(io_err(&path))?;
    print!("{table}");
    Ok(())
}
