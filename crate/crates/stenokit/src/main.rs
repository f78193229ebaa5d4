//! Thin command-line front end; all behavior lives in `stenokit::cli`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use stenokit::cli::{
    cmd_evaluate, cmd_loss_check, cmd_postprocess, cmd_sweep, cmd_synth, RunConfig,
};
use stenokit::IouKind;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum IouKindArg {
    Box,
    Mask,
}

impl From<IouKindArg> for IouKind {
    fn from(v: IouKindArg) -> Self {
        match v {
            IouKindArg::Box => IouKind::Box,
            IouKindArg::Mask => IouKind::Mask,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "stenokit",
    version,
    about = "Post-process and score stenosis detections (COCO-format ground truth)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file (.toml or .json); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// COCO ground-truth JSON.
    #[arg(long, global = true)]
    gt: Option<PathBuf>,

    /// Detections JSON (canonical object or bare COCO-results array).
    #[arg(long, global = true)]
    dt: Option<PathBuf>,

    /// Output file (or directory for `synth`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Detection-stage NMS IoU threshold.
    #[arg(long, global = true)]
    nms_iou: Option<f64>,

    /// Minimum confidence kept.
    #[arg(long = "score-thr", global = true)]
    score_thr: Option<f64>,

    /// Per-image detection cap.
    #[arg(long = "max-dets", global = true)]
    max_dets: Option<usize>,

    /// Matching IoU threshold for F1.
    #[arg(long = "match-iou", global = true)]
    match_iou: Option<f64>,

    /// Overlap measure for F1 matching.
    #[arg(long = "iou-kind", global = true, value_enum)]
    iou_kind: Option<IouKindArg>,

    /// Overlap measure for pipeline NMS.
    #[arg(long = "nms-kind", global = true, value_enum)]
    nms_kind: Option<IouKindArg>,

    /// Fail `evaluate` unless seg-mAP can be computed.
    #[arg(long = "seg-map", global = true)]
    seg_map: bool,

    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Generator seed for `synth`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Number of images for `synth`.
    #[arg(long = "num-images", global = true)]
    num_images: Option<usize>,

    /// Log filter (error, warn, info, debug, trace).
    #[arg(long = "log-level", global = true)]
    log_level: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the post-processing chain (confidence filter, NMS, cap) per image.
    Postprocess,
    /// Match detections to ground truth and report precision/recall/F1 (and seg-mAP).
    Evaluate,
    /// Sweep the NMS IoU threshold over a grid and write (threshold, F1) CSV rows.
    Sweep,
    /// Generate a deterministic synthetic ground-truth/detections fixture pair.
    Synth,
    /// Evaluate the multi-task loss on a serialized RoI batch.
    LossCheck {
        /// JSON file with loss gains and RoI samples.
        #[arg(long)]
        input: PathBuf,
    },
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, stenokit::Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &cli.gt {
        cfg.gt = Some(p.clone());
    }
    if let Some(p) = &cli.dt {
        cfg.dt = Some(p.clone());
    }
    if let Some(p) = &cli.out {
        cfg.out = Some(p.clone());
    }
    if let Some(v) = cli.nms_iou {
        cfg.postprocess.nms_iou = v;
    }
    if let Some(v) = cli.score_thr {
        cfg.postprocess.score_threshold = v;
    }
    if let Some(v) = cli.max_dets {
        cfg.postprocess.max_detections = v;
    }
    if let Some(v) = cli.match_iou {
        cfg.matching.iou_threshold = v;
    }
    if let Some(v) = cli.iou_kind {
        cfg.matching.iou_kind = v.into();
    }
    if let Some(v) = cli.nms_kind {
        cfg.nms_kind = v.into();
    }
    if cli.seg_map {
        cfg.require_seg_map = true;
    }
    if let Some(v) = cli.threads {
        cfg.threads = v;
    }
    if let Some(v) = cli.seed {
        cfg.synth.seed = v;
    }
    if let Some(v) = cli.num_images {
        cfg.synth.num_images = v;
    }
    if let Some(v) = &cli.log_level {
        cfg.log_level = v.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), stenokit::Error> {
    let cfg = resolve_config(cli)?;
    env_logger::Builder::new()
        .parse_filters(&cfg.log_level)
        .try_init()
        .ok();
    match &cli.command {
        Command::Postprocess => cmd_postprocess(&cfg).map(|_| ()),
        Command::Evaluate => cmd_evaluate(&cfg).map(|_| ()),
        Command::Sweep => cmd_sweep(&cfg).map(|_| ()),
        Command::Synth => cmd_synth(&cfg).map(|_| ()),
        Command::LossCheck { input } => cmd_loss_check(input).map(|_| ()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
