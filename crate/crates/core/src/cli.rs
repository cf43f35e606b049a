//! Command-line surface: `retarget`, `train`, `eval` and `energy-viz`.
//!
//! Every flag can also be given in a TOML file passed with `--config`, one
//! table per command (`[retarget]`, `[train]`, `[eval]`, `[energy-viz]`) with
//! kebab-case keys; flags on the command line win.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical error.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use candle_core::DType;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ade::{self, Axis, RetargetPlan, RetargetSpec};
use crate::error::{Error, Result};
use crate::losses::{Backbone, BackboneConfig};
use crate::media_io::{self, Frame, FrameSequence, DEFAULT_PATTERN};
use crate::metrics::{self, PatchSpec};
use crate::trainer::{Checkpoint, Dataset, FitOptions, Precision, StepMetrics, TrainConfig, Trainer};

/// Name of the completion marker written into finished output directories.
pub const DONE_MARKER: &str = "DONE";
/// Written instead of [`DONE_MARKER`] when training stops on an error.
pub const FAILED_MARKER: &str = "FAILED";

#[derive(Parser, Debug)]
#[command(name = "retvi", version, about = "Content-aware video retargeting")]
pub struct Cli {
    /// TOML file with per-command defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Retarget a frame sequence with a trained checkpoint.
    Retarget(RetargetArgs),
    /// Train on a directory of clips with foreground masks.
    Train(TrainArgs),
    /// Bidirectional patch error and temporal stability.
    Eval(EvalArgs),
    /// Write energy-map heatmaps for every frame.
    #[command(name = "energy-viz")]
    EnergyViz(EnergyVizArgs),
}

fn parse_axis(s: &str) -> std::result::Result<Axis, String> {
    match s {
        "width" => Ok(Axis::Width),
        "height" => Ok(Axis::Height),
        _ => Err(format!("expected width or height, got {s}")),
    }
}

fn parse_precision(s: &str) -> std::result::Result<Precision, String> {
    match s {
        "f32" => Ok(Precision::F32),
        "f64" => Ok(Precision::F64),
        _ => Err(format!("expected f32 or f64, got {s}")),
    }
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct RetargetArgs {
    /// Clip directory (`<dir>/frames/%05d.png` or the frames directory itself).
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Target over source extent along `--axis`.
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub target_width: Option<usize>,
    #[arg(long)]
    pub target_height: Option<usize>,
    /// Axis `--ratio` applies to (width or height).
    #[arg(long, value_parser = parse_axis)]
    pub axis: Option<Axis>,
    /// Deformation multiplier for tall outputs, >= 1.
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, value_parser = parse_precision)]
    pub precision: Option<Precision>,
    /// Replace an existing output directory.
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct TrainArgs {
    /// Directory of clip directories, each with `frames/` and `masks/`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Receives checkpoints, `train.jsonl` and the completion marker.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Starting point: `default`, `toy` (small backbone input) or `tiny` (smoke tests).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub steps_per_epoch: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ratio_min: Option<f64>,
    #[arg(long)]
    pub ratio_max: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Backbone layout: `compact` or `vgg19`.
    #[arg(long)]
    pub backbone: Option<String>,
    /// Safetensors file with backbone weights; generated weights otherwise.
    #[arg(long)]
    pub backbone_weights: Option<PathBuf>,
    #[arg(long)]
    pub backbone_res: Option<usize>,
    #[arg(long)]
    pub disc_res: Option<usize>,
    #[arg(long, value_parser = parse_precision)]
    pub precision: Option<Precision>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Continue from a checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct EvalArgs {
    /// Source sequence.
    #[arg(long)]
    pub src: Option<PathBuf>,
    /// Retargeted sequence, required for the bidirectional error.
    #[arg(long)]
    pub ret: Option<PathBuf>,
    /// `bidir`, `stb` or `all`.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    /// Directory for `report.json`; the report always goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub overwrite: bool,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct EnergyVizArgs {
    #[arg(long = "in")]
    #[serde(rename = "in")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    #[arg(long, value_parser = parse_precision)]
    pub precision: Option<Precision>,
    #[arg(long)]
    pub overwrite: bool,
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Domain(_) | Error::IncompatibleCheckpoint(_) => 2,
        Error::Numerical { .. } | Error::Tensor(_) => 4,
        Error::NotFound(_)
        | Error::DimensionMismatch(_)
        | Error::EmptySequence(_)
        | Error::OutOfRange { .. }
        | Error::Shape(_)
        | Error::EmptyDataset
        | Error::MissingMasks(_)
        | Error::Parse(_)
        | Error::Io(_)
        | Error::Image(_) => 3,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => Some(read_config(path)?),
        None => None,
    };
    let section = |name: &str| file.as_ref().and_then(|t| t.get(name)).cloned();
    match cli.command {
        Command::Retarget(a) => cmd_retarget(merge(&a, section("retarget"))?),
        Command::Train(a) => cmd_train(merge(&a, section("train"))?),
        Command::Eval(a) => cmd_eval(merge(&a, section("eval"))?),
        Command::EnergyViz(a) => cmd_energy_viz(merge(&a, section("energy-viz"))?),
    }
}

fn read_config(path: &Path) -> Result<toml::Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    text.parse::<toml::Table>()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Fills every flag left unset on the command line from the config table.
fn merge<T: Serialize + DeserializeOwned>(cli: &T, file: Option<toml::Value>) -> Result<T> {
    let cfg_err = |e: serde_json::Error| Error::Config(e.to_string());
    let mut merged = serde_json::to_value(cli).map_err(cfg_err)?;
    if let Some(file) = file {
        let file = serde_json::to_value(file).map_err(cfg_err)?;
        let (Some(dst), Some(src)) = (merged.as_object_mut(), file.as_object()) else {
            return Err(Error::Config("config section must be a table".into()));
        };
        for (k, v) in src {
            match dst.get(k) {
                None | Some(serde_json::Value::Null) | Some(serde_json::Value::Bool(false)) => {
                    dst.insert(k.clone(), v.clone());
                }
                Some(_) => {}
            }
        }
    }
    serde_json::from_value(merged).map_err(cfg_err)
}

fn config_hash<T: Serialize>(args: &T) -> String {
    let json = serde_json::to_vec(args).expect("arguments serialize");
    hex::encode(&Sha256::digest(json)[..8])
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| Error::Config(format!("missing --{flag}")))
}

/// Contents of the completion marker.
#[derive(Debug, Serialize, Deserialize)]
pub struct DoneMarker {
    pub command: String,
    pub frames: usize,
    pub config_hash: String,
}

/// Output directory built under a hidden sibling and moved into place by
/// [`Staging::commit`]; dropped uncommitted, it is removed.
struct Staging {
    target: PathBuf,
    tmp: PathBuf,
    committed: bool,
}

impl Staging {
    fn begin(target: &Path, overwrite: bool) -> Result<Self> {
        if target.exists() {
            let occupied = !target.is_dir() || fs::read_dir(target)?.next().is_some();
            if occupied && !overwrite {
                return Err(Error::Config(format!(
                    "{} exists; pass --overwrite to replace it",
                    target.display()
                )));
            }
        }
        let name = target
            .file_name()
            .ok_or_else(|| Error::Config(format!("bad output path {}", target.display())))?
            .to_string_lossy();
        let tmp = target.with_file_name(format!(".{name}.partial"));
        if tmp.exists() {
            fs::remove_dir_all(&tmp)?;
        }
        fs::create_dir_all(&tmp)?;
        Ok(Self {
            target: target.to_path_buf(),
            tmp,
            committed: false,
        })
    }

    fn path(&self) -> &Path {
        &self.tmp
    }

    fn commit(mut self, marker: &DoneMarker) -> Result<()> {
        write_marker(&self.tmp, marker)?;
        if self.target.is_dir() {
            fs::remove_dir_all(&self.target)?;
        } else if self.target.exists() {
            fs::remove_file(&self.target)?;
        }
        fs::rename(&self.tmp, &self.target)?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.tmp);
        }
    }
}

fn write_marker(dir: &Path, marker: &DoneMarker) -> Result<()> {
    let text = serde_json::to_string_pretty(marker).expect("marker serializes");
    fs::write(dir.join(DONE_MARKER), text + "\n")?;
    Ok(())
}

fn load_checkpoint_arg(path: &Path) -> Result<Checkpoint> {
    if !path.is_file() {
        return Err(Error::Config(format!("checkpoint {} not found", path.display())));
    }
    Checkpoint::load(path)
}

fn load_sequence(dir: &Path) -> Result<FrameSequence> {
    if !dir.is_dir() {
        return Err(Error::NotFound(dir.to_path_buf()));
    }
    media_io::load_frame_sequence(media_io::frames_dir(dir), DEFAULT_PATTERN)
}

pub fn cmd_retarget(args: RetargetArgs) -> Result<()> {
    let input = required(&args.input, "in")?;
    let out = required(&args.out, "out")?;
    let ckpt = load_checkpoint_arg(required(&args.ckpt, "ckpt")?)?;
    let theta = args.theta.unwrap_or(1.0);
    let axis = args.axis.unwrap_or_default();
    let dtype = args.precision.unwrap_or_default().dtype();
    let has_target = args.target_width.is_some() || args.target_height.is_some();
    if args.ratio.is_some() == has_target {
        return Err(Error::Config("give exactly one of --ratio or --target-width/--target-height".into()));
    }

    let seq = load_sequence(input)?;
    let source = seq.dims().ok_or_else(|| Error::EmptySequence(input.clone()))?;
    let plan = match args.ratio {
        Some(r) => {
            let spec = RetargetSpec::from_ratio(source, r, axis)?.with_theta(theta)?;
            RetargetPlan {
                spec,
                final_size: spec.target,
            }
        }
        None => {
            let target = (
                args.target_height.unwrap_or(source.0),
                args.target_width.unwrap_or(source.1),
            );
            RetargetPlan::for_target(source, target, theta)?
        }
    };
    let (cfa, _store) = ckpt.cfa(dtype)?;
    let staging = Staging::begin(out, args.overwrite)?;

    let started = Instant::now();
    let results = seq
        .frames()
        .par_iter()
        .map(|f| {
            let t0 = Instant::now();
            let r = ade::retarget_with_plan(f, &plan, &cfa, dtype)?;
            Ok((r, t0.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<(Frame, f64)>>>()?;
    let wall = started.elapsed().as_secs_f64();
    for (i, (_, secs)) in results.iter().enumerate() {
        println!("frame {i:05}  {:.1} ms", secs * 1e3);
    }
    let frames: Vec<Frame> = results.iter().map(|(f, _)| f.clone()).collect();
    media_io::save_frames(&frames, staging.path().join("frames"), DEFAULT_PATTERN)?;
    let busy: f64 = results.iter().map(|(_, s)| s).sum();
    let (h, w) = plan.final_size;
    println!(
        "retargeted {} frames {}x{} -> {}x{} in {:.2} s ({:.1} ms/frame)",
        frames.len(),
        source.1,
        source.0,
        w,
        h,
        wall,
        1e3 * busy / frames.len().max(1) as f64
    );
    staging.commit(&DoneMarker {
        command: "retarget".into(),
        frames: frames.len(),
        config_hash: config_hash(&args),
    })
}

/// Training configuration described by `args` (without `--resume`).
pub fn train_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut c = match args.preset.as_deref().unwrap_or("default") {
        "default" => TrainConfig::default(),
        "toy" => TrainConfig::toy(),
        "tiny" => TrainConfig::tiny(),
        other => return Err(Error::Config(format!("unknown preset {other}"))),
    };
    if let Some(name) = &args.backbone {
        let res = c.backbone.input_resolution;
        c.backbone = match name.as_str() {
            "compact" => BackboneConfig::compact(),
            "vgg19" => BackboneConfig::vgg19(),
            other => return Err(Error::Config(format!("unknown backbone {other}"))),
        }
        .with_resolution(res);
    }
    if let Some(v) = args.epochs {
        c.epochs = v;
    }
    if args.max_steps.is_some() {
        c.max_steps = args.max_steps;
    }
    if args.steps_per_epoch.is_some() {
        c.steps_per_epoch = args.steps_per_epoch;
    }
    if let Some(v) = args.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = args.lr {
        c.optimizer.learning_rate = v;
    }
    if let Some(v) = args.seed {
        c.seed = v;
    }
    if let Some(v) = args.ratio_min {
        c.ratio_range.0 = v;
    }
    if let Some(v) = args.ratio_max {
        c.ratio_range.1 = v;
    }
    if let Some(v) = args.theta {
        c.theta = v;
    }
    if let Some(v) = args.backbone_res {
        c.backbone.input_resolution = v;
    }
    if let Some(v) = args.disc_res {
        c.disc.input_resolution = v;
    }
    if let Some(v) = args.precision {
        c.precision = v;
    }
    c.validate()?;
    Ok(c)
}

pub fn cmd_train(args: TrainArgs) -> Result<()> {
    let data = required(&args.data, "data")?;
    let out = required(&args.out, "out")?.clone();
    fs::create_dir_all(&out)?;
    for marker in [DONE_MARKER, FAILED_MARKER] {
        let p = out.join(marker);
        if p.exists() {
            fs::remove_file(p)?;
        }
    }
    let result = train_into(&args, data, &out);
    if let Err(e) = &result {
        let _ = fs::write(out.join(FAILED_MARKER), format!("{e}\n"));
    }
    result
}

fn train_into(args: &TrainArgs, data: &Path, out: &Path) -> Result<()> {
    let dataset = Dataset::load(data)?;
    let backbone_for = |cfg: &TrainConfig| -> Result<Backbone> {
        match &args.backbone_weights {
            Some(p) => Backbone::from_safetensors(p, cfg.backbone.clone(), cfg.precision.dtype()),
            None => Backbone::resolve(cfg.backbone.clone(), cfg.precision.dtype()),
        }
    };
    let mut trainer = match &args.resume {
        Some(path) => {
            let mut ckpt = load_checkpoint_arg(path)?;
            if let Some(v) = args.epochs {
                ckpt.config.epochs = v;
            }
            if args.max_steps.is_some() {
                ckpt.config.max_steps = args.max_steps;
            }
            let bb = backbone_for(&ckpt.config)?;
            let (tr, warnings) = Trainer::from_checkpoint(&ckpt, Some(bb))?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            tr
        }
        None => {
            let config = train_config(args)?;
            let bb = backbone_for(&config)?;
            Trainer::with_backbone(config, bb)?
        }
    };
    let total = trainer.total_steps(&dataset);
    println!(
        "training on {} clips ({} triplets): {} steps, backbone {} {}",
        dataset.clips().len(),
        dataset.num_triplets(),
        total,
        trainer.backbone().identity().name,
        &trainer.backbone().identity().checksum[..12]
    );
    let log_file = fs::OpenOptions::new()
        .create(true)
        .append(args.resume.is_some())
        .write(true)
        .truncate(args.resume.is_none())
        .open(out.join("train.jsonl"))?;
    let mut log = BufWriter::new(log_file);
    let started = Instant::now();
    let mut progress = |m: &StepMetrics| {
        if m.step.is_multiple_of(10) || m.step + 1 == total {
            println!(
                "step {:5}/{total}  epoch {:3}  total {:.4}  objective {:.4}  {:.0}s",
                m.step,
                m.epoch,
                m.total,
                m.objective,
                started.elapsed().as_secs_f64()
            );
        }
    };
    let summary = trainer.fit(
        &dataset,
        FitOptions {
            log: Some(&mut log),
            checkpoint_dir: Some(out.to_path_buf()),
            checkpoint_every: args.checkpoint_every.unwrap_or(0),
            stop_at: None,
            on_step: Some(&mut progress),
        },
    )?;
    log.flush()?;
    println!("{}", serde_json::to_string(&summary).expect("summary serializes"));
    write_marker(
        out,
        &DoneMarker {
            command: "train".into(),
            frames: summary.steps,
            config_hash: trainer.config().fingerprint(),
        },
    )
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub patch: PatchSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bidirectional: Option<metrics::BidirReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability_source: Option<metrics::StabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability_retargeted: Option<metrics::StabilityReport>,
}

pub fn cmd_eval(args: EvalArgs) -> Result<()> {
    let src = load_sequence(required(&args.src, "src")?)?;
    let ret = args.ret.as_deref().map(load_sequence).transpose()?;
    let which = args.metric.as_deref().unwrap_or("all");
    let (bidir, stb) = match which {
        "all" => (true, true),
        "bidir" => (true, false),
        "stb" => (false, true),
        other => return Err(Error::Config(format!("unknown metric {other}"))),
    };
    let defaults = PatchSpec::default();
    let patch = PatchSpec::new(args.patch.unwrap_or(defaults.patch_size), args.stride.unwrap_or(defaults.stride))
        .map_err(|e| Error::Config(e.to_string()))?;
    let staging = args.out.as_deref().map(|o| Staging::begin(o, args.overwrite)).transpose()?;

    let bidirectional = match (&ret, bidir) {
        (Some(ret), true) => Some(metrics::mean_error(&src, ret, &patch)?),
        (None, true) if which == "bidir" => {
            return Err(Error::Config("--metric bidir needs --ret".into()));
        }
        _ => None,
    };
    let stability_source = stb.then(|| metrics::stability(&src)).transpose()?;
    let stability_retargeted = match (&ret, stb) {
        (Some(ret), true) => Some(metrics::stability(ret)?),
        _ => None,
    };
    let report = EvalReport {
        patch,
        bidirectional,
        stability_source,
        stability_retargeted,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{text}");
    if let Some(staging) = staging {
        fs::write(staging.path().join("report.json"), text + "\n")?;
        staging.commit(&DoneMarker {
            command: "eval".into(),
            frames: src.len(),
            config_hash: config_hash(&args),
        })?;
    }
    Ok(())
}

pub fn cmd_energy_viz(args: EnergyVizArgs) -> Result<()> {
    let input = required(&args.input, "in")?;
    let out = required(&args.out, "out")?;
    let ckpt = load_checkpoint_arg(required(&args.ckpt, "ckpt")?)?;
    let dtype: DType = args.precision.unwrap_or_default().dtype();
    let seq = load_sequence(input)?;
    let (cfa, _store) = ckpt.cfa(dtype)?;
    let staging = Staging::begin(out, args.overwrite)?;
    let maps = seq
        .frames()
        .par_iter()
        .map(|f| ade::energy_map(f, &cfa, dtype)?.heatmaps())
        .collect::<Result<Vec<_>>>()?;
    for (k, name) in ["x", "y", "magnitude"].iter().enumerate() {
        let frames: Vec<Frame> = maps.iter().map(|m| m[k].clone()).collect();
        media_io::save_frames(&frames, staging.path().join(name), DEFAULT_PATTERN)?;
    }
    println!("wrote energy heatmaps for {} frames", maps.len());
    staging.commit(&DoneMarker {
        command: "energy-viz".into(),
        frames: maps.len(),
        config_hash: config_hash(&args),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let cli = RetargetArgs {
            ratio: Some(0.5),
            ..Default::default()
        };
        let file: toml::Value = toml::from_str("ratio = 0.8\ntheta = 1.5\naxis = \"height\"\noverwrite = true").unwrap();
        let merged = merge(&cli, Some(file)).unwrap();
        assert_eq!(merged.ratio, Some(0.5));
        assert_eq!(merged.theta, Some(1.5));
        assert_eq!(merged.axis, Some(Axis::Height));
        assert!(merged.overwrite);
        let bad: toml::Value = toml::from_str("ratoi = 0.8").unwrap();
        assert!(matches!(merge(&cli, Some(bad)), Err(Error::Config(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::EmptyDataset), 3);
        assert_eq!(exit_code(&Error::numerical("cfa", "nan")), 4);
    }

    #[test]
    fn train_presets() {
        let args = TrainArgs {
            preset: Some("toy".into()),
            epochs: Some(0),
            backbone_res: Some(64),
            ..Default::default()
        };
        let c = train_config(&args).unwrap();
        assert_eq!(c.epochs, 0);
        assert_eq!(c.backbone.input_resolution, 64);
        assert!(train_config(&TrainArgs {
            preset: Some("huge".into()),
            ..Default::default()
        })
        .is_err());
    }
}
