//! Unsupervised training: triplet sampling, ratio randomization, alternating
//! discriminator / generator updates and checkpointing.

pub mod adam;
pub mod checkpoint;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use candle_core::{DType, Device, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ade::{self, Axis, ResizeMode, RetargetSpec};
use crate::cfa::{Cfa, CfaConfig};
use crate::error::{Error, Result};
use crate::losses::{self, Backbone, BackboneConfig, FidDisc, FidDiscConfig, LossParts, LossWeights};
use crate::media_io::{self, Clip, Frame};
use crate::nn::{self, Align, Mode, ParamStore};

pub use adam::{Adam, AdamConfig};
pub use checkpoint::Checkpoint;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn dtype(self) -> DType {
        match self {
            Precision::F32 => DType::F32,
            Precision::F64 => DType::F64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Triplets per step.
    pub batch_size: usize,
    pub epochs: usize,
    /// Defaults to the number of available triplets divided by the batch size.
    pub steps_per_epoch: Option<usize>,
    /// Hard cap on the total number of steps.
    pub max_steps: Option<usize>,
    pub optimizer: AdamConfig,
    pub ratio_range: (f64, f64),
    pub theta: f64,
    pub axis: Axis,
    pub seed: u64,
    pub precision: Precision,
    pub cfa: CfaConfig,
    pub backbone: BackboneConfig,
    pub disc: FidDiscConfig,
    pub weights: LossWeights,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 2,
            epochs: 150,
            steps_per_epoch: None,
            max_steps: None,
            optimizer: AdamConfig::default(),
            ratio_range: (0.25, 1.25),
            theta: 1.0,
            axis: Axis::Width,
            seed: 0,
            precision: Precision::F32,
            cfa: CfaConfig::default(),
            backbone: BackboneConfig::default(),
            disc: FidDiscConfig::default(),
            weights: LossWeights::default(),
        }
    }
}

impl TrainConfig {
    /// Settings for the 300-step desk run on small synthetic clips: the
    /// backbone and discriminator see 112x112 inputs.
    pub fn toy() -> Self {
        Self {
            max_steps: Some(300),
            backbone: BackboneConfig::compact().with_resolution(112),
            disc: FidDiscConfig {
                input_resolution: 112,
                ..FidDiscConfig::default()
            },
            ..Self::default()
        }
    }

    /// Very small networks for unit tests.
    pub fn tiny() -> Self {
        Self {
            epochs: 1,
            cfa: CfaConfig::tiny(),
            backbone: BackboneConfig::compact().with_resolution(32),
            disc: FidDiscConfig {
                input_resolution: 32,
                channels: [4, 4, 8, 8, 8, 8],
                hidden: 8,
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        let (lo, hi) = self.ratio_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Config(format!("invalid ratio range [{lo}, {hi}]")));
        }
        if !(self.theta >= 1.0) {
            return Err(Error::Config(format!("theta must be >= 1, got {}", self.theta)));
        }
        if self.steps_per_epoch == Some(0) {
            return Err(Error::Config("steps_per_epoch must be at least 1".into()));
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && (0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2) && o.eps > 0.0) {
            return Err(Error::Config(format!("invalid optimizer settings {o:?}")));
        }
        self.weights.validate()?;
        self.cfa.validate()
    }

    /// Stable hash of the serialized configuration.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(json)[..8])
    }
}

/// Draws `r` uniformly from `range` (inclusive) and the matching resize mode.
pub fn sample_ratio(rng: &mut impl Rng, range: (f64, f64)) -> (f64, ResizeMode) {
    let (lo, hi) = range;
    let r = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    (r, ResizeMode::for_ratio(r))
}

/// Clips with foreground masks, each at least three frames long.
#[derive(Clone, Debug)]
pub struct Dataset {
    clips: Vec<Clip>,
}

impl Dataset {
    pub fn new(clips: Vec<Clip>) -> Result<Self> {
        let mut usable = Vec::with_capacity(clips.len());
        for clip in clips {
            if clip.masks.is_none() {
                return Err(Error::MissingMasks(clip.name));
            }
            if clip.frames.len() >= 3 {
                usable.push(clip);
            } else {
                log::warn!("skipping clip {} with {} frames", clip.name, clip.frames.len());
            }
        }
        if usable.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self { clips: usable })
    }

    /// Loads every clip directory below `root`; `root` itself may be a clip.
    pub fn load(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref();
        if !root.is_dir() {
            return Err(Error::NotFound(root.to_path_buf()));
        }
        if root.join("frames").is_dir() {
            return Self::new(vec![media_io::load_clip(root)?]);
        }
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("frames").is_dir())
            .collect();
        dirs.sort();
        let clips = dirs.iter().map(media_io::load_clip).collect::<Result<Vec<_>>>()?;
        Self::new(clips)
    }

    pub fn clips(&self) -> &[Clip] {
        &self.clips
    }

    pub fn num_triplets(&self) -> usize {
        self.clips.iter().map(|c| c.frames.len() - 2).sum()
    }

    /// Originals and foregrounds of frames `t-1, t, t+1` of clip `clip`.
    pub fn triplet(&self, clip: usize, t: usize) -> Result<TrainTriplet> {
        let c = self.clips.get(clip).ok_or_else(|| Error::OutOfRange {
            index: clip,
            detail: format!("dataset has {} clips", self.clips.len()),
        })?;
        media_io::sample_triplet(&c.frames, t)?;
        let pairs = [c.pair(t - 1)?, c.pair(t)?, c.pair(t + 1)?];
        Ok(TrainTriplet {
            originals: pairs.clone().map(|p| p.original),
            foregrounds: pairs.map(|p| p.foreground),
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrainTriplet {
    pub originals: [Frame; 3],
    pub foregrounds: [Frame; 3],
}

/// One batch element: a triplet and the ratio its three frames are resized by.
#[derive(Clone, Debug)]
pub struct BatchItem {
    pub triplet: TrainTriplet,
    pub ratio: f64,
}

/// Per-step record written to the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: usize,
    pub epoch: usize,
    pub ratios: Vec<f64>,
    pub critical: f64,
    pub global: f64,
    pub temporal: f64,
    /// Discriminator objective, evaluated before its update.
    pub fidelity: f64,
    /// Adversarial term the generator minimizes in place of `fidelity`.
    pub g_term: f64,
    /// Weighted sum of the four losses.
    pub total: f64,
    /// Weighted generator objective (`g_term` in the fidelity slot).
    pub objective: f64,
}

/// 10-step moving averages of a logged quantity at the start and the end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    pub initial_avg: f64,
    pub final_avg: f64,
    /// `1 - final / initial`.
    pub reduction: f64,
}

impl Trend {
    pub fn of(values: &[f64]) -> Option<Self> {
        let w = SUMMARY_WINDOW.min(values.len());
        if w == 0 {
            return None;
        }
        let avg = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let (initial_avg, final_avg) = (avg(&values[..w]), avg(&values[values.len() - w..]));
        Some(Self {
            initial_avg,
            final_avg,
            reduction: 1.0 - final_avg / initial_avg,
        })
    }
}

/// Final record of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub steps: usize,
    pub total: Option<Trend>,
    pub objective: Option<Trend>,
}

pub const SUMMARY_WINDOW: usize = 10;

impl FitSummary {
    pub fn from_metrics(metrics: &[StepMetrics]) -> Self {
        let pick = |f: fn(&StepMetrics) -> f64| metrics.iter().map(f).collect::<Vec<_>>();
        Self {
            steps: metrics.len(),
            total: Trend::of(&pick(|m| m.total)),
            objective: Trend::of(&pick(|m| m.objective)),
        }
    }
}

/// Hooks and outputs of a [`Trainer::fit`] run.
#[derive(Default)]
pub struct FitOptions<'a> {
    /// JSON-lines sink: one record per step and a final summary record.
    pub log: Option<&'a mut dyn Write>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Save every this many steps (0: only at the end).
    pub checkpoint_every: usize,
    /// Stop once this many steps have run in total, leaving the rest of the
    /// schedule for a later resume.
    pub stop_at: Option<usize>,
    pub on_step: Option<&'a mut dyn FnMut(&StepMetrics)>,
}

#[derive(Serialize)]
struct SummaryRecord<'a> {
    summary: &'a FitSummary,
}

struct Forward {
    ve: Tensor,
    re: Tensor,
    vo: Tensor,
    ro: Tensor,
    vo_disc: Tensor,
    ro_disc: Tensor,
}

/// Complete optimization state: both networks, both optimizers, the frozen
/// backbone and the step counter.
pub struct Trainer {
    config: TrainConfig,
    dtype: DType,
    cfa: Cfa,
    cfa_store: ParamStore,
    disc: FidDisc,
    disc_store: ParamStore,
    backbone: Backbone,
    gen_opt: Adam,
    disc_opt: Adam,
    step: usize,
    epoch: usize,
}

const STEP_STREAM_KEY: u64 = 0x9e37_79b9_7f4a_7c15;

impl Trainer {
    /// Fresh state; backbone weights come from [`Backbone::resolve`].
    pub fn new(config: TrainConfig) -> Result<Self> {
        let backbone = Backbone::resolve(config.backbone.clone(), config.precision.dtype())?;
        Self::with_backbone(config, backbone)
    }

    pub fn with_backbone(config: TrainConfig, backbone: Backbone) -> Result<Self> {
        config.validate()?;
        let dtype = config.precision.dtype();
        let (cfa, cfa_store) = Cfa::seeded(config.cfa.clone(), dtype, config.seed)?;
        let (disc, disc_store) = FidDisc::seeded(config.disc.clone(), dtype, config.seed.wrapping_add(1))?;
        Ok(Self {
            gen_opt: Adam::new(config.optimizer),
            disc_opt: Adam::new(config.optimizer),
            config,
            dtype,
            cfa,
            cfa_store,
            disc,
            disc_store,
            backbone,
            step: 0,
            epoch: 0,
        })
    }

    /// Restores a run. Returns warnings, e.g. a backbone that differs from the
    /// one recorded in the checkpoint.
    pub fn from_checkpoint(ckpt: &Checkpoint, backbone: Option<Backbone>) -> Result<(Self, Vec<String>)> {
        let backbone = match backbone {
            Some(b) => b,
            None => Backbone::resolve(ckpt.config.backbone.clone(), ckpt.config.precision.dtype())?,
        };
        let warnings: Vec<String> = ckpt.backbone_warning(backbone.identity()).into_iter().collect();
        for w in &warnings {
            log::warn!("{w}");
        }
        let mut tr = Self::with_backbone(ckpt.config.clone(), backbone)?;
        tr.cfa_store.load(&ckpt.tensors)?;
        tr.disc_store.load(&ckpt.tensors)?;
        let steps = |k: &str| ckpt.optimizer_steps.get(k).copied().unwrap_or(0);
        let to_dtype = |m: BTreeMap<String, Tensor>| -> Result<BTreeMap<String, Tensor>> {
            m.into_iter().map(|(k, t)| Ok((k, t.to_dtype(tr.dtype)?))).collect()
        };
        let state = to_dtype(ckpt.tensors.clone())?;
        tr.gen_opt.load_state("adam.gen", steps("gen"), &state)?;
        tr.disc_opt.load_state("adam.disc", steps("disc"), &state)?;
        tr.step = ckpt.step;
        tr.epoch = ckpt.epoch;
        Ok((tr, warnings))
    }

    pub fn checkpoint(&self) -> Result<Checkpoint> {
        let mut tensors = self.cfa_store.snapshot();
        tensors.extend(self.disc_store.snapshot());
        tensors.extend(self.gen_opt.state("adam.gen"));
        tensors.extend(self.disc_opt.state("adam.disc"));
        Ok(Checkpoint {
            config: self.config.clone(),
            epoch: self.epoch,
            step: self.step,
            backbone: self.backbone.identity().clone(),
            optimizer_steps: [("gen".to_string(), self.gen_opt.steps()), ("disc".to_string(), self.disc_opt.steps())]
                .into_iter()
                .collect(),
            tensors,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn cfa(&self) -> &Cfa {
        &self.cfa
    }

    pub fn cfa_store(&self) -> &ParamStore {
        &self.cfa_store
    }

    pub fn disc_store(&self) -> &ParamStore {
        &self.disc_store
    }

    pub fn backbone(&self) -> &Backbone {
        &self.backbone
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn steps_per_epoch(&self, dataset: &Dataset) -> usize {
        self.config
            .steps_per_epoch
            .unwrap_or_else(|| dataset.num_triplets().div_ceil(self.config.batch_size))
            .max(1)
    }

    /// Total number of steps the schedule asks for.
    pub fn total_steps(&self, dataset: &Dataset) -> usize {
        let scheduled = self.config.epochs * self.steps_per_epoch(dataset);
        self.config.max_steps.map_or(scheduled, |m| m.min(scheduled))
    }

    /// RNG for step `step`; depends only on the seed and the step index, so a
    /// resumed run draws the same batches as an uninterrupted one.
    pub fn step_rng(&self, step: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ STEP_STREAM_KEY);
        rng.set_stream(step as u64);
        rng
    }

    /// Uniform random clip, uniform random centre frame, one ratio per triplet.
    pub fn sample_batch(&self, dataset: &Dataset, rng: &mut ChaCha8Rng) -> Result<Vec<BatchItem>> {
        (0..self.config.batch_size)
            .map(|_| {
                let clip = rng.random_range(0..dataset.clips().len());
                let n = dataset.clips()[clip].frames.len();
                let t = rng.random_range(1..=n - 2);
                let (ratio, _) = sample_ratio(rng, self.config.ratio_range);
                Ok(BatchItem {
                    triplet: dataset.triplet(clip, t)?,
                    ratio,
                })
            })
            .collect()
    }

    fn to_backbone(&self, x: &Tensor) -> Result<Tensor> {
        let r = self.backbone.config().input_resolution;
        nn::resize_bilinear(x, (r, r), Align::HalfPixel)
    }

    fn to_disc(&self, x: &Tensor) -> Result<Tensor> {
        let r = self.disc.config().input_resolution;
        nn::resize_bilinear(x, (r, r), Align::HalfPixel)
    }

    /// One CFA pass over the whole batch, then per-triplet warping and cropping.
    /// Every output is laid out triplet-major: row `3 b + k` is frame `k` of
    /// triplet `b`.
    fn forward(&self, batch: &[BatchItem]) -> Result<Forward> {
        if batch.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut originals = Vec::with_capacity(batch.len());
        let mut foregrounds = Vec::with_capacity(batch.len());
        let mut cfa_in = Vec::with_capacity(batch.len());
        for item in batch {
            let o: Vec<&Frame> = item.triplet.originals.iter().collect();
            let f: Vec<&Frame> = item.triplet.foregrounds.iter().collect();
            for fr in &o {
                fr.check_pipeline_size()?;
            }
            let vo = Frame::stack(&o, self.dtype)?;
            cfa_in.push(self.cfa.prepare_input(&vo)?);
            originals.push(vo);
            foregrounds.push(Frame::stack(&f, self.dtype)?);
        }
        let d1 = self.cfa.forward(&Tensor::cat(&cfa_in, 0)?, Mode::Train)?;
        nn::ensure_finite(&d1, "cfa")?;
        let q = ade::grid_activation(&d1)?;

        let (mut ve, mut re, mut vo_bb, mut ro_bb, mut vo_d, mut ro_d) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (b, item) in batch.iter().enumerate() {
            let vo = &originals[b];
            let (_, _, h, w) = vo.dims4()?;
            let spec = RetargetSpec::from_ratio((h, w), item.ratio, self.config.axis)?.with_theta(self.config.theta)?;
            let e = ade::upsample_energy(&q.narrow(0, 3 * b, 3)?, (h, w))?;
            let field = ade::build_deformation(&e, spec.flow_scale()?, spec.theta)?;
            let warped = ade::deform_and_sample(vo, &field)?;
            let warped_fg = ade::deform_and_sample(&foregrounds[b], &field)?;
            let ro = ade::assemble_output(&warped, &spec)?;
            ve.push(self.to_backbone(&foregrounds[b])?);
            re.push(self.to_backbone(&warped_fg)?);
            vo_bb.push(self.to_backbone(vo)?);
            ro_bb.push(self.to_backbone(&ro)?);
            vo_d.push(self.to_disc(vo)?);
            ro_d.push(self.to_disc(&ro)?);
        }
        Ok(Forward {
            ve: Tensor::cat(&ve, 0)?,
            re: Tensor::cat(&re, 0)?,
            vo: Tensor::cat(&vo_bb, 0)?,
            ro: Tensor::cat(&ro_bb, 0)?,
            vo_disc: Tensor::cat(&vo_d, 0)?,
            ro_disc: Tensor::cat(&ro_d, 0)?,
        })
    }

    /// Frames `k` of every triplet, `(B, C, H, W)`, from triplet-major rows.
    fn position(t: &Tensor, k: usize, batch: usize) -> Result<Tensor> {
        let idx: Vec<u32> = (0..batch).map(|b| (3 * b + k) as u32).collect();
        Ok(t.contiguous()?.index_select(&Tensor::new(idx.as_slice(), &Device::Cpu)?, 0)?)
    }

    fn generator_parts(&self, f: &Forward, batch: usize) -> Result<LossParts<Tensor>> {
        let critical = losses::critical_region_from_features(&self.backbone.features(&f.ve)?, &self.backbone.features(&f.re)?)?;
        let src = self.backbone.forward(&f.vo)?;
        let ret = self.backbone.forward(&f.ro)?;
        let global = losses::global_integrity_from_logits(&src.logits, &ret.logits)?;
        let split = |feats: &[Tensor]| -> Result<[Vec<Tensor>; 3]> {
            let per = |k| feats.iter().map(|l| Self::position(l, k, batch)).collect::<Result<Vec<_>>>();
            Ok([per(0)?, per(1)?, per(2)?])
        };
        let [s0, s1, s2] = split(&src.features)?;
        let [r0, r1, r2] = split(&ret.features)?;
        let temporal = losses::temporal_from_features([&s0, &s1, &s2], [&r0, &r1, &r2])?;
        let fidelity = losses::bce(&self.disc.forward(&f.ro_disc, Mode::Train)?, 1.0)?;
        let parts = LossParts {
            critical,
            global,
            temporal,
            fidelity,
        };
        parts.ensure_finite()?;
        Ok(parts)
    }

    fn disc_update(&mut self, f: &Forward) -> Result<f64> {
        let real = self.disc.forward(&f.vo_disc, Mode::Train)?;
        let fake = self.disc.forward(&f.ro_disc.detach(), Mode::Train)?;
        let d_loss = losses::fidelity_from_scores(&real, &fake)?.d_loss;
        nn::ensure_finite(&d_loss, "fid-disc")?;
        let grads = d_loss.backward()?;
        self.disc_opt.step(&self.disc_store, &grads)?;
        nn::scalar(&d_loss)
    }

    /// Generator objective for `batch` without updating anything except
    /// normalization statistics. Used for finite-difference probes.
    pub fn generator_objective(&self, batch: &[BatchItem]) -> Result<Tensor> {
        let f = self.forward(batch)?;
        let parts = self.generator_parts(&f, batch.len())?;
        losses::total_loss(&parts, &self.config.weights)
    }

    /// One discriminator update on the detached retargeted frames, then one
    /// generator update on the weighted loss with the adversarial term.
    pub fn train_step(&mut self, batch: &[BatchItem]) -> Result<StepMetrics> {
        let f = self.forward(batch)?;
        let d_loss = self.disc_update(&f)?;
        let parts = self.generator_parts(&f, batch.len())?;
        let objective = losses::total_loss(&parts, &self.config.weights)?;
        nn::ensure_finite(&objective, "total")?;
        let grads = objective.backward()?;
        self.gen_opt.step(&self.cfa_store, &grads)?;
        let values = parts.values()?;
        let with_fidelity = LossParts {
            fidelity: d_loss,
            ..values
        };
        let metrics = StepMetrics {
            step: self.step,
            epoch: self.epoch,
            ratios: batch.iter().map(|b| b.ratio).collect(),
            critical: values.critical,
            global: values.global,
            temporal: values.temporal,
            fidelity: d_loss,
            g_term: values.fidelity,
            total: with_fidelity.weighted(&self.config.weights),
            objective: nn::scalar(&objective)?,
        };
        self.step += 1;
        Ok(metrics)
    }

    /// Runs the remaining schedule.
    pub fn fit(&mut self, dataset: &Dataset, mut opts: FitOptions<'_>) -> Result<FitSummary> {
        let total = self.total_steps(dataset);
        let end = opts.stop_at.map_or(total, |s| s.min(total));
        let per_epoch = self.steps_per_epoch(dataset);
        let mut seen = Vec::new();
        while self.step < end {
            self.epoch = self.step / per_epoch;
            let mut rng = self.step_rng(self.step);
            let batch = self.sample_batch(dataset, &mut rng)?;
            let m = self.train_step(&batch)?;
            log::debug!("step {} total {:.5}", m.step, m.total);
            if let Some(w) = opts.log.as_mut() {
                serde_json::to_writer(&mut **w, &m).map_err(|e| Error::Io(e.into()))?;
                w.write_all(b"\n")?;
            }
            if let Some(cb) = opts.on_step.as_mut() {
                cb(&m);
            }
            seen.push(m);
            if let Some(dir) = &opts.checkpoint_dir {
                if opts.checkpoint_every > 0 && self.step.is_multiple_of(opts.checkpoint_every) {
                    self.checkpoint()?.save(dir.join(format!("step-{:06}.ckpt", self.step)))?;
                }
            }
        }
        self.epoch = self.step / per_epoch;
        if let Some(dir) = &opts.checkpoint_dir {
            self.checkpoint()?.save(dir.join("last.ckpt"))?;
        }
        let summary = FitSummary::from_metrics(&seen);
        if let Some(w) = opts.log.as_mut() {
            serde_json::to_writer(&mut **w, &SummaryRecord { summary: &summary }).map_err(|e| Error::Io(e.into()))?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        Ok(summary)
    }
}

/// Trains from scratch with default options and returns the final state.
pub fn fit(config: TrainConfig, dataset: &Dataset) -> Result<Checkpoint> {
    let mut trainer = Trainer::new(config)?;
    trainer.fit(dataset, FitOptions::default())?;
    trainer.checkpoint()
}
