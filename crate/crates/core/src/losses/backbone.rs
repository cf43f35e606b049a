//! Frozen VGG-style feature extractor with a 1000-way classification head.
//!
//! The four feature maps used by the perceptual losses are the outputs of the
//! first four pooling stages. Weights are either loaded from a safetensors file
//! (e.g. converted pretrained weights) or generated deterministically from a
//! seed; in both cases they never receive gradients.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use candle_core::{DType, Device, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{self, Align, Builder, ParamStore};

/// Environment variable naming the backbone weight cache directory.
pub const CACHE_ENV: &str = "RETVI_CACHE";

/// Number of feature layers consumed by the losses.
pub const FEATURE_LAYERS: usize = 4;

const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub name: String,
    pub stage_widths: [usize; 5],
    /// 3x3 convolutions per stage; `[2, 2, 4, 4, 4]` is the 19-layer layout.
    pub stage_convs: [usize; 5],
    /// Inputs are resized to this square size.
    pub input_resolution: usize,
    pub num_classes: usize,
    /// Seed for generated weights; ignored when weights are loaded.
    pub seed: u64,
}

impl BackboneConfig {
    /// Full-width 19-layer layout at 224x224.
    pub fn vgg19() -> Self {
        Self {
            name: "vgg19".into(),
            stage_widths: [64, 128, 256, 512, 512],
            stage_convs: [2, 2, 4, 4, 4],
            input_resolution: 224,
            num_classes: 1000,
            seed: 0,
        }
    }

    /// Same depth and head with narrow stages; the default for CPU training.
    pub fn compact() -> Self {
        Self {
            name: "vgg19-compact".into(),
            stage_widths: [8, 16, 32, 64, 64],
            ..Self::vgg19()
        }
    }

    pub fn with_resolution(mut self, input_resolution: usize) -> Self {
        self.input_resolution = input_resolution;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.input_resolution < 32 {
            return Err(Error::Config(format!(
                "backbone input must be at least 32x32 for five pooling stages, got {}",
                self.input_resolution
            )));
        }
        if self.stage_widths.iter().chain(&self.stage_convs).any(|&v| v == 0) || self.num_classes == 0 {
            return Err(Error::Config("backbone widths and depths must be positive".into()));
        }
        Ok(())
    }

    fn cache_file(&self) -> String {
        format!("{}-{}x{}-seed{}.safetensors", self.name, self.input_resolution, self.input_resolution, self.seed)
    }
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self::compact()
    }
}

/// Name and checksum of a concrete set of backbone weights.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneIdentity {
    pub name: String,
    pub checksum: String,
}

/// Per-layer feature maps and class logits for a batch.
#[derive(Clone, Debug)]
pub struct BackboneOutput {
    pub features: Vec<Tensor>,
    /// `(N, num_classes)`.
    pub logits: Tensor,
}

#[derive(Debug, Clone)]
pub struct Backbone {
    config: BackboneConfig,
    stages: Vec<Vec<(Tensor, Tensor)>>,
    fc: (Tensor, Tensor),
    mean: Tensor,
    std: Tensor,
    identity: BackboneIdentity,
}

fn conv_name(stage: usize, conv: usize, part: &str) -> String {
    format!("stage{}.conv{}.{part}", stage + 1, conv + 1)
}

impl Backbone {
    /// Deterministic weights drawn from `config.seed`.
    pub fn seeded(config: BackboneConfig, dtype: DType) -> Result<Self> {
        config.validate()?;
        let mut store = ParamStore::new(DType::F64);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        {
            let mut b = Builder::new(&mut store, &mut rng);
            let mut in_ch = 3;
            for (s, (&width, &convs)) in config.stage_widths.iter().zip(&config.stage_convs).enumerate() {
                for k in 0..convs {
                    let mut c = b.pp(format!("stage{}.conv{}", s + 1, k + 1));
                    let fan_in = in_ch * 9;
                    c.kaiming("weight", &[width, in_ch, 3, 3], fan_in)?;
                    c.constant("bias", width, 0.0)?;
                    in_ch = width;
                }
            }
            let mut fc = b.pp("fc");
            fc.kaiming("weight", &[config.num_classes, in_ch], in_ch)?;
            fc.constant("bias", config.num_classes, 0.0)?;
        }
        Self::from_tensors(config, store.snapshot(), dtype)
    }

    pub fn from_tensors(config: BackboneConfig, tensors: BTreeMap<String, Tensor>, dtype: DType) -> Result<Self> {
        config.validate()?;
        let get = |name: &str| -> Result<Tensor> {
            let t = tensors
                .get(name)
                .ok_or_else(|| Error::Config(format!("backbone weights lack {name}")))?;
            Ok(t.to_dtype(dtype)?.detach())
        };
        let mut stages = Vec::with_capacity(5);
        let mut in_ch = 3;
        for (s, (&width, &convs)) in config.stage_widths.iter().zip(&config.stage_convs).enumerate() {
            let mut layers = Vec::with_capacity(convs);
            for k in 0..convs {
                let w = get(&conv_name(s, k, "weight"))?;
                let b = get(&conv_name(s, k, "bias"))?;
                if w.dims() != [width, in_ch, 3, 3] || b.dims() != [width] {
                    return Err(Error::Config(format!(
                        "backbone layer {} has shape {:?}",
                        conv_name(s, k, "weight"),
                        w.dims()
                    )));
                }
                layers.push((w, b));
                in_ch = width;
            }
            stages.push(layers);
        }
        let fc = (get("fc.weight")?, get("fc.bias")?);
        if fc.0.dims() != [config.num_classes, in_ch] {
            return Err(Error::Config(format!("backbone head has shape {:?}", fc.0.dims())));
        }
        let checksum = {
            let mut h = Sha256::new();
            for (name, t) in &tensors {
                h.update(name.as_bytes());
                h.update(nn::tensor_le_bytes(&t.to_dtype(DType::F32)?)?);
            }
            hex::encode(h.finalize())
        };
        let dev = Device::Cpu;
        let mean = Tensor::new(&IMAGENET_MEAN, &dev)?.to_dtype(dtype)?.reshape((1, 3, 1, 1))?;
        let std = Tensor::new(&IMAGENET_STD, &dev)?.to_dtype(dtype)?.reshape((1, 3, 1, 1))?;
        let identity = BackboneIdentity {
            name: config.name.clone(),
            checksum,
        };
        Ok(Self {
            config,
            stages,
            fc,
            mean,
            std,
            identity,
        })
    }

    pub fn from_safetensors(path: impl AsRef<Path>, config: BackboneConfig, dtype: DType) -> Result<Self> {
        let tensors = candle_core::safetensors::load(path.as_ref(), &Device::Cpu)?;
        Self::from_tensors(config, tensors.into_iter().collect(), dtype)
    }

    pub fn save_safetensors(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut map = std::collections::HashMap::new();
        for (s, layers) in self.stages.iter().enumerate() {
            for (k, (w, b)) in layers.iter().enumerate() {
                map.insert(conv_name(s, k, "weight"), w.to_dtype(DType::F32)?);
                map.insert(conv_name(s, k, "bias"), b.to_dtype(DType::F32)?);
            }
        }
        map.insert("fc.weight".into(), self.fc.0.to_dtype(DType::F32)?);
        map.insert("fc.bias".into(), self.fc.1.to_dtype(DType::F32)?);
        candle_core::safetensors::save(&map, path.as_ref())?;
        Ok(())
    }

    /// Cache directory from `RETVI_CACHE`, if set.
    pub fn cache_dir() -> Option<PathBuf> {
        std::env::var_os(CACHE_ENV).map(PathBuf::from)
    }

    /// Loads weights for `config` from the cache, generating and storing them
    /// on first use. Without a cache directory the weights are generated.
    pub fn resolve(config: BackboneConfig, dtype: DType) -> Result<Self> {
        let Some(dir) = Self::cache_dir() else {
            return Self::seeded(config, dtype);
        };
        let path = dir.join(config.cache_file());
        if path.is_file() {
            log::info!("loading backbone weights from {}", path.display());
            return Self::from_safetensors(&path, config, dtype);
        }
        let bb = Self::seeded(config, dtype)?;
        std::fs::create_dir_all(&dir)?;
        bb.save_safetensors(&path)?;
        Ok(bb)
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    pub fn identity(&self) -> &BackboneIdentity {
        &self.identity
    }

    fn prepare(&self, x: &Tensor) -> Result<Tensor> {
        let (_, c, _, _) = x.dims4()?;
        if c != 3 {
            return Err(Error::shape(format!("backbone expects 3 channels, got {c}")));
        }
        let r = self.config.input_resolution;
        let x = nn::resize_bilinear(x, (r, r), Align::HalfPixel)?;
        Ok(x.broadcast_sub(&self.mean)?.broadcast_div(&self.std)?)
    }

    fn stage(&self, x: Tensor, s: usize) -> Result<Tensor> {
        let mut h = x;
        for (w, b) in &self.stages[s] {
            h = h.conv2d(w, 1, 1, 1, 1)?.broadcast_add(&b.reshape((1, (), 1, 1))?)?.relu()?;
        }
        nn::max_pool2x2(&h)
    }

    /// The four feature maps for `(N, 3, H, W)` input in `[0, 1]`.
    pub fn features(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let mut h = self.prepare(x)?;
        let mut out = Vec::with_capacity(FEATURE_LAYERS);
        for s in 0..FEATURE_LAYERS {
            h = self.stage(h, s)?;
            out.push(h.clone());
        }
        Ok(out)
    }

    /// Feature maps plus class logits.
    pub fn forward(&self, x: &Tensor) -> Result<BackboneOutput> {
        let features = self.features(x)?;
        let h = self.stage(features[FEATURE_LAYERS - 1].clone(), 4)?;
        let pooled = h.mean(3)?.mean(2)?;
        let logits = pooled.matmul(&self.fc.0.t()?)?.broadcast_add(&self.fc.1)?;
        Ok(BackboneOutput { features, logits })
    }

    /// Checksum of the weights currently held (recomputed).
    pub fn weights_checksum(&self) -> Result<String> {
        let mut tensors = BTreeMap::new();
        for (s, layers) in self.stages.iter().enumerate() {
            for (k, (w, b)) in layers.iter().enumerate() {
                tensors.insert(conv_name(s, k, "weight"), w.clone());
                tensors.insert(conv_name(s, k, "bias"), b.clone());
            }
        }
        tensors.insert("fc.weight".into(), self.fc.0.clone());
        tensors.insert("fc.bias".into(), self.fc.1.clone());
        let mut h = Sha256::new();
        for (name, t) in &tensors {
            h.update(name.as_bytes());
            h.update(nn::tensor_le_bytes(&t.to_dtype(DType::F32)?)?);
        }
        Ok(hex::encode(h.finalize()))
    }
}
