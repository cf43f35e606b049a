//! Fidelity discriminator: six stride-2 CBR blocks, one 64-unit hidden layer
//! and a logistic output.

use candle_core::{DType, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, Align, Builder, Cbr, Linear, Mode, ParamStore};

/// Scores are clamped to `[EPS, 1 - EPS]` before taking logarithms.
pub const EPS: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FidDiscConfig {
    pub input_resolution: usize,
    pub channels: [usize; 6],
    pub hidden: usize,
}

impl Default for FidDiscConfig {
    fn default() -> Self {
        Self {
            input_resolution: 224,
            channels: [16, 32, 64, 64, 64, 64],
            hidden: 64,
        }
    }
}

impl FidDiscConfig {
    /// Spatial side after the six stride-2 blocks.
    pub fn final_side(&self) -> usize {
        (0..6).fold(self.input_resolution, |s, _| s.div_ceil(2))
    }

    fn validate(&self) -> Result<()> {
        if self.input_resolution < 1 || self.hidden == 0 || self.channels.contains(&0) {
            return Err(Error::Config("discriminator sizes must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FidDisc {
    config: FidDiscConfig,
    blocks: Vec<Cbr>,
    hidden: Linear,
    out: Linear,
}

impl FidDisc {
    /// Registers parameters under `disc.` in `store`.
    pub fn new(config: FidDiscConfig, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let mut root = Builder::new(store, rng);
        let mut b = root.pp("disc");
        let mut blocks = Vec::with_capacity(6);
        let mut in_ch = 3;
        for (i, &ch) in config.channels.iter().enumerate() {
            blocks.push(Cbr::new(&mut b.pp(format!("block{}", i + 1)), in_ch, ch, 2)?);
            in_ch = ch;
        }
        let side = config.final_side();
        let hidden = Linear::new(&mut b.pp("fc1"), in_ch * side * side, config.hidden)?;
        let out = Linear::new(&mut b.pp("fc2"), config.hidden, 1)?;
        Ok(Self {
            config,
            blocks,
            hidden,
            out,
        })
    }

    pub fn seeded(config: FidDiscConfig, dtype: DType, seed: u64) -> Result<(Self, ParamStore)> {
        let mut store = ParamStore::new(dtype);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let disc = Self::new(config, &mut store, &mut rng)?;
        Ok((disc, store))
    }

    pub fn config(&self) -> &FidDiscConfig {
        &self.config
    }

    /// Scores `η ∈ (0, 1)` of shape `(N,)` for frames `(N, 3, H, W)` in `[0, 1]`.
    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let r = self.config.input_resolution;
        let mut h = nn::resize_bilinear(x, (r, r), Align::HalfPixel)?;
        for block in &self.blocks {
            h = block.forward(&h, mode)?;
        }
        let h = self.hidden.forward(&h.flatten_from(1)?)?.relu()?;
        let logit = self.out.forward(&h)?.squeeze(1)?;
        sigmoid(&logit)
    }
}

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok(x.neg()?.exp()?.affine(1.0, 1.0)?.recip()?)
}

/// Binary cross-entropy of scores against a constant label, averaged over the batch.
pub fn bce(eta: &Tensor, label: f64) -> Result<Tensor> {
    let eta = eta.clamp(EPS, 1.0 - EPS)?;
    let pos = eta.log()?.affine(-label, 0.0)?;
    let neg = eta.affine(-1.0, 1.0)?.log()?.affine(-(1.0 - label), 0.0)?;
    Ok((pos + neg)?.mean_all()?)
}
