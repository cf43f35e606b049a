//! Content feature analyzer: a seven-stage encoder of Conv3x3/BN/Tanh blocks
//! and a decoder that fuses encoder stages 6, 5 and 4 through gated skip
//! connections before projecting to a two-channel 16x16 map.

use candle_core::{DType, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::media_io::Frame;
use crate::nn::{self, Align, BatchNorm2d, Builder, Cbr, Conv2d, ConvTranspose2d, Mode, ParamStore};

/// Side length of the decoded map `D1`.
pub const GRID_SIDE: usize = 16;

/// Number of channels of `D1`: one energy component per axis.
pub const OUTPUT_CHANNELS: usize = 2;

/// Encoder stages whose outputs feed an ED-Gate (1-based).
pub const GATED_STAGES: [usize; 3] = [6, 5, 4];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CfaConfig {
    /// Frames are resized to this square size before encoding.
    pub processing_resolution: usize,
    /// Kernel count of each E-Block.
    pub kernels: [usize; 7],
    pub strides: [usize; 7],
    /// Output channels of the CBR inside each ED-Gate.
    pub gate_channels: usize,
    /// Output channels of the D-Blocks producing `D3` and `D2`.
    pub decoder_channels: [usize; 2],
}

impl Default for CfaConfig {
    fn default() -> Self {
        Self {
            processing_resolution: 256,
            kernels: [16, 32, 64, 128, 128, 128, 128],
            strides: [2, 2, 2, 2, 1, 1, 1],
            gate_channels: 32,
            decoder_channels: [64, 32],
        }
    }
}

impl CfaConfig {
    /// A narrow variant for quick experiments and gradient checks.
    pub fn tiny() -> Self {
        Self {
            processing_resolution: 32,
            kernels: [4, 6, 8, 8, 8, 8, 8],
            strides: [2, 1, 1, 1, 1, 1, 1],
            gate_channels: 4,
            decoder_channels: [8, 4],
        }
    }

    /// Spatial side of `E_1..E_7`.
    pub fn encoder_sides(&self) -> Vec<usize> {
        let mut side = self.processing_resolution;
        self.strides
            .iter()
            .map(|&s| {
                side = side.div_ceil(s);
                side
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.strides.iter().find(|&&s| s != 1 && s != 2) {
            return Err(Error::Config(format!("E-Block stride must be 1 or 2, got {s}")));
        }
        if self.kernels.contains(&0) || self.gate_channels == 0 {
            return Err(Error::Config("kernel counts must be positive".into()));
        }
        let sides = self.encoder_sides();
        let product: usize = self.strides.iter().product();
        if self.processing_resolution != GRID_SIDE * product {
            return Err(Error::Config(format!(
                "processing resolution {} does not reduce to {GRID_SIDE}x{GRID_SIDE} under strides {:?}",
                self.processing_resolution, self.strides
            )));
        }
        if sides[3..].iter().any(|&s| s != GRID_SIDE) {
            return Err(Error::Config(format!(
                "gated stages 4..7 must share the {GRID_SIDE}x{GRID_SIDE} grid, got sides {sides:?}"
            )));
        }
        Ok(())
    }

    pub fn block_specs(&self) -> [EBlockSpec; 7] {
        std::array::from_fn(|i| EBlockSpec {
            index: i + 1,
            kernel_count: self.kernels[i],
            stride: self.strides[i],
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EBlockSpec {
    /// 1-based stage index.
    pub index: usize,
    pub kernel_count: usize,
    pub stride: usize,
}

/// Conv3x3 -> batch normalization -> Tanh.
#[derive(Clone, Debug)]
pub struct EBlock {
    conv: Conv2d,
    bn: BatchNorm2d,
    spec: EBlockSpec,
}

impl EBlock {
    pub fn new(b: &mut Builder<'_>, in_channels: usize, spec: EBlockSpec) -> Result<Self> {
        Ok(Self {
            conv: Conv2d::new(&mut b.pp("conv"), in_channels, spec.kernel_count, 3, spec.stride, 1, true)?,
            bn: BatchNorm2d::new(&mut b.pp("bn"), spec.kernel_count)?,
            spec,
        })
    }

    pub fn spec(&self) -> EBlockSpec {
        self.spec
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        Ok(self.bn.forward(&self.conv.forward(x)?, mode)?.tanh()?)
    }
}

/// Transposed convolution -> batch normalization -> ReLU.
#[derive(Clone, Debug)]
pub struct DBlock {
    conv: ConvTranspose2d,
    bn: BatchNorm2d,
}

impl DBlock {
    pub fn new(b: &mut Builder<'_>, in_channels: usize, out_channels: usize, stride: usize) -> Result<Self> {
        Ok(Self {
            conv: ConvTranspose2d::new(&mut b.pp("conv"), in_channels, out_channels, stride, true)?,
            bn: BatchNorm2d::new(&mut b.pp("bn"), out_channels)?,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.conv.out_channels()
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        Ok(self.bn.forward(&self.conv.forward(x)?, mode)?.relu()?)
    }
}

/// Skip-connection gate: `CBR(f_e)` concatenated with `f_d` along channels.
#[derive(Clone, Debug)]
pub struct EdGate {
    cbr: Cbr,
}

impl EdGate {
    pub fn new(b: &mut Builder<'_>, encoder_channels: usize, out_channels: usize) -> Result<Self> {
        Ok(Self {
            cbr: Cbr::new(&mut b.pp("cbr"), encoder_channels, out_channels, 1)?,
        })
    }

    pub fn out_channels(&self, decoder_channels: usize) -> usize {
        self.cbr.out_channels() + decoder_channels
    }

    pub fn forward(&self, f_e: &Tensor, f_d: &Tensor, mode: Mode) -> Result<Tensor> {
        let (_, _, he, we) = f_e.dims4()?;
        let (_, _, hd, wd) = f_d.dims4()?;
        if (he, we) != (hd, wd) {
            return Err(Error::shape(format!(
                "ED-Gate inputs differ spatially: {he}x{we} vs {hd}x{wd}"
            )));
        }
        Ok(Tensor::cat(&[&self.cbr.forward(f_e, mode)?, f_d], 1)?)
    }
}

/// Encoder maps `E_1..E_7` and decoder maps `D_7..D_1`.
#[derive(Clone, Debug)]
pub struct FeaturePyramid {
    pub encoder: Vec<Tensor>,
    pub decoder: Vec<Tensor>,
}

impl FeaturePyramid {
    /// `E_i`, 1-based.
    pub fn e(&self, i: usize) -> &Tensor {
        &self.encoder[i - 1]
    }

    /// `D_i`, 1-based.
    pub fn d(&self, i: usize) -> &Tensor {
        &self.decoder[7 - i]
    }
}

#[derive(Debug)]
pub struct Cfa {
    config: CfaConfig,
    encoders: Vec<EBlock>,
    gates: Vec<EdGate>,
    dblocks: Vec<DBlock>,
    head: ConvTranspose2d,
}

impl Cfa {
    /// Registers the network's parameters under `cfa.` in `store`.
    pub fn new(config: CfaConfig, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let mut root = Builder::new(store, rng);
        let mut b = root.pp("cfa");
        let mut encoders = Vec::with_capacity(7);
        let mut in_ch = 3;
        for spec in config.block_specs() {
            encoders.push(EBlock::new(&mut b.pp(format!("e{}", spec.index)), in_ch, spec)?);
            in_ch = spec.kernel_count;
        }
        // D7 = E7
        let mut d_ch = config.kernels[6];
        let mut gates = Vec::with_capacity(3);
        for i in GATED_STAGES {
            let gate = EdGate::new(&mut b.pp(format!("gate{i}")), config.kernels[i - 1], config.gate_channels)?;
            d_ch = gate.out_channels(d_ch);
            gates.push(gate);
        }
        let mut dblocks = Vec::with_capacity(2);
        for (k, &out) in config.decoder_channels.iter().enumerate() {
            let block = DBlock::new(&mut b.pp(format!("d{}", 3 - k)), d_ch, out, 1)?;
            d_ch = out;
            dblocks.push(block);
        }
        let head = ConvTranspose2d::new(&mut b.pp("d1"), d_ch, OUTPUT_CHANNELS, 1, true)?;
        Ok(Self {
            config,
            encoders,
            gates,
            dblocks,
            head,
        })
    }

    /// Fresh network in its own store, seeded.
    pub fn seeded(config: CfaConfig, dtype: DType, seed: u64) -> Result<(Self, ParamStore)> {
        let mut store = ParamStore::new(dtype);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfa = Self::new(config, &mut store, &mut rng)?;
        Ok((cfa, store))
    }

    pub fn config(&self) -> &CfaConfig {
        &self.config
    }

    /// Resizes `(N, 3, H, W)` frames to the processing resolution.
    pub fn prepare_input(&self, frames: &Tensor) -> Result<Tensor> {
        let p = self.config.processing_resolution;
        nn::resize_bilinear(frames, (p, p), Align::HalfPixel)
    }

    /// Full pyramid for input already at the processing resolution.
    pub fn forward_pyramid(&self, x: &Tensor, mode: Mode) -> Result<FeaturePyramid> {
        let (_, c, h, w) = x.dims4()?;
        let p = self.config.processing_resolution;
        if c != 3 || h != p || w != p {
            return Err(Error::shape(format!(
                "CFA expects (N, 3, {p}, {p}) input, got {:?}",
                x.dims()
            )));
        }
        let mut encoder = Vec::with_capacity(7);
        let mut cur = x.clone();
        for block in &self.encoders {
            cur = block.forward(&cur, mode)?;
            encoder.push(cur.clone());
        }
        let mut decoder = Vec::with_capacity(7);
        let mut d = encoder[6].clone();
        decoder.push(d.clone());
        for (gate, i) in self.gates.iter().zip(GATED_STAGES) {
            d = gate.forward(&encoder[i - 1], &d, mode)?;
            decoder.push(d.clone());
        }
        for block in &self.dblocks {
            d = block.forward(&d, mode)?;
            decoder.push(d.clone());
        }
        d = self.head.forward(&d)?;
        decoder.push(d);
        Ok(FeaturePyramid { encoder, decoder })
    }

    /// `D1` of shape `(N, 2, 16, 16)` for frames of any size.
    pub fn forward(&self, frames: &Tensor, mode: Mode) -> Result<Tensor> {
        let x = self.prepare_input(frames)?;
        let mut pyramid = self.forward_pyramid(&x, mode)?;
        Ok(pyramid.decoder.pop().expect("decoder output"))
    }
}

/// Pre-activation output `D1` for one frame.
#[derive(Clone, Debug)]
pub struct CfaOutput {
    /// `(2, 16, 16)`.
    pub d1: Tensor,
}

/// Eval-mode forward of a single frame.
pub fn cfa_forward(frame: &Frame, cfa: &Cfa, dtype: DType) -> Result<CfaOutput> {
    if frame.channels() != 3 {
        return Err(Error::shape(format!(
            "CFA needs 3-channel frames, got {}",
            frame.channels()
        )));
    }
    let x = frame.to_tensor(dtype, &candle_core::Device::Cpu)?.unsqueeze(0)?;
    let d1 = cfa.forward(&x, Mode::Eval)?.squeeze(0)?;
    nn::ensure_finite(&d1, "cfa")?;
    Ok(CfaOutput { d1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::Device;

    fn max_abs(t: &Tensor) -> f64 {
        nn::scalar(&t.abs().unwrap().max_all().unwrap()).unwrap()
    }

    #[test]
    fn default_config_is_consistent() {
        let c = CfaConfig::default();
        c.validate().unwrap();
        assert_eq!(c.encoder_sides(), vec![128, 64, 32, 16, 16, 16, 16]);
        CfaConfig::tiny().validate().unwrap();
        let bad = CfaConfig {
            processing_resolution: 128,
            ..CfaConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn e_block_shape_and_range() {
        let mut store = ParamStore::new(DType::F64);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = EBlockSpec {
            index: 1,
            kernel_count: 16,
            stride: 2,
        };
        let block = EBlock::new(&mut Builder::new(&mut store, &mut rng), 3, spec).unwrap();
        let x = Tensor::rand(0f64, 1.0, (1, 3, 256, 256), &Device::Cpu).unwrap();
        let y = block.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.dims(), &[1, 16, 128, 128]);
        assert!(max_abs(&y) < 1.0);

        let wrong = Tensor::zeros((1, 4, 32, 32), DType::F64, &Device::Cpu).unwrap();
        assert!(matches!(block.forward(&wrong, Mode::Eval), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_block_gives_zero() {
        let mut store = ParamStore::new(DType::F64);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = EBlockSpec {
            index: 1,
            kernel_count: 5,
            stride: 1,
        };
        let (eb, db, gate) = {
            let mut b = Builder::new(&mut store, &mut rng);
            (
                EBlock::new(&mut b.pp("e"), 3, spec).unwrap(),
                DBlock::new(&mut b.pp("d"), 3, 4, 1).unwrap(),
                EdGate::new(&mut b.pp("g"), 3, 2).unwrap(),
            )
        };
        for v in store.params().values() {
            v.set(&v.zeros_like().unwrap()).unwrap();
        }
        let x = Tensor::randn(0f64, 1.0, (2, 3, 16, 16), &Device::Cpu).unwrap();
        assert_eq!(max_abs(&eb.forward(&x, Mode::Eval).unwrap()), 0.0);
        let zero = x.zeros_like().unwrap();
        assert_eq!(max_abs(&db.forward(&zero, Mode::Eval).unwrap()), 0.0);
        assert_eq!(max_abs(&gate.forward(&zero, &zero, Mode::Eval).unwrap()), 0.0);
    }

    #[test]
    fn d_block_doubles_with_stride_two() {
        let mut store = ParamStore::new(DType::F32);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let block = DBlock::new(&mut Builder::new(&mut store, &mut rng), 64, 32, 2).unwrap();
        let x = Tensor::randn(0f32, 1.0, (1, 64, 32, 32), &Device::Cpu).unwrap();
        let y = block.forward(&x, Mode::Eval).unwrap();
        assert_eq!(y.dims(), &[1, 32, 64, 64]);
        let min = nn::scalar(&y.min_all().unwrap()).unwrap();
        assert!(min >= 0.0);
    }

    #[test]
    fn gate_concatenates() {
        let mut store = ParamStore::new(DType::F32);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gate = EdGate::new(&mut Builder::new(&mut store, &mut rng), 16, 16).unwrap();
        let fe = Tensor::randn(0f32, 1.0, (1, 16, 16, 16), &Device::Cpu).unwrap();
        let fd = Tensor::randn(0f32, 1.0, (1, 16, 16, 16), &Device::Cpu).unwrap();
        assert_eq!(gate.forward(&fe, &fd, Mode::Eval).unwrap().dims(), &[1, 32, 16, 16]);
        let fd_small = Tensor::randn(0f32, 1.0, (1, 16, 8, 8), &Device::Cpu).unwrap();
        assert!(matches!(gate.forward(&fe, &fd_small, Mode::Eval), Err(Error::Shape(_))));
    }

    #[test]
    fn pyramid_shapes_and_ranges() {
        let (cfa, _store) = Cfa::seeded(CfaConfig::default(), DType::F32, 7).unwrap();
        let x = Tensor::rand(0f32, 1.0, (2, 3, 256, 256), &Device::Cpu).unwrap();
        let p = cfa.forward_pyramid(&x, Mode::Train).unwrap();
        let sides = CfaConfig::default().encoder_sides();
        for (i, e) in p.encoder.iter().enumerate() {
            assert_eq!(e.dims()[2], sides[i]);
            assert!(max_abs(e) < 1.0);
        }
        for i in GATED_STAGES {
            assert_eq!(p.e(i).dims()[2..], p.d(i + 1).dims()[2..]);
        }
        // D-Block outputs and the CBR half of each gate are ReLU outputs; the
        // remaining gate channels carry E7 through unchanged.
        for i in [2, 3] {
            assert!(nn::scalar(&p.d(i).min_all().unwrap()).unwrap() >= 0.0);
        }
        let gate_ch = CfaConfig::default().gate_channels;
        for i in GATED_STAGES {
            let cbr = p.d(i).narrow(1, 0, gate_ch).unwrap();
            assert!(nn::scalar(&cbr.min_all().unwrap()).unwrap() >= 0.0);
        }
        assert_eq!(p.d(1).dims(), &[2, 2, 16, 16]);
    }

    #[test]
    fn forward_is_deterministic_and_size_agnostic() {
        let (cfa, _store) = Cfa::seeded(CfaConfig::default(), DType::F32, 9).unwrap();
        let f = Frame::from_fn(48, 85, 3, |c, y, x| ((c + y * x) % 17) as f32 / 17.0);
        let a = cfa_forward(&f, &cfa, DType::F32).unwrap();
        let b = cfa_forward(&f, &cfa, DType::F32).unwrap();
        assert_eq!(a.d1.dims(), &[2, 16, 16]);
        let diff = max_abs(&(a.d1 - b.d1).unwrap());
        assert_eq!(diff, 0.0);
    }
}
