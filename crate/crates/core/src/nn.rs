//! Small layer library on top of `candle-core`: a named parameter store with
//! seeded initialization, the handful of layers the networks use, and
//! differentiable bilinear resizing.

use std::collections::BTreeMap;

use candle_core::{DType, Device, Tensor, Var, D};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in normalization layers; running statistics are updated.
    Train,
    /// Running statistics; the forward pass is a pure function of input and weights.
    Eval,
}

/// Named trainable parameters plus non-trainable buffers (normalization statistics).
#[derive(Debug)]
pub struct ParamStore {
    dtype: DType,
    device: Device,
    params: BTreeMap<String, Var>,
    buffers: BTreeMap<String, Var>,
}

impl ParamStore {
    pub fn new(dtype: DType) -> Self {
        Self {
            dtype,
            device: Device::Cpu,
            params: BTreeMap::new(),
            buffers: BTreeMap::new(),
        }
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    fn insert(map: &mut BTreeMap<String, Var>, name: String, t: Tensor) -> Result<Var> {
        if map.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        let v = Var::from_tensor(&t)?;
        map.insert(name, v.clone());
        Ok(v)
    }

    pub fn params(&self) -> &BTreeMap<String, Var> {
        &self.params
    }

    pub fn buffers(&self) -> &BTreeMap<String, Var> {
        &self.buffers
    }

    pub fn num_params(&self) -> usize {
        self.params.values().map(|v| v.elem_count()).sum()
    }

    /// Snapshot of every parameter and buffer, keyed by name.
    pub fn snapshot(&self) -> BTreeMap<String, Tensor> {
        self.params
            .iter()
            .chain(self.buffers.iter())
            .map(|(k, v)| (k.clone(), v.as_tensor().copy().expect("cpu copy")))
            .collect()
    }

    /// Overwrites values from `tensors`. Every stored name must be present with
    /// a matching shape.
    pub fn load(&self, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
        for (name, var) in self.params.iter().chain(self.buffers.iter()) {
            let t = tensors
                .get(name)
                .ok_or_else(|| Error::IncompatibleCheckpoint(format!("missing tensor {name}")))?;
            if t.dims() != var.dims() {
                return Err(Error::IncompatibleCheckpoint(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    t.dims(),
                    var.dims()
                )));
            }
            var.set(&t.to_dtype(self.dtype)?)?;
        }
        Ok(())
    }

    /// SHA-256 over names and little-endian values of all tensors.
    pub fn checksum(&self) -> Result<String> {
        let mut h = Sha256::new();
        for (name, var) in self.params.iter().chain(self.buffers.iter()) {
            h.update(name.as_bytes());
            h.update(tensor_le_bytes(var.as_tensor())?);
        }
        Ok(hex::encode(h.finalize()))
    }
}

/// Raw little-endian bytes of a floating point tensor in its own dtype.
pub fn tensor_le_bytes(t: &Tensor) -> Result<Vec<u8>> {
    let flat = t.flatten_all()?;
    Ok(match t.dtype() {
        DType::F32 => flat
            .to_vec1::<f32>()?
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect(),
        DType::F64 => flat
            .to_vec1::<f64>()?
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect(),
        other => return Err(Error::Config(format!("unsupported dtype {other:?}"))),
    })
}

/// Scoped handle used while constructing a network.
pub struct Builder<'a> {
    store: &'a mut ParamStore,
    rng: &'a mut ChaCha8Rng,
    prefix: String,
}

impl<'a> Builder<'a> {
    pub fn new(store: &'a mut ParamStore, rng: &'a mut ChaCha8Rng) -> Self {
        Self {
            store,
            rng,
            prefix: String::new(),
        }
    }

    pub fn pp(&mut self, name: impl AsRef<str>) -> Builder<'_> {
        let prefix = if self.prefix.is_empty() {
            name.as_ref().to_string()
        } else {
            format!("{}.{}", self.prefix, name.as_ref())
        };
        Builder {
            store: self.store,
            rng: self.rng,
            prefix,
        }
    }

    fn path(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }

    fn uniform(&mut self, shape: &[usize], bound: f64) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n)
            .map(|_| self.rng.random_range(-bound..=bound))
            .collect();
        Ok(Tensor::from_vec(data, shape, self.store.device())?.to_dtype(self.store.dtype())?)
    }

    /// Kaiming-style uniform init: `U(-sqrt(6/fan_in), sqrt(6/fan_in))`.
    pub fn kaiming(&mut self, name: &str, shape: &[usize], fan_in: usize) -> Result<Var> {
        let t = self.uniform(shape, (6.0 / fan_in as f64).sqrt())?;
        let path = self.path(name);
        ParamStore::insert(&mut self.store.params, path, t)
    }

    pub fn bias(&mut self, name: &str, len: usize, fan_in: usize) -> Result<Var> {
        let t = self.uniform(&[len], 1.0 / (fan_in as f64).sqrt())?;
        let path = self.path(name);
        ParamStore::insert(&mut self.store.params, path, t)
    }

    pub fn constant(&mut self, name: &str, len: usize, value: f64) -> Result<Var> {
        let t = Tensor::full(value, len, self.store.device())?.to_dtype(self.store.dtype())?;
        let path = self.path(name);
        ParamStore::insert(&mut self.store.params, path, t)
    }

    pub fn buffer(&mut self, name: &str, len: usize, value: f64) -> Result<Var> {
        let t = Tensor::full(value, len, self.store.device())?.to_dtype(self.store.dtype())?;
        let path = self.path(name);
        ParamStore::insert(&mut self.store.buffers, path, t)
    }
}

fn check_channels(x: &Tensor, expected: usize, layer: &str) -> Result<()> {
    let (_, c, _, _) = x.dims4()?;
    if c != expected {
        return Err(Error::shape(format!(
            "{layer} expects {expected} input channels, got {c}"
        )));
    }
    Ok(())
}

/// 3x3-style convolution with optional bias.
#[derive(Clone, Debug)]
pub struct Conv2d {
    weight: Var,
    bias: Option<Var>,
    in_channels: usize,
    out_channels: usize,
    stride: usize,
    padding: usize,
}

impl Conv2d {
    pub fn new(
        b: &mut Builder<'_>,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        with_bias: bool,
    ) -> Result<Self> {
        let fan_in = in_channels * kernel * kernel;
        let weight = b.kaiming("weight", &[out_channels, in_channels, kernel, kernel], fan_in)?;
        let bias = if with_bias {
            Some(b.bias("bias", out_channels, fan_in)?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            in_channels,
            out_channels,
            stride,
            padding,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        check_channels(x, self.in_channels, "conv2d")?;
        let y = x.conv2d(&self.weight, self.padding, self.stride, 1, 1)?;
        add_channel_bias(y, self.bias.as_ref())
    }
}

fn add_channel_bias(y: Tensor, bias: Option<&Var>) -> Result<Tensor> {
    match bias {
        Some(b) => Ok(y.broadcast_add(&b.reshape((1, (), 1, 1))?)?),
        None => Ok(y),
    }
}

/// Transposed convolution. Kernel 3, padding 1 and `output_padding = stride - 1`
/// multiply the spatial size exactly by `stride`.
#[derive(Clone, Debug)]
pub struct ConvTranspose2d {
    weight: Var,
    bias: Option<Var>,
    in_channels: usize,
    out_channels: usize,
    stride: usize,
}

impl ConvTranspose2d {
    pub fn new(
        b: &mut Builder<'_>,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        with_bias: bool,
    ) -> Result<Self> {
        let fan_in = in_channels * 9;
        let weight = b.kaiming("weight", &[in_channels, out_channels, 3, 3], fan_in)?;
        let bias = if with_bias {
            Some(b.bias("bias", out_channels, fan_in)?)
        } else {
            None
        };
        Ok(Self {
            weight,
            bias,
            in_channels,
            out_channels,
            stride,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        check_channels(x, self.in_channels, "conv_transpose2d")?;
        let y = x.conv_transpose2d(&self.weight, 1, self.stride - 1, self.stride, 1)?;
        add_channel_bias(y, self.bias.as_ref())
    }
}

#[derive(Clone, Debug)]
pub struct BatchNorm2d {
    gamma: Var,
    beta: Var,
    running_mean: Var,
    running_var: Var,
    channels: usize,
    momentum: f64,
    eps: f64,
}

impl BatchNorm2d {
    pub fn new(b: &mut Builder<'_>, channels: usize) -> Result<Self> {
        Ok(Self {
            gamma: b.constant("gamma", channels, 1.0)?,
            beta: b.constant("beta", channels, 0.0)?,
            running_mean: b.buffer("running_mean", channels, 0.0)?,
            running_var: b.buffer("running_var", channels, 1.0)?,
            channels,
            momentum: 0.1,
            eps: 1e-5,
        })
    }

    pub fn forward(&self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        check_channels(x, self.channels, "batch_norm")?;
        let (mean, var) = match mode {
            Mode::Train => {
                let (n, c, h, w) = x.dims4()?;
                let count = n * h * w;
                let flat = x.transpose(0, 1)?.reshape((c, count))?;
                let mean = flat.mean_keepdim(1)?;
                let centered = flat.broadcast_sub(&mean)?;
                let var = centered.sqr()?.mean_keepdim(1)?;
                let mean = mean.flatten_all()?;
                let var = var.flatten_all()?;
                let unbiased = if count > 1 {
                    (var.detach() * (count as f64 / (count - 1) as f64))?
                } else {
                    var.detach()
                };
                let m = self.momentum;
                let rm = ((self.running_mean.as_tensor() * (1.0 - m))? + (mean.detach() * m)?)?;
                let rv = ((self.running_var.as_tensor() * (1.0 - m))? + (unbiased * m)?)?;
                self.running_mean.set(&rm)?;
                self.running_var.set(&rv)?;
                (mean, var)
            }
            Mode::Eval => (
                self.running_mean.as_tensor().clone(),
                self.running_var.as_tensor().clone(),
            ),
        };
        let shape = (1, self.channels, 1, 1);
        let inv_std = (var + self.eps)?.sqrt()?.recip()?;
        let scale = (inv_std * self.gamma.as_tensor())?.reshape(shape)?;
        let shift = self.beta.reshape(shape)?;
        Ok(x
            .broadcast_sub(&mean.reshape(shape)?)?
            .broadcast_mul(&scale)?
            .broadcast_add(&shift)?)
    }
}

/// Conv3x3 -> batch normalization -> ReLU.
#[derive(Clone, Debug)]
pub struct Cbr {
    conv: Conv2d,
    bn: BatchNorm2d,
}

impl Cbr {
    pub fn new(b: &mut Builder<'_>, in_channels: usize, out_channels: usize, stride: usize) -> Result<Self> {
        Ok(Self {
            conv: Conv2d::new(&mut b.pp("conv"), in_channels, out_channels, 3, stride, 1, true)?,
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

#[derive(Clone, Debug)]
pub struct Linear {
    weight: Var,
    bias: Var,
    in_features: usize,
}

impl Linear {
    pub fn new(b: &mut Builder<'_>, in_features: usize, out_features: usize) -> Result<Self> {
        Ok(Self {
            weight: b.kaiming("weight", &[out_features, in_features], in_features)?,
            bias: b.bias("bias", out_features, in_features)?,
            in_features,
        })
    }

    /// `x` is `(N, in_features)`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (_, f) = x.dims2()?;
        if f != self.in_features {
            return Err(Error::shape(format!(
                "linear expects {} features, got {f}",
                self.in_features
            )));
        }
        Ok(x.matmul(&self.weight.t()?)?.broadcast_add(&self.bias)?)
    }
}

/// Sample-position convention for bilinear resizing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Align {
    /// Corner pixel centres of input and output coincide.
    Corners,
    /// Pixel areas coincide (`src = (dst + 0.5) * in/out - 0.5`, clamped).
    HalfPixel,
}

/// Per output index: lower source index, upper source index, weight of the upper one.
pub(crate) fn interp_taps(input: usize, output: usize, align: Align) -> (Vec<u32>, Vec<u32>, Vec<f64>) {
    let mut lo = Vec::with_capacity(output);
    let mut hi = Vec::with_capacity(output);
    let mut wt = Vec::with_capacity(output);
    for i in 0..output {
        let src = match align {
            Align::Corners if output > 1 => i as f64 * (input - 1) as f64 / (output - 1) as f64,
            Align::Corners => 0.0,
            Align::HalfPixel => (i as f64 + 0.5) * input as f64 / output as f64 - 0.5,
        };
        let src = src.clamp(0.0, (input - 1) as f64);
        let i0 = (src.floor() as usize).min(input - 1);
        let i1 = (i0 + 1).min(input - 1);
        lo.push(i0 as u32);
        hi.push(i1 as u32);
        wt.push(src - i0 as f64);
    }
    (lo, hi, wt)
}

fn resize_axis(x: &Tensor, dim: usize, output: usize, align: Align) -> Result<Tensor> {
    let input = x.dim(dim)?;
    if input == output {
        return Ok(x.clone());
    }
    let x = x.contiguous()?;
    let dev = x.device();
    let (lo, hi, wt) = interp_taps(input, output, align);
    let lo = Tensor::from_vec(lo, output, dev)?;
    let hi = Tensor::from_vec(hi, output, dev)?;
    let mut wshape = vec![1usize; x.rank()];
    wshape[dim] = output;
    let w1 = Tensor::from_vec(wt, wshape.as_slice(), dev)?.to_dtype(x.dtype())?;
    let w0 = w1.affine(-1.0, 1.0)?;
    let a = x.index_select(&lo, dim)?.broadcast_mul(&w0)?;
    let b = x.index_select(&hi, dim)?.broadcast_mul(&w1)?;
    Ok((a + b)?)
}

/// Separable bilinear resize of the two trailing axes. Differentiable with
/// respect to `x`; an equal-size resize returns the input unchanged.
pub fn resize_bilinear(x: &Tensor, size: (usize, usize), align: Align) -> Result<Tensor> {
    let rank = x.rank();
    if rank < 2 {
        return Err(Error::shape("resize needs at least two axes"));
    }
    let (oh, ow) = size;
    if oh == 0 || ow == 0 {
        return Err(Error::shape(format!("cannot resize to {oh}x{ow}")));
    }
    let y = resize_axis(x, rank - 2, oh, align)?;
    resize_axis(&y, rank - 1, ow, align)
}

/// 2x2 max pooling with stride 2 (odd trailing rows/columns dropped).
/// Built from a reshape and `max` because candle's own max-pool backward
/// scales the gradient by the window tie count instead of dividing by it.
pub fn max_pool2x2(x: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(Error::shape(format!("cannot 2x2-pool a {h}x{w} map")));
    }
    let x = x.narrow(2, 0, 2 * oh)?.narrow(3, 0, 2 * ow)?.contiguous()?;
    Ok(x.reshape((n, c, oh, 2, ow, 2))?.max(5)?.max(3)?)
}

/// Softmax over the last axis.
pub fn softmax_last(x: &Tensor) -> Result<Tensor> {
    let max = x.max_keepdim(D::Minus1)?.detach();
    let e = x.broadcast_sub(&max)?.exp()?;
    let s = e.sum_keepdim(D::Minus1)?;
    Ok(e.broadcast_div(&s)?)
}

/// Fails with a numerical error naming `component` if `t` holds NaN or infinity.
pub fn ensure_finite(t: &Tensor, component: &str) -> Result<()> {
    let values = t.flatten_all()?.to_dtype(DType::F64)?.to_vec1::<f64>()?;
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::numerical(component, format!("non-finite value {v}")));
    }
    Ok(())
}

/// Scalar value of a rank-0 (or single element) tensor as `f64`.
pub fn scalar(t: &Tensor) -> Result<f64> {
    t.flatten_all()?
        .to_dtype(DType::F64)?
        .to_vec1::<f64>()?
        .first()
        .copied()
        .ok_or_else(|| Error::shape("empty tensor"))
}
