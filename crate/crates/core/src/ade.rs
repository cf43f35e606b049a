//! Adaptive deforming estimator: turns the CFA output into a dense energy map,
//! scales it into a displacement field for the requested ratio, warps the frame
//! by backward bilinear sampling and extracts the centered output window.

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use crate::cfa::{self, Cfa, GRID_SIDE, OUTPUT_CHANNELS};
use crate::error::{Error, Result};
use crate::media_io::Frame;
use crate::nn::{self, Align, Mode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResizeMode {
    Reduce,
    Enlarge,
}

impl ResizeMode {
    /// `Reduce` for `r <= 1`, `Enlarge` above.
    pub fn for_ratio(r: f64) -> Self {
        if r > 1.0 {
            ResizeMode::Enlarge
        } else {
            ResizeMode::Reduce
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    Width,
    Height,
}

/// Flow scale factor: `(1-r)^2` when reducing, `-(1-r)^2` when enlarging.
pub fn flow_scale(r: f64, mode: ResizeMode) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::domain(format!("resize ratio must be positive, got {r}")));
    }
    let magnitude = (1.0 - r) * (1.0 - r);
    Ok(match mode {
        ResizeMode::Reduce => magnitude,
        ResizeMode::Enlarge => -magnitude,
    })
}

/// A single-axis resize request.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetargetSpec {
    /// Target over source extent along `axis`.
    pub ratio: f64,
    pub mode: ResizeMode,
    /// Deformation multiplier; 1 disables the tall-video extension.
    pub theta: f64,
    pub axis: Axis,
    /// Output `(height, width)`.
    pub target: (usize, usize),
}

impl RetargetSpec {
    /// Spec for resizing a `(height, width)` source by `ratio` along `axis`.
    pub fn from_ratio(source: (usize, usize), ratio: f64, axis: Axis) -> Result<Self> {
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(Error::domain(format!("resize ratio must be positive, got {ratio}")));
        }
        let (h, w) = source;
        let scaled = |n: usize| ((n as f64 * ratio).round() as usize).max(1);
        let target = match axis {
            Axis::Width => (h, scaled(w)),
            Axis::Height => (scaled(h), w),
        };
        let spec = Self {
            ratio,
            mode: ResizeMode::for_ratio(ratio),
            theta: 1.0,
            axis,
            target,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        self.theta = theta;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0) || !self.ratio.is_finite() {
            return Err(Error::domain(format!("resize ratio must be positive, got {}", self.ratio)));
        }
        let consistent = match self.mode {
            ResizeMode::Reduce => self.ratio <= 1.0,
            ResizeMode::Enlarge => self.ratio >= 1.0,
        };
        if !consistent {
            return Err(Error::domain(format!(
                "ratio {} is inconsistent with mode {:?}",
                self.ratio, self.mode
            )));
        }
        if !(self.theta >= 1.0) || !self.theta.is_finite() {
            return Err(Error::domain(format!("theta must be >= 1, got {}", self.theta)));
        }
        if self.target.0 == 0 || self.target.1 == 0 {
            return Err(Error::domain("target size must be positive"));
        }
        Ok(())
    }

    pub fn flow_scale(&self) -> Result<f64> {
        flow_scale(self.ratio, self.mode)
    }
}

/// Plan for an explicit `(height, width)` target: a single-axis retarget that
/// reaches the target aspect ratio, followed by a uniform rescale when the
/// target size differs from the retargeted size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetargetPlan {
    pub spec: RetargetSpec,
    pub final_size: (usize, usize),
}

impl RetargetPlan {
    pub fn for_target(source: (usize, usize), target: (usize, usize), theta: f64) -> Result<Self> {
        let (sh, sw) = source;
        let (th, tw) = target;
        if th == 0 || tw == 0 {
            return Err(Error::domain("target size must be positive"));
        }
        let spec = if th == sh {
            RetargetSpec::from_ratio(source, tw as f64 / sw as f64, Axis::Width)?
        } else if tw == sw {
            RetargetSpec::from_ratio(source, th as f64 / sh as f64, Axis::Height)?
        } else if (tw as f64 / th as f64) < (sw as f64 / sh as f64) {
            // narrower target: retarget width at source height
            let w = ((sh as f64 * tw as f64 / th as f64).round() as usize).max(1);
            RetargetSpec {
                target: (sh, w),
                ..RetargetSpec::from_ratio(source, w as f64 / sw as f64, Axis::Width)?
            }
        } else {
            let h = ((sw as f64 * th as f64 / tw as f64).round() as usize).max(1);
            RetargetSpec {
                target: (h, sw),
                ..RetargetSpec::from_ratio(source, h as f64 / sh as f64, Axis::Height)?
            }
        };
        Ok(Self {
            spec: spec.with_theta(theta)?,
            final_size: target,
        })
    }
}

/// Elementwise `(1 - e^{-2a}) / (1 + e^{-2a})`, i.e. `tanh(a)`.
pub fn grid_activation(d1: &Tensor) -> Result<Tensor> {
    Ok(d1.tanh()?)
}

/// Bilinear upsampling with corner alignment of `(.., 2, 16, 16)` activations to `size`.
pub fn upsample_energy(q: &Tensor, size: (usize, usize)) -> Result<Tensor> {
    nn::resize_bilinear(q, size, Align::Corners)
}

/// `h = e * flow * theta`.
pub fn build_deformation(e: &Tensor, flow: f64, theta: f64) -> Result<Tensor> {
    if !(theta >= 1.0) {
        return Err(Error::domain(format!("theta must be >= 1, got {theta}")));
    }
    Ok(e.affine(flow * theta, 0.0)?)
}

/// Backward warp: output pixel `(i, j)` reads `v` bilinearly at
/// `(j + h_x * W, i + h_y * H)`, clamped to the frame. `v` is `(N, C, H, W)`,
/// `h` is `(N, 2, H, W)` in extent-relative units. Differentiable in both.
pub fn deform_and_sample(v: &Tensor, h: &Tensor) -> Result<Tensor> {
    let (n, c, height, width) = v.dims4()?;
    let (hn, hc, hh, hw) = h.dims4()?;
    if (hn, hc, hh, hw) != (n, 2, height, width) {
        return Err(Error::shape(format!(
            "deformation {:?} does not match frames {:?}",
            h.dims(),
            v.dims()
        )));
    }
    let dev = v.device();
    let dtype = v.dtype();
    let cols = Tensor::arange(0u32, width as u32, dev)?
        .to_dtype(dtype)?
        .reshape((1, 1, width))?;
    let rows = Tensor::arange(0u32, height as u32, dev)?
        .to_dtype(dtype)?
        .reshape((1, height, 1))?;

    let coord = |axis: usize, extent: usize, base: &Tensor| -> Result<(Tensor, Tensor, Tensor)> {
        let disp = h.narrow(1, axis, 1)?.squeeze(1)?;
        let p = disp
            .affine(extent as f64, 0.0)?
            .broadcast_add(base)?
            .clamp(0.0, (extent - 1) as f64)?;
        let lo = p.detach().floor()?.clamp(0.0, extent.saturating_sub(2) as f64)?;
        let hi = (&lo + 1.0)?.clamp(0.0, (extent - 1) as f64)?;
        let frac = (&p - &lo)?;
        Ok((lo, hi, frac))
    };
    let (x0, x1, wx) = coord(0, width, &cols)?;
    let (y0, y1, wy) = coord(1, height, &rows)?;

    let flat = v.reshape((n, c, height * width))?;
    let gather = |ys: &Tensor, xs: &Tensor| -> Result<Tensor> {
        let idx = ((ys * width as f64)? + xs)?
            .to_dtype(DType::U32)?
            .reshape((n, 1, height * width))?
            .broadcast_as((n, c, height * width))?
            .contiguous()?;
        Ok(flat.gather(&idx, 2)?)
    };
    let weight = |t: &Tensor| t.reshape((n, 1, height * width));
    let wx = weight(&wx)?;
    let wy = weight(&wy)?;
    let ux = wx.affine(-1.0, 1.0)?;
    let uy = wy.affine(-1.0, 1.0)?;

    let out = (gather(&y0, &x0)?.broadcast_mul(&(&ux * &uy)?)?
        + gather(&y0, &x1)?.broadcast_mul(&(&wx * &uy)?)?)?;
    let out = (out + gather(&y1, &x0)?.broadcast_mul(&(&ux * &wy)?)?)?;
    let out = (out + gather(&y1, &x1)?.broadcast_mul(&(&wx * &wy)?)?)?;
    Ok(out.reshape((n, c, height, width))?)
}

/// First index of the centered window: `floor(S/2 - T/2)`.
pub fn window_start(source: usize, target: usize) -> usize {
    (source - target) / 2
}

/// Centered window of `target` along `axis` of an `(N, C, H, W)` tensor.
pub fn crop_window(full: &Tensor, target: usize, axis: Axis) -> Result<Tensor> {
    let dim = match axis {
        Axis::Width => 3,
        Axis::Height => 2,
    };
    let source = full.dim(dim)?;
    if target > source || target == 0 {
        return Err(Error::domain(format!(
            "window of {target} does not fit in {source}"
        )));
    }
    Ok(full.narrow(dim, window_start(source, target), target)?)
}

/// Cuts (reduce) or resamples (enlarge) a warped `(N, C, H, W)` tensor to the
/// spec's target size.
pub fn assemble_output(warped: &Tensor, spec: &RetargetSpec) -> Result<Tensor> {
    let (_, _, h, w) = warped.dims4()?;
    let (target, source) = match spec.axis {
        Axis::Width => (spec.target.1, w),
        Axis::Height => (spec.target.0, h),
    };
    if target <= source {
        crop_window(warped, target, spec.axis)
    } else {
        let size = match spec.axis {
            Axis::Width => (h, target),
            Axis::Height => (target, w),
        };
        nn::resize_bilinear(warped, size, Align::HalfPixel)
    }
}

/// Dense signed energy, `(2, H, W)`, values in `(-1, 1)`.
#[derive(Clone, Debug)]
pub struct EnergyMap(pub Tensor);

impl EnergyMap {
    pub fn tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn dims(&self) -> Result<(usize, usize)> {
        let (_, h, w) = self.0.dims3()?;
        Ok((h, w))
    }

    /// Grayscale renderings of the x component, the y component (both mapped
    /// from `(-1, 1)` to `(0, 1)`) and the magnitude scaled by `1/sqrt(2)`.
    pub fn heatmaps(&self) -> Result<[Frame; 3]> {
        let e = self.0.to_dtype(DType::F32)?;
        let ex = e.narrow(0, 0, 1)?;
        let ey = e.narrow(0, 1, 1)?;
        let to_unit = |t: &Tensor| -> Result<Frame> { Frame::from_tensor(&t.affine(0.5, 0.5)?) };
        let mag = (ex.sqr()? + ey.sqr()?)?.sqrt()?.affine(std::f64::consts::FRAC_1_SQRT_2, 0.0)?;
        Ok([to_unit(&ex)?, to_unit(&ey)?, Frame::from_tensor(&mag)?])
    }
}

/// Displacement field `(2, H, W)` in extent-relative units.
#[derive(Clone, Debug)]
pub struct DeformationField(pub Tensor);

impl DeformationField {
    pub fn tensor(&self) -> &Tensor {
        &self.0
    }
}

/// Intermediate products of one retargeted frame.
#[derive(Clone, Debug)]
pub struct RetargetOutput {
    pub frame: Frame,
    pub energy: EnergyMap,
    pub deformation: DeformationField,
    /// Warped frame at source size, before the window is taken.
    pub warped: Frame,
}

/// Energy map of `v` at its native size.
pub fn energy_map(v: &Frame, cfa: &Cfa, dtype: DType) -> Result<EnergyMap> {
    v.check_pipeline_size()?;
    let out = cfa::cfa_forward(v, cfa, dtype)?;
    let q = grid_activation(&out.d1)?;
    Ok(EnergyMap(upsample_energy(&q, v.dims())?))
}

/// Warps a frame with a given field.
pub fn deform_frame(v: &Frame, h: &DeformationField, dtype: DType) -> Result<Frame> {
    let x = v.to_tensor(dtype, &Device::Cpu)?.unsqueeze(0)?;
    let warped = deform_and_sample(&x, &h.0.to_dtype(dtype)?.unsqueeze(0)?)?;
    Frame::from_tensor(&warped)
}

/// Full eval-mode pipeline for one frame, keeping intermediates.
pub fn retarget_frame_detailed(
    v: &Frame,
    spec: &RetargetSpec,
    cfa: &Cfa,
    dtype: DType,
) -> Result<RetargetOutput> {
    spec.validate()?;
    v.check_pipeline_size()?;
    let energy = energy_map(v, cfa, dtype)?;
    let h = build_deformation(&energy.0, spec.flow_scale()?, spec.theta)?;
    let x = v.to_tensor(dtype, &Device::Cpu)?.unsqueeze(0)?;
    let warped = deform_and_sample(&x, &h.unsqueeze(0)?)?;
    nn::ensure_finite(&warped, "deform_and_sample")?;
    let out = assemble_output(&warped, spec)?;
    Ok(RetargetOutput {
        frame: Frame::from_tensor(&out)?,
        energy,
        deformation: DeformationField(h),
        warped: Frame::from_tensor(&warped)?,
    })
}

pub fn retarget_frame(v: &Frame, spec: &RetargetSpec, cfa: &Cfa, dtype: DType) -> Result<Frame> {
    Ok(retarget_frame_detailed(v, spec, cfa, dtype)?.frame)
}

/// Runs a [`RetargetPlan`], rescaling to the final size when needed.
pub fn retarget_with_plan(v: &Frame, plan: &RetargetPlan, cfa: &Cfa, dtype: DType) -> Result<Frame> {
    let out = retarget_frame(v, &plan.spec, cfa, dtype)?;
    if out.dims() == plan.final_size {
        return Ok(out);
    }
    let t = out.to_tensor(dtype, &Device::Cpu)?.unsqueeze(0)?;
    Frame::from_tensor(&nn::resize_bilinear(&t, plan.final_size, Align::HalfPixel)?)
}

/// Batched training-path helper: energy maps for `(N, 3, H, W)` frames.
pub fn energy_batch(frames: &Tensor, cfa: &Cfa, mode: Mode) -> Result<Tensor> {
    let (_, _, h, w) = frames.dims4()?;
    let d1 = cfa.forward(frames, mode)?;
    debug_assert_eq!(d1.dims()[1..], [OUTPUT_CHANNELS, GRID_SIDE, GRID_SIDE]);
    upsample_energy(&grid_activation(&d1)?, (h, w))
}
