//! Frame rasters, foreground annotations and on-disk frame sequences.
//!
//! Frames are stored planar (channel-major) with values normalized to `[0, 1]`.
//! On disk a clip is a directory of lossless 8-bit images named by a
//! zero-padded index, e.g. `00000.png`, `00001.png`, ...

use std::fs;
use std::path::{Path, PathBuf};

use candle_core::{DType, Device, Tensor};
use image::{GrayImage, RgbImage};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Smallest side length accepted by the retargeting pipeline.
pub const MIN_FRAME_SIDE: usize = 16;

/// Default file name template for frames and masks.
pub const DEFAULT_PATTERN: &str = "%05d.png";

/// A raster image with planar `C x H x W` layout and values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::shape(format!(
                "frame dimensions must be positive, got {channels}x{height}x{width}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::shape(format!(
                "frame buffer has {} values, expected {}",
                data.len(),
                height * width * channels
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("frame value {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        Self {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    /// Builds a frame from `f(channel, row, col)`; values are clamped to `[0, 1]`.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        f: impl Fn(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(height * width * channels);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x).clamp(0.0, 1.0));
                }
            }
        }
        Self {
            height,
            width,
            channels,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// `(height, width)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub(crate) fn same_shape(&self, other: &Frame) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    /// Rejects frames below the pipeline's minimum size.
    pub fn check_pipeline_size(&self) -> Result<()> {
        if self.height < MIN_FRAME_SIDE || self.width < MIN_FRAME_SIDE {
            return Err(Error::shape(format!(
                "frame {}x{} is smaller than the {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE} minimum",
                self.width, self.height
            )));
        }
        Ok(())
    }

    /// Tensor of shape `(C, H, W)`.
    pub fn to_tensor(&self, dtype: DType, device: &Device) -> Result<Tensor> {
        let t = Tensor::from_slice(&self.data, (self.channels, self.height, self.width), device)?;
        Ok(t.to_dtype(dtype)?)
    }

    /// Stacks equally sized frames into `(N, C, H, W)`.
    pub fn stack(frames: &[&Frame], dtype: DType) -> Result<Tensor> {
        let first = frames
            .first()
            .ok_or_else(|| Error::shape("cannot stack zero frames"))?;
        if frames.iter().any(|f| !f.same_shape(first)) {
            return Err(Error::DimensionMismatch("stacked frames differ in shape".into()));
        }
        let ts = frames
            .iter()
            .map(|f| f.to_tensor(dtype, &Device::Cpu))
            .collect::<Result<Vec<_>>>()?;
        Ok(Tensor::stack(&ts, 0)?)
    }

    /// Inverse of [`Frame::to_tensor`]. Accepts `(C, H, W)` or `(1, C, H, W)`;
    /// values are clamped into `[0, 1]` to absorb interpolation round-off.
    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let t = match t.rank() {
            3 => t.clone(),
            4 if t.dim(0)? == 1 => t.squeeze(0)?,
            _ => {
                return Err(Error::shape(format!(
                    "expected (C,H,W) tensor, got {:?}",
                    t.dims()
                )))
            }
        };
        let (channels, height, width) = t.dims3()?;
        let data: Vec<f32> = t
            .to_dtype(DType::F32)?
            .flatten_all()?
            .to_vec1::<f32>()?
            .into_iter()
            .map(|v| v.clamp(0.0, 1.0))
            .collect();
        if data.iter().any(|v| v.is_nan()) {
            return Err(Error::numerical("frame", "NaN pixel value"));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let (w, h) = (w as usize, h as usize);
        let mut data = vec![0.0f32; 3 * h * w];
        for (x, y, px) in img.enumerate_pixels() {
            let (x, y) = (x as usize, y as usize);
            for c in 0..3 {
                data[(c * h + y) * w + x] = px[c] as f32 / 255.0;
            }
        }
        Self {
            height: h,
            width: w,
            channels: 3,
            data,
        }
    }

    /// 8-bit RGB export. Single-channel frames are replicated to gray.
    pub fn to_rgb8(&self) -> RgbImage {
        RgbImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            let px = |c: usize| {
                let c = c.min(self.channels - 1);
                quantize(self.get(c, y as usize, x as usize))
            };
            image::Rgb([px(0), px(1), px(2)])
        })
    }
}

#[inline]
pub(crate) fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Single-channel foreground annotation.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "mask buffer has {} values, expected {}",
                data.len(),
                height * width
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn from_luma8(img: &GrayImage) -> Self {
        let (w, h) = img.dimensions();
        let data = img.pixels().map(|p| p[0] as f32 / 255.0).collect();
        Self {
            height: h as usize,
            width: w as usize,
            data,
        }
    }

    pub fn to_luma8(&self) -> GrayImage {
        GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            image::Luma([quantize(self.data[y as usize * self.width + x as usize])])
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Mask value thresholded at 0.5.
    #[inline]
    pub fn is_set(&self, y: usize, x: usize) -> bool {
        self.data[y * self.width + x] >= 0.5
    }
}

/// An original frame and its mask-extracted foreground.
#[derive(Clone, Debug, PartialEq)]
pub struct ForegroundPair {
    pub original: Frame,
    pub foreground: Frame,
}

/// Multiplies `original` by the binarized `mask`, broadcast over channels.
pub fn make_foreground_pair(original: &Frame, mask: &Mask) -> Result<ForegroundPair> {
    if original.dims() != mask.dims() {
        return Err(Error::DimensionMismatch(format!(
            "mask {:?} vs frame {:?}",
            mask.dims(),
            original.dims()
        )));
    }
    let (h, w) = original.dims();
    let mut data = original.data.clone();
    for c in 0..original.channels {
        for y in 0..h {
            for x in 0..w {
                if !mask.is_set(y, x) {
                    data[(c * h + y) * w + x] = 0.0;
                }
            }
        }
    }
    let foreground = Frame {
        data,
        ..original.clone()
    };
    Ok(ForegroundPair {
        original: original.clone(),
        foreground,
    })
}

/// Temporally ordered frames sharing one size.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    frames: Vec<Frame>,
    /// Metadata only.
    pub fps: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        if let Some(first) = frames.first() {
            if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| !f.same_shape(first)) {
                return Err(Error::DimensionMismatch(format!(
                    "frame {i} is {}x{}x{}, frame 0 is {}x{}x{}",
                    f.channels, f.height, f.width, first.channels, first.height, first.width
                )));
            }
        }
        Ok(Self { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// `(height, width)` of the frames, `None` for an empty sequence.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.frames.first().map(Frame::dims)
    }

    pub fn reversed(&self) -> Self {
        Self {
            frames: self.frames.iter().rev().cloned().collect(),
            fps: self.fps,
        }
    }
}

/// Three consecutive frames `t-1, t, t+1` borrowed from a sequence.
#[derive(Clone, Copy, Debug)]
pub struct ClipTriplet<'a> {
    pub prev: &'a Frame,
    pub cur: &'a Frame,
    pub next: &'a Frame,
}

impl<'a> ClipTriplet<'a> {
    pub fn frames(&self) -> [&'a Frame; 3] {
        [self.prev, self.cur, self.next]
    }
}

/// Frames `t-1, t, t+1` of `seq`. `t` must satisfy `1 <= t <= n-2`.
pub fn sample_triplet(seq: &FrameSequence, t: usize) -> Result<ClipTriplet<'_>> {
    let n = seq.len();
    if t == 0 || t + 1 >= n {
        return Err(Error::OutOfRange {
            index: t,
            detail: format!("triplet centre must lie in [1, {}] for {n} frames", n.saturating_sub(2)),
        });
    }
    Ok(ClipTriplet {
        prev: &seq.frames[t - 1],
        cur: &seq.frames[t],
        next: &seq.frames[t + 1],
    })
}

/// A printf-style `prefix%0Ndsuffix` file name template.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FramePattern {
    prefix: String,
    digits: usize,
    suffix: String,
}

impl FramePattern {
    pub fn parse(template: &str) -> Result<Self> {
        let start = template
            .find('%')
            .ok_or_else(|| Error::Config(format!("pattern {template:?} has no %0Nd field")))?;
        let rest = &template[start + 1..];
        let end = rest
            .find('d')
            .ok_or_else(|| Error::Config(format!("pattern {template:?} has no %0Nd field")))?;
        let width = &rest[..end];
        let digits = if width.is_empty() {
            1
        } else {
            width
                .trim_start_matches('0')
                .parse::<usize>()
                .ok()
                .filter(|_| width.starts_with('0'))
                .ok_or_else(|| {
                    Error::Config(format!("pattern {template:?} must be zero padded (%0Nd)"))
                })?
        };
        Ok(Self {
            prefix: template[..start].to_string(),
            digits,
            suffix: rest[end + 1..].to_string(),
        })
    }

    pub fn format(&self, index: usize) -> String {
        format!(
            "{}{:0width$}{}",
            self.prefix,
            index,
            self.suffix,
            width = self.digits
        )
    }

    /// Index encoded in `name`, if it matches the template.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        let mid = name.strip_prefix(&self.prefix)?.strip_suffix(&self.suffix)?;
        if mid.len() < self.digits || !mid.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        // wider numbers are allowed only without extra leading zeros
        if mid.len() > self.digits && mid.starts_with('0') {
            return None;
        }
        mid.parse().ok()
    }
}

fn matching_files(dir: &Path, pattern: &FramePattern) -> Result<Vec<(usize, PathBuf)>> {
    if !dir.is_dir() {
        return Err(Error::NotFound(dir.to_path_buf()));
    }
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        if let Some(idx) = name.to_str().and_then(|n| pattern.index_of(n)) {
            files.push((idx, entry.path()));
        }
    }
    if files.is_empty() {
        return Err(Error::EmptySequence(dir.to_path_buf()));
    }
    files.sort_by_key(|(i, _)| *i);
    Ok(files)
}

/// Loads every file in `dir` matching `pattern`, ordered by numeric index.
pub fn load_frame_sequence(dir: impl AsRef<Path>, pattern: &str) -> Result<FrameSequence> {
    let dir = dir.as_ref();
    let pattern = FramePattern::parse(pattern)?;
    let files = matching_files(dir, &pattern)?;
    let frames = files
        .par_iter()
        .map(|(_, path)| Ok(Frame::from_rgb8(&image::open(path)?.to_rgb8())))
        .collect::<Result<Vec<_>>>()?;
    FrameSequence::new(frames, 30.0)
}

pub fn load_masks(dir: impl AsRef<Path>, pattern: &str) -> Result<Vec<Mask>> {
    let dir = dir.as_ref();
    let pattern = FramePattern::parse(pattern)?;
    let files = matching_files(dir, &pattern)?;
    files
        .par_iter()
        .map(|(_, path)| Ok(Mask::from_luma8(&image::open(path)?.to_luma8())))
        .collect()
}

/// Writes frames as 8-bit PNGs named by `pattern`, starting at index 0.
pub fn save_frame_sequence(seq: &FrameSequence, dir: impl AsRef<Path>, pattern: &str) -> Result<()> {
    save_frames(seq.frames(), dir, pattern)
}

pub fn save_frames(frames: &[Frame], dir: impl AsRef<Path>, pattern: &str) -> Result<()> {
    let dir = dir.as_ref();
    let pattern = FramePattern::parse(pattern)?;
    fs::create_dir_all(dir)?;
    frames.par_iter().enumerate().try_for_each(|(i, f)| {
        f.to_rgb8().save(dir.join(pattern.format(i)))?;
        Ok(())
    })
}

pub fn save_masks(masks: &[Mask], dir: impl AsRef<Path>, pattern: &str) -> Result<()> {
    let dir = dir.as_ref();
    let pattern = FramePattern::parse(pattern)?;
    fs::create_dir_all(dir)?;
    for (i, m) in masks.iter().enumerate() {
        m.to_luma8().save(dir.join(pattern.format(i)))?;
    }
    Ok(())
}

/// A clip directory laid out as `<clip>/frames/%05d.png` plus optional
/// `<clip>/masks/%05d.png`.
#[derive(Clone, Debug)]
pub struct Clip {
    pub name: String,
    pub frames: FrameSequence,
    pub masks: Option<Vec<Mask>>,
}

impl Clip {
    pub fn new(name: impl Into<String>, frames: FrameSequence, masks: Option<Vec<Mask>>) -> Result<Self> {
        if let Some(masks) = &masks {
            if masks.len() != frames.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} masks for {} frames",
                    masks.len(),
                    frames.len()
                )));
            }
            if let (Some(dims), Some(m)) = (frames.dims(), masks.iter().find(|m| Some(m.dims()) != frames.dims())) {
                return Err(Error::DimensionMismatch(format!(
                    "mask {:?} vs frames {:?}",
                    m.dims(),
                    dims
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            frames,
            masks,
        })
    }

    /// Foreground pair for frame `t`; requires masks.
    pub fn pair(&self, t: usize) -> Result<ForegroundPair> {
        let masks = self
            .masks
            .as_ref()
            .ok_or_else(|| Error::MissingMasks(self.name.clone()))?;
        let frame = self.frames.frames().get(t).ok_or_else(|| Error::OutOfRange {
            index: t,
            detail: format!("clip {} has {} frames", self.name, self.frames.len()),
        })?;
        make_foreground_pair(frame, &masks[t])
    }
}

/// Resolves the frame directory of a clip: `<dir>/frames` when present, else `dir`.
pub fn frames_dir(dir: &Path) -> PathBuf {
    let sub = dir.join("frames");
    if sub.is_dir() {
        sub
    } else {
        dir.to_path_buf()
    }
}

pub fn load_clip(dir: impl AsRef<Path>) -> Result<Clip> {
    let dir = dir.as_ref();
    if !dir.is_dir() {
        return Err(Error::NotFound(dir.to_path_buf()));
    }
    let frames = load_frame_sequence(frames_dir(dir), DEFAULT_PATTERN)?;
    let mask_dir = dir.join("masks");
    let masks = if mask_dir.is_dir() {
        Some(load_masks(&mask_dir, DEFAULT_PATTERN)?)
    } else {
        None
    };
    let name = dir
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("clip")
        .to_string();
    Clip::new(name, frames, masks)
}

pub fn save_clip(clip: &Clip, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    save_frame_sequence(&clip.frames, dir.join("frames"), DEFAULT_PATTERN)?;
    if let Some(masks) = &clip.masks {
        save_masks(masks, dir.join("masks"), DEFAULT_PATTERN)?;
    }
    Ok(())
}
