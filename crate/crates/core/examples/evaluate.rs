//! Scores two simple baselines against a source clip with the patch
//! similarity and stability metrics.
//!
//! cargo run --release --example evaluate -- [clip_dir] [ratio]

use candle_core::{DType, Device};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use retvi::media_io::{self, Frame, FrameSequence};
use retvi::metrics::{self, PatchSpec};
use retvi::nn::{self, Align};
use retvi::synthetic;

fn squeeze(f: &Frame, width: usize) -> retvi::Result<Frame> {
    let t = f.to_tensor(DType::F32, &Device::Cpu)?.unsqueeze(0)?;
    Frame::from_tensor(&nn::resize_bilinear(&t, (f.height(), width), Align::HalfPixel)?)
}

fn crop(f: &Frame, width: usize) -> Frame {
    let x0 = (f.width() - width) / 2;
    Frame::from_fn(f.height(), width, f.channels(), |c, y, x| f.get(c, y, x0 + x))
}

fn main() -> retvi::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let src = match args.first() {
        Some(dir) => media_io::load_frame_sequence(media_io::frames_dir(dir.as_ref()), media_io::DEFAULT_PATTERN)?,
        None => synthetic::moving_box_clip("eval", 8, (96, 128), &mut ChaCha8Rng::seed_from_u64(3))?.frames,
    };
    let ratio: f64 = args.get(1).map_or(0.5, |s| s.parse().expect("ratio"));
    let width = ((src.dims().expect("frames").1 as f64 * ratio).round() as usize).max(8);

    let spec = PatchSpec::default();
    println!("source STB {:.4}", metrics::stability(&src)?.stb);
    let squeezed = src.frames().iter().map(|f| squeeze(f, width)).collect::<retvi::Result<Vec<_>>>()?;
    let cropped = src.frames().iter().map(|f| crop(f, width)).collect();
    for (name, frames) in [("uniform scale", squeezed), ("centre crop", cropped)] {
        let seq = FrameSequence::new(frames, src.fps)?;
        let report = metrics::mean_error(&src, &seq, &spec)?;
        println!(
            "{name:14} M_E {:.3}  (per frame {:?})  STB {:.4}",
            report.mean,
            report.per_frame.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            metrics::stability(&seq)?.stb
        );
    }
    Ok(())
}
