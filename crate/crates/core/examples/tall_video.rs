//! Converts a landscape clip to portrait (9:16) with an amplified deformation
//! and compares the temporal stability of the result with a plain centre crop.
//!
//! cargo run --release --example tall_video -- [clip_dir] [model.ckpt] [theta]

use candle_core::DType;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use retvi::ade::{self, RetargetPlan};
use retvi::cfa::{Cfa, CfaConfig};
use retvi::media_io::{self, Frame, FrameSequence};
use retvi::metrics;
use retvi::synthetic;
use retvi::trainer::Checkpoint;

fn centre_crop(f: &Frame, width: usize) -> Frame {
    let x0 = (f.width() - width) / 2;
    Frame::from_fn(f.height(), width, f.channels(), |c, y, x| f.get(c, y, x0 + x))
}

fn main() -> retvi::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seq = match args.first() {
        Some(dir) => media_io::load_frame_sequence(media_io::frames_dir(dir.as_ref()), media_io::DEFAULT_PATTERN)?,
        None => synthetic::moving_box_clip("wide", 12, (144, 256), &mut ChaCha8Rng::seed_from_u64(2))?.frames,
    };
    let (cfa, _store) = match args.get(1) {
        Some(path) => Checkpoint::load(path)?.cfa(DType::F32)?,
        None => Cfa::seeded(CfaConfig::default(), DType::F32, 0)?,
    };
    let theta: f64 = args.get(2).map_or(1.5, |s| s.parse().expect("theta"));

    let (h, w) = seq.dims().expect("non-empty clip");
    let target = (h, (h * 9 / 16).max(16));
    let plan = RetargetPlan::for_target((h, w), target, theta)?;
    println!("{w}x{h} -> {}x{}  ratio {:.3}  theta {theta}", target.1, target.0, plan.spec.ratio);

    let warped = seq
        .frames()
        .iter()
        .map(|f| ade::retarget_with_plan(f, &plan, &cfa, DType::F32))
        .collect::<retvi::Result<Vec<_>>>()?;
    let cropped: Vec<Frame> = seq.frames().iter().map(|f| centre_crop(f, target.1)).collect();
    let warped = FrameSequence::new(warped, 30.0)?;
    let cropped = FrameSequence::new(cropped, 30.0)?;

    let spec = metrics::PatchSpec::default();
    for (name, s) in [("retargeted", &warped), ("centre crop", &cropped)] {
        let stb = metrics::stability(s)?.stb;
        let me = metrics::mean_error(&seq, s, &spec)?.mean;
        println!("{name:12}  STB {stb:.4}  M_E {me:.3}");
    }
    media_io::save_frame_sequence(&warped, "tall_video_out", media_io::DEFAULT_PATTERN)?;
    println!("wrote tall_video_out/");
    Ok(())
}
