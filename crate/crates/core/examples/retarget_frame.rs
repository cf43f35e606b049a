//! Retargets one frame at several width ratios and saves each result.
//!
//! cargo run --release --example retarget_frame -- [image.png] [model.ckpt] [out_dir]
//!
//! Without arguments a synthetic frame and an untrained network are used, so
//! the output shows the mechanics (window, warp) rather than learned saliency.

use std::path::PathBuf;

use candle_core::DType;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use retvi::ade::{self, Axis, RetargetSpec};
use retvi::cfa::{Cfa, CfaConfig};
use retvi::media_io::Frame;
use retvi::synthetic;
use retvi::trainer::Checkpoint;

fn main() -> retvi::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let frame = match args.first() {
        Some(path) => Frame::from_rgb8(&image::open(path)?.to_rgb8()),
        None => {
            let clip = synthetic::moving_box_clip("demo", 1, (180, 320), &mut ChaCha8Rng::seed_from_u64(1))?;
            clip.frames.frames()[0].clone()
        }
    };
    let (cfa, _store) = match args.get(1) {
        Some(path) => Checkpoint::load(path)?.cfa(DType::F32)?,
        None => Cfa::seeded(CfaConfig::default(), DType::F32, 0)?,
    };
    let out = PathBuf::from(args.get(2).map_or("retarget_frame_out", String::as_str));
    std::fs::create_dir_all(&out)?;
    frame.to_rgb8().save(out.join("source.png"))?;

    for ratio in [0.5, 0.75, 1.0, 1.25] {
        let spec = RetargetSpec::from_ratio(frame.dims(), ratio, Axis::Width)?;
        let r = ade::retarget_frame_detailed(&frame, &spec, &cfa, DType::F32)?;
        let h = r.deformation.tensor();
        let max_shift = h.abs()?.max_all()?.to_scalar::<f32>()? * frame.width() as f32;
        println!(
            "r = {ratio:4}  {:?} -> {:?}  flow {:+.4}  largest shift {max_shift:.1} px",
            frame.dims(),
            r.frame.dims(),
            spec.flow_scale()?
        );
        r.frame.to_rgb8().save(out.join(format!("r{:03}.png", (ratio * 100.0) as u32)))?;
    }
    println!("wrote {}", out.display());
    Ok(())
}
