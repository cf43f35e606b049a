//! Renders the energy map of a frame as three grayscale images (x, y and
//! magnitude) next to the input.
//!
//! cargo run --release --example energy_map -- [image.png] [model.ckpt]

use std::path::Path;

use candle_core::DType;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use retvi::ade;
use retvi::cfa::{Cfa, CfaConfig};
use retvi::media_io::Frame;
use retvi::synthetic;
use retvi::trainer::Checkpoint;

fn main() -> retvi::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let frame = match args.first() {
        Some(path) => Frame::from_rgb8(&image::open(path)?.to_rgb8()),
        None => synthetic::noise_frame(160, 240, &mut ChaCha8Rng::seed_from_u64(4)),
    };
    let (cfa, _store) = match args.get(1) {
        Some(path) => Checkpoint::load(path)?.cfa(DType::F32)?,
        None => Cfa::seeded(CfaConfig::default(), DType::F32, 0)?,
    };
    let energy = ade::energy_map(&frame, &cfa, DType::F32)?;
    let e = energy.tensor();
    println!(
        "energy {:?}: min {:+.4} max {:+.4} mean |e| {:.4}",
        e.dims(),
        e.min_all()?.to_scalar::<f32>()?,
        e.max_all()?.to_scalar::<f32>()?,
        e.abs()?.mean_all()?.to_scalar::<f32>()?
    );
    let out = Path::new("energy_map_out");
    std::fs::create_dir_all(out)?;
    frame.to_rgb8().save(out.join("input.png"))?;
    let [x, y, mag] = energy.heatmaps()?;
    for (name, map) in [("x", x), ("y", y), ("magnitude", mag)] {
        map.to_rgb8().save(out.join(format!("{name}.png")))?;
    }
    println!("wrote {}", out.display());
    Ok(())
}
