//! Per-frame eval-mode retargeting time at a few common sizes.
//!
//! cargo run --release --example throughput -- [frames per size]

use std::time::Instant;

use candle_core::DType;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use retvi::ade::{self, Axis, RetargetSpec};
use retvi::cfa::{Cfa, CfaConfig};
use retvi::synthetic;

fn main() -> retvi::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(5, |s| s.parse().expect("count"));
    let (cfa, _store) = Cfa::seeded(CfaConfig::default(), DType::F32, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    println!("{:>10}  {:>10}  {:>10}  {:>10}", "size", "energy ms", "total ms", "fps");
    for (h, w) in [(256, 256), (480, 854), (720, 1280)] {
        let frame = synthetic::noise_frame(h, w, &mut rng);
        let spec = RetargetSpec::from_ratio((h, w), 0.5, Axis::Width)?;
        ade::retarget_frame(&frame, &spec, &cfa, DType::F32)?;
        let t0 = Instant::now();
        for _ in 0..n {
            ade::energy_map(&frame, &cfa, DType::F32)?;
        }
        let energy = t0.elapsed().as_secs_f64() / n as f64;
        let t0 = Instant::now();
        for _ in 0..n {
            ade::retarget_frame(&frame, &spec, &cfa, DType::F32)?;
        }
        let total = t0.elapsed().as_secs_f64() / n as f64;
        println!("{:>10}  {:>10.1}  {:>10.1}  {:>10.2}", format!("{w}x{h}"), energy * 1e3, total * 1e3, 1.0 / total);
    }
    Ok(())
}
