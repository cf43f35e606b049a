//! Overfits the retargeting network on two synthetic 16-frame clips and
//! reports the drop of the moving-average loss and generator objective.
//!
//! cargo run --release --example train_toy -- [steps] [log.jsonl]

use std::fs::File;
use std::io::BufWriter;
use std::time::Instant;

use retvi::synthetic::ToyClips;
use retvi::trainer::{Dataset, FitOptions, TrainConfig, Trainer};

fn main() -> retvi::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().map(|s| s.parse().expect("steps")).unwrap_or(300);
    let log_path = args.next().unwrap_or_else(|| "train_toy.jsonl".into());

    let dataset = Dataset::new(ToyClips::default().generate()?)?;
    let config = TrainConfig {
        max_steps: Some(steps),
        ..TrainConfig::toy()
    };
    let mut trainer = Trainer::new(config)?;
    let mut log = BufWriter::new(File::create(&log_path)?);
    let started = Instant::now();
    let mut on_step = |m: &retvi::trainer::StepMetrics| {
        if m.step.is_multiple_of(10) {
            println!(
                "step {:4}  total {:.4}  cri {:.4}  glo {:.4}  tem {:.5}  fid {:.4}  g {:.4}  objective {:.4}  {:.1}s",
                m.step,
                m.total,
                m.critical,
                m.global,
                m.temporal,
                m.fidelity,
                m.g_term,
                m.objective,
                started.elapsed().as_secs_f64()
            );
        }
    };
    let summary = trainer.fit(
        &dataset,
        FitOptions {
            log: Some(&mut log),
            on_step: Some(&mut on_step),
            ..Default::default()
        },
    )?;
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    println!("{:.1}s for {} steps, log in {log_path}", started.elapsed().as_secs_f64(), summary.steps);
    Ok(())
}
