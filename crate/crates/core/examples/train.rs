//! A short training run on generated data with the reduced model. Pass a
//! step count to train longer.
//!
//!     cargo run --release --example train -- 200

use scanet::synth::generate_dataset;
use scanet::trainer::{train, TrainConfig};
use scanet::ModelConfig;

fn main() -> scanet::Result<()> {
    let steps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let root = std::env::temp_dir().join("scanet-example-train");
    generate_dataset(4, 96, &root.join("data"), 7)?;
    let cfg = TrainConfig {
        name: "example".into(),
        data: root.join("data"),
        out: root.clone(),
        epochs: 20,
        max_steps: Some(steps),
        patch: 64,
        stride: 32,
        lr: 5e-4,
        sample_every: 20,
        model: ModelConfig::small(),
        ..TrainConfig::default()
    };
    let summary = train(&cfg)?;
    let (first, last) = (&summary.records[0], summary.records.last().expect("at least one step"));
    println!("step {:>4}: joint {:.4}  psnr {:.2}", first.step, first.joint, first.psnr_train);
    println!("step {:>4}: joint {:.4}  psnr {:.2}", last.step, last.joint, last.psnr_train);
    println!("metrics, samples and checkpoints in {}", summary.run_dir.display());
    Ok(())
}
