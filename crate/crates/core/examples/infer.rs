//! Trains a tiny model for a few steps, saves a checkpoint, reloads it and
//! dehazes a new image with it.

use scanet::synth::{generate_dataset, make_pair, HazeOptions};
use scanet::trainer::{dehaze_image, load_generator, train, TrainConfig};
use scanet::ModelConfig;

fn main() -> scanet::Result<()> {
    let root = std::env::temp_dir().join("scanet-example-infer");
    generate_dataset(2, 64, &root.join("data"), 3)?;
    let cfg = TrainConfig {
        name: "infer".into(),
        data: root.join("data"),
        out: root.clone(),
        epochs: 2,
        patch: 32,
        stride: 32,
        sample_every: 0,
        model: ModelConfig::tiny(),
        ..TrainConfig::default()
    };
    let summary = train(&cfg)?;

    let (generator, _) = load_generator(&summary.final_checkpoint)?;
    let (pair, _) = make_pair(80, 99, &HazeOptions::default())?;
    let (dehazed, attention) = dehaze_image(&generator, &pair.hazy)?;
    dehazed.save_png(&root.join("dehazed.png"))?;
    if let Some(m) = attention {
        m.save_png(&root.join("attention.png"))?;
    }
    println!("wrote {}", root.join("dehazed.png").display());
    Ok(())
}
