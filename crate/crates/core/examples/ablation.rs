//! Compares the bare reconstruction network with the attention-guided,
//! curriculum-scheduled variant on a small synthetic set.

use scanet::data::load_pairs;
use scanet::synth::generate_dataset;
use scanet::trainer::{run_ablation, TrainConfig};
use scanet::ModelConfig;

fn main() -> scanet::Result<()> {
    let root = std::env::temp_dir().join("scanet-example-ablation");
    generate_dataset(4, 64, &root.join("data"), 11)?;
    let pairs = load_pairs(&root.join("data"))?;
    let base = TrainConfig {
        name: "ablation".into(),
        out: root,
        epochs: 12,
        max_steps: Some(40),
        patch: 48,
        stride: 16,
        lr: 1e-3,
        sample_every: 0,
        checkpoint_every: 0,
        model: ModelConfig::small(),
        ..TrainConfig::default()
    };
    let table = run_ablation(&base, &[1, 4], &[1], &pairs)?;
    print!("{}", table.to_markdown());
    Ok(())
}
