//! Writes a small synthetic dataset and prints its manifest summary.
//!
//!     cargo run --release --example synthetic_data -- /tmp/haze 8

use scanet::synth::generate_dataset;

fn main() -> scanet::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synthetic".into());
    let n = args.next().and_then(|s| s.parse().ok()).unwrap_or(8);
    let manifest = generate_dataset(n, 128, out.as_ref(), 7)?;
    for e in &manifest.pairs {
        println!(
            "{}  smoothness {:.2}  t_min {:.2}  airlight {:.2}",
            e.name, e.params.smoothness, e.params.t_min, e.params.airlight
        );
    }
    println!("{} pairs under {out}/{{clear,hazy}}, manifest.json alongside", manifest.pairs.len());
    Ok(())
}
