//! Parameter and FLOP estimates of the standard model under both FLOP
//! conventions, plus the ten most expensive layers.

use scanet::metrics::FlopConvention;
use scanet::{Generator, ModelConfig};

fn main() -> scanet::Result<()> {
    let (h, w) = (1200, 1600);
    let g = Generator::<f32>::new(&ModelConfig::default(), true, 0)?;
    for conv in [FlopConvention::TwoPerMac, FlopConvention::HalfMac] {
        println!("[{conv:?}]\n{}", g.budget(h, w, conv));
    }
    let mut layers = g.count_macs(h, w).layers;
    layers.sort_by(|a, b| b.1.cmp(&a.1));
    for (name, macs) in layers.iter().take(10) {
        println!("{name:<28} {:8.2} GMAC", *macs as f64 / 1e9);
    }
    Ok(())
}
