//! Ground-truth attention map of one synthetic pair, saved next to the
//! transmission field that produced it.

use scanet::attention::attention_target;
use scanet::synth::{make_pair, HazeOptions};

fn main() -> scanet::Result<()> {
    let (pair, params) = make_pair(128, 3, &HazeOptions::default())?;
    let m = attention_target(&pair.hazy, &pair.clear)?;
    let mean = m.data.iter().sum::<f32>() / m.data.len() as f32;
    let max = m.data.iter().cloned().fold(0.0, f32::max);
    println!("pair seed {}  mean |dY| {mean:.4}  max {max:.4}", params.seed);

    // Denser haze (low t) should line up with large attention values.
    let (mut dense, mut thin) = ((0.0, 0), (0.0, 0));
    for (t, a) in pair.field.t.data.iter().zip(&m.data) {
        let bucket = if *t < 0.5 { &mut dense } else { &mut thin };
        bucket.0 += a;
        bucket.1 += 1;
    }
    println!(
        "mean attention where t < 0.5: {:.4}, elsewhere: {:.4}",
        dense.0 / dense.1.max(1) as f32,
        thin.0 / thin.1.max(1) as f32
    );
    m.save_png("attention_target.png".as_ref())?;
    pair.field.t.save_png("transmission.png".as_ref())?;
    Ok(())
}
