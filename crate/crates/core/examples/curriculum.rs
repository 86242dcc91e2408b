//! Prints the attention blend weight across a range of attention losses,
//! inside and outside the warmup window.

use scanet::curriculum::{lambda_schedule, CurriculumConfig};

fn main() -> scanet::Result<()> {
    let cfg = CurriculumConfig::default();
    println!("  L^a    lambda(warmup)  lambda(after)");
    for i in 0..=12 {
        let l = 0.01 * i as f64;
        println!(
            "{l:6.3}  {:14.3}  {:13.3}",
            lambda_schedule(l, 0.1, &cfg)?,
            lambda_schedule(l, 0.5, &cfg)?
        );
    }
    Ok(())
}
