//! PSNR and SSIM of a hazy image and of a lightly corrupted clear image
//! against the clear reference.

use scanet::metrics::{psnr, ssim, PSNR_CAP};
use scanet::synth::{make_pair, HazeOptions};

fn main() -> scanet::Result<()> {
    let (pair, _) = make_pair(96, 2, &HazeOptions::default())?;
    let noisy = pair.clear.map(|v| (v + 0.02).min(1.0));
    for (name, img) in [("hazy", &pair.hazy), ("offset", &noisy), ("clear", &pair.clear)] {
        println!(
            "{name:>6}: PSNR {:7.2} dB  SSIM {:.4}",
            psnr(img, &pair.clear, PSNR_CAP)?,
            ssim(img, &pair.clear)?
        );
    }
    Ok(())
}
