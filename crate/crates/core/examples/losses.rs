//! Evaluates every training loss on a hazy/clear pair and combines them.

use scanet::autograd::ParamBuilder;
use scanet::image::to_tensor;
use scanet::losses::{
    adversarial_loss, joint_loss, ms_ssim_loss, perceptual_loss, smooth_l1, Discriminator, FeatureExtractor,
    LossTerms, LossWeights, MsSsimConfig,
};
use scanet::synth::{make_pair, HazeOptions};

fn main() -> scanet::Result<()> {
    let (pair, _) = make_pair(176, 5, &HazeOptions::default())?;
    let pred = to_tensor::<f32>(&[&pair.hazy])?;
    let target = to_tensor::<f32>(&[&pair.clear])?;

    let fx = FeatureExtractor::random(0);
    let mut pb = ParamBuilder::new(1);
    let disc = Discriminator::new(&mut pb);
    let terms = LossTerms {
        sl1: smooth_l1(&pred, &target)?,
        sl1_a: None,
        perceptual: Some(perceptual_loss(&pred, &target, &fx)?),
        msssim: Some(ms_ssim_loss(&pred, &target, &MsSsimConfig::default())?),
        adversarial: Some(adversarial_loss(&target.sub(&pred)?, &disc)?),
    };
    let (_, report) = joint_loss(&terms, &LossWeights::default())?;
    println!("{report:#?}");
    Ok(())
}
