use scanet_autograd::{Conv2dSpec, Float, ParamBuilder, Tensor};

use super::PROB_EPS;
use crate::error::Result;
use crate::nn::Conv2d;

/// Patch classifier: three 4x4 stride-2 convolutions with LeakyReLU(0.2)
/// followed by a 3x3 convolution and a sigmoid. A 64x64 input yields an
/// 8x8 grid of probabilities.
pub struct Discriminator<T: Float> {
    convs: Vec<Conv2d<T>>,
    head: Conv2d<T>,
}

impl<T: Float> Discriminator<T> {
    pub const WIDTHS: [usize; 3] = [32, 64, 128];

    pub fn new(pb: &mut ParamBuilder<T>) -> Self {
        pb.scope("disc", |pb| {
            let mut cin = 3;
            let convs = Self::WIDTHS
                .iter()
                .enumerate()
                .map(|(i, &cout)| {
                    let c = Conv2d::new(pb, &format!("conv{i}"), cin, cout, 4, Conv2dSpec::strided(2, 1));
                    cin = cout;
                    c
                })
                .collect();
            Self {
                convs,
                head: Conv2d::new(pb, "head", cin, 1, 3, Conv2dSpec::same(3)),
            }
        })
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut f = x.clone();
        for c in &self.convs {
            f = c.forward(&f)?.leaky_relu(0.2);
        }
        Ok(self.head.forward(&f)?.sigmoid())
    }
}

/// Binary cross-entropy with real label 1 and fake label 0.
pub fn discriminator_loss<T: Float>(real_probs: &Tensor<T>, fake_probs: &Tensor<T>) -> Result<Tensor<T>> {
    let real = real_probs.clamp(PROB_EPS, 1.0 - PROB_EPS).ln().mean_all();
    let fake = fake_probs.clamp(PROB_EPS, 1.0 - PROB_EPS).neg().add_scalar(1.0).ln().mean_all();
    Ok(real.add(&fake)?.neg())
}
