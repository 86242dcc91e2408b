//! The reconstruction network with and without an attention map, on an
//! input whose size is not a multiple of four.

use scanet::autograd::{ParamBuilder, Tensor};
use scanet::srn::{Srn, SrnConfig};

fn main() -> scanet::Result<()> {
    let cfg = SrnConfig {
        base_channels: 32,
        n_res_blocks: 2,
        ..SrnConfig::default()
    };
    let mut pb = ParamBuilder::<f32>::new(0);
    let srn = Srn::new(&mut pb, &cfg)?;
    let store = pb.finish();

    let x = Tensor::full(&[1, 3, 30, 45], 0.6);
    let plain = srn.forward(&x, None)?;
    // A uniform map of ones leaves every injection point unchanged.
    let ones = Tensor::ones(&[1, 1, 30, 45]);
    let gated = srn.forward(&x, Some(&ones))?;
    let diff = plain
        .data()
        .iter()
        .zip(gated.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f32::max);
    println!("input {:?} -> output {:?}", x.shape(), plain.shape());
    println!("max |with M=1 - without M| = {diff:e}");
    println!("{} parameters, padding for 30x45: {:?}", store.num_scalars(), Srn::<f32>::padding_for(30, 45));
    Ok(())
}
