//! Runs an untrained attention generator on a hazy image and reports the
//! map's shape, range and parameter count.

use scanet::agn::{Agn, AgnConfig};
use scanet::autograd::ParamBuilder;
use scanet::image::{from_tensor, to_tensor};
use scanet::synth::{make_pair, HazeOptions};

fn main() -> scanet::Result<()> {
    let (pair, _) = make_pair(64, 1, &HazeOptions::default())?;
    let mut pb = ParamBuilder::<f32>::new(0);
    let agn = pb.scope("agn", |pb| Agn::new(pb, &AgnConfig::default()))?;
    let params = pb.finish();

    let x = to_tensor(&[&pair.hazy])?;
    let (m, features) = agn.forward(&x)?;
    let map = from_tensor(&m)?.remove(0);
    let (lo, hi) = map
        .data
        .iter()
        .fold((f32::MAX, f32::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    println!("attention {:?}, features {:?}", m.shape(), features.shape());
    println!("values in [{lo:.4}, {hi:.4}], {} parameters", params.num_scalars());
    Ok(())
}
