use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scanet::agn::{Agn, AgnConfig, ChannelAttention, DualAttentionUnit, PixelAttention};
use scanet::autograd::{Conv2dSpec, ParamBuilder, Tensor};
use scanet::srn::{Srn, SrnConfig};
use scanet::{Generator, ModelConfig};

fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::from_vec((0..n).map(|_| rng.gen::<f64>()).collect(), shape).unwrap()
}

fn agn_cfg(channels: usize) -> AgnConfig {
    AgnConfig {
        channels,
        reduction: 2,
        ..AgnConfig::default()
    }
}

fn srn_cfg() -> SrnConfig {
    SrnConfig {
        base_channels: 8,
        n_res_blocks: 1,
        ..SrnConfig::default()
    }
}

#[test]
fn attention_blocks_preserve_shape_and_gate_strictly_inside_unit_interval() {
    let cfg = agn_cfg(16);
    let mut pb = ParamBuilder::<f64>::new(1);
    let ca = pb.scope("ca", |pb| ChannelAttention::new(pb, &cfg));
    let pa = pb.scope("pa", |pb| PixelAttention::new(pb, &cfg));
    let x = random(&[1, 16, 32, 32], 2);
    assert_eq!(ca.forward(&x).unwrap().shape(), &[1, 16, 32, 32]);
    assert_eq!(pa.forward(&x).unwrap().shape(), &[1, 16, 32, 32]);
    let w = ca.gate(&x).unwrap();
    assert_eq!(w.shape(), &[1, 16, 1, 1]);
    assert!(w.data().iter().all(|&v| v > 0.0 && v < 1.0));
    let p = pa.gate(&x).unwrap();
    assert_eq!(p.shape(), &[1, 1, 32, 32]);
    assert!(p.data().iter().all(|&v| v > 0.0 && v < 1.0));
    assert!(ca.forward(&random(&[1, 8, 32, 32], 0)).is_err());
    assert!(pa.forward(&random(&[1, 8, 32, 32], 0)).is_err());
}

#[test]
fn per_channel_pixel_gate_has_one_map_per_channel() {
    let cfg = AgnConfig {
        per_channel_pixel_gate: true,
        ..agn_cfg(8)
    };
    let mut pb = ParamBuilder::<f64>::new(1);
    let pa = PixelAttention::new(&mut pb, &cfg);
    assert_eq!(pa.gate(&random(&[1, 8, 16, 16], 3)).unwrap().shape(), &[1, 8, 16, 16]);
}

#[test]
fn pixel_gate_sees_at_least_seven_pixels_away() {
    let cfg = agn_cfg(4);
    let mut pb = ParamBuilder::<f64>::new(5);
    let pa = PixelAttention::new(&mut pb, &cfg);
    // keep the merge ReLU active so the probe is not masked by dead units
    let store = pb.finish();
    store.get("merge.bias").unwrap().set(vec![1.0; cfg.bottleneck()]).unwrap();
    let x = random(&[1, 4, 33, 33], 6);
    let mut bumped = x.to_vec();
    for c in 0..4 {
        bumped[c * 33 * 33 + 16 * 33 + 16] += 1.0;
    }
    let y = Tensor::from_vec(bumped, &[1, 4, 33, 33]).unwrap();
    let (g0, g1) = (pa.gate(&x).unwrap(), pa.gate(&y).unwrap());
    let reach = (0..33 * 33)
        .filter(|&i| (g0.data()[i] - g1.data()[i]).abs() > 1e-12)
        .map(|i| (i / 33).abs_diff(16).max((i % 33).abs_diff(16)))
        .max()
        .unwrap();
    assert!(reach >= 7, "gate reach {reach}");
}

#[test]
fn zero_weight_dau_is_the_identity() {
    let cfg = agn_cfg(8);
    let mut pb = ParamBuilder::<f64>::new(0);
    let dau = DualAttentionUnit::new(&mut pb, &cfg);
    pb.finish().fill(0.0).unwrap();
    let x = random(&[2, 8, 16, 16], 9);
    assert_eq!(dau.forward(&x).unwrap().data(), x.data());
}

#[test]
fn zero_input_with_zero_biases_gates_to_zero() {
    let cfg = agn_cfg(8);
    let mut pb = ParamBuilder::<f64>::new(0);
    let ca = ChannelAttention::new(&mut pb, &cfg);
    for (name, p) in pb.finish().iter() {
        if name.ends_with("bias") {
            p.set(vec![0.0; p.numel()]).unwrap();
        }
    }
    let out = ca.forward(&Tensor::zeros(&[1, 8, 16, 16])).unwrap();
    assert!(out.data().iter().all(|&v| v == 0.0));
}

#[test]
fn agn_map_is_single_channel_and_sized_like_the_input() {
    let mut pb = ParamBuilder::<f64>::new(0);
    let agn = Agn::new(&mut pb, &agn_cfg(4)).unwrap();
    let (m, f) = agn.forward(&random(&[1, 3, 64, 64], 1)).unwrap();
    assert_eq!(m.shape(), &[1, 1, 64, 64]);
    assert_eq!(f.shape(), &[1, 4, 64, 64]);
    assert!(m.data().iter().all(|&v| v > 0.0 && v < 1.0));
    assert!(agn.forward(&random(&[1, 3, 15, 64], 1)).is_err());
    assert!(agn.forward(&random(&[1, 1, 32, 32], 1)).is_err());
}

#[test]
fn srn_encoder_quarters_the_resolution() {
    let mut pb = ParamBuilder::<f64>::new(0);
    let srn = Srn::new(&mut pb, &srn_cfg()).unwrap();
    assert_eq!(srn.encode(&random(&[1, 3, 64, 64], 1), None).unwrap().shape(), &[1, 8, 16, 16]);
    assert_eq!(srn.encode(&random(&[1, 3, 100, 100], 1), None).unwrap().shape(), &[1, 8, 25, 25]);
    assert_eq!(srn.decode(&random(&[1, 8, 16, 16], 1)).unwrap().shape(), &[1, 3, 64, 64]);
    assert_eq!(Srn::<f64>::padding_for(66, 66), (2, 2));
    assert_eq!(srn.encode(&random(&[1, 3, 68, 68], 1), None).unwrap().shape(), &[1, 8, 17, 17]);
    assert!(srn.encode(&random(&[1, 3, 66, 66], 1), None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn srn_round_trip_keeps_size_and_range(h in 4usize..40, w in 4usize..40, seed in any::<u64>()) {
        let mut pb = ParamBuilder::<f64>::new(seed);
        let srn = Srn::new(&mut pb, &srn_cfg()).unwrap();
        let m = random(&[1, 1, h, w], seed ^ 1);
        let out = srn.forward(&random(&[1, 3, h, w], seed), Some(&m)).unwrap();
        prop_assert_eq!(out.shape(), &[1, 3, h, w]);
        prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn srn_rejects_a_mismatched_map() {
    let mut pb = ParamBuilder::<f64>::new(0);
    let srn = Srn::new(&mut pb, &srn_cfg()).unwrap();
    let m = random(&[1, 1, 32, 30], 0);
    assert!(srn.forward(&random(&[1, 3, 32, 32], 0), Some(&m)).is_err());
}

#[test]
fn attention_identities_at_alpha_zero_and_unit_map() {
    let mut pb = ParamBuilder::<f64>::new(4);
    let srn = Srn::new(&mut pb, &srn_cfg()).unwrap();
    let x = random(&[1, 3, 32, 32], 7);
    let plain = srn.forward(&x, None).unwrap();
    let ones = srn.forward(&x, Some(&Tensor::ones(&[1, 1, 32, 32]))).unwrap();
    assert_eq!(ones.data(), plain.data());
    let m = random(&[1, 1, 32, 32], 8);
    assert_ne!(srn.forward(&x, Some(&m)).unwrap().data(), plain.data());
    for (_, a) in &srn.alphas {
        a.set(vec![0.0]).unwrap();
    }
    assert_eq!(srn.forward(&x, Some(&m)).unwrap().data(), plain.data());
}

#[test]
fn integer_offsets_shift_the_sampling_grid() {
    let (c, h, w) = (2, 9, 9);
    let x = random(&[1, c, h, w], 11);
    let weight = random(&[3, c, 3, 3], 12);
    // dy = +1 on every tap
    let mut off = vec![0.0; 18 * h * w];
    for t in 0..9 {
        off[(2 * t) * h * w..(2 * t + 1) * h * w].fill(1.0);
    }
    let off = Tensor::from_vec(off, &[1, 18, h, w]).unwrap();
    let deformed = x.deform_conv2d(&off, &weight, None, Conv2dSpec::same(3)).unwrap();
    let regular = x.conv2d(&weight, None, Conv2dSpec::same(3)).unwrap();
    for o in 0..3 {
        for y in 1..h - 2 {
            for xx in 1..w - 1 {
                let a = deformed.data()[(o * h + y) * w + xx];
                let b = regular.data()[(o * h + y + 1) * w + xx];
                assert!((a - b).abs() < 1e-12, "({o},{y},{xx}): {a} vs {b}");
            }
        }
    }
}

#[test]
fn every_parameter_receives_gradient() {
    let g = Generator::<f64>::new(&ModelConfig::tiny(), true, 3).unwrap();
    // open the offset predictors so the sampling path is not degenerate
    for d in &g.srn.deform {
        let w = &d.offsets.weight;
        let n = w.numel();
        w.set((0..n).map(|i| 0.01 * ((i % 7) as f64 - 3.0)).collect()).unwrap();
    }
    let x = random(&[2, 3, 32, 32], 5);
    let target = random(&[2, 3, 32, 32], 6);
    let out = g.forward(&x).unwrap();
    let loss = out.dehazed.sub(&target).unwrap().sqr().mean_all();
    let loss = loss.add(&out.attention.unwrap().mean_all()).unwrap();
    let grads = loss.backward().unwrap();
    for (name, p) in g.params.iter() {
        let gr = grads.get(&p.tensor()).unwrap_or_else(|| panic!("{name} has no gradient"));
        assert!(gr.data().iter().any(|&v| v != 0.0), "{name} gradient is all zero");
    }
}

#[test]
fn forward_is_deterministic() {
    let g = Generator::<f32>::new(&ModelConfig::tiny(), true, 3).unwrap();
    let x = Tensor::<f32>::from_vec((0..3 * 24 * 24).map(|i| (i % 13) as f32 / 13.0).collect(), &[1, 3, 24, 24]).unwrap();
    let a = g.forward(&x).unwrap();
    let b = g.forward(&x).unwrap();
    assert_eq!(a.dehazed.data(), b.dehazed.data());
    assert_eq!(a.attention.unwrap().data(), b.attention.unwrap().data());
}

#[test]
fn generator_without_agn_has_no_gates() {
    let g = Generator::<f32>::new(&ModelConfig::tiny(), false, 0).unwrap();
    assert!(g.agn.is_none());
    assert!(g.srn.alphas.is_empty());
    assert!(g.params.iter().all(|(n, _)| n.starts_with("srn.")));
    let with = Generator::<f32>::new(&ModelConfig::tiny(), true, 0).unwrap();
    assert!(with.num_parameters() > g.num_parameters());
}
