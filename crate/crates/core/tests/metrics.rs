use proptest::prelude::*;
use scanet::autograd::{Conv2dSpec, ParamBuilder, ParamStore};
use scanet::metrics::{count_parameters, evaluate, psnr, ssim, FlopConvention, MacCounter, PSNR_CAP};
use scanet::nn::Conv2d;
use scanet::Image;

fn noisy(base: &Image, amp: f32, seed: u32) -> Image {
    let mut s = seed.wrapping_mul(2654435761).max(1);
    let data = base
        .data
        .iter()
        .map(|&v| {
            s ^= s << 13;
            s ^= s >> 17;
            s ^= s << 5;
            let u = (s as f32 / u32::MAX as f32) * 2.0 - 1.0;
            (v + amp * u).clamp(0.0, 1.0)
        })
        .collect();
    Image::new(base.width, base.height, base.channels, data).unwrap()
}

fn scene(size: usize) -> Image {
    let mut data = Vec::with_capacity(3 * size * size);
    for c in 0..3 {
        for y in 0..size {
            for x in 0..size {
                data.push(((x * (c + 1) + y * 3) % size) as f32 / size as f32);
            }
        }
    }
    Image::new(size, size, 3, data).unwrap()
}

proptest! {
    #[test]
    fn psnr_is_symmetric(seed in 1u32..10_000, amp in 0.01f32..0.5) {
        let a = scene(16);
        let b = noisy(&a, amp, seed);
        prop_assert_eq!(psnr(&a, &b, PSNR_CAP).unwrap(), psnr(&b, &a, PSNR_CAP).unwrap());
    }

    #[test]
    fn psnr_falls_as_noise_grows(seed in 1u32..10_000, amp in 0.01f32..0.2) {
        let a = scene(16);
        let small = psnr(&noisy(&a, amp, seed), &a, PSNR_CAP).unwrap();
        let large = psnr(&noisy(&a, amp * 2.0, seed), &a, PSNR_CAP).unwrap();
        prop_assert!(large <= small + 1e-9);
    }

    #[test]
    fn ssim_is_symmetric_and_bounded(seed in 1u32..10_000, amp in 0.0f32..0.5) {
        let a = scene(16);
        let b = noisy(&a, amp, seed);
        let (s, r) = (ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        prop_assert!((s - r).abs() < 1e-12);
        prop_assert!(s <= 1.0 + 1e-12 && s >= -1.0);
    }
}

#[test]
fn psnr_reference_values() {
    let a = Image::rgb(4, 4, [0.3, 0.3, 0.3]);
    assert_eq!(psnr(&a, &a, PSNR_CAP).unwrap(), PSNR_CAP);
    let black = Image::rgb(4, 4, [0.0; 3]);
    let white = Image::rgb(4, 4, [1.0; 3]);
    assert!(psnr(&black, &white, PSNR_CAP).unwrap().abs() < 1e-12);
    let half = Image::rgb(4, 4, [0.5; 3]);
    // MSE 0.25 -> 6.02 dB
    assert!((psnr(&black, &half, PSNR_CAP).unwrap() - 10.0 * 4f64.log10()).abs() < 1e-9);
}

#[test]
fn ssim_reference_values() {
    let a = scene(32);
    assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    let neg = a.map(|v| 1.0 - v);
    assert!(ssim(&a, &neg).unwrap() < 0.1);
    assert!(ssim(&Image::rgb(8, 8, [0.0; 3]), &Image::rgb(8, 8, [0.0; 3])).is_err());
}

#[test]
fn evaluation_averages_per_image_scores() {
    let a = scene(16);
    let b = noisy(&a, 0.1, 5);
    let r = evaluate([("x".to_string(), &a, &a), ("y".to_string(), &b, &a)]).unwrap();
    assert_eq!(r.per_image.len(), 2);
    assert!((r.psnr - (r.per_image[0].psnr + r.per_image[1].psnr) / 2.0).abs() < 1e-12);
    assert!((r.ssim - (r.per_image[0].ssim + r.per_image[1].ssim) / 2.0).abs() < 1e-12);
}

#[test]
fn conv_budget_reference_counts() {
    let mut pb = ParamBuilder::<f32>::new(0);
    let conv = Conv2d::new(&mut pb, "c", 3, 16, 3, Conv2dSpec::same(3));
    let store = pb.finish();
    assert_eq!(count_parameters(&store), 448);
    let mut c = MacCounter::default();
    assert_eq!(conv.account("c", 64, 64, &mut c), (64, 64));
    assert_eq!(FlopConvention::TwoPerMac.flops(c.total()), 3_538_944.0);
    assert_eq!(FlopConvention::HalfMac.flops(c.total()), 3_538_944.0 / 4.0);
}

#[test]
fn empty_model_has_no_cost() {
    assert_eq!(count_parameters(&ParamStore::<f32>::new()), 0);
    assert_eq!(MacCounter::default().total(), 0);
}
