use proptest::prelude::*;
use scanet::autograd::{ParamBuilder, Tensor};
use scanet::losses::{
    adversarial_from_probs, discriminator_loss, joint_loss, joint_value, ms_ssim, perceptual_from_features,
    perceptual_loss, smooth_l1, Discriminator, FeatureExtractor, LossTerms, LossWeights, MsSsimConfig,
};

fn t(data: Vec<f64>, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_vec(data, shape).unwrap()
}

fn scalar_sl1(d: f64) -> f64 {
    smooth_l1(&t(vec![d], &[1]), &t(vec![0.0], &[1])).unwrap().item().unwrap()
}

proptest! {
    #[test]
    fn smooth_l1_is_symmetric_and_nonnegative(
        a in proptest::collection::vec(-3.0f64..3.0, 8),
        b in proptest::collection::vec(-3.0f64..3.0, 8),
    ) {
        let (x, y) = (t(a, &[1, 2, 2, 2]), t(b, &[1, 2, 2, 2]));
        let l = smooth_l1(&x, &y).unwrap().item().unwrap();
        let r = smooth_l1(&y, &x).unwrap().item().unwrap();
        prop_assert!(l >= 0.0);
        prop_assert!((l - r).abs() < 1e-12);
    }

    #[test]
    fn smooth_l1_slope_is_bounded_by_one(d in -4.0f64..4.0, e in 1e-6f64..1e-2) {
        let (a, b) = (scalar_sl1(d), scalar_sl1(d + e));
        prop_assert!((b - a).abs() <= e * (1.0 + 1e-9));
    }

    #[test]
    fn ms_ssim_is_symmetric(
        a in proptest::collection::vec(0.0f64..1.0, 3 * 24 * 24),
        b in proptest::collection::vec(0.0f64..1.0, 3 * 24 * 24),
    ) {
        let cfg = MsSsimConfig { window: 5, scales: 2, ..MsSsimConfig::default() };
        let (x, y) = (t(a, &[1, 3, 24, 24]), t(b, &[1, 3, 24, 24]));
        let s = ms_ssim(&x, &y, &cfg).unwrap().item().unwrap();
        let r = ms_ssim(&y, &x, &cfg).unwrap().item().unwrap();
        prop_assert!((s - r).abs() < 1e-10);
        prop_assert!(s <= 1.0 + 1e-9);
    }

    #[test]
    fn joint_is_linear_in_weights(c in proptest::array::uniform5(0.0f64..2.0), k in 0.0f64..4.0) {
        let w = LossWeights::default();
        let scaled = LossWeights {
            sl1: k * w.sl1,
            sl1_a: k * w.sl1_a,
            perceptual: k * w.perceptual,
            msssim: k * w.msssim,
            adversarial: k * w.adversarial,
        };
        let a = joint_value(c, &w).unwrap();
        let b = joint_value(c, &scaled).unwrap();
        prop_assert!((b - k * a).abs() < 1e-9);
    }

    #[test]
    fn perceptual_of_a_constant_offset_is_its_square(delta in -2.0f64..2.0) {
        let a = t(vec![0.3; 2 * 4 * 4], &[1, 2, 4, 4]);
        let b = t(vec![0.3 + delta; 2 * 4 * 4], &[1, 2, 4, 4]);
        let c = t(vec![1.0; 8 * 2 * 2], &[1, 8, 2, 2]);
        let d = t(vec![1.0 + delta; 8 * 2 * 2], &[1, 8, 2, 2]);
        let v = perceptual_from_features(&[a, c], &[b, d]).unwrap().item().unwrap();
        prop_assert!((v - delta * delta).abs() < 1e-9);
    }
}

#[test]
fn smooth_l1_reference_points() {
    assert!((scalar_sl1(0.5) - 0.125).abs() < 1e-12);
    assert!((scalar_sl1(-2.0) - 1.5).abs() < 1e-12);
    assert_eq!(scalar_sl1(0.0), 0.0);
    // value and slope agree on both sides of the switch at |q| = 1
    let eps = 1e-7;
    assert!((scalar_sl1(1.0 - eps) - scalar_sl1(1.0 + eps)).abs() < 3e-7);
}

#[test]
fn ms_ssim_of_an_image_with_itself_is_one() {
    let cfg = MsSsimConfig::default();
    let n = 3 * 176 * 176;
    let x = t((0..n).map(|i| ((i * 37) % 101) as f64 / 100.0).collect(), &[1, 3, 176, 176]);
    let s = ms_ssim(&x, &x, &cfg).unwrap().item().unwrap();
    assert!((s - 1.0).abs() < 1e-9, "{s}");
}

#[test]
fn ms_ssim_rejects_small_inputs() {
    let cfg = MsSsimConfig::default();
    assert_eq!(cfg.min_size(), 176);
    let x = Tensor::<f64>::zeros(&[1, 3, 175, 200]);
    assert!(ms_ssim(&x, &x, &cfg).is_err());
}

#[test]
fn discriminator_scores_an_eight_by_eight_grid() {
    let mut pb = ParamBuilder::<f32>::new(0);
    let d = Discriminator::new(&mut pb);
    let out = d.forward(&Tensor::zeros(&[1, 3, 64, 64])).unwrap();
    assert_eq!(out.shape(), &[1, 1, 8, 8]);
    assert!(out.data().iter().all(|&p| p > 0.0 && p < 1.0));
}

#[test]
fn adversarial_reference_values() {
    let half = t(vec![0.5; 4], &[1, 1, 2, 2]);
    let one = t(vec![1.0; 4], &[1, 1, 2, 2]);
    let zero = t(vec![0.0; 4], &[1, 1, 2, 2]);
    let ln2 = std::f64::consts::LN_2;
    assert!((adversarial_from_probs(&half).item().unwrap() - ln2).abs() < 1e-12);
    assert!(adversarial_from_probs(&one).item().unwrap() < 1e-6);
    // perfect discriminator, up to the probability clamp
    assert!(discriminator_loss(&one, &zero).unwrap().item().unwrap() < 1e-6);
    assert!((discriminator_loss(&half, &half).unwrap().item().unwrap() - 2.0 * ln2).abs() < 1e-12);
}

#[test]
fn disabled_terms_drop_out_of_the_joint_loss() {
    let w = LossWeights::default();
    let terms = LossTerms {
        sl1: Tensor::<f64>::scalar(0.2),
        sl1_a: None,
        perceptual: Some(Tensor::scalar(1.0)),
        msssim: None,
        adversarial: None,
    };
    let (j, report) = joint_loss(&terms, &w).unwrap();
    assert!((j.item().unwrap() - (0.2 + 0.01)).abs() < 1e-12);
    assert_eq!(report.sl1_a, 0.0);
    assert_eq!(report.msssim, 0.0);
    assert!((report.joint - 0.21).abs() < 1e-12);
}

#[test]
fn non_finite_terms_are_reported() {
    let terms = LossTerms {
        sl1: Tensor::<f64>::scalar(f64::NAN),
        sl1_a: None,
        perceptual: None,
        msssim: None,
        adversarial: None,
    };
    assert!(joint_loss(&terms, &LossWeights::default()).is_err());
    assert!(joint_value([0.0, f64::INFINITY, 0.0, 0.0, 0.0], &LossWeights::default()).is_err());
}

#[test]
fn perceptual_loss_vanishes_on_identical_inputs() {
    let fx = FeatureExtractor::<f64>::random(3);
    let x = t((0..3 * 32 * 32).map(|i| (i % 17) as f64 / 16.0).collect(), &[1, 3, 32, 32]);
    assert_eq!(perceptual_loss(&x, &x, &fx).unwrap().item().unwrap(), 0.0);
    let y = x.add_scalar(0.1);
    assert!(perceptual_loss(&x, &y, &fx).unwrap().item().unwrap() > 0.0);
}
