use proptest::prelude::*;
use scanet_autograd::{Conv2dSpec, ConvTranspose2dSpec, Tensor};

fn t(data: Vec<f64>, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_vec(data, shape).unwrap()
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn vals(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conv_is_linear_in_the_input(a in vals(2 * 36), b in vals(2 * 36), w in vals(3 * 2 * 9), s in -2.0f64..2.0) {
        let (x, y, w) = (t(a, &[1, 2, 6, 6]), t(b, &[1, 2, 6, 6]), t(w, &[3, 2, 3, 3]));
        let spec = Conv2dSpec::same(3);
        let lhs = x.scale(s).add(&y).unwrap().conv2d(&w, None, spec).unwrap();
        let rhs = x.conv2d(&w, None, spec).unwrap().scale(s).add(&y.conv2d(&w, None, spec).unwrap()).unwrap();
        for (p, q) in lhs.data().iter().zip(rhs.data()) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn transposed_conv_is_the_adjoint_of_strided_conv(x in vals(2 * 64), y in vals(3 * 16), w in vals(3 * 2 * 9)) {
        // <conv(x), y> == <x, conv^T(y)> for matching stride and padding
        let x = t(x, &[1, 2, 8, 8]);
        let y = t(y, &[1, 3, 4, 4]);
        let w = t(w, &[3, 2, 3, 3]);
        let down = x.conv2d(&w, None, Conv2dSpec::strided(2, 1)).unwrap();
        let up = y
            .conv_transpose2d(&w, None, ConvTranspose2dSpec { stride: 2, padding: 1, output_padding: 1 })
            .unwrap();
        prop_assert_eq!(up.shape(), x.shape());
        prop_assert!((dot(&down, &y) - dot(&x, &up)).abs() < 1e-10);
    }

    #[test]
    fn gradient_of_sum_of_squares(a in vals(12)) {
        let x = Tensor::var(a.clone(), &[1, 3, 2, 2]).unwrap();
        let g = x.sqr().sum_all().backward().unwrap();
        for (gi, ai) in g.get(&x).unwrap().data().iter().zip(&a) {
            prop_assert!((gi - 2.0 * ai).abs() < 1e-12);
        }
    }

    #[test]
    fn broadcast_add_commutes(a in vals(12), b in vals(3)) {
        let x = t(a, &[1, 3, 2, 2]);
        let y = t(b, &[1, 3, 1, 1]);
        prop_assert_eq!(x.add(&y).unwrap().to_vec(), y.add(&x).unwrap().to_vec());
    }

    #[test]
    fn reductions_agree(a in vals(24)) {
        let x = t(a.clone(), &[2, 3, 2, 2]);
        let total: f64 = a.iter().sum();
        prop_assert!((x.sum_all().item().unwrap() - total).abs() < 1e-12);
        prop_assert!((x.mean_all().item().unwrap() - total / 24.0).abs() < 1e-12);
        let spatial = x.sum_axes(&[2, 3]).unwrap();
        prop_assert_eq!(spatial.numel(), 6);
        prop_assert!((spatial.data().iter().sum::<f64>() - total).abs() < 1e-12);
    }

    #[test]
    fn narrow_and_cat_round_trip(a in vals(2 * 4 * 3)) {
        let x = t(a, &[1, 4, 2, 3]);
        let parts = [x.narrow(1, 0, 1).unwrap(), x.narrow(1, 1, 3).unwrap()];
        prop_assert_eq!(Tensor::cat(&parts, 1).unwrap().to_vec(), x.to_vec());
        prop_assert_eq!(x.reshape(&[4, 6]).unwrap().to_vec(), x.to_vec());
    }

    #[test]
    fn sigmoid_stays_in_unit_interval(a in proptest::collection::vec(-30.0f64..30.0, 8)) {
        let s = t(a, &[8]).sigmoid();
        prop_assert!(s.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn reflect_padding_mirrors_without_repeating_the_edge(a in vals(5)) {
        let x = t(a.clone(), &[1, 1, 1, 5]);
        let p = x.reflect_pad2d(0, 0, 2, 2).unwrap();
        let expect = [a[2], a[1], a[0], a[1], a[2], a[3], a[4], a[3], a[2]];
        prop_assert_eq!(p.to_vec(), expect.to_vec());
    }
}
