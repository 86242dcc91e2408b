use proptest::prelude::*;
use scanet::attention::{attention_target, rgb_to_y};
use scanet::Image;

fn rgb(data: Vec<f32>) -> Image {
    Image::new(3, 2, 3, data).unwrap()
}

proptest! {
    #[test]
    fn target_is_symmetric_and_bounded(
        a in proptest::collection::vec(0.0f32..1.0, 18),
        b in proptest::collection::vec(0.0f32..1.0, 18),
    ) {
        let (x, y) = (rgb(a), rgb(b));
        let m = attention_target(&x, &y).unwrap();
        let n = attention_target(&y, &x).unwrap();
        prop_assert_eq!(&m.data, &n.data);
        prop_assert!(m.data.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(m.channels, 1);
    }

    #[test]
    fn luma_is_linear(a in proptest::collection::vec(0.0f32..1.0, 18), s in 0.0f32..1.0) {
        let x = rgb(a);
        let y1 = rgb_to_y(&x).unwrap();
        let ys = rgb_to_y(&x.map(|v| v * s)).unwrap();
        for (p, q) in y1.data.iter().zip(&ys.data) {
            prop_assert!((p * s - q).abs() < 1e-5);
        }
    }
}

#[test]
fn identical_images_have_zero_attention() {
    let x = Image::rgb(4, 4, [0.3, 0.6, 0.1]);
    assert!(attention_target(&x, &x).unwrap().data.iter().all(|&v| v == 0.0));
}

#[test]
fn white_over_black_is_all_ones() {
    let m = attention_target(&Image::rgb(4, 4, [1.0; 3]), &Image::rgb(4, 4, [0.0; 3])).unwrap();
    assert!(m.data.iter().all(|&v| (v - 1.0).abs() < 1e-6));
}

#[test]
fn shape_mismatch_is_an_error() {
    assert!(attention_target(&Image::rgb(4, 4, [0.0; 3]), &Image::rgb(4, 5, [0.0; 3])).is_err());
}
