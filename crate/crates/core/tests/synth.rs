use proptest::prelude::*;
use scanet::synth::{
    apply_haze, apply_haze_unclipped, generate_dataset, make_pair, make_transmission, Airlight, HazeOptions,
};
use scanet::Image;

fn img(w: usize, h: usize, c: usize, data: Vec<f32>) -> Image {
    Image::new(w, h, c, data).unwrap()
}

proptest! {
    #[test]
    fn transmission_respects_floor(seed in any::<u64>(), t_min in 0.05f64..0.9, smooth in 0.2f64..3.0) {
        let f = make_transmission(12, 9, smooth, t_min, seed).unwrap();
        for &v in &f.t.data {
            prop_assert!(v as f64 >= t_min - 1e-6 && v <= 1.0);
        }
    }

    #[test]
    fn haze_is_affine_in_the_clear_image(
        j in proptest::collection::vec(0.0f32..1.0, 12),
        k in proptest::collection::vec(0.0f32..1.0, 12),
        t in proptest::collection::vec(0.0f32..1.0, 4),
        a in 0.0f32..1.0,
        s in 0.0f32..1.0,
    ) {
        // I(sJ + (1-s)K) = s I(J) + (1-s) I(K) for fixed t and A.
        let (tj, tk) = (img(2, 2, 3, j.clone()), img(2, 2, 3, k.clone()));
        let tm = img(2, 2, 1, t);
        let air = Airlight::Scalar(a);
        let mix = img(2, 2, 3, j.iter().zip(&k).map(|(x, y)| s * x + (1.0 - s) * y).collect());
        let lhs = apply_haze_unclipped(&mix, &tm, &air).unwrap();
        let ij = apply_haze_unclipped(&tj, &tm, &air).unwrap();
        let ik = apply_haze_unclipped(&tk, &tm, &air).unwrap();
        for i in 0..12 {
            prop_assert!((lhs.data[i] - (s * ij.data[i] + (1.0 - s) * ik.data[i])).abs() < 1e-5);
        }
    }

    #[test]
    fn haze_moves_pixels_toward_the_airlight(
        j in proptest::collection::vec(0.0f32..1.0, 12),
        t in proptest::collection::vec(0.0f32..1.0, 4),
        a in 0.0f32..1.0,
    ) {
        let clear = img(2, 2, 3, j);
        let hazy = apply_haze(&clear, &img(2, 2, 1, t), &Airlight::Scalar(a)).unwrap();
        for (h, c) in hazy.data.iter().zip(&clear.data) {
            prop_assert!((0.0..=1.0).contains(h));
            prop_assert!((h - a).abs() <= (c - a).abs() + 1e-6);
        }
    }
}

#[test]
fn opaque_and_clear_limits() {
    let clear = Image::rgb(3, 3, [0.2, 0.5, 0.7]);
    let none = apply_haze(&clear, &img(3, 3, 1, vec![1.0; 9]), &Airlight::Scalar(0.9)).unwrap();
    assert_eq!(none, clear);
    let full = apply_haze(&clear, &img(3, 3, 1, vec![0.0; 9]), &Airlight::Scalar(1.0)).unwrap();
    assert!(full.data.iter().all(|&v| v == 1.0));
    let quarter = apply_haze(&Image::rgb(3, 3, [0.0; 3]), &img(3, 3, 1, vec![0.25; 9]), &Airlight::Scalar(1.0)).unwrap();
    assert!(quarter.data.iter().all(|&v| (v - 0.75).abs() < 1e-6));
}

#[test]
fn same_seed_same_pair() {
    let opts = HazeOptions::default();
    let (a, pa) = make_pair(32, 9, &opts).unwrap();
    let (b, pb) = make_pair(32, 9, &opts).unwrap();
    assert_eq!(a.hazy, b.hazy);
    assert_eq!(a.field.t, b.field.t);
    assert_eq!(pa, pb);
    let (c, _) = make_pair(32, 10, &opts).unwrap();
    assert_ne!(a.hazy, c.hazy);
}

#[test]
fn dataset_layout_and_reproducibility() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = generate_dataset(4, 32, a.path(), 7).unwrap();
    let mb = generate_dataset(4, 32, b.path(), 7).unwrap();
    assert_eq!(ma.pairs.len(), 4);
    for sub in ["clear", "hazy"] {
        let names: Vec<_> = std::fs::read_dir(a.path().join(sub)).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 4);
    }
    for (x, y) in ma.pairs.iter().zip(&mb.pairs) {
        assert_eq!(x.clear_sha256, y.clear_sha256);
        assert_eq!(x.hazy_sha256, y.hazy_sha256);
        let bytes_a = std::fs::read(a.path().join("hazy").join(&x.name)).unwrap();
        let bytes_b = std::fs::read(b.path().join("hazy").join(&y.name)).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }
    assert!(a.path().join("manifest.json").exists());
}

#[test]
fn empty_dataset() {
    let d = tempfile::tempdir().unwrap();
    let m = generate_dataset(0, 32, d.path(), 1).unwrap();
    assert!(m.pairs.is_empty());
    assert_eq!(std::fs::read_dir(d.path().join("hazy")).unwrap().count(), 0);
}
