use proptest::prelude::*;
use scanet::attention::attention_target;
use scanet::data::{augment, extract_patches, load_pairs, patch_positions};
use scanet::synth::{generate_dataset, make_pair, HazeOptions};
use scanet::Image;

fn ramp(w: usize, h: usize) -> Image {
    let n = 3 * w * h;
    Image::new(w, h, 3, (0..n).map(|i| i as f32 / n as f32).collect()).unwrap()
}

#[test]
fn grid_counts_match_the_flush_to_edge_rule() {
    let xs = patch_positions(1600, 512, 400).unwrap();
    let ys = patch_positions(1200, 512, 400).unwrap();
    assert_eq!(xs.len() * ys.len(), 12);
    let img = ramp(512, 512);
    assert_eq!(extract_patches(&img, &img, 512, 400).unwrap().len(), 1);
    assert!(extract_patches(&img, &img, 513, 400).is_err());
    assert!(patch_positions(10, 4, 0).is_err());
}

proptest! {
    #[test]
    fn positions_cover_the_extent(len in 1usize..300, patch in 1usize..64, stride in 1usize..80) {
        prop_assume!(patch <= len);
        let pos = patch_positions(len, patch, stride).unwrap();
        prop_assert_eq!(pos[0], 0);
        prop_assert_eq!(*pos.last().unwrap(), len - patch);
        prop_assert!(pos.windows(2).all(|w| w[0] < w[1] && w[1] - w[0] <= stride));
    }

    #[test]
    fn four_quarter_turns_are_the_identity(w in 1usize..9, h in 1usize..9, flip in any::<bool>()) {
        let (a, b) = (ramp(w, h), ramp(w, h).map(|v| 1.0 - v));
        let (mut x, mut y) = (a.clone(), b.clone());
        for _ in 0..4 {
            (x, y) = augment(&x, &y, 90, false).unwrap();
        }
        prop_assert_eq!(&x, &a);
        prop_assert_eq!(&y, &b);
        let (fx, _) = augment(&a, &b, 0, flip).unwrap();
        let (ffx, _) = augment(&fx, &b, 0, flip).unwrap();
        prop_assert_eq!(ffx, a);
    }
}

#[test]
fn half_turn_is_both_flips() {
    let a = ramp(4, 4);
    let (r, _) = augment(&a, &a, 180, false).unwrap();
    assert_eq!(r, a.flip_horizontal().flip_vertical());
    let (q, _) = augment(&a, &a, 90, false).unwrap();
    assert_eq!((q.width, q.height), (4, 4));
    assert_ne!(q, a);
    assert!(augment(&a, &a, 45, false).is_err());
    assert!(augment(&a, &a, 360, false).is_err());
}

#[test]
fn patches_stay_aligned() {
    let (p, _) = make_pair(48, 3, &HazeOptions::default()).unwrap();
    let full = attention_target(&p.hazy, &p.clear).unwrap();
    for (i, (h, c)) in extract_patches(&p.hazy, &p.clear, 16, 16).unwrap().iter().enumerate() {
        let (y, x) = (16 * (i / 3), 16 * (i % 3));
        assert_eq!(attention_target(h, c).unwrap(), full.crop(y, x, 16, 16).unwrap());
    }
}

#[test]
fn generated_datasets_load_back() {
    let d = tempfile::tempdir().unwrap();
    generate_dataset(3, 24, d.path(), 2).unwrap();
    let pairs = load_pairs(d.path()).unwrap();
    assert_eq!(pairs.len(), 3);
    assert!(pairs.iter().all(|p| p.hazy.width == 24 && p.clear.same_shape(&p.hazy)));
    std::fs::remove_file(d.path().join("clear").join(&pairs[0].name)).unwrap();
    assert!(load_pairs(d.path()).is_err());
}
