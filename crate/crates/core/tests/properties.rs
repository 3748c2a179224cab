mod common;

use std::collections::HashSet;

use common::enumerate_confusion;
use proptest::prelude::*;
use retseg::adam::{adam_step, AdamConfig};
use retseg::augment::{flip, split_dataset, split_grouped, Axis, SplitCounts};
use retseg::dataset::{DatasetManifest, ManifestEntry, Transform};
use retseg::filters::{apply_approach, gaussian_blur, Approach, FilterConfig, GaussianParams};
use retseg::metrics::{confusion, hard_metrics};
use retseg::nn::soft_dice_loss;
use retseg::raster::{load_image, resize_bilinear, resize_nearest, save_image, BinaryMask, GrayImage, GrayMode};
use retseg::tensor::Tensor4;
use retseg::trainer::binarize;

fn gray(max_side: usize) -> impl Strategy<Value = GrayImage> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        prop::collection::vec(0.0f32..=1.0, w * h).prop_map(move |d| GrayImage::new(w, h, d).unwrap())
    })
}

fn mask_pair(max_side: usize) -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(w, h)| {
        let m = move || prop::collection::vec(0u8..=1, w * h).prop_map(move |d| BinaryMask::new(w, h, d).unwrap());
        (m(), m())
    })
}

fn manifest(originals: usize) -> DatasetManifest {
    let transforms = [Transform::Original, Transform::HFlip, Transform::VFlip];
    let entries = (0..originals)
        .flat_map(|o| {
            transforms.iter().map(move |&t| ManifestEntry {
                image: format!("img/{o}_{t}.png").into(),
                mask: format!("mask/{o}_{t}.png").into(),
                origin_id: o,
                transform: t,
            })
        })
        .collect();
    DatasetManifest { entries }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flip_is_an_involution(img in gray(12)) {
        for axis in [Axis::Horizontal, Axis::Vertical] {
            prop_assert_eq!(&flip(&flip(&img, axis), axis), &img);
        }
    }

    #[test]
    fn blur_commutes_with_flips(img in gray(12), sigma in 0.3f32..2.5) {
        let p = GaussianParams::with_sigma(sigma);
        for axis in [Axis::Horizontal, Axis::Vertical] {
            prop_assert_eq!(gaussian_blur(&flip(&img, axis), &p).unwrap(), flip(&gaussian_blur(&img, &p).unwrap(), axis));
        }
    }

    #[test]
    fn approaches_keep_dims_and_range(img in gray(20)) {
        for a in Approach::ALL {
            let out = apply_approach(&img, a, &FilterConfig::default()).unwrap();
            prop_assert_eq!(out.dims(), img.dims());
            prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn png_round_trip_is_exact_on_8bit_levels(w in 1usize..10, h in 1usize..10, seed in any::<u64>()) {
        let levels: Vec<f32> = (0..w * h).map(|i| ((seed.wrapping_mul(31).wrapping_add(i as u64 * 97)) % 256) as f32 / 255.0).collect();
        let img = GrayImage::new(w, h, levels).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for ext in ["png", "pgm"] {
            let path = dir.path().join(format!("x.{ext}"));
            save_image(&img, &path).unwrap();
            prop_assert_eq!(&load_image(&path, GrayMode::GreenChannel).unwrap(), &img);
        }
    }

    #[test]
    fn resize_has_target_dims_and_identity_at_same_size(img in gray(10), ow in 1usize..16, oh in 1usize..16) {
        let r = resize_bilinear(&img, ow, oh).unwrap();
        prop_assert_eq!(r.dims(), (ow, oh));
        prop_assert!(r.data().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(&resize_bilinear(&img, img.width(), img.height()).unwrap(), &img);
        let m = BinaryMask::from_fn(img.width(), img.height(), |x, y| img.get(x, y) > 0.5).unwrap();
        prop_assert_eq!(&resize_nearest(&m, m.width(), m.height()).unwrap(), &m);
        prop_assert!(resize_nearest(&m, ow, oh).unwrap().data().iter().all(|&v| v <= 1));
    }

    #[test]
    fn metrics_are_bounded_and_match_enumeration((pred, gt) in mask_pair(16)) {
        let c = confusion(&pred, &gt).unwrap();
        prop_assert_eq!(c, enumerate_confusion(&pred, &gt));
        prop_assert_eq!(c.total(), pred.data().len() as u64);
        let m = hard_metrics(&c).unwrap();
        for v in [m.iou, m.accuracy, m.recall, m.dice] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!((m.dice - 2.0 * m.iou / (1.0 + m.iou)).abs() <= 1e-12);
        let same = hard_metrics(&confusion(&gt, &gt).unwrap()).unwrap();
        prop_assert_eq!((same.iou, same.accuracy, same.dice), (1.0, 1.0, 1.0));
    }

    #[test]
    fn dice_loss_is_in_unit_interval(probs in prop::collection::vec(0.0f32..=1.0, 16), bits in prop::collection::vec(0u8..=1, 16)) {
        let p = Tensor4::from_vec([1, 1, 4, 4], probs).unwrap();
        let t = Tensor4::from_vec([1, 1, 4, 4], bits.iter().map(|&b| b as f32).collect()).unwrap();
        let (loss, _) = soft_dice_loss(&p, &t).unwrap();
        prop_assert!((0.0..1.0).contains(&loss));
    }

    #[test]
    fn binarize_is_monotone_in_threshold(probs in prop::collection::vec(0.0f32..=1.0, 36), a in 0.0f32..=1.0, b in 0.0f32..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let ml = binarize(&probs, 6, 6, lo).unwrap();
        let mh = binarize(&probs, 6, 6, hi).unwrap();
        prop_assert!(mh.data().iter().zip(ml.data()).all(|(&h, &l)| h <= l));
    }

    #[test]
    fn split_is_a_partition(originals in 1usize..30, tr in 0usize..=100, va in 0usize..=100, seed in any::<u64>()) {
        let m = manifest(originals);
        let n = m.len();
        let train = tr * n / 100;
        let val = (va * (n - train)) / 100;
        let counts = SplitCounts::new(train, val, n - train - val);
        let s = split_dataset(&m, counts, seed).unwrap();
        prop_assert_eq!((s.train.len(), s.val.len(), s.test.len()), (counts.train, counts.val, counts.test));
        let all: HashSet<_> = s.train.iter().chain(&s.val).chain(&s.test).map(|e| e.image.clone()).collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(split_dataset(&m, counts, seed).unwrap(), s);
    }

    #[test]
    fn grouped_split_never_leaks_an_original(originals in 1usize..30, tr in 0usize..=100, seed in any::<u64>()) {
        let m = manifest(originals);
        let n = m.len();
        let train = tr * n / 100;
        let counts = SplitCounts::new(train, (n - train) / 2, n - train - (n - train) / 2);
        let s = split_grouped(&m, counts, seed).unwrap();
        let ids = |p: &[ManifestEntry]| p.iter().map(|e| e.origin_id).collect::<HashSet<_>>();
        let (a, b, c) = (ids(&s.train), ids(&s.val), ids(&s.test));
        prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), n);
        for (got, want) in [(s.train.len(), counts.train), (s.val.len(), counts.val), (s.test.len(), counts.test)] {
            prop_assert!(got.abs_diff(want) <= 3, "{} vs {}", got, want);
        }
    }

    #[test]
    fn adam_is_deterministic(g in prop::collection::vec(-10.0f32..10.0, 8), p0 in prop::collection::vec(-1.0f32..1.0, 8)) {
        let run = || {
            let mut p = Tensor4::from_vec([1, 1, 2, 4], p0.clone()).unwrap();
            let grad = Tensor4::from_vec([1, 1, 2, 4], g.clone()).unwrap();
            let (mut m, mut v) = (Tensor4::zeros(p.shape()), Tensor4::zeros(p.shape()));
            for t in 1..=3 {
                adam_step(&mut p, &grad, &mut m, &mut v, t, &AdamConfig::default()).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        prop_assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
