//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retseg::dataset::Sample;
use retseg::gradcheck::{central_difference, default_step, projection, rel_error, step_for};
use retseg::metrics::ConfusionCounts;
use retseg::nn::*;
use retseg::raster::{BinaryMask, GrayImage};
use retseg::synthetic::{synthetic_set, SyntheticConfig};
use retseg::tensor::{Element, Tensor4};
use retseg::unet::{build_unet, unet_backward, unet_forward, Model, UNetConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_image(r: &mut impl Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::new(w, h, (0..w * h).map(|_| r.gen::<f32>()).collect()).unwrap()
}

pub fn random_mask(r: &mut impl Rng, w: usize, h: usize, p: f64) -> BinaryMask {
    BinaryMask::new(w, h, (0..w * h).map(|_| r.gen_bool(p) as u8).collect()).unwrap()
}

pub fn synthetic_samples(n: usize, seed: u64, size: usize) -> Vec<Sample> {
    let cfg = SyntheticConfig { size, ..Default::default() };
    synthetic_set(n, seed, &cfg)
        .into_iter()
        .enumerate()
        .map(|(i, (image, mask))| Sample { name: format!("s{i:02}"), image, mask })
        .collect()
}

/// Per-pixel enumeration of the confusion matrix.
pub fn enumerate_confusion(pred: &BinaryMask, gt: &BinaryMask) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for y in 0..gt.height() {
        for x in 0..gt.width() {
            match (pred.get(x, y), gt.get(x, y)) {
                (1, 1) => c.tp += 1,
                (1, 0) => c.fp += 1,
                (0, 0) => c.tn += 1,
                _ => c.fn_ += 1,
            }
        }
    }
    c
}

/// Clamp-to-edge (`replicate = true`) or mirror-about-edge-pixel index.
pub fn ref_border(i: isize, n: usize, replicate: bool) -> usize {
    let n = n as isize;
    if replicate || n == 1 {
        return i.max(0).min(n - 1) as usize;
    }
    let mut i = i;
    while i < 0 || i >= n {
        i = if i < 0 { -i } else { 2 * (n - 1) - i };
    }
    i as usize
}

/// Direct definition `out(x, y) = Σ_j Σ_i k(i, j) f(x − i, y − j)` in f64.
pub fn ref_convolve(img: &[f32], w: usize, h: usize, k: &[f32], r: usize, replicate: bool) -> Vec<f64> {
    let side = 2 * r + 1;
    let r = r as isize;
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0f64;
            for j in -r..=r {
                for i in -r..=r {
                    let sx = ref_border(x as isize - i, w, replicate);
                    let sy = ref_border(y as isize - j, h, replicate);
                    s += k[((j + r) as usize) * side + (i + r) as usize] as f64 * img[sy * w + sx] as f64;
                }
            }
            out[y * w + x] = s;
        }
    }
    out
}

/// Set-based spur pruning: repeatedly remove, all at once, every point with
/// at most one of its eight neighbours in the set.
pub fn ref_prune(mask: &BinaryMask, iterations: usize) -> BinaryMask {
    let mut set: HashSet<(i64, i64)> = HashSet::new();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) == 1 {
                set.insert((x as i64, y as i64));
            }
        }
    }
    for _ in 0..iterations {
        let doomed: Vec<(i64, i64)> = set
            .iter()
            .filter(|&&(x, y)| {
                let mut n = 0;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if (dx, dy) != (0, 0) && set.contains(&(x + dx, y + dy)) {
                            n += 1;
                        }
                    }
                }
                n <= 1
            })
            .copied()
            .collect();
        for p in doomed {
            set.remove(&p);
        }
    }
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| set.contains(&(x as i64, y as i64))).unwrap()
}

pub fn random_tensor<T: Element>(r: &mut impl Rng, shape: [usize; 4], lo: f64, hi: f64) -> Tensor4<T> {
    let n = shape.iter().product();
    Tensor4::from_vec(shape, (0..n).map(|_| T::from_f64_lossy(r.gen_range(lo..hi))).collect()).unwrap()
}

/// Worst relative error of `analytic` against central differences of `loss`
/// over every coordinate of `x`; floor is `1e-3 · max |analytic|`.
/// The loss is evaluated in 64-bit mode at the values of `x`, with the step of
/// `T`, so a 32-bit gradient is compared against an oracle free of 32-bit
/// forward rounding.
pub fn check_all<T: Element>(x: &Tensor4<T>, analytic: &[T], mut loss: impl FnMut(&Tensor4<f64>) -> f64) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let floor = 1e-3 * analytic.iter().map(|v| v.to_f64_lossy().abs()).fold(0.0, f64::max);
    let mut x: Tensor4<f64> = x.cast();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let n = central_difference(&mut x, i, default_step::<T>(), &mut loss);
        worst = worst.max(rel_error(analytic[i].to_f64_lossy(), n, floor));
    }
    worst
}

/// Values spaced at least `gap` apart, in random order, for kink-free max pooling.
pub fn distinct_tensor<T: Element>(r: &mut impl Rng, shape: [usize; 4], gap: f64) -> Tensor4<T> {
    let n: usize = shape.iter().product();
    let mut v: Vec<f64> = (0..n).map(|i| i as f64 * gap - n as f64 * gap / 2.0).collect();
    for i in (1..n).rev() {
        v.swap(i, r.gen_range(0..=i));
    }
    Tensor4::from_vec(shape, v.into_iter().map(T::from_f64_lossy).collect()).unwrap()
}

fn wide<T: Element>(t: &Tensor4<T>) -> Tensor4<f64> {
    t.cast()
}

/// Worst relative error per primitive for one seed.
pub fn primitive_errors<T: Element>(seed: u64) -> Vec<(&'static str, f64)> {
    let mut r = rng(seed);
    let mut out = Vec::new();

    for (name, k) in [("conv2d 3x3", 3usize), ("conv2d 1x1", 1)] {
        let x: Tensor4<T> = random_tensor(&mut r, [2, 3, 5, 6], -1.0, 1.0);
        let w: Tensor4<T> = random_tensor(&mut r, [4, 3, k, k], -0.5, 0.5);
        let b: Tensor4<T> = random_tensor(&mut r, [4, 1, 1, 1], -0.5, 0.5);
        let proj: Tensor4<T> = random_tensor(&mut r, [2, 4, 5, 6], -1.0, 1.0);
        let g = conv2d_backward(&x, &w, &proj).unwrap();
        let (x6, w6, b6, p6) = (wide(&x), wide(&w), wide(&b), wide(&proj));
        let ex = check_all(&x, g.dx.data(), |xx| projection(&conv2d(xx, &w6, b6.data()).unwrap(), &p6));
        let ew = check_all(&w, g.dweight.data(), |ww| projection(&conv2d(&x6, ww, b6.data()).unwrap(), &p6));
        let eb = check_all(&b, &g.dbias, |bb| projection(&conv2d(&x6, &w6, bb.data()).unwrap(), &p6));
        out.push((name, ex.max(ew).max(eb)));
    }

    let x: Tensor4<T> = distinct_tensor(&mut r, [2, 2, 6, 4], 0.05);
    let (y, idx) = maxpool2(&x).unwrap();
    let proj: Tensor4<T> = random_tensor(&mut r, y.shape(), -1.0, 1.0);
    let dx = maxpool2_backward(&proj, &idx).unwrap();
    let p6 = wide(&proj);
    out.push(("maxpool2", check_all(&x, dx.data(), |xx| projection(&maxpool2(xx).unwrap().0, &p6))));

    let x: Tensor4<T> = random_tensor(&mut r, [2, 3, 3, 4], -1.0, 1.0);
    let w: Tensor4<T> = random_tensor(&mut r, [3, 2, 2, 2], -0.5, 0.5);
    let b: Tensor4<T> = random_tensor(&mut r, [2, 1, 1, 1], -0.5, 0.5);
    let proj: Tensor4<T> = random_tensor(&mut r, [2, 2, 6, 8], -1.0, 1.0);
    let g = upconv2_backward(&x, &w, &proj).unwrap();
    let (x6, w6, b6, p6) = (wide(&x), wide(&w), wide(&b), wide(&proj));
    let ex = check_all(&x, g.dx.data(), |xx| projection(&upconv2(xx, &w6, b6.data()).unwrap(), &p6));
    let ew = check_all(&w, g.dweight.data(), |ww| projection(&upconv2(&x6, ww, b6.data()).unwrap(), &p6));
    let eb = check_all(&b, &g.dbias, |bb| projection(&upconv2(&x6, &w6, bb.data()).unwrap(), &p6));
    out.push(("upconv2", ex.max(ew).max(eb)));

    // magnitudes of at least 0.05 keep every coordinate clear of the kink at zero
    let mut x: Tensor4<T> = random_tensor(&mut r, [1, 2, 4, 4], 0.05, 1.0);
    for v in x.data_mut() {
        if r.gen_bool(0.5) {
            *v = -*v;
        }
    }
    let proj: Tensor4<T> = random_tensor(&mut r, x.shape(), -1.0, 1.0);
    let dx = relu_backward(&relu(&x), &proj).unwrap();
    let p6 = wide(&proj);
    out.push(("relu", check_all(&x, dx.data(), |xx| projection(&relu(xx), &p6))));

    let x: Tensor4<T> = random_tensor(&mut r, [1, 2, 4, 4], -6.0, 6.0);
    let proj: Tensor4<T> = random_tensor(&mut r, x.shape(), -1.0, 1.0);
    let dx = sigmoid_backward(&sigmoid(&x).unwrap(), &proj).unwrap();
    let p6 = wide(&proj);
    out.push(("sigmoid", check_all(&x, dx.data(), |xx| projection(&sigmoid(xx).unwrap(), &p6))));

    let a: Tensor4<T> = random_tensor(&mut r, [2, 2, 3, 3], -1.0, 1.0);
    let bt: Tensor4<T> = random_tensor(&mut r, [2, 3, 3, 3], -1.0, 1.0);
    let proj: Tensor4<T> = random_tensor(&mut r, [2, 5, 3, 3], -1.0, 1.0);
    let (da, db) = split_channels(&proj, 2).unwrap();
    let (a6, b6, p6) = (wide(&a), wide(&bt), wide(&proj));
    let ea = check_all(&a, da.data(), |aa| projection(&concat_channels(aa, &b6).unwrap(), &p6));
    let eb = check_all(&bt, db.data(), |bb| projection(&concat_channels(&a6, bb).unwrap(), &p6));
    out.push(("concat/split", ea.max(eb)));

    let p: Tensor4<T> = random_tensor(&mut r, [2, 1, 4, 4], 0.05, 0.95);
    let t: Tensor4<T> = random_tensor::<T>(&mut r, [2, 1, 4, 4], 0.0, 1.0).map(|v| if v.to_f64_lossy() < 0.4 { T::one() } else { T::zero() });
    let (_, grad) = soft_dice_loss(&p, &t).unwrap();
    let t6 = wide(&t);
    out.push(("soft dice", check_all(&p, grad.data(), |pp| soft_dice_loss(pp, &t6).unwrap().0)));

    out
}

/// Width-16 Reti-UNet1 on a random 64×64 input and target; `samples` random
/// parameters. Gradients come from the `T` model. The finite-difference
/// oracle runs in 64-bit mode at the same parameter values, since a 32-bit
/// forward pass is too noisy to difference through the whole network.
/// Coordinates whose difference interval crosses a ReLU or max-pool kink are
/// redrawn: there the loss is not smooth and a central difference measures
/// the kink, not the gradient. Likewise an input on which the two precisions
/// take different kink decisions is redrawn. Returns (worst error, checked
/// names, redraws).
pub fn unet_errors<T: Element>(seed: u64, samples: usize) -> (f64, Vec<String>, usize) {
    let cfg = UNetConfig::reti_unet1().with_width_scale(16);
    let model: Model<T> = build_unet(&cfg, seed).unwrap();
    let oracle: Model<f64> = model.cast();
    let mut r = rng(seed ^ 0x9e37_79b9);
    let mut redraws = 0usize;
    // the input must put both precisions on the same smooth piece
    let (x, t, cache, base_signature) = loop {
        assert!(redraws < 10, "precisions keep disagreeing on kinks");
        let x: Tensor4<T> = random_tensor(&mut r, [1, 1, 64, 64], 0.0, 1.0);
        let t: Tensor4<T> = random_tensor::<T>(&mut r, [1, 1, 64, 64], 0.0, 1.0).map(|v| if v.to_f64_lossy() < 0.3 { T::one() } else { T::zero() });
        let cache = unet_forward(&model, &x, true).unwrap().1.unwrap();
        let wide = unet_forward(&oracle, &x.cast(), true).unwrap().1.unwrap().kink_signature();
        if cache.kink_signature() == wide {
            break (x, t, cache, wide);
        }
        redraws += 1;
    };
    let (_, dp) = soft_dice_loss(cache.probs(), &t).unwrap();
    let grads = unet_backward(&model, Some(&cache), &dp).unwrap();
    let floor = 1e-3 * grads.iter().flat_map(|(_, g)| g.data().iter().map(|v| v.to_f64_lossy().abs())).fold(0.0, f64::max);

    let (x64, t64): (Tensor4<f64>, Tensor4<f64>) = (x.cast(), t.cast());
    let signature = |m: &Model<f64>| unet_forward(m, &x64, true).unwrap().1.unwrap().kink_signature();
    let names: Vec<String> = model.specs().iter().map(|s| s.name.clone()).collect();
    let step = default_step::<f64>();
    let (mut worst, mut checked) = (0.0f64, Vec::new());
    while checked.len() < samples {
        assert!(redraws < 10 * samples, "too many kink crossings");
        let name = names[r.gen_range(0..names.len())].clone();
        let g = grads.get(&name).unwrap();
        let i = r.gen_range(0..g.len());
        let v = oracle.param(&name).unwrap().data()[i];
        let h = step_for(v, step);
        let crosses = [v + h, v - h].into_iter().any(|vv| {
            let mut m = oracle.clone();
            m.param_mut(&name).unwrap().data_mut()[i] = vv;
            signature(&m) != base_signature
        });
        if crosses {
            redraws += 1;
            continue;
        }
        let mut param = oracle.param(&name).unwrap().clone();
        let n = central_difference(&mut param, i, step, |pp| {
            let mut m = oracle.clone();
            *m.param_mut(&name).unwrap() = pp.clone();
            soft_dice_loss(&unet_forward(&m, &x64, false).unwrap().0, &t64).unwrap().0
        });
        worst = worst.max(rel_error(g.data()[i].to_f64_lossy(), n, floor));
        checked.push(format!("{name}[{i}]"));
    }
    (worst, checked, redraws)
}
