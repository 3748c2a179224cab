//! Forward/backward primitives for the U-Net: same-padded convolution,
//! 2×2 max-pooling, 2×2 stride-2 transposed convolution, activations,
//! channel concatenation and the soft Dice loss.
//!
//! All loops accumulate each output element in a fixed order, so results are
//! bit-reproducible.

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor4};

/// Smoothing constant of the soft Dice loss.
pub const DICE_EPS: f64 = 1.0;

/// Gradients of an affine layer (convolution or transposed convolution).
#[derive(Debug, Clone)]
pub struct AffineGrads<T> {
    pub dx: Tensor4<T>,
    pub dweight: Tensor4<T>,
    pub dbias: Vec<T>,
}

fn check_conv<T: Element>(x: &Tensor4<T>, weight: &Tensor4<T>, bias: &[T]) -> Result<usize> {
    let [oc, ic, kh, kw] = weight.shape();
    if kh != kw || kh % 2 == 0 {
        return Err(Error::ShapeMismatch(format!("conv kernel must be square and odd, got {kh}x{kw}")));
    }
    if x.c() != ic {
        return Err(Error::ShapeMismatch(format!("conv input has {} channels, weight expects {ic}", x.c())));
    }
    if bias.len() != oc {
        return Err(Error::ShapeMismatch(format!("conv bias has {} entries for {oc} outputs", bias.len())));
    }
    Ok(kh)
}

/// Valid output range `[lo, hi)` along one axis for a tap offset `off`:
/// output index `o` reads input `o + off`.
#[inline]
fn tap_range(off: isize, len: usize) -> (usize, usize) {
    let lo = (-off).max(0) as usize;
    let hi = (len as isize - off).clamp(0, len as isize) as usize;
    (lo, hi.max(lo))
}

/// Stride-1 cross-correlation with zero padding `k / 2`, so the spatial size
/// is preserved. Weight layout `(out_c, in_c, k, k)`.
pub fn conv2d<T: Element>(x: &Tensor4<T>, weight: &Tensor4<T>, bias: &[T]) -> Result<Tensor4<T>> {
    let k = check_conv(x, weight, bias)?;
    let pad = (k / 2) as isize;
    let [n, ic, h, w] = x.shape();
    let oc = weight.n();
    let mut out = Tensor4::zeros([n, oc, h, w]);
    for b in 0..n {
        for o in 0..oc {
            let plane = out.plane_mut(b, o);
            plane.fill(bias[o]);
            for i in 0..ic {
                let inp = x.plane(b, i);
                for ky in 0..k {
                    let dy = ky as isize - pad;
                    let (y0, y1) = tap_range(dy, h);
                    for kx in 0..k {
                        let dx = kx as isize - pad;
                        let (x0, x1) = tap_range(dx, w);
                        let wv = weight.get(o, i, ky, kx);
                        for y in y0..y1 {
                            let src = ((y as isize + dy) as usize) * w;
                            let dst = &mut plane[y * w + x0..y * w + x1];
                            let s = &inp[(src as isize + x0 as isize + dx) as usize..][..x1 - x0];
                            for (d, &v) in dst.iter_mut().zip(s) {
                                *d += wv * v;
                            }
                        }
                    }
                }
            }
        }
    }
    out.ensure_finite("conv2d")?;
    Ok(out)
}

/// Exact gradients of [`conv2d`] given its input and the upstream gradient.
pub fn conv2d_backward<T: Element>(x: &Tensor4<T>, weight: &Tensor4<T>, dy: &Tensor4<T>) -> Result<AffineGrads<T>> {
    let [oc, ic, k, _] = weight.shape();
    check_conv(x, weight, &vec![T::zero(); oc])?;
    let [n, _, h, w] = x.shape();
    if dy.shape() != [n, oc, h, w] {
        return Err(Error::ShapeMismatch(format!("conv dy {:?}, expected {:?}", dy.shape(), [n, oc, h, w])));
    }
    let pad = (k / 2) as isize;

    let mut dx = Tensor4::zeros(x.shape());
    for b in 0..n {
        for i in 0..ic {
            let dplane = dx.plane_mut(b, i);
            for o in 0..oc {
                let g = dy.plane(b, o);
                for ky in 0..k {
                    let oy = ky as isize - pad;
                    let (y0, y1) = tap_range(oy, h);
                    for kx in 0..k {
                        let ox = kx as isize - pad;
                        let (x0, x1) = tap_range(ox, w);
                        let wv = weight.get(o, i, ky, kx);
                        for y in y0..y1 {
                            let row = ((y as isize + oy) as usize) * w;
                            let dst = &mut dplane[(row as isize + x0 as isize + ox) as usize..][..x1 - x0];
                            for (d, &gv) in dst.iter_mut().zip(&g[y * w + x0..y * w + x1]) {
                                *d += wv * gv;
                            }
                        }
                    }
                }
            }
        }
    }

    let mut dweight = Tensor4::zeros(weight.shape());
    for o in 0..oc {
        for i in 0..ic {
            for ky in 0..k {
                let oy = ky as isize - pad;
                let (y0, y1) = tap_range(oy, h);
                for kx in 0..k {
                    let ox = kx as isize - pad;
                    let (x0, x1) = tap_range(ox, w);
                    let mut acc = T::zero();
                    for b in 0..n {
                        let g = dy.plane(b, o);
                        let inp = x.plane(b, i);
                        for y in y0..y1 {
                            let row = ((y as isize + oy) as usize) * w;
                            let s = &inp[(row as isize + x0 as isize + ox) as usize..][..x1 - x0];
                            for (&gv, &v) in g[y * w + x0..y * w + x1].iter().zip(s) {
                                acc += gv * v;
                            }
                        }
                    }
                    let idx = dweight.index(o, i, ky, kx);
                    dweight.data_mut()[idx] = acc;
                }
            }
        }
    }

    let dbias = (0..oc).map(|o| (0..n).map(|b| dy.plane(b, o).iter().copied().sum::<T>()).sum()).collect();
    Ok(AffineGrads { dx, dweight, dbias })
}

/// Argmax positions (0..4, row-major within each 2×2 window) of a max-pool.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolIndices {
    input_shape: [usize; 4],
    argmax: Vec<u8>,
}

impl PoolIndices {
    pub fn argmax(&self) -> &[u8] {
        &self.argmax
    }
}

/// 2×2 max-pool, stride 2. Ties go to the first position in window order.
pub fn maxpool2<T: Element>(x: &Tensor4<T>) -> Result<(Tensor4<T>, PoolIndices)> {
    let [n, c, h, w] = x.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::OddSpatialDim(h, w));
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor4::zeros([n, c, oh, ow]);
    let mut argmax = Vec::with_capacity(n * c * oh * ow);
    for b in 0..n {
        for ch in 0..c {
            let inp = x.plane(b, ch);
            let dst = out.plane_mut(b, ch);
            for y in 0..oh {
                for xx in 0..ow {
                    let base = 2 * y * w + 2 * xx;
                    let window = [inp[base], inp[base + 1], inp[base + w], inp[base + w + 1]];
                    let mut best = 0;
                    for (j, &v) in window.iter().enumerate().skip(1) {
                        if v > window[best] {
                            best = j;
                        }
                    }
                    dst[y * ow + xx] = window[best];
                    argmax.push(best as u8);
                }
            }
        }
    }
    Ok((out, PoolIndices { input_shape: x.shape(), argmax }))
}

/// Routes each upstream gradient to the position that won the max.
pub fn maxpool2_backward<T: Element>(dy: &Tensor4<T>, idx: &PoolIndices) -> Result<Tensor4<T>> {
    let [n, c, h, w] = idx.input_shape;
    if dy.shape() != [n, c, h / 2, w / 2] {
        return Err(Error::ShapeMismatch(format!("pool dy {:?} for input {:?}", dy.shape(), idx.input_shape)));
    }
    let mut dx = Tensor4::zeros(idx.input_shape);
    let ow = w / 2;
    for (flat, (&g, &a)) in dy.data().iter().zip(&idx.argmax).enumerate() {
        let plane = flat / (ow * (h / 2));
        let rem = flat % (ow * (h / 2));
        let (y, xx) = (rem / ow, rem % ow);
        let (oy, ox) = ((a / 2) as usize, (a % 2) as usize);
        dx.data_mut()[plane * h * w + (2 * y + oy) * w + 2 * xx + ox] = g;
    }
    Ok(dx)
}

/// Transposed convolution, 2×2 kernel, stride 2, no padding. Weight layout
/// `(in_c, out_c, 2, 2)`; output `(n, out_c, 2h, 2w)`.
pub fn upconv2<T: Element>(x: &Tensor4<T>, weight: &Tensor4<T>, bias: &[T]) -> Result<Tensor4<T>> {
    let [ic, oc, kh, kw] = weight.shape();
    if kh != 2 || kw != 2 || x.c() != ic || bias.len() != oc {
        return Err(Error::ShapeMismatch(format!(
            "upconv input {:?}, weight {:?}, bias {}",
            x.shape(),
            weight.shape(),
            bias.len()
        )));
    }
    let [n, _, h, w] = x.shape();
    let ow = 2 * w;
    let mut out = Tensor4::zeros([n, oc, 2 * h, ow]);
    for b in 0..n {
        for o in 0..oc {
            let plane = out.plane_mut(b, o);
            plane.fill(bias[o]);
            for i in 0..ic {
                let inp = x.plane(b, i);
                for a in 0..2 {
                    for c in 0..2 {
                        let wv = weight.get(i, o, a, c);
                        for y in 0..h {
                            let row = &mut plane[(2 * y + a) * ow..(2 * y + a + 1) * ow];
                            for (xx, &v) in inp[y * w..(y + 1) * w].iter().enumerate() {
                                row[2 * xx + c] += wv * v;
                            }
                        }
                    }
                }
            }
        }
    }
    out.ensure_finite("upconv2")?;
    Ok(out)
}

pub fn upconv2_backward<T: Element>(x: &Tensor4<T>, weight: &Tensor4<T>, dy: &Tensor4<T>) -> Result<AffineGrads<T>> {
    let [ic, oc, _, _] = weight.shape();
    let [n, _, h, w] = x.shape();
    if dy.shape() != [n, oc, 2 * h, 2 * w] || x.c() != ic {
        return Err(Error::ShapeMismatch(format!("upconv dy {:?} for input {:?}", dy.shape(), x.shape())));
    }
    let ow = 2 * w;
    let mut dx = Tensor4::zeros(x.shape());
    for b in 0..n {
        for i in 0..ic {
            let dplane = dx.plane_mut(b, i);
            for o in 0..oc {
                let g = dy.plane(b, o);
                for a in 0..2 {
                    for c in 0..2 {
                        let wv = weight.get(i, o, a, c);
                        for y in 0..h {
                            let grow = &g[(2 * y + a) * ow..(2 * y + a + 1) * ow];
                            for (xx, d) in dplane[y * w..(y + 1) * w].iter_mut().enumerate() {
                                *d += wv * grow[2 * xx + c];
                            }
                        }
                    }
                }
            }
        }
    }
    let mut dweight = Tensor4::zeros(weight.shape());
    for i in 0..ic {
        for o in 0..oc {
            for a in 0..2 {
                for c in 0..2 {
                    let mut acc = T::zero();
                    for b in 0..n {
                        let inp = x.plane(b, i);
                        let g = dy.plane(b, o);
                        for y in 0..h {
                            let grow = &g[(2 * y + a) * ow..(2 * y + a + 1) * ow];
                            for (xx, &v) in inp[y * w..(y + 1) * w].iter().enumerate() {
                                acc += v * grow[2 * xx + c];
                            }
                        }
                    }
                    let idx = dweight.index(i, o, a, c);
                    dweight.data_mut()[idx] = acc;
                }
            }
        }
    }
    let dbias = (0..oc).map(|o| (0..n).map(|b| dy.plane(b, o).iter().copied().sum::<T>()).sum()).collect();
    Ok(AffineGrads { dx, dweight, dbias })
}

pub fn relu<T: Element>(x: &Tensor4<T>) -> Tensor4<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Masks `dy` by `y > 0`; `y` may be either the ReLU input or its output.
pub fn relu_backward<T: Element>(y: &Tensor4<T>, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
    y.same_shape(dy, "relu backward")?;
    let data = y.data().iter().zip(dy.data()).map(|(&v, &g)| if v > T::zero() { g } else { T::zero() }).collect();
    Tensor4::from_vec(y.shape(), data)
}

/// Logistic function in the branch form that never exponentiates a positive number.
#[inline]
pub fn sigmoid_scalar<T: Element>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Element>(x: &Tensor4<T>) -> Result<Tensor4<T>> {
    let y = x.map(sigmoid_scalar);
    y.ensure_finite("sigmoid")?;
    Ok(y)
}

/// `dy · y · (1 − y)` from the sigmoid output `y`.
pub fn sigmoid_backward<T: Element>(y: &Tensor4<T>, dy: &Tensor4<T>) -> Result<Tensor4<T>> {
    y.same_shape(dy, "sigmoid backward")?;
    let data = y.data().iter().zip(dy.data()).map(|(&s, &g)| g * s * (T::one() - s)).collect();
    Tensor4::from_vec(y.shape(), data)
}

/// Stacks `b`'s channels after `a`'s.
pub fn concat_channels<T: Element>(a: &Tensor4<T>, b: &Tensor4<T>) -> Result<Tensor4<T>> {
    let [n, ca, h, w] = a.shape();
    if (b.n(), b.h(), b.w()) != (n, h, w) {
        return Err(Error::SpatialMismatch((n, h, w), (b.n(), b.h(), b.w())));
    }
    let cb = b.c();
    let mut data = Vec::with_capacity(a.len() + b.len());
    for s in 0..n {
        data.extend_from_slice(&a.data()[s * ca * h * w..(s + 1) * ca * h * w]);
        data.extend_from_slice(&b.data()[s * cb * h * w..(s + 1) * cb * h * w]);
    }
    Tensor4::from_vec([n, ca + cb, h, w], data)
}

/// Inverse of [`concat_channels`]: the first `ca` channels, then the rest.
pub fn split_channels<T: Element>(dy: &Tensor4<T>, ca: usize) -> Result<(Tensor4<T>, Tensor4<T>)> {
    let [n, c, h, w] = dy.shape();
    if ca > c {
        return Err(Error::ShapeMismatch(format!("cannot split {ca} channels from {c}")));
    }
    let cb = c - ca;
    let plane = h * w;
    let mut da = Vec::with_capacity(n * ca * plane);
    let mut db = Vec::with_capacity(n * cb * plane);
    for s in 0..n {
        let base = s * c * plane;
        da.extend_from_slice(&dy.data()[base..base + ca * plane]);
        db.extend_from_slice(&dy.data()[base + ca * plane..base + c * plane]);
    }
    Ok((Tensor4::from_vec([n, ca, h, w], da)?, Tensor4::from_vec([n, cb, h, w], db)?))
}

/// Running sums behind the soft Dice coefficient; accumulate across batches
/// and images, then read off the coefficient.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DiceSums {
    pub intersection: f64,
    pub pred: f64,
    pub target: f64,
}

impl DiceSums {
    pub fn add(&mut self, probs: &[f64], target: &[f64]) {
        for (&p, &t) in probs.iter().zip(target) {
            self.intersection += p * t;
            self.pred += p;
            self.target += t;
        }
    }

    /// Accumulates 32-bit probabilities against a 0/1 mask.
    pub fn add_f32(&mut self, probs: &[f32], target: &[u8]) {
        for (&p, &t) in probs.iter().zip(target) {
            let (p, t) = (p as f64, t as f64);
            self.intersection += p * t;
            self.pred += p;
            self.target += t;
        }
    }

    pub fn merge(&mut self, other: &DiceSums) {
        self.intersection += other.intersection;
        self.pred += other.pred;
        self.target += other.target;
    }

    /// `(2 Σ p·t + ε) / (Σ p + Σ t + ε)` with ε = [`DICE_EPS`].
    pub fn coefficient(&self) -> f64 {
        (2.0 * self.intersection + DICE_EPS) / (self.pred + self.target + DICE_EPS)
    }
}

/// Soft Dice loss over the whole batch and its gradient with respect to `probs`.
/// Sums are accumulated in `f64` whatever the element type.
pub fn soft_dice_loss<T: Element>(probs: &Tensor4<T>, target: &Tensor4<T>) -> Result<(f64, Tensor4<T>)> {
    probs.same_shape(target, "soft dice")?;
    let mut sums = DiceSums::default();
    for (&p, &t) in probs.data().iter().zip(target.data()) {
        let (p, t) = (p.to_f64_lossy(), t.to_f64_lossy());
        sums.intersection += p * t;
        sums.pred += p;
        sums.target += t;
    }
    let num = 2.0 * sums.intersection + DICE_EPS;
    let den = sums.pred + sums.target + DICE_EPS;
    let loss = 1.0 - num / den;
    // d/dp_i [1 − num/den] = −(2 t_i · den − num) / den²
    let inv = 1.0 / (den * den);
    let grad = target.map(|t| T::from_f64_lossy(-(2.0 * t.to_f64_lossy() * den - num) * inv));
    Ok((loss, grad))
}
