//! Central finite differences for checking hand-written backward passes.

use crate::tensor::{Element, Tensor4};

/// Step for coordinate `x`: `base · max(1, |x|)`.
pub fn step_for(x: f64, base: f64) -> f64 {
    base * x.abs().max(1.0)
}

/// Default base step: `1e-3` for `f32`, `1e-6` for `f64`.
pub fn default_step<T: Element>() -> f64 {
    if std::mem::size_of::<T>() == 4 {
        1e-3
    } else {
        1e-6
    }
}

/// `|a − n| / max(|a|, |n|, floor)`. The floor keeps near-zero gradients
/// from turning rounding noise into large relative errors.
pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let den = analytic.abs().max(numeric.abs()).max(floor);
    if den == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / den
    }
}

/// `(L(x + h e_i) − L(x − h e_i)) / 2h` with `x[i]` restored afterwards.
pub fn central_difference<T: Element>(
    x: &mut Tensor4<T>,
    i: usize,
    base_step: f64,
    mut loss: impl FnMut(&Tensor4<T>) -> f64,
) -> f64 {
    let orig = x.data()[i];
    let x0 = orig.to_f64_lossy();
    let h = step_for(x0, base_step);
    x.data_mut()[i] = T::from_f64_lossy(x0 + h);
    // the representable step can differ from h at 32 bits
    let plus_at = x.data()[i].to_f64_lossy();
    let plus = loss(x);
    x.data_mut()[i] = T::from_f64_lossy(x0 - h);
    let minus_at = x.data()[i].to_f64_lossy();
    let minus = loss(x);
    x.data_mut()[i] = orig;
    (plus - minus) / (plus_at - minus_at)
}

/// `Σ r_i y_i` accumulated in `f64`; its gradient with respect to `y` is `r`.
pub fn projection<T: Element>(y: &Tensor4<T>, r: &Tensor4<T>) -> f64 {
    y.data().iter().zip(r.data()).map(|(&a, &b)| a.to_f64_lossy() * b.to_f64_lossy()).sum()
}
