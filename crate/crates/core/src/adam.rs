//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor4};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// First and second moment estimates of one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<T> {
    pub name: String,
    pub m: Tensor4<T>,
    pub v: Tensor4<T>,
}

/// One Adam update of `param` in place. `t` is the 1-based step count.
///
/// `m ← β1 m + (1−β1) g`, `v ← β2 v + (1−β2) g²`,
/// `p ← p − lr · m̂ / (√v̂ + ε)` with `m̂ = m / (1−β1^t)`, `v̂ = v / (1−β2^t)`.
pub fn adam_step<T: Element>(
    param: &mut Tensor4<T>,
    grad: &Tensor4<T>,
    m: &mut Tensor4<T>,
    v: &mut Tensor4<T>,
    t: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    param.same_shape(grad, "adam grad")?;
    param.same_shape(m, "adam m")?;
    param.same_shape(v, "adam v")?;
    grad.ensure_finite("adam gradient")?;
    let c = |x: f64| T::from_f64_lossy(x);
    let (b1, b2) = (c(cfg.beta1), c(cfg.beta2));
    let (one_b1, one_b2) = (c(1.0 - cfg.beta1), c(1.0 - cfg.beta2));
    let t = t.max(1) as i32;
    let corr1 = c(1.0 - cfg.beta1.powi(t));
    let corr2 = c(1.0 - cfg.beta2.powi(t));
    let (lr, eps) = (c(cfg.lr), c(cfg.eps));
    for (((p, &g), mi), vi) in param.data_mut().iter_mut().zip(grad.data()).zip(m.data_mut()).zip(v.data_mut()) {
        *mi = b1 * *mi + one_b1 * g;
        *vi = b2 * *vi + one_b2 * g * g;
        let m_hat = *mi / corr1;
        let v_hat = *vi / corr2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    param.ensure_finite("adam update")
}

/// Optimizer state for a whole model: hyperparameters, the step count, and
/// moments keyed by parameter name (created on first use).
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    pub config: AdamConfig,
    pub t: u64,
    moments: Vec<Moments<T>>,
}

impl<T: Element> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, t: 0, moments: Vec::new() }
    }

    pub fn from_parts(config: AdamConfig, t: u64, moments: Vec<Moments<T>>) -> Self {
        Self { config, t, moments }
    }

    pub fn moments(&self) -> &[Moments<T>] {
        &self.moments
    }

    /// Advances the step count once and updates every `(name, param, grad)` triple.
    pub fn step<'a>(&mut self, updates: impl IntoIterator<Item = (&'a str, &'a mut Tensor4<T>, &'a Tensor4<T>)>) -> Result<()> {
        self.t += 1;
        for (name, param, grad) in updates {
            let slot = match self.moments.iter().position(|mo| mo.name == name) {
                Some(i) => i,
                None => {
                    self.moments.push(Moments {
                        name: name.to_string(),
                        m: Tensor4::zeros(param.shape()),
                        v: Tensor4::zeros(param.shape()),
                    });
                    self.moments.len() - 1
                }
            };
            let mo = &mut self.moments[slot];
            if mo.m.shape() != param.shape() {
                return Err(Error::ShapeMismatch(format!("adam state for {name} has shape {:?}", mo.m.shape())));
            }
            adam_step(param, grad, &mut mo.m, &mut mo.v, self.t, &self.config)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor4<f64> {
        Tensor4::from_vec([1, 1, 1, 1], vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_is_no_op() {
        let mut p = scalar(0.3);
        let (mut m, mut v) = (scalar(0.0), scalar(0.0));
        adam_step(&mut p, &scalar(0.0), &mut m, &mut v, 1, &AdamConfig::default()).unwrap();
        assert_eq!(p.data(), &[0.3]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamConfig::default();
        for g in [1e-3f64, -0.5, 42.0, -7e4] {
            let mut p = Tensor4::from_vec([1, 1, 1, 1], vec![1.0f32]).unwrap();
            let (mut m, mut v) = (Tensor4::zeros([1, 1, 1, 1]), Tensor4::zeros([1, 1, 1, 1]));
            adam_step(&mut p, &Tensor4::from_vec([1, 1, 1, 1], vec![g as f32]).unwrap(), &mut m, &mut v, 1, &cfg).unwrap();
            let moved = (1.0 - p.data()[0] as f64) * g.signum();
            assert!((moved - 1e-4).abs() < 1e-6, "g={g}: moved {moved}");
        }
    }

    #[test]
    fn two_steps_match_scalar_recurrence() {
        let cfg = AdamConfig { lr: 0.01, ..AdamConfig::default() };
        let g = 0.37;
        let mut p = scalar(1.0);
        let (mut m, mut v) = (scalar(0.0), scalar(0.0));
        for t in 1..=2 {
            adam_step(&mut p, &scalar(g), &mut m, &mut v, t, &cfg).unwrap();
        }
        // hand simulation
        let (mut hm, mut hv, mut hp) = (0.0f64, 0.0f64, 1.0f64);
        for t in 1..=2 {
            hm = 0.9 * hm + 0.1 * g;
            hv = 0.999 * hv + 0.001 * g * g;
            let mh = hm / (1.0 - 0.9f64.powi(t));
            let vh = hv / (1.0 - 0.999f64.powi(t));
            hp -= 0.01 * mh / (vh.sqrt() + 1e-8);
        }
        assert!((p.data()[0] - hp).abs() < 1e-7);
    }

    #[test]
    fn state_shape_mismatch_and_determinism() {
        let mut state = AdamState::<f32>::new(AdamConfig::default());
        let mut p = Tensor4::full([1, 1, 2, 2], 0.5f32);
        let g = Tensor4::full([1, 1, 2, 2], 0.1f32);
        state.step([("w", &mut p, &g)]).unwrap();
        let mut q = Tensor4::full([1, 1, 3, 3], 0.5f32);
        let gq = Tensor4::full([1, 1, 3, 3], 0.1f32);
        assert!(matches!(state.step([("w", &mut q, &gq)]), Err(Error::ShapeMismatch(_))));

        let run = || {
            let mut s = AdamState::<f32>::new(AdamConfig::default());
            let mut p = Tensor4::full([1, 1, 2, 2], 0.5f32);
            for _ in 0..3 {
                s.step([("w", &mut p, &g)]).unwrap();
            }
            p
        };
        assert_eq!(run().data(), run().data());
    }
}
