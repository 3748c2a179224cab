//! Saves a model with its optimizer state, reloads it and confirms the
//! forward pass is bit-identical.
//!
//! cargo run --example checkpoint_roundtrip

use retseg::adam::{AdamConfig, AdamState};
use retseg::checkpoint::{load_checkpoint, save_checkpoint};
use retseg::nn::soft_dice_loss;
use retseg::synthetic::{synthetic_pair, SyntheticConfig};
use retseg::trainer::{image_tensor, mask_tensor};
use retseg::unet::{build_unet, unet_backward, unet_forward, Model, ModelKind};

fn main() -> retseg::Result<()> {
    let mut model: Model = build_unet(&ModelKind::RetiUNet2.config().with_width_scale(16), 1)?;
    let (img, mask) = synthetic_pair(0, &SyntheticConfig::default());
    let (x, t) = (image_tensor(&[&img])?, mask_tensor(&[&mask])?);

    let mut opt = AdamState::new(AdamConfig::with_lr(1e-3));
    for _ in 0..3 {
        let (p, cache) = unet_forward(&model, &x, true)?;
        let grads = unet_backward(&model, cache.as_ref(), &soft_dice_loss(&p, &t)?.1)?;
        opt.step(model.updates(&grads)?)?;
    }

    let path = std::env::temp_dir().join("retseg-example.rseg");
    save_checkpoint(&model, Some(&opt), &path)?;
    let (back, back_opt) = load_checkpoint(&path)?;
    let same = unet_forward(&model, &x, false)?.0 == unet_forward(&back, &x, false)?.0;
    println!(
        "{} parameters, {} bytes, optimizer step {}; reloaded forward identical: {same}",
        back.param_count(),
        std::fs::metadata(&path)?.len(),
        back_opt.map_or(0, |o| o.t)
    );
    Ok(())
}
