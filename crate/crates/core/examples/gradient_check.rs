//! Central finite-difference check of the hand-written U-Net backward pass,
//! in 64-bit mode on a narrow network.
//!
//! cargo run --example gradient_check

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use retseg::gradcheck::{central_difference, default_step, rel_error};
use retseg::nn::soft_dice_loss;
use retseg::tensor::Tensor4;
use retseg::unet::{build_unet, unet_backward, unet_forward, Model, UNetConfig};

fn main() -> retseg::Result<()> {
    let model: Model<f64> = build_unet(&UNetConfig::reti_unet1().with_width_scale(16), 7)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = Tensor4::from_vec([1, 1, 32, 32], (0..1024).map(|_| rng.gen::<f64>()).collect())?;
    let t = Tensor4::from_vec([1, 1, 32, 32], (0..1024).map(|_| f64::from(rng.gen_bool(0.3))).collect())?;

    let (probs, cache) = unet_forward(&model, &x, true)?;
    let (loss, dprobs) = soft_dice_loss(&probs, &t)?;
    let grads = unet_backward(&model, cache.as_ref(), &dprobs)?;
    println!("loss {loss:.6}; {} gradient tensors", grads.len());

    for name in ["enc0.conv1.w", "bridge.conv2.b", "dec3.up.w", "head.w"] {
        let g = grads.get(name).expect("every parameter has a gradient");
        let i = rng.gen_range(0..g.len());
        let mut p = model.param(name).expect("known parameter").clone();
        let numeric = central_difference(&mut p, i, default_step::<f64>(), |pp| {
            let mut m = model.clone();
            *m.param_mut(name).expect("known parameter") = pp.clone();
            let probs = unet_forward(&m, &x, false).expect("valid input").0;
            soft_dice_loss(&probs, &t).expect("same shapes").0
        });
        let analytic = g.data()[i];
        println!("{name}[{i}]: analytic {analytic:+.6e} numeric {numeric:+.6e} rel {:.1e}", rel_error(analytic, numeric, 1e-9));
    }
    Ok(())
}
