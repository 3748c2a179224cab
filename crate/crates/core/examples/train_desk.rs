//! Trains a 1/16-width Reti-UNet1 on synthetic vessels and prints the
//! per-epoch loss and validation metrics.
//!
//! cargo run --release --example train_desk -- 30

use retseg::dataset::Sample;
use retseg::synthetic::{synthetic_set, SyntheticConfig};
use retseg::trainer::{evaluate, train_observed, TrainConfig};
use retseg::unet::{build_unet, UNetConfig};

fn samples(count: usize, seed: u64) -> Vec<Sample> {
    synthetic_set(count, seed, &SyntheticConfig::default())
        .into_iter()
        .enumerate()
        .map(|(i, (image, mask))| Sample { name: format!("s{i}"), image, mask })
        .collect()
}

fn main() -> retseg::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let (train_set, val, test) = (samples(8, 0), samples(4, 100), samples(4, 200));
    let model = build_unet(&UNetConfig::reti_unet1().with_width_scale(16), 0)?;
    let tc = TrainConfig { epochs, learning_rate: 1e-3, ..Default::default() };
    let out = train_observed(model, &train_set, &val, &tc, &mut |r, _, _| {
        println!("epoch {:>3}  loss {:.4}  val IS {:.4}  DC {:.4}", r.epoch, r.train_loss, r.val.is_, r.val.dc);
        Ok(())
    })?;
    let m = evaluate(&out.best, &test, tc.threshold)?.with_tt(out.history.tt);
    println!("best epoch {}; test IS {:.4} Acc {:.4} Rec {:.4} DL {:.4} ER {:.4}; {:.1} s", out.best_epoch, m.is_, m.acc, m.rec, m.dl, m.er, m.tt);
    Ok(())
}
