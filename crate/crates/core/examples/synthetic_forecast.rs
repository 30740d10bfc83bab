//! Trains a small forecaster on synthetic hourly data and compares it with
//! the repeat-last baseline on the test split.

use hgts::config::{DataConfig, LrSchedule, SplitPreset};
use hgts::data::{synthetic_ett, Dataset};
use hgts::harness::{evaluate_forecast, train, EvalOptions, RepeatLast};
use hgts::{ModelConfig, RunConfig, TrainConfig};

fn main() -> hgts::Result<()> {
    let split = SplitPreset::Ratio { train: 0.6, val: 0.2 };
    let ds = Dataset::new(&synthetic_ett(4000, 7, 5), &split)?;
    let run = RunConfig {
        name: "synthetic-forecast".into(),
        model: ModelConfig { d_model: 32, d_ff: 64, heads: 4, patch_len: 16, lookback: 192, edge_num: 6, ..ModelConfig::tiny(7) },
        train: TrainConfig {
            lr: 2e-3,
            lr_schedule: LrSchedule::Cosine,
            batch_size: 16,
            epochs: 4,
            max_batches: 40,
            train_stride: 4,
            seed: 1,
            ..TrainConfig::default()
        },
        data: DataConfig { split, mask_shared: false },
    };
    let (model, log) = train::<f32>(&run, &ds, None)?;
    for e in &log.epochs {
        println!("epoch {} train {:.4} val {:.4}", e.epoch, e.train_loss, e.val_mse);
    }

    let opts = EvalOptions { stride: 24, ..EvalOptions::test(&ds) };
    let horizons = [48, 96];
    let ours = evaluate_forecast(&model, &ds, &horizons, &opts)?;
    let base = evaluate_forecast::<f32, _>(&RepeatLast { lookback: 192 }, &ds, &horizons, &opts)?;
    println!("horizon  model mse/mae      repeat-last mse/mae");
    for (a, b) in ours.rows.iter().zip(&base.rows) {
        println!("{:>7}  {:.4} / {:.4}    {:.4} / {:.4}", a.key, a.mse, a.mae, b.mse, b.mae);
    }
    Ok(())
}
