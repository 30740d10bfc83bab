//! Trains the full model and each single-component ablation with the same
//! seed and budget, then prints their best validation MSE.

use hgts::config::{DataConfig, SplitPreset};
use hgts::data::{synthetic_ett, Dataset};
use hgts::harness::train;
use hgts::{Ablation, ModelConfig, RunConfig, TrainConfig};

fn main() -> hgts::Result<()> {
    let split = SplitPreset::Ratio { train: 0.6, val: 0.2 };
    let ds = Dataset::new(&synthetic_ett(3000, 7, 9), &split)?;
    let full = RunConfig {
        name: "ablation".into(),
        model: ModelConfig { d_model: 32, d_ff: 64, heads: 4, patch_len: 16, lookback: 128, edge_num: 6, ..ModelConfig::tiny(7) },
        train: TrainConfig { lr: 2e-3, batch_size: 16, epochs: 3, max_batches: 30, train_stride: 4, seed: 4, ..TrainConfig::default() },
        data: DataConfig { split, mask_shared: false },
    };
    let variants = std::iter::once(None).chain(Ablation::ALL.into_iter().map(Some));
    for ablation in variants {
        let mut run = full.clone();
        run.model.ablation = ablation;
        let (model, log) = train::<f32>(&run, &ds, None)?;
        let name = ablation.map_or("full".to_string(), |a| a.to_string());
        println!("{name:<14} params {:>7}  best val mse {:.4}", model.num_parameters(), log.best_val_mse());
    }
    Ok(())
}
