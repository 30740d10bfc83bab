//! Closed-form parameter counts next to the enumerated count of a built
//! model, for a few sizes.

use hgts::model::{count_parameters, HgtsFormer};
use hgts::ModelConfig;

fn main() -> hgts::Result<()> {
    let base = ModelConfig { lookback: 672, channels: 7, ..ModelConfig::tiny(7) };
    let rows = [
        ("D=512 dff=2048 P=96 L_blk=1", ModelConfig { layers: 1, d_model: 512, d_ff: 2048, heads: 8, patch_len: 96, ..base.clone() }),
        ("D=256 dff=512 P=48 L_blk=1", ModelConfig { layers: 1, d_model: 256, d_ff: 512, heads: 8, patch_len: 48, edge_num: 7, ..base.clone() }),
        ("D=128 dff=256 P=48 L_blk=3", ModelConfig { layers: 3, d_model: 128, d_ff: 256, heads: 8, patch_len: 48, ..base.clone() }),
    ];
    println!("{:<30} {:>12} {:>12}", "config", "closed form", "enumerated");
    for (name, cfg) in rows {
        let built = HgtsFormer::<f32>::new(cfg.clone(), 0)?.num_parameters();
        println!("{name:<30} {:>12} {:>12}", count_parameters(&cfg), built);
    }
    Ok(())
}
