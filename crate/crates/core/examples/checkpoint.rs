//! Saves a model, reloads it, and shows that a damaged file is refused.

use hgts::config::{DataConfig, SplitPreset};
use hgts::harness::{load_checkpoint, save_checkpoint};
use hgts::model::HgtsFormer;
use hgts::{HgtsError, ModelConfig, RunConfig, TrainConfig};

fn main() -> hgts::Result<()> {
    let dir = std::env::temp_dir().join(format!("hgts-checkpoint-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| HgtsError::Io { path: dir.display().to_string(), source: e })?;
    let path = dir.join("model.hgtf");
    let run = RunConfig {
        name: "checkpoint-demo".into(),
        model: ModelConfig::tiny(3),
        train: TrainConfig::default(),
        data: DataConfig { split: SplitPreset::Ratio { train: 0.7, val: 0.1 }, mask_shared: false },
    };
    let model = HgtsFormer::<f64>::new(run.model.clone(), 42)?;
    save_checkpoint(&path, &model, &run)?;
    let (back, cfg) = load_checkpoint::<f64>(&path)?;
    let same = model.params().iter().zip(back.params().iter()).all(|((_, a), (_, b))| a.value() == b.value());
    println!("{} tensors reloaded, identical: {same}, config name {:?}", back.params().len(), cfg.name);

    let mut bytes = std::fs::read(&path).map_err(|e| HgtsError::Io { path: path.display().to_string(), source: e })?;
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    std::fs::write(&path, &bytes).map_err(|e| HgtsError::Io { path: path.display().to_string(), source: e })?;
    match load_checkpoint::<f64>(&path) {
        Err(e) => println!("flipped one bit: {e}"),
        Ok(_) => println!("flipped one bit but the file still loaded"),
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}
