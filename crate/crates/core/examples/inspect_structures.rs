//! Runs one forward pass and prints the learned-structure shapes of every
//! block, plus an SVG heatmap of the first intra-series confidence matrix.

use hgts::data::synthetic_ett;
use hgts::model::HgtsFormer;
use hgts::plot::heatmap;
use hgts::ModelConfig;
use hgts_tensor::{Graph, Tensor};

fn main() -> hgts::Result<()> {
    let cfg = ModelConfig { layers: 2, lookback: 96, patch_len: 8, edge_num: 6, ..ModelConfig::tiny(7) };
    let model = HgtsFormer::<f64>::new(cfg, 3)?;
    let table = synthetic_ett(96, 7, 1);
    let x = Tensor::new([1, 7, 96], table.values.concat())?;
    let g = Graph::inference();
    let out = model.forward(&g, &x, None)?;
    for (b, s) in out.structures.iter().enumerate() {
        if let Some(intra) = &s.intra {
            println!("block {b} intra: {} slices of {}x{}, k = {}", intra.slices(), intra.rows(), intra.cols(), intra.k);
        }
        if let Some(inter) = &s.inter {
            println!("block {b} inter: {} slices of {}x{}, k = {}", inter.slices(), inter.rows(), inter.cols(), inter.k);
        }
    }
    if let Some(intra) = &out.structures[0].intra {
        let svg = heatmap("block 0 intra confidence, channel 0", &intra.matrix("confidence", 0)?, "hyperedge", "patch");
        let path = std::env::temp_dir().join("hgts_intra_confidence.svg");
        std::fs::write(&path, svg).map_err(|e| hgts::HgtsError::Io { path: path.display().to_string(), source: e })?;
        println!("heatmap written to {}", path.display());
    }
    Ok(())
}
