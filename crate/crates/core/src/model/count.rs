use crate::config::ModelConfig;

/// Closed-form parameter count, biases and LayerNorm affines included.
pub fn count_parameters(cfg: &ModelConfig) -> usize {
    let (d, dff, p, l, e) = (cfg.d_model, cfg.d_ff, cfg.patch_len, cfg.lookback, cfg.edge_num);
    let proj = d * d + d;
    let ffn = 2 * d * dff + dff + d;
    let lns = 4 * d;
    let mut global = (p * d + d) + (d * p + p);
    if cfg.has_inter() {
        global += l * d + d;
    }
    let mut block = 4 * proj + ffn + lns;
    if cfg.has_mhsa() {
        block += 4 * proj;
    }
    if cfg.has_intra() {
        block += e * d + 3 * proj + ffn + lns;
    }
    if cfg.has_inter() {
        block += 3 * proj + ffn + lns;
    }
    global + cfg.layers * block
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Ablation;

    fn table_iv() -> ModelConfig {
        ModelConfig {
            layers: 1,
            d_model: 512,
            d_ff: 2048,
            heads: 8,
            patch_len: 96,
            lookback: 672,
            edge_num: 4,
            channels: 7,
            ..ModelConfig::tiny(7)
        }
    }

    #[test]
    fn table_iv_budget() {
        let n = count_parameters(&table_iv());
        assert_eq!(n, 10_428_000);
        assert!((n as f64 / 10.38e6 - 1.0).abs() < 0.05);
    }

    #[test]
    fn zero_layers_counts_globals_only() {
        let cfg = ModelConfig { layers: 0, ..table_iv() };
        assert_eq!(count_parameters(&cfg), 96 * 512 + 512 + 512 * 96 + 96 + 672 * 512 + 512);
    }

    #[test]
    fn every_ablation_shrinks() {
        let full = count_parameters(&table_iv());
        for a in Ablation::ALL {
            let cfg = ModelConfig { ablation: Some(a), ..table_iv() };
            assert!(count_parameters(&cfg) < full, "{a}");
        }
    }
}
