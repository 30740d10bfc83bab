use hgts_tensor::{Element, Graph, ParamStore, Tensor, Var};

use crate::config::{Ablation, ModelConfig};
use crate::error::{HgtsError, Result};
use crate::hypergraph::{EdgeToNode, HgaBlock, HyperGraphStructure, InterHga, IntraHga};
use crate::nn::{denormalize, instance_norm, patch_embed, Ctx, Linear, Mhsa, NormStats, ParamInit, RopeCache};

/// One stacked stage. Ablated components are `None`.
#[derive(Clone, Debug)]
pub struct Block {
    pub mhsa: Option<Mhsa>,
    pub intra: Option<IntraHga>,
    pub inter: Option<InterHga>,
    pub edge_to_node: EdgeToNode,
}

/// Hypergraphs sampled by one block during a forward pass.
#[derive(Clone, Debug)]
pub struct BlockStructures<T> {
    /// `B·C` slices of `E×N`.
    pub intra: Option<HyperGraphStructure<T>>,
    /// `B` slices of `C×(C·E)` (or `C×C` without the intra stage).
    pub inter: Option<HyperGraphStructure<T>>,
}

pub struct ForwardOutput<T> {
    /// `B×(C·N)×D` token features after the last block.
    pub tokens: Var,
    /// `B×C×(N·P)` head output in normalized units.
    pub head: Var,
    pub stats: NormStats<T>,
    pub structures: Vec<BlockStructures<T>>,
}

impl<T: Element> ForwardOutput<T> {
    /// Head output mapped back to the input's scale.
    pub fn denormalized(&self, g: &Graph<T>) -> Result<Tensor<T>> {
        denormalize(&g.value(self.head), &self.stats)
    }
}

/// HGTS-Former parameters and layer layout.
#[derive(Clone, Debug)]
pub struct HgtsFormer<T: Element> {
    cfg: ModelConfig,
    params: ParamStore<T>,
    embed: Linear,
    global_query: Option<Linear>,
    blocks: Vec<Block>,
    head: Linear,
    rope: RopeCache<T>,
}

impl<T: Element> HgtsFormer<T> {
    /// Builds a freshly initialized model. The same seed always produces
    /// the same parameters.
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let (d, dff, p, eps) = (cfg.d_model, cfg.d_ff, cfg.patch_len, cfg.ln_eps);
        let mut store = ParamStore::new();
        let mut init = ParamInit::new(&mut store, seed, cfg.init_std);
        let embed = init.linear("embed", p, d)?;
        let global_query = if cfg.has_inter() {
            Some(init.linear("global_query", cfg.lookback, d)?)
        } else {
            None
        };
        let mut blocks = Vec::with_capacity(cfg.layers);
        for i in 0..cfg.layers {
            let pre = format!("blocks.{i}");
            let mhsa = if cfg.has_mhsa() {
                let n = format!("{pre}.mhsa");
                Some(Mhsa {
                    wq: init.linear(&format!("{n}.wq"), d, d)?,
                    wk: init.linear(&format!("{n}.wk"), d, d)?,
                    wv: init.linear(&format!("{n}.wv"), d, d)?,
                    wp: init.linear(&format!("{n}.wp"), d, d)?,
                    heads: cfg.heads,
                    causal: cfg.causal,
                })
            } else {
                None
            };
            let hga = |init: &mut ParamInit<'_, T>, n: &str| -> Result<HgaBlock> {
                Ok(HgaBlock {
                    wq: init.linear(&format!("{n}.wq"), d, d)?,
                    wk: init.linear(&format!("{n}.wk"), d, d)?,
                    wv: init.linear(&format!("{n}.wv"), d, d)?,
                    ffn: init.ffn(&format!("{n}.ffn"), d, dff)?,
                    ln1: init.layer_norm(&format!("{n}.ln1"), d, eps)?,
                    ln2: init.layer_norm(&format!("{n}.ln2"), d, eps)?,
                    heads: cfg.heads,
                })
            };
            let intra = if cfg.has_intra() {
                let n = format!("{pre}.intra");
                let queries = init.weight(&format!("{n}.queries"), &[cfg.edge_num, d])?;
                Some(IntraHga {
                    queries,
                    block: hga(&mut init, &n)?,
                    edges: cfg.edge_num,
                })
            } else {
                None
            };
            let inter = if cfg.has_inter() {
                Some(InterHga {
                    block: hga(&mut init, &format!("{pre}.inter"))?,
                })
            } else {
                None
            };
            let n = format!("{pre}.edge_to_node");
            let edge_to_node = EdgeToNode {
                wq: init.linear(&format!("{n}.wq"), d, d)?,
                wk: init.linear(&format!("{n}.wk"), d, d)?,
                wv: init.linear(&format!("{n}.wv"), d, d)?,
                wp: init.linear(&format!("{n}.wp"), d, d)?,
                ffn: init.ffn(&format!("{n}.ffn"), d, dff)?,
                ln1: init.layer_norm(&format!("{n}.ln1"), d, eps)?,
                ln2: init.layer_norm(&format!("{n}.ln2"), d, eps)?,
                heads: cfg.heads,
            };
            blocks.push(Block {
                mhsa,
                intra,
                inter,
                edge_to_node,
            });
        }
        let head = init.linear("head", d, p)?;
        let rope = RopeCache::new(cfg.tokens(), cfg.head_dim(), cfg.rope_base)?;
        Ok(HgtsFormer {
            cfg,
            params: store,
            embed,
            global_query,
            blocks,
            head,
            rope,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn rope(&self) -> &RopeCache<T> {
        &self.rope
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_elements()
    }

    /// Full pipeline on a `B×C×L` window.
    ///
    /// With `observed`, normalization statistics use observed points only
    /// and hidden points enter the network as zeros.
    pub fn forward(&self, g: &Graph<T>, x: &Tensor<T>, observed: Option<&Tensor<T>>) -> Result<ForwardOutput<T>> {
        let cfg = &self.cfg;
        let [b, c, l] = *x.shape() else {
            return Err(HgtsError::InvalidArgument(format!("input must be B×C×L, got {:?}", x.shape())));
        };
        if l != cfg.lookback {
            return Err(HgtsError::InvalidArgument(format!(
                "input length {l} differs from lookback {}",
                cfg.lookback
            )));
        }
        if !x.all_finite() {
            return Err(HgtsError::Data("non-finite value in model input".into()));
        }
        let (n, d, e) = (cfg.tokens(), cfg.d_model, cfg.edge_num);
        let cx = Ctx::new(g, &self.params);
        let (xn, stats) = instance_norm(x, observed, cfg.norm_eps)?;
        let xv = g.constant(xn);
        let tokens = patch_embed(&cx, xv, cfg.patch_len, &self.embed)?;
        let mut tokens = g.reshape(tokens, &[b * c, n, d])?;
        let q_g = match &self.global_query {
            Some(lin) => Some(lin.forward(&cx, xv)?),
            None => None,
        };
        let mut structures = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let h = match &block.mhsa {
                Some(m) => m.forward(&cx, tokens, Some(&self.rope))?,
                None => tokens,
            };
            let (intra_edges, intra_st) = match &block.intra {
                Some(intra) => {
                    let (out, st) = intra.forward(&cx, h, cfg.alpha, cfg.topk_axis)?;
                    (Some(out), Some(st))
                }
                None => (None, None),
            };
            let (channel_edges, inter_st) = match (&block.inter, intra_edges) {
                (Some(inter), Some(edges)) => {
                    let nodes = g.reshape(edges, &[b, c * e, d])?;
                    let q = q_g.expect("global query exists with the inter stage");
                    let (out, st) = inter.forward(&cx, nodes, q, cfg.alpha, cfg.topk_axis)?;
                    (out, Some(st))
                }
                (Some(inter), None) => {
                    let pooled = g.mean_axis(h, 1, false)?;
                    let nodes = g.reshape(pooled, &[b, c, d])?;
                    let q = q_g.expect("global query exists with the inter stage");
                    let (out, st) = inter.forward(&cx, nodes, q, cfg.alpha, cfg.topk_axis)?;
                    (out, Some(st))
                }
                (None, Some(edges)) => {
                    let pooled = g.mean_axis(edges, 1, false)?;
                    (g.reshape(pooled, &[b, c, d])?, None)
                }
                (None, None) => unreachable!("a single ablation leaves one hypergraph stage"),
            };
            let flat = g.reshape(h, &[b, c * n, d])?;
            let out = block.edge_to_node.forward(&cx, flat, channel_edges)?;
            tokens = g.reshape(out, &[b * c, n, d])?;
            structures.push(BlockStructures {
                intra: intra_st,
                inter: inter_st,
            });
        }
        let head = self.head.forward(&cx, tokens)?;
        let head = g.reshape(head, &[b, c, n * cfg.patch_len])?;
        let tokens = g.reshape(tokens, &[b, c * n, d])?;
        Ok(ForwardOutput {
            tokens,
            head,
            stats,
            structures,
        })
    }

    /// Fills hidden points of a `B×C×L` series; observed values are kept
    /// verbatim.
    pub fn impute(&self, series: &Tensor<T>, observed: &Tensor<T>) -> Result<Tensor<T>> {
        if self.cfg.causal {
            return Err(HgtsError::Config("imputation needs a non-causal model".into()));
        }
        let g = Graph::inference();
        let out = self.forward(&g, series, Some(observed))?;
        let recon = out.denormalized(&g)?;
        let data = series
            .data()
            .iter()
            .zip(observed.data())
            .zip(recon.data())
            .map(|((&x, &m), &r)| if m != T::zero() { x } else { r })
            .collect();
        Ok(Tensor::new(series.shape(), data)?)
    }

    /// Copies parameter values from another model of identical layout.
    pub fn load_params(&mut self, other: &ParamStore<T>) -> Result<()> {
        if other.len() != self.params.len() {
            return Err(HgtsError::Integrity(format!(
                "{} tensors supplied for {} parameters",
                other.len(),
                self.params.len()
            )));
        }
        for (id, p) in other.iter() {
            if self.params.get(id).name() != p.name() {
                return Err(HgtsError::Integrity(format!(
                    "parameter {} found where {} was expected",
                    p.name(),
                    self.params.get(id).name()
                )));
            }
            self.params.set_value(id, p.value().clone()).map_err(|e| HgtsError::Integrity(e.to_string()))?;
        }
        Ok(())
    }
}

/// Config with the named component removed.
pub fn ablation_variant(cfg: &ModelConfig, which: &str) -> Result<ModelConfig> {
    let ablation: Ablation = which.parse()?;
    Ok(ModelConfig {
        ablation: Some(ablation),
        ..cfg.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::count_parameters;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], seed: u64) -> Tensor<f32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn shapes_and_structures() {
        let cfg = ModelConfig::tiny(3);
        let m = HgtsFormer::<f32>::new(cfg.clone(), 0).unwrap();
        let g = Graph::inference();
        let out = m.forward(&g, &random(&[2, 3, 32], 1), None).unwrap();
        assert_eq!(g.shape(out.head), vec![2, 3, 32]);
        assert_eq!(g.shape(out.tokens), vec![2, 12, 16]);
        let st = &out.structures[0];
        assert_eq!(st.intra.as_ref().unwrap().confidence.shape(), &[6, 4, 4]);
        assert_eq!(st.inter.as_ref().unwrap().confidence.shape(), &[2, 3, 12]);
        assert_eq!(count_parameters(&cfg), m.num_parameters());
    }

    #[test]
    fn degenerate_single_token_runs() {
        let cfg = ModelConfig {
            lookback: 8,
            patch_len: 8,
            ..ModelConfig::tiny(1)
        };
        let m = HgtsFormer::<f32>::new(cfg, 0).unwrap();
        let g = Graph::inference();
        let out = m.forward(&g, &random(&[1, 1, 8], 2), None).unwrap();
        assert!(g.value(out.head).all_finite());
    }

    #[test]
    fn same_seed_same_output() {
        let x = random(&[1, 2, 32], 3);
        let run = || {
            let m = HgtsFormer::<f32>::new(ModelConfig::tiny(2), 7).unwrap();
            let g = Graph::inference();
            let out = m.forward(&g, &x, None).unwrap();
            g.value(out.head).data().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn ablations_run_and_shrink() {
        let cfg = ModelConfig::tiny(2);
        let full = HgtsFormer::<f32>::new(cfg.clone(), 0).unwrap().num_parameters();
        for name in ["no_mhsa_rope", "no_intra", "no_inter"] {
            let v = ablation_variant(&cfg, name).unwrap();
            let m = HgtsFormer::<f32>::new(v.clone(), 0).unwrap();
            assert!(m.num_parameters() < full);
            assert_eq!(m.num_parameters(), count_parameters(&v));
            let g = Graph::inference();
            let out = m.forward(&g, &random(&[1, 2, 32], 4), None).unwrap();
            assert!(g.value(out.head).all_finite());
        }
        assert!(matches!(ablation_variant(&cfg, "no_head"), Err(HgtsError::InvalidArgument(_))));
    }

    #[test]
    fn impute_rejects_causal_and_keeps_observed() {
        let x = random(&[1, 2, 32], 5);
        let ones = Tensor::<f32>::ones([1, 2, 32]);
        let causal = HgtsFormer::<f32>::new(ModelConfig::tiny(2), 0).unwrap();
        assert!(matches!(causal.impute(&x, &ones), Err(HgtsError::Config(_))));
        let cfg = ModelConfig {
            causal: false,
            task: crate::config::Task::Impute,
            ..ModelConfig::tiny(2)
        };
        let m = HgtsFormer::<f32>::new(cfg, 0).unwrap();
        assert_eq!(m.impute(&x, &ones).unwrap(), x);
        let mut mask = ones.clone();
        mask.data_mut()[3] = 0.0;
        let y = m.impute(&x, &mask).unwrap();
        assert_eq!(y.data()[2], x.data()[2]);
        assert!(y.data()[3].is_finite());
    }
}
