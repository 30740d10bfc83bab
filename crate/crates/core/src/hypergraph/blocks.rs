use hgts_tensor::{Element, ParamId, Tensor, Var};

use super::{build_structure, HyperGraphStructure};
use crate::config::TopkAxis;
use crate::error::{HgtsError, Result};
use crate::nn::{multi_head_attention, Ctx, Ffn, LayerNorm, Linear};
use crate::nn::ln_ffn_ln_residual;

/// Projections and residual tail shared by both hypergraph aggregations.
#[derive(Clone, Debug)]
pub struct HgaBlock {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub ffn: Ffn,
    pub ln1: LayerNorm,
    pub ln2: LayerNorm,
    pub heads: usize,
}

/// Masked attention from hyperedge queries to nodes followed by
/// `LN(FFN(LN(x))) + x`.
///
/// `queries` is `[1|S, E, D]`, `nodes` is `[S, N, D]`, `mask` is `[S, E, N]`.
pub fn hga_aggregate<T: Element>(
    cx: &Ctx<'_, T>,
    block: &HgaBlock,
    queries: Var,
    nodes: Var,
    mask: &Tensor<T>,
) -> Result<Var> {
    let g = cx.g;
    let [s, e, n] = *mask.shape() else {
        return Err(HgtsError::InvalidArgument(format!("mask must be S×E×N, got {:?}", mask.shape())));
    };
    let ns = g.shape(nodes);
    if ns[0] != s || ns[1] != n || g.shape(queries)[1] != e {
        return Err(HgtsError::InvalidArgument(format!(
            "mask {:?} does not fit queries {:?} and nodes {ns:?}",
            mask.shape(),
            g.shape(queries)
        )));
    }
    let q = block.wq.forward(cx, queries)?;
    let k = block.wk.forward(cx, nodes)?;
    let v = block.wv.forward(cx, nodes)?;
    let bias = g.constant(mask.clone().reshape([s, 1, e, n])?);
    let out = multi_head_attention(cx, q, k, v, block.heads, None, Some(bias))?;
    ln_ffn_ln_residual(cx, out, &block.ln1, &block.ffn, &block.ln2)
}

/// Aggregates each channel's patch tokens into `E` learnable hyperedges.
#[derive(Clone, Debug)]
pub struct IntraHga {
    /// `[E, D]`
    pub queries: ParamId,
    pub block: HgaBlock,
    pub edges: usize,
}

impl IntraHga {
    /// `x` is `(B·C)×N×D`; returns `(B·C)×E×D` and the sampled structure.
    pub fn forward<T: Element>(
        &self,
        cx: &Ctx<'_, T>,
        x: Var,
        alpha: f64,
        axis: TopkAxis,
    ) -> Result<(Var, HyperGraphStructure<T>)> {
        if self.edges <= 3 {
            return Err(HgtsError::Config(format!("edge_num must be greater than 3, got {}", self.edges)));
        }
        let qv = cx.params.value(self.queries);
        let structure = build_structure(qv, &cx.g.value(x), alpha, self.edges / 3, axis)?;
        let d = qv.shape()[1];
        let q = cx.g.reshape(cx.p(self.queries), &[1, self.edges, d])?;
        let out = hga_aggregate(cx, &self.block, q, x, &structure.mask)?;
        Ok((out, structure))
    }
}

/// Aggregates all channels' intra hyperedges into one hyperedge per
/// channel, queried by the global projection `Q_G`.
#[derive(Clone, Debug)]
pub struct InterHga {
    pub block: HgaBlock,
}

impl InterHga {
    /// `nodes` is `B×(C·E)×D` in channel-major order, `q_g` is `B×C×D`.
    pub fn forward<T: Element>(
        &self,
        cx: &Ctx<'_, T>,
        nodes: Var,
        q_g: Var,
        alpha: f64,
        axis: TopkAxis,
    ) -> Result<(Var, HyperGraphStructure<T>)> {
        let c = cx.g.shape(q_g)[1];
        let structure = build_structure(&cx.g.value(q_g), &cx.g.value(nodes), alpha, (c / 3).max(1), axis)?;
        let out = hga_aggregate(cx, &self.block, q_g, nodes, &structure.mask)?;
        Ok((out, structure))
    }
}

/// Cross-attention writing channel-level hyperedges back into tokens.
#[derive(Clone, Debug)]
pub struct EdgeToNode {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wp: Linear,
    pub ffn: Ffn,
    pub ln1: LayerNorm,
    pub ln2: LayerNorm,
    pub heads: usize,
}

impl EdgeToNode {
    /// `tokens` is `B×(C·N)×D`, `edges` is `B×C'×D`.
    pub fn forward<T: Element>(&self, cx: &Ctx<'_, T>, tokens: Var, edges: Var) -> Result<Var> {
        let q = self.wq.forward(cx, tokens)?;
        let k = self.wk.forward(cx, edges)?;
        let v = self.wv.forward(cx, edges)?;
        let att = multi_head_attention(cx, q, k, v, self.heads, None, None)?;
        let x = self.wp.forward(cx, att)?;
        let x = cx.g.add(x, tokens)?;
        ln_ffn_ln_residual(cx, x, &self.ln1, &self.ffn, &self.ln2)
    }
}
