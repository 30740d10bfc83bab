//! Scalar loop references for the hypergraph blocks, written without the
//! tensor ops they check.

use hgts_tensor::{ParamStore, Tensor};

use crate::error::{HgtsError, Result};
use crate::hypergraph::{EdgeToNode, HgaBlock};
use crate::nn::{Ffn, LayerNorm, Linear};

fn linear(store: &ParamStore<f64>, l: &Linear, x: &[f64]) -> Vec<f64> {
    let w = store.value(l.weight).data();
    let b = l.bias.map(|b| store.value(b).data());
    (0..l.fan_out)
        .map(|o| {
            let dot: f64 = (0..l.fan_in).map(|i| w[o * l.fan_in + i] * x[i]).sum();
            dot + b.map_or(0.0, |b| b[o])
        })
        .collect()
}

fn gelu(x: f64) -> f64 {
    let k = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (k * (x + 0.044715 * x * x * x)).tanh())
}

fn layer_norm(store: &ParamStore<f64>, ln: &LayerNorm, x: &[f64]) -> Vec<f64> {
    let d = x.len() as f64;
    let mean = x.iter().sum::<f64>() / d;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d;
    let (g, o) = (store.value(ln.gain).data(), store.value(ln.offset).data());
    x.iter()
        .enumerate()
        .map(|(i, v)| (v - mean) / (var + ln.eps).sqrt() * g[i] + o[i])
        .collect()
}

fn tail(store: &ParamStore<f64>, ln1: &LayerNorm, ffn: &Ffn, ln2: &LayerNorm, x: &[f64]) -> Vec<f64> {
    let h = layer_norm(store, ln1, x);
    let h: Vec<f64> = linear(store, &ffn.up, &h).into_iter().map(gelu).collect();
    let h = layer_norm(store, ln2, &linear(store, &ffn.down, &h));
    h.iter().zip(x).map(|(a, b)| a + b).collect()
}

/// Attention of one query over `keys`, each head separately, restricted to
/// the indices in `allowed`.
fn attend(q: &[f64], keys: &[Vec<f64>], values: &[Vec<f64>], heads: usize, allowed: &[usize]) -> Vec<f64> {
    let d = q.len();
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = vec![0.0; d];
    for h in 0..heads {
        let r = h * dh..(h + 1) * dh;
        let scores: Vec<f64> = allowed
            .iter()
            .map(|&j| r.clone().map(|c| q[c] * keys[j][c]).sum::<f64>() * scale)
            .collect();
        let top = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = scores.iter().map(|s| (s - top).exp()).sum();
        for (s, &j) in scores.iter().zip(allowed) {
            let w = (s - top).exp() / z;
            for c in r.clone() {
                out[c] += w * values[j][c];
            }
        }
    }
    out
}

fn rows(t: &Tensor<f64>) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(HgtsError::InvalidArgument(format!("expected rank 3, got {:?}", t.shape()))),
    }
}

/// Hypergraph aggregation where each hyperedge attends only to its member
/// nodes. A hyperedge with no members attends to every node, which is the
/// limit of an additive mask that is equal across the row.
///
/// `queries` is `[1|S, E, D]`, `nodes` is `[S, N, D]`, `incidence` is
/// `[S, E, N]`; returns `[S, E, D]`.
pub fn hga_dense_oracle(
    store: &ParamStore<f64>,
    block: &HgaBlock,
    queries: &Tensor<f64>,
    nodes: &Tensor<f64>,
    incidence: &Tensor<f64>,
) -> Result<Tensor<f64>> {
    let (sq, e, d) = rows(queries)?;
    let (s, n, _) = rows(nodes)?;
    let mut out = Vec::with_capacity(s * e * d);
    for si in 0..s {
        let qs = if sq == 1 { 0 } else { si };
        let node = |j: usize| &nodes.data()[(si * n + j) * d..(si * n + j + 1) * d];
        let keys: Vec<Vec<f64>> = (0..n).map(|j| linear(store, &block.wk, node(j))).collect();
        let values: Vec<Vec<f64>> = (0..n).map(|j| linear(store, &block.wv, node(j))).collect();
        for ei in 0..e {
            let q = linear(store, &block.wq, &queries.data()[(qs * e + ei) * d..(qs * e + ei + 1) * d]);
            let mut members: Vec<usize> = (0..n).filter(|&j| incidence.data()[(si * e + ei) * n + j] != 0.0).collect();
            if members.is_empty() {
                members = (0..n).collect();
            }
            let att = attend(&q, &keys, &values, block.heads, &members);
            out.extend(tail(store, &block.ln1, &block.ffn, &block.ln2, &att));
        }
    }
    Ok(Tensor::new([s, e, d], out)?)
}

/// Edge-to-node cross-attention with projection, residual and tail.
/// `tokens` is `[B, M, D]`, `edges` is `[B, C, D]`.
pub fn edge_to_node_dense_oracle(
    store: &ParamStore<f64>,
    block: &EdgeToNode,
    tokens: &Tensor<f64>,
    edges: &Tensor<f64>,
) -> Result<Tensor<f64>> {
    let (b, m, d) = rows(tokens)?;
    let (_, c, _) = rows(edges)?;
    let all: Vec<usize> = (0..c).collect();
    let mut out = Vec::with_capacity(b * m * d);
    for bi in 0..b {
        let edge = |j: usize| &edges.data()[(bi * c + j) * d..(bi * c + j + 1) * d];
        let keys: Vec<Vec<f64>> = (0..c).map(|j| linear(store, &block.wk, edge(j))).collect();
        let values: Vec<Vec<f64>> = (0..c).map(|j| linear(store, &block.wv, edge(j))).collect();
        for ti in 0..m {
            let x = &tokens.data()[(bi * m + ti) * d..(bi * m + ti + 1) * d];
            let q = linear(store, &block.wq, x);
            let att = linear(store, &block.wp, &attend(&q, &keys, &values, block.heads, &all));
            let res: Vec<f64> = att.iter().zip(x).map(|(a, b)| a + b).collect();
            out.extend(tail(store, &block.ln1, &block.ffn, &block.ln2, &res));
        }
    }
    Ok(Tensor::new([b, m, d], out)?)
}
