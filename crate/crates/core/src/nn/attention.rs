use hgts_tensor::{Element, Tensor, Var};

use super::{apply_rope, Ctx, Linear, RopeCache};
use crate::error::{HgtsError, Result};

fn split_heads<T: Element>(cx: &Ctx<'_, T>, x: Var, heads: usize) -> Result<Var> {
    let s = cx.g.shape(x);
    let [b, n, d] = s[..] else {
        return Err(HgtsError::InvalidArgument(format!("attention expects B×N×D, got {s:?}")));
    };
    if d % heads != 0 {
        return Err(HgtsError::Config(format!("width {d} is not divisible by {heads} heads")));
    }
    let x = cx.g.reshape(x, &[b, n, heads, d / heads])?;
    Ok(cx.g.permute(x, &[0, 2, 1, 3])?)
}

/// Scaled dot-product attention over already projected `q`, `k`, `v`.
///
/// `q` is `[Bq, Nq, D]` and `k`, `v` are `[Bk, Nk, D]`; a batch extent of 1
/// broadcasts. `bias` is added to the `[B, H, Nq, Nk]` logits before the
/// softmax. Returns `[B, Nq, D]` with heads concatenated.
pub fn multi_head_attention<T: Element>(
    cx: &Ctx<'_, T>,
    q: Var,
    k: Var,
    v: Var,
    heads: usize,
    rope: Option<&RopeCache<T>>,
    bias: Option<Var>,
) -> Result<Var> {
    let g = cx.g;
    let d = *g.shape(q).last().expect("rank 3");
    let dh = d / heads.max(1);
    let mut qh = split_heads(cx, q, heads)?;
    let mut kh = split_heads(cx, k, heads)?;
    let vh = split_heads(cx, v, heads)?;
    if let Some(r) = rope {
        qh = apply_rope(g, qh, r)?;
        kh = apply_rope(g, kh, r)?;
    }
    let scores = g.matmul_t(qh, kh)?;
    let scores = g.scale(scores, T::of(1.0 / (dh as f64).sqrt()));
    let weights = g.softmax_lastdim(scores, bias)?;
    let ctx = g.matmul(weights, vh)?;
    let s = g.shape(ctx);
    let ctx = g.permute(ctx, &[0, 2, 1, 3])?;
    Ok(g.reshape(ctx, &[s[0], s[2], d])?)
}

/// `[N, N]` additive mask with `-inf` above the diagonal.
pub(crate) fn causal_bias<T: Element>(n: usize) -> Tensor<T> {
    let mut data = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            data[i * n + j] = T::neg_infinity();
        }
    }
    Tensor::new([n, n], data).expect("square")
}

/// Multi-head self-attention over the patch tokens of each channel,
/// followed by an output projection and a residual add.
#[derive(Clone, Debug)]
pub struct Mhsa {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wp: Linear,
    pub heads: usize,
    pub causal: bool,
}

impl Mhsa {
    /// `x` is `(B·C)×N×D`. Pass `rope = None` to run without positions.
    pub fn forward<T: Element>(&self, cx: &Ctx<'_, T>, x: Var, rope: Option<&RopeCache<T>>) -> Result<Var> {
        let g = cx.g;
        let n = g.shape(x)[1];
        let q = self.wq.forward(cx, x)?;
        let k = self.wk.forward(cx, x)?;
        let v = self.wv.forward(cx, x)?;
        let bias = self.causal.then(|| g.constant(causal_bias(n)));
        let att = multi_head_attention(cx, q, k, v, self.heads, rope, bias)?;
        let out = self.wp.forward(cx, att)?;
        Ok(g.add(out, x)?)
    }

    pub fn num_params(&self) -> usize {
        [&self.wq, &self.wk, &self.wv, &self.wp].iter().map(|l| l.num_params()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ParamInit;
    use hgts_tensor::{Graph, ParamStore};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn layer(store: &mut ParamStore<f64>, d: usize, heads: usize, causal: bool) -> Mhsa {
        let mut init = ParamInit::new(store, 11, 0.3);
        Mhsa {
            wq: init.linear("q", d, d).unwrap(),
            wk: init.linear("k", d, d).unwrap(),
            wv: init.linear("v", d, d).unwrap(),
            wp: init.linear("p", d, d).unwrap(),
            heads,
            causal,
        }
    }

    fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn run(m: &Mhsa, store: &ParamStore<f64>, x: &Tensor<f64>, rope: Option<&RopeCache<f64>>) -> Tensor<f64> {
        let g = Graph::inference();
        let cx = Ctx::new(&g, store);
        let v = g.constant(x.clone());
        (*g.value(m.forward(&cx, v, rope).unwrap())).clone()
    }

    fn mat(x: &[f64], w: &Tensor<f64>, b: &Tensor<f64>) -> Vec<f64> {
        let (o, i) = (w.shape()[0], w.shape()[1]);
        (0..o).map(|r| (0..i).map(|c| w.data()[r * i + c] * x[c]).sum::<f64>() + b.data()[r]).collect()
    }

    #[test]
    fn single_token_is_projection_of_value() {
        let mut store = ParamStore::new();
        let m = layer(&mut store, 4, 2, true);
        let x = random(&[1, 1, 4], 1);
        let rope = RopeCache::new(4, 2, 1e4).unwrap();
        let y = run(&m, &store, &x, Some(&rope));
        let v = mat(x.data(), store.value(m.wv.weight), store.value(m.wv.bias.unwrap()));
        let p = mat(&v, store.value(m.wp.weight), store.value(m.wp.bias.unwrap()));
        for i in 0..4 {
            assert!((y.data()[i] - (p[i] + x.data()[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn loop_oracle_single_head() {
        let mut store = ParamStore::new();
        let m = layer(&mut store, 4, 1, false);
        let x = random(&[1, 3, 4], 2);
        let rope = RopeCache::new(3, 4, 1e4).unwrap();
        let y = run(&m, &store, &x, Some(&rope));
        let w = |l: &Linear| (store.value(l.weight).clone(), store.value(l.bias.unwrap()).clone());
        let rows: Vec<&[f64]> = x.data().chunks(4).collect();
        let (wq, bq) = w(&m.wq);
        let (wk, bk) = w(&m.wk);
        let (wv, bv) = w(&m.wv);
        let (wp, bp) = w(&m.wp);
        let q: Vec<Vec<f64>> = rows.iter().enumerate().map(|(n, r)| rope.rotate_vec(&mat(r, &wq, &bq), n)).collect();
        let k: Vec<Vec<f64>> = rows.iter().enumerate().map(|(n, r)| rope.rotate_vec(&mat(r, &wk, &bk), n)).collect();
        let v: Vec<Vec<f64>> = rows.iter().map(|r| mat(r, &wv, &bv)).collect();
        for i in 0..3 {
            let s: Vec<f64> = (0..3).map(|j| (0..4).map(|c| q[i][c] * k[j][c]).sum::<f64>() / 2.0).collect();
            let z: f64 = s.iter().map(|e| e.exp()).sum();
            let ctx: Vec<f64> = (0..4).map(|c| (0..3).map(|j| s[j].exp() / z * v[j][c]).sum()).collect();
            let out = mat(&ctx, &wp, &bp);
            for c in 0..4 {
                assert!((y.data()[i * 4 + c] - (out[c] + rows[i][c])).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn causal_prefix_invariance() {
        let mut store = ParamStore::new();
        let m = layer(&mut store, 8, 2, true);
        let rope = RopeCache::new(8, 4, 1e4).unwrap();
        let x = random(&[2, 8, 8], 3);
        let base = run(&m, &store, &x, Some(&rope));
        let mut x2 = x.clone();
        for v in &mut x2.data_mut()[5 * 8..8 * 8] {
            *v += 0.7;
        }
        let y = run(&m, &store, &x2, Some(&rope));
        for i in 0..5 * 8 {
            assert!((y.data()[i] - base.data()[i]).abs() < 1e-6);
        }
        assert!((y.data()[5 * 8] - base.data()[5 * 8]).abs() > 1e-6);
    }

    #[test]
    fn permutation_equivariant_without_rope() {
        let mut store = ParamStore::new();
        let m = layer(&mut store, 4, 2, false);
        let x = random(&[1, 5, 4], 4);
        let perm = [3, 0, 4, 1, 2];
        let mut xp = x.clone();
        for (dst, &src) in perm.iter().enumerate() {
            xp.data_mut()[dst * 4..dst * 4 + 4].copy_from_slice(&x.data()[src * 4..src * 4 + 4]);
        }
        let y = run(&m, &store, &x, None);
        let yp = run(&m, &store, &xp, None);
        for (dst, &src) in perm.iter().enumerate() {
            for c in 0..4 {
                assert!((yp.data()[dst * 4 + c] - y.data()[src * 4 + c]).abs() < 1e-6);
            }
        }
    }
}
