use std::sync::Arc;

use hgts_tensor::{Element, Graph, Tensor, Var};

use crate::error::{HgtsError, Result};

/// Cos/sin tables for rotary position embedding, `positions × head_dim/2`.
#[derive(Clone, Debug)]
pub struct RopeCache<T> {
    cos: Arc<Vec<T>>,
    sin: Arc<Vec<T>>,
    positions: usize,
    head_dim: usize,
}

impl<T: Element> RopeCache<T> {
    pub fn new(positions: usize, head_dim: usize, base: f64) -> Result<Self> {
        if head_dim == 0 || !head_dim.is_multiple_of(2) {
            return Err(HgtsError::Config(format!("rotary embedding needs an even head dimension, got {head_dim}")));
        }
        let half = head_dim / 2;
        let mut cos = Vec::with_capacity(positions * half);
        let mut sin = Vec::with_capacity(positions * half);
        for n in 0..positions {
            for i in 0..half {
                let angle = n as f64 * base.powf(-2.0 * i as f64 / head_dim as f64);
                cos.push(T::of(angle.cos()));
                sin.push(T::of(angle.sin()));
            }
        }
        Ok(RopeCache {
            cos: Arc::new(cos),
            sin: Arc::new(sin),
            positions,
            head_dim,
        })
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn head_dim(&self) -> usize {
        self.head_dim
    }

    /// `(cos, sin)` of pair `i` at position `n`.
    pub fn angle(&self, n: usize, i: usize) -> (T, T) {
        let k = n * self.head_dim / 2 + i;
        (self.cos[k], self.sin[k])
    }

    /// Rotates one head vector as if it sat at position `n`.
    pub fn rotate_vec(&self, v: &[T], n: usize) -> Vec<T> {
        let mut out = v.to_vec();
        rotate_row(self, &mut out, v, n, false);
        out
    }

    /// Rotates `[.., N, head_dim]`, using positions `0..N`.
    pub fn rotate(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        rotate_tensor(self, x, false)
    }
}

fn rotate_row<T: Element>(cache: &RopeCache<T>, out: &mut [T], src: &[T], n: usize, inverse: bool) {
    for i in 0..cache.head_dim / 2 {
        let (c, s) = cache.angle(n, i);
        let s = if inverse { -s } else { s };
        let (a, b) = (src[2 * i], src[2 * i + 1]);
        out[2 * i] = a * c - b * s;
        out[2 * i + 1] = a * s + b * c;
    }
}

fn rotate_tensor<T: Element>(cache: &RopeCache<T>, x: &Tensor<T>, inverse: bool) -> Result<Tensor<T>> {
    let shape = x.shape();
    let r = shape.len();
    if r < 2 || shape[r - 1] != cache.head_dim {
        return Err(HgtsError::InvalidArgument(format!(
            "rotary embedding expects [.., N, {}], got {shape:?}",
            cache.head_dim
        )));
    }
    let n = shape[r - 2];
    if n > cache.positions {
        return Err(HgtsError::InvalidArgument(format!(
            "{n} positions exceed the cache size {}",
            cache.positions
        )));
    }
    let d = cache.head_dim;
    let mut out = vec![T::zero(); x.numel()];
    for (k, (o, src)) in out.chunks_mut(d).zip(x.data().chunks(d)).enumerate() {
        rotate_row(cache, o, src, k % n, inverse);
    }
    Ok(Tensor::new(shape, out)?)
}

/// Differentiable rotary embedding over `[.., N, head_dim]`.
pub fn apply_rope<T: Element>(g: &Graph<T>, x: Var, cache: &RopeCache<T>) -> Result<Var> {
    let out = rotate_tensor(cache, &g.value(x), false)?;
    let cache = cache.clone();
    Ok(g.record(out, &[x], move |_: &[&Tensor<T>], _: &Tensor<T>, grad: &Tensor<T>| {
        let back = rotate_tensor(&cache, grad, true)
            .map_err(|e| hgts_tensor::TensorError::InvalidArgument(e.to_string()))?;
        Ok(vec![Some(back)])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn odd_dim_rejected() {
        assert!(matches!(RopeCache::<f64>::new(4, 5, 1e4), Err(HgtsError::Config(_))));
    }

    #[test]
    fn position_zero_is_identity() {
        let c = RopeCache::<f64>::new(8, 6, 1e4).unwrap();
        for i in 0..3 {
            assert_eq!(c.angle(0, i), (1.0, 0.0));
        }
        let v = [0.3, -1.0, 2.0, 0.5, 0.1, 7.0];
        assert_eq!(c.rotate_vec(&v, 0), v);
    }

    #[test]
    fn isometry_and_relative_position() {
        let c = RopeCache::<f64>::new(64, 8, 1e4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let q: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let k: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (m, n, s) = (rng.random_range(0..20), rng.random_range(0..20), rng.random_range(0..20));
            assert!((norm(&c.rotate_vec(&q, m)) - norm(&q)).abs() < 1e-6);
            let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let d1 = dot(&c.rotate_vec(&q, m), &c.rotate_vec(&k, n));
            let d2 = dot(&c.rotate_vec(&q, m + s), &c.rotate_vec(&k, n + s));
            assert!((d1 - d2).abs() < 1e-5);
        }
    }
}
