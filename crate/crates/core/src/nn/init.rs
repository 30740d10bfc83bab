use hgts_tensor::{Element, ParamId, ParamStore, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::ffn::{Ffn, LayerNorm};
use super::linear::Linear;
use crate::error::Result;

/// Registers parameters in a store with truncated-normal weights.
pub struct ParamInit<'a, T: Element> {
    pub store: &'a mut ParamStore<T>,
    rng: ChaCha8Rng,
    normal: Normal<f64>,
    std: f64,
}

impl<'a, T: Element> ParamInit<'a, T> {
    pub fn new(store: &'a mut ParamStore<T>, seed: u64, std: f64) -> Self {
        ParamInit {
            store,
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal: Normal::new(0.0, std).expect("positive std"),
            std,
        }
    }

    /// Normal(0, std) resampled until it falls inside ±2·std.
    pub fn trunc_normal(&mut self, shape: &[usize]) -> Tensor<T> {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| loop {
                let v = self.normal.sample(&mut self.rng);
                if v.abs() <= 2.0 * self.std {
                    break T::of(v);
                }
            })
            .collect();
        Tensor::new(shape.to_vec(), data).expect("shape matches data")
    }

    pub fn weight(&mut self, name: &str, shape: &[usize]) -> Result<ParamId> {
        let t = self.trunc_normal(shape);
        Ok(self.store.insert(name, t)?)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<ParamId> {
        Ok(self.store.insert(name, Tensor::full(shape.to_vec(), T::of(value)))?)
    }

    pub fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Result<Linear> {
        Ok(Linear {
            weight: self.weight(&format!("{name}.weight"), &[fan_out, fan_in])?,
            bias: Some(self.constant(&format!("{name}.bias"), &[fan_out], 0.0)?),
            fan_in,
            fan_out,
        })
    }

    pub fn layer_norm(&mut self, name: &str, dim: usize, eps: f64) -> Result<LayerNorm> {
        Ok(LayerNorm {
            gain: self.constant(&format!("{name}.gain"), &[dim], 1.0)?,
            offset: self.constant(&format!("{name}.offset"), &[dim], 0.0)?,
            eps,
        })
    }

    pub fn ffn(&mut self, name: &str, d_model: usize, d_ff: usize) -> Result<Ffn> {
        Ok(Ffn {
            up: self.linear(&format!("{name}.up"), d_model, d_ff)?,
            down: self.linear(&format!("{name}.down"), d_ff, d_model)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_and_seeded() {
        let mut s1 = ParamStore::<f64>::new();
        let mut s2 = ParamStore::<f64>::new();
        let a = ParamInit::new(&mut s1, 9, 0.02).trunc_normal(&[4000]);
        let b = ParamInit::new(&mut s2, 9, 0.02).trunc_normal(&[4000]);
        assert_eq!(a, b);
        assert!(a.data().iter().all(|v| v.abs() <= 0.04));
        let mean = a.sum() / 4000.0;
        assert!(mean.abs() < 2e-3);
    }

    #[test]
    fn linear_bias_starts_at_zero() {
        let mut s = ParamStore::<f32>::new();
        let l = ParamInit::new(&mut s, 1, 0.02).linear("fc", 3, 2).unwrap();
        assert_eq!(s.value(l.weight).shape(), &[2, 3]);
        assert!(s.value(l.bias.unwrap()).data().iter().all(|&b| b == 0.0));
    }
}
