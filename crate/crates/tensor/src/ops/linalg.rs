use crate::element::Element;
use crate::error::{Result, TensorError};
use crate::graph::{Graph, Var};
use crate::kernels::{batched_matmul, batched_matmul_backward, gemm};
use crate::tensor::Tensor;

impl<T: Element> Graph<T> {
    /// Batched `a[.., m, k] · b[.., k, n]` with broadcast leading axes.
    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, false)
    }

    /// Batched `a[.., m, k] · b[.., n, k]ᵀ`.
    pub fn matmul_t(&self, a: Var, b: Var) -> Result<Var> {
        self.matmul_impl(a, b, true)
    }

    fn matmul_impl(&self, a: Var, b: Var, trans_b: bool) -> Result<Var> {
        let out = batched_matmul(&self.value(a), &self.value(b), trans_b)?;
        Ok(self.record(out, &[a, b], move |inp: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            let (ga, gb) = batched_matmul_backward(inp[0], inp[1], g, trans_b, true, true)?;
            Ok(vec![ga, gb])
        }))
    }

    /// Affine map over the last axis: `x · wᵀ + bias`, with `w` of shape
    /// `[out, in]`.
    pub fn linear(&self, x: Var, w: Var, bias: Option<Var>) -> Result<Var> {
        let (xv, wv) = (self.value(x), self.value(w));
        let xs = xv.shape();
        if wv.rank() != 2 || xs.is_empty() || xs[xs.len() - 1] != wv.shape()[1] {
            return Err(TensorError::shape("linear", xs, wv.shape()));
        }
        let (fan_out, fan_in) = (wv.shape()[0], wv.shape()[1]);
        let rows = xv.numel() / fan_in;
        let mut out = vec![T::zero(); rows * fan_out];
        gemm(rows, fan_in, fan_out, T::one(), xv.data(), (fan_in, 1), wv.data(), (1, fan_in), T::zero(), &mut out, (fan_out, 1));
        let mut parents = vec![x, w];
        if let Some(b) = bias {
            let bv = self.value(b);
            if bv.shape() != [fan_out] {
                return Err(TensorError::shape("linear bias", bv.shape(), &[fan_out]));
            }
            for row in out.chunks_mut(fan_out) {
                row.iter_mut().zip(bv.data()).for_each(|(o, &b)| *o = *o + b);
            }
            parents.push(b);
        }
        let mut shape = xs.to_vec();
        *shape.last_mut().expect("rank >= 1") = fan_out;
        let out = Tensor::new(shape, out)?;
        Ok(self.record(out, &parents, move |inp: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            let (xv, wv) = (inp[0], inp[1]);
            let gd = g.data();
            let mut gx = vec![T::zero(); xv.numel()];
            gemm(rows, fan_out, fan_in, T::one(), gd, (fan_out, 1), wv.data(), (fan_in, 1), T::zero(), &mut gx, (fan_in, 1));
            let mut gw = vec![T::zero(); wv.numel()];
            gemm(fan_out, rows, fan_in, T::one(), gd, (1, fan_out), xv.data(), (fan_in, 1), T::zero(), &mut gw, (fan_in, 1));
            let mut grads = vec![Some(Tensor::new(xv.shape(), gx)?), Some(Tensor::new(wv.shape(), gw)?)];
            if inp.len() == 3 {
                let mut gb = vec![T::zero(); fan_out];
                for row in gd.chunks(fan_out) {
                    gb.iter_mut().zip(row).for_each(|(a, &v)| *a = *a + v);
                }
                grads.push(Some(Tensor::new([fan_out], gb)?));
            }
            Ok(grads)
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_matches_manual() {
        let g = Graph::<f64>::new();
        let x = g.constant(Tensor::new([2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap());
        let w = g.constant(Tensor::new([2, 3], vec![1., 0., 0., 0., 1., 1.]).unwrap());
        let b = g.constant(Tensor::new([2], vec![0.5, -1.]).unwrap());
        let y = g.linear(x, w, Some(b)).unwrap();
        assert_eq!(g.value(y).data(), &[1.5, 4., 4.5, 10.]);
    }

    #[test]
    fn linear_rejects_bad_width() {
        let g = Graph::<f32>::new();
        let x = g.constant(Tensor::zeros([2, 4]));
        let w = g.constant(Tensor::zeros([2, 3]));
        assert!(g.linear(x, w, None).is_err());
    }
}
