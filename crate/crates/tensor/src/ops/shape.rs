use crate::element::Element;
use crate::error::{Result, TensorError};
use crate::graph::{Graph, Var};
use crate::kernels::{inverse_permutation, permute, split_axis};
use crate::tensor::Tensor;

impl<T: Element> Graph<T> {
    pub fn reshape(&self, a: Var, shape: &[usize]) -> Result<Var> {
        let src = self.value(a);
        let out = (*src).clone().reshape(shape)?;
        let orig = src.shape().to_vec();
        Ok(self.record(out, &[a], move |_: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            Ok(vec![Some(g.clone().reshape(orig.clone())?)])
        }))
    }

    pub fn permute(&self, a: Var, perm: &[usize]) -> Result<Var> {
        let out = permute(&self.value(a), perm)?;
        let inv = inverse_permutation(perm);
        Ok(self.record(out, &[a], move |_: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            Ok(vec![Some(permute(g, &inv)?)])
        }))
    }

    pub fn transpose(&self, a: Var, d0: usize, d1: usize) -> Result<Var> {
        let rank = self.value(a).rank();
        if d0 >= rank || d1 >= rank {
            return Err(TensorError::arg(format!("transpose axes ({d0},{d1}) for rank {rank}")));
        }
        let mut perm: Vec<usize> = (0..rank).collect();
        perm.swap(d0, d1);
        self.permute(a, &perm)
    }

    /// Selects `indices` along `axis` (indices may repeat).
    pub fn gather(&self, a: Var, axis: usize, indices: &[usize]) -> Result<Var> {
        let src = self.value(a);
        if axis >= src.rank() || indices.is_empty() {
            return Err(TensorError::arg(format!("gather axis {axis} on shape {:?}", src.shape())));
        }
        let (outer, extent, inner) = split_axis(src.shape(), axis);
        if let Some(&bad) = indices.iter().find(|&&i| i >= extent) {
            return Err(TensorError::arg(format!("gather index {bad} out of range {extent}")));
        }
        let sd = src.data();
        let mut out = Vec::with_capacity(outer * indices.len() * inner);
        for o in 0..outer {
            for &i in indices {
                let base = (o * extent + i) * inner;
                out.extend_from_slice(&sd[base..base + inner]);
            }
        }
        let mut shape = src.shape().to_vec();
        shape[axis] = indices.len();
        let out = Tensor::new(shape, out)?;
        let idx = indices.to_vec();
        let src_shape = src.shape().to_vec();
        Ok(self.record(out, &[a], move |_: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            let mut ga = vec![T::zero(); outer * extent * inner];
            let gd = g.data();
            for o in 0..outer {
                for (j, &i) in idx.iter().enumerate() {
                    let dst = (o * extent + i) * inner;
                    let srcb = (o * idx.len() + j) * inner;
                    for t in 0..inner {
                        ga[dst + t] = ga[dst + t] + gd[srcb + t];
                    }
                }
            }
            Ok(vec![Some(Tensor::new(src_shape.clone(), ga)?)])
        }))
    }

    /// Contiguous slice `[start, start + len)` along `axis`.
    pub fn narrow(&self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let idx: Vec<usize> = (start..start + len).collect();
        self.gather(a, axis, &idx)
    }

    pub fn concat(&self, parts: &[Var], axis: usize) -> Result<Var> {
        let values: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
        let first = values.first().ok_or_else(|| TensorError::arg("concat of nothing"))?;
        if axis >= first.rank() {
            return Err(TensorError::arg(format!("concat axis {axis} for rank {}", first.rank())));
        }
        for v in &values[1..] {
            let ok = v.rank() == first.rank()
                && v.shape().iter().zip(first.shape()).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(TensorError::shape("concat", first.shape(), v.shape()));
            }
        }
        let (outer, _, inner) = split_axis(first.shape(), axis);
        let extents: Vec<usize> = values.iter().map(|v| v.shape()[axis]).collect();
        let total: usize = extents.iter().sum();
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (v, &e) in values.iter().zip(&extents) {
                out.extend_from_slice(&v.data()[o * e * inner..(o + 1) * e * inner]);
            }
        }
        let mut shape = first.shape().to_vec();
        shape[axis] = total;
        let out = Tensor::new(shape, out)?;
        Ok(self.record(out, parts, move |inp: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            let gd = g.data();
            let mut grads: Vec<Vec<T>> = extents.iter().map(|e| Vec::with_capacity(outer * e * inner)).collect();
            for o in 0..outer {
                let mut off = o * total * inner;
                for (dst, &e) in grads.iter_mut().zip(&extents) {
                    dst.extend_from_slice(&gd[off..off + e * inner]);
                    off += e * inner;
                }
            }
            grads
                .into_iter()
                .zip(inp)
                .map(|(d, v)| Tensor::new(v.shape(), d).map(Some))
                .collect()
        }))
    }
}
