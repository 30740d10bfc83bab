use crate::element::Element;
use crate::error::{Result, TensorError};
use crate::graph::{Graph, Var};
use crate::kernels::split_axis;
use crate::tensor::Tensor;

impl<T: Element> Graph<T> {
    /// Sum of all elements as a rank-0 tensor.
    pub fn sum_all(&self, a: Var) -> Var {
        let src = self.value(a);
        let out = Tensor::scalar(src.sum());
        self.record(out, &[a], |inp: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            Ok(vec![Some(Tensor::full(inp[0].shape(), g.data()[0]))])
        })
    }

    pub fn mean_all(&self, a: Var) -> Var {
        let n = self.value(a).numel();
        let s = self.sum_all(a);
        self.scale(s, T::one() / T::of(n as f64))
    }

    /// Sum over `axis`; the axis is kept with extent 1 when `keepdim`.
    pub fn sum_axis(&self, a: Var, axis: usize, keepdim: bool) -> Result<Var> {
        let src = self.value(a);
        if axis >= src.rank() {
            return Err(TensorError::arg(format!("sum axis {axis} on shape {:?}", src.shape())));
        }
        let (outer, extent, inner) = split_axis(src.shape(), axis);
        let sd = src.data();
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for e in 0..extent {
                let row = &sd[(o * extent + e) * inner..(o * extent + e + 1) * inner];
                for (d, &v) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *d = *d + v;
                }
            }
        }
        let mut shape = src.shape().to_vec();
        if keepdim {
            shape[axis] = 1;
        } else {
            shape.remove(axis);
        }
        let out = Tensor::new(shape, out)?;
        let src_shape = src.shape().to_vec();
        Ok(self.record(out, &[a], move |_: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            let gd = g.data();
            let mut ga = Vec::with_capacity(outer * extent * inner);
            for o in 0..outer {
                for _ in 0..extent {
                    ga.extend_from_slice(&gd[o * inner..(o + 1) * inner]);
                }
            }
            Ok(vec![Some(Tensor::new(src_shape.clone(), ga)?)])
        }))
    }

    pub fn mean_axis(&self, a: Var, axis: usize, keepdim: bool) -> Result<Var> {
        let shape = self.shape(a);
        let extent = *shape
            .get(axis)
            .ok_or_else(|| TensorError::arg(format!("mean axis {axis} on shape {shape:?}")))?;
        let s = self.sum_axis(a, axis, keepdim)?;
        Ok(self.scale(s, T::one() / T::of(extent as f64)))
    }
}
