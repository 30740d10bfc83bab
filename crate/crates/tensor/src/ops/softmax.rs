use crate::element::Element;
use crate::error::{Result, TensorError};
use crate::graph::{Graph, Var};
use crate::kernels::{broadcast_binary, broadcast_shapes, reduce_to_shape};
use crate::tensor::Tensor;

fn softmax_rows<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let n = *x
        .shape()
        .last()
        .ok_or_else(|| TensorError::arg("softmax on a rank-0 tensor"))?;
    if x.data().iter().any(|v| v.is_nan()) {
        return Err(TensorError::Numeric("NaN in softmax input".into()));
    }
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(n) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    let out = Tensor::new(x.shape(), out)?;
    if !out.all_finite() {
        return Err(TensorError::Numeric("softmax row with no finite logit".into()));
    }
    Ok(out)
}

/// Softmax of `x + bias` without forming the sum first.
///
/// Each row is shifted by its arg-max entry separately in `x` and `bias`,
/// so a row whose bias is one constant (e.g. a fully masked row) loses no
/// precision to the bias magnitude.
fn softmax_rows_biased<T: Element>(x: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let n = *x
        .shape()
        .last()
        .ok_or_else(|| TensorError::arg("softmax on a rank-0 tensor"))?;
    if x.data().iter().any(|v| v.is_nan()) || bias.data().iter().any(|v| v.is_nan()) {
        return Err(TensorError::Numeric("NaN in softmax input".into()));
    }
    let mut out = vec![T::zero(); x.numel()];
    for ((o, xr), br) in out.chunks_mut(n).zip(x.data().chunks(n)).zip(bias.data().chunks(n)) {
        let mut best = 0;
        for j in 1..n {
            if xr[j] + br[j] > xr[best] + br[best] {
                best = j;
            }
        }
        let (xm, bm) = (xr[best], br[best]);
        if !bm.is_finite() {
            return Err(TensorError::Numeric("softmax row with no finite logit".into()));
        }
        let mut sum = T::zero();
        for j in 0..n {
            o[j] = ((xr[j] - xm) + (br[j] - bm)).exp();
            sum = sum + o[j];
        }
        for v in o.iter_mut() {
            *v = *v / sum;
        }
    }
    let out = Tensor::new(x.shape(), out)?;
    if !out.all_finite() {
        return Err(TensorError::Numeric("non-finite softmax output".into()));
    }
    Ok(out)
}

fn softmax_backward<T: Element>(y: &Tensor<T>, g: &Tensor<T>) -> Result<Tensor<T>> {
    let n = *y.shape().last().expect("rank >= 1");
    let mut d = Vec::with_capacity(y.numel());
    for (yr, gr) in y.data().chunks(n).zip(g.data().chunks(n)) {
        let dot: T = yr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
        d.extend(yr.iter().zip(gr).map(|(&yv, &gv)| yv * (gv - dot)));
    }
    Tensor::new(y.shape(), d)
}

impl<T: Element> Graph<T> {
    /// Softmax over the last axis; `bias` is added to the logits first and
    /// must broadcast to the shape of `x`.
    pub fn softmax_lastdim(&self, x: Var, bias: Option<Var>) -> Result<Var> {
        let Some(b) = bias else {
            let out = softmax_rows(&self.value(x))?;
            return Ok(self.record(out, &[x], |_: &[&Tensor<T>], y: &Tensor<T>, g: &Tensor<T>| {
                Ok(vec![Some(softmax_backward(y, g)?)])
            }));
        };
        let (xv, bv) = (self.value(x), self.value(b));
        if broadcast_shapes(xv.shape(), bv.shape()).as_deref() != Some(xv.shape()) {
            return Err(TensorError::shape("softmax bias", xv.shape(), bv.shape()));
        }
        let full_bias = broadcast_binary(&xv, &bv, |_, b| b, "softmax bias")?;
        let out = softmax_rows_biased(&xv, &full_bias)?;
        let bias_shape = bv.shape().to_vec();
        Ok(self.record(out, &[x, b], move |_: &[&Tensor<T>], y: &Tensor<T>, g: &Tensor<T>| {
            let dx = softmax_backward(y, g)?;
            let db = reduce_to_shape(&dx, &bias_shape)?;
            Ok(vec![Some(dx), Some(db)])
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(x: &[f64], bias: Option<&[f64]>) -> Vec<f64> {
        let g = Graph::<f64>::new();
        let xv = g.constant(Tensor::new([x.len()], x.to_vec()).unwrap());
        let b = bias.map(|b| g.constant(Tensor::new([b.len()], b.to_vec()).unwrap()));
        let y = g.softmax_lastdim(xv, b).unwrap();
        g.value(y).data().to_vec()
    }

    #[test]
    fn symmetric_and_hard_mask() {
        assert_eq!(run(&[0., 0.], None), vec![0.5, 0.5]);
        let m = run(&[0., 0.], Some(&[0., -1e9]));
        assert_eq!(m[0], 1.0);
        assert!(m[1] < 1e-300);
    }

    #[test]
    fn hand_computed_three_way() {
        let y = run(&[1., 2., 3.], None);
        for (a, b) in y.iter().zip([0.09003, 0.24473, 0.66524]) {
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn uniform_large_bias_keeps_precision() {
        let x = [0.1, 0.3 + 1e-11, -0.2];
        let plain = run(&x, None);
        let biased = run(&x, Some(&[-1e4, -1e4, -1e4]));
        assert_eq!(plain, biased);
    }

    #[test]
    fn nan_is_numeric_error() {
        let g = Graph::<f64>::new();
        let x = g.constant(Tensor::new([2], vec![f64::NAN, 0.]).unwrap());
        assert!(matches!(g.softmax_lastdim(x, None), Err(TensorError::Numeric(_))));
    }
}
