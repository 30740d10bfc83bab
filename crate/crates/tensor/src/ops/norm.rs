use crate::element::Element;
use crate::error::{Result, TensorError};
use crate::graph::{Graph, Var};
use crate::tensor::Tensor;

impl<T: Element> Graph<T> {
    /// Layer normalization over the last axis with population variance.
    pub fn layer_norm(&self, x: Var, gain: Var, offset: Var, eps: T) -> Result<Var> {
        let (xv, gv, ov) = (self.value(x), self.value(gain), self.value(offset));
        let d = *xv.shape().last().ok_or_else(|| TensorError::arg("layer_norm on rank 0"))?;
        if gv.shape() != [d] || ov.shape() != [d] {
            return Err(TensorError::shape("layer_norm", xv.shape(), gv.shape()));
        }
        let rows = xv.numel() / d;
        let inv_d = T::one() / T::of(d as f64);
        let mut xhat = Vec::with_capacity(xv.numel());
        let mut rstd = Vec::with_capacity(rows);
        for row in xv.data().chunks(d) {
            let mean = row.iter().copied().sum::<T>() * inv_d;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
            let r = T::one() / (var + eps).sqrt();
            rstd.push(r);
            xhat.extend(row.iter().map(|&v| (v - mean) * r));
        }
        let out: Vec<T> = xhat
            .chunks(d)
            .flat_map(|row| row.iter().zip(gv.data()).zip(ov.data()).map(|((&h, &g), &o)| h * g + o))
            .collect();
        let out = Tensor::new(xv.shape(), out)?;
        Ok(self.record(out, &[x, gain, offset], move |inp: &[&Tensor<T>], _: &Tensor<T>, g: &Tensor<T>| {
            let gain = inp[1].data();
            let mut dx = Vec::with_capacity(g.numel());
            let mut dgain = vec![T::zero(); d];
            let mut doff = vec![T::zero(); d];
            for ((grow, hrow), &r) in g.data().chunks(d).zip(xhat.chunks(d)).zip(&rstd) {
                let mut mean_dh = T::zero();
                let mut mean_dh_h = T::zero();
                for j in 0..d {
                    let dh = grow[j] * gain[j];
                    mean_dh = mean_dh + dh;
                    mean_dh_h = mean_dh_h + dh * hrow[j];
                    dgain[j] = dgain[j] + grow[j] * hrow[j];
                    doff[j] = doff[j] + grow[j];
                }
                mean_dh = mean_dh * inv_d;
                mean_dh_h = mean_dh_h * inv_d;
                dx.extend((0..d).map(|j| r * (grow[j] * gain[j] - mean_dh - hrow[j] * mean_dh_h)));
            }
            Ok(vec![
                Some(Tensor::new(g.shape(), dx)?),
                Some(Tensor::new([d], dgain)?),
                Some(Tensor::new([d], doff)?),
            ])
        }))
    }
}
