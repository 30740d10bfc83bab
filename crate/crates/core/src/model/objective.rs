use hgts_tensor::{Element, Graph, Tensor, Var};

use super::HgtsFormer;
use crate::config::LossTokens;
use crate::error::{HgtsError, Result};

/// Splits a `B×C×(L+P)` window into the model input (first `L` points) and
/// the next-patch target (points `[P, L+P)`).
pub fn training_targets<T: Element>(window: &Tensor<T>, lookback: usize, patch: usize) -> Result<(Tensor<T>, Tensor<T>)> {
    let [b, c, w] = *window.shape() else {
        return Err(HgtsError::InvalidArgument(format!("window must be B×C×W, got {:?}", window.shape())));
    };
    if w < lookback + patch {
        return Err(HgtsError::Data(format!(
            "window of length {w} is shorter than lookback {lookback} + patch {patch}"
        )));
    }
    let mut input = Vec::with_capacity(b * c * lookback);
    let mut target = Vec::with_capacity(b * c * lookback);
    for row in window.data().chunks(w) {
        input.extend_from_slice(&row[..lookback]);
        target.extend_from_slice(&row[patch..patch + lookback]);
    }
    Ok((Tensor::new([b, c, lookback], input)?, Tensor::new([b, c, lookback], target)?))
}

/// Mean squared error, optionally over the elements where `mask` is nonzero.
pub fn mse_loss<T: Element>(g: &Graph<T>, pred: Var, target: Var, mask: Option<&Tensor<T>>) -> Result<Var> {
    let (ps, ts) = (g.shape(pred), g.shape(target));
    if ps != ts {
        return Err(HgtsError::InvalidArgument(format!("prediction {ps:?} vs target {ts:?}")));
    }
    let diff = g.sub(pred, target)?;
    match mask {
        None => Ok(g.mean_all(g.square(diff))),
        Some(m) => {
            if m.shape() != ps.as_slice() {
                return Err(HgtsError::InvalidArgument(format!("loss mask {:?} vs prediction {ps:?}", m.shape())));
            }
            let count = m.data().iter().filter(|&&v| v != T::zero()).count();
            if count == 0 {
                return Err(HgtsError::InvalidArgument("loss mask selects no elements".into()));
            }
            let masked = g.mul(g.square(diff), g.constant(m.clone()))?;
            Ok(g.scale(g.sum_all(masked), T::of(1.0 / count as f64)))
        }
    }
}

/// Next-patch loss in normalized units on a `B×C×(L+P)` window.
pub fn forecast_loss<T: Element>(model: &HgtsFormer<T>, g: &Graph<T>, window: &Tensor<T>, tokens: LossTokens) -> Result<Var> {
    let cfg = model.config();
    let (input, target) = training_targets(window, cfg.lookback, cfg.patch_len)?;
    let out = model.forward(g, &input, None)?;
    let target = g.constant(out.stats.normalize(&target)?);
    match tokens {
        LossTokens::All => mse_loss(g, out.head, target, None),
        LossTokens::Last => {
            let (l, p) = (cfg.lookback, cfg.patch_len);
            let mut mask = Tensor::zeros(input.shape());
            for row in mask.data_mut().chunks_mut(l) {
                row[l - p..].iter_mut().for_each(|v| *v = T::one());
            }
            mse_loss(g, out.head, target, Some(&mask))
        }
    }
}

/// Reconstruction loss on the hidden points of a `B×C×L` window.
pub fn imputation_loss<T: Element>(model: &HgtsFormer<T>, g: &Graph<T>, window: &Tensor<T>, observed: &Tensor<T>) -> Result<Var> {
    let out = model.forward(g, window, Some(observed))?;
    let target = g.constant(out.stats.normalize(window)?);
    let hidden = observed.map(|&m| if m == T::zero() { T::one() } else { T::zero() });
    mse_loss(g, out.head, target, Some(&hidden))
}
