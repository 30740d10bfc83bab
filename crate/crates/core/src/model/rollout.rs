use hgts_tensor::{Element, Graph, Tensor};

use super::{BlockStructures, HgtsFormer};
use crate::error::{HgtsError, Result};
use crate::nn::denormalize;

/// One generated patch.
pub struct NextPatch<T> {
    /// `B×C×P` in the context's scale.
    pub values: Tensor<T>,
    /// `B×C×P` in the step's normalized units.
    pub normalized: Tensor<T>,
    pub structures: Vec<BlockStructures<T>>,
}

/// Anything that predicts the patch following a fixed-length context.
pub trait PatchForecaster<T: Element> {
    fn lookback(&self) -> usize;
    fn patch_len(&self) -> usize;
    fn is_causal(&self) -> bool {
        true
    }
    /// `context` is `B×C×lookback`.
    fn next_patch(&self, context: &Tensor<T>) -> Result<NextPatch<T>>;
}

impl<T: Element> PatchForecaster<T> for HgtsFormer<T> {
    fn lookback(&self) -> usize {
        self.config().lookback
    }

    fn patch_len(&self) -> usize {
        self.config().patch_len
    }

    fn is_causal(&self) -> bool {
        self.config().causal
    }

    fn next_patch(&self, context: &Tensor<T>) -> Result<NextPatch<T>> {
        let g = Graph::inference();
        let out = self.forward(&g, context, None)?;
        let head = g.value(out.head);
        let (l, p) = (self.lookback(), self.patch_len());
        let [b, c, _] = *head.shape() else { unreachable!("head is rank 3") };
        let last: Vec<T> = head.data().chunks(l).flat_map(|row| row[l - p..].iter().copied()).collect();
        let normalized = Tensor::new([b, c, p], last)?;
        let values = denormalize(&normalized, &out.stats)?;
        Ok(NextPatch {
            values,
            normalized,
            structures: out.structures,
        })
    }
}

pub struct ForecastOutput<T> {
    /// `B×C×horizon` in the context's scale.
    pub predictions: Tensor<T>,
    /// Per generation step, `B×C×P` normalized predictions.
    pub normalized_steps: Vec<Tensor<T>>,
    /// Structures of the first generation step.
    pub structures: Vec<BlockStructures<T>>,
}

impl<T> ForecastOutput<T> {
    pub fn steps(&self) -> usize {
        self.normalized_steps.len()
    }
}

/// Autoregressive forecast: predict a patch, append it, slide the window,
/// repeat until `horizon` points exist, then truncate.
///
/// Only the last `lookback` points of `context` are used.
pub fn rolling_forecast<T: Element, F: PatchForecaster<T> + ?Sized>(
    model: &F,
    context: &Tensor<T>,
    horizon: usize,
) -> Result<ForecastOutput<T>> {
    if !model.is_causal() {
        return Err(HgtsError::Config("rolling forecast needs a causal model".into()));
    }
    if horizon == 0 {
        return Err(HgtsError::InvalidArgument("horizon must be at least 1".into()));
    }
    let [b, c, len] = *context.shape() else {
        return Err(HgtsError::InvalidArgument(format!("context must be B×C×L, got {:?}", context.shape())));
    };
    let (l, p) = (model.lookback(), model.patch_len());
    if len < l {
        return Err(HgtsError::Data(format!("context of {len} points is shorter than lookback {l}")));
    }
    let steps = horizon.div_ceil(p);
    let mut window: Vec<Vec<T>> = context.data().chunks(len).map(|row| row[len - l..].to_vec()).collect();
    let mut preds: Vec<Vec<T>> = vec![Vec::with_capacity(steps * p); b * c];
    let mut normalized_steps = Vec::with_capacity(steps);
    let mut structures = Vec::new();
    for step in 0..steps {
        let ctx = Tensor::new([b, c, l], window.concat())?;
        let next = model.next_patch(&ctx)?;
        if next.values.shape() != [b, c, p] {
            return Err(HgtsError::InvalidArgument(format!(
                "forecaster returned {:?}, expected {:?}",
                next.values.shape(),
                [b, c, p]
            )));
        }
        if !next.values.all_finite() {
            return Err(HgtsError::Numeric(format!("non-finite forecast at step {step}")));
        }
        for (r, patch) in next.values.data().chunks(p).enumerate() {
            preds[r].extend_from_slice(patch);
            window[r].drain(..p);
            window[r].extend_from_slice(patch);
        }
        normalized_steps.push(next.normalized);
        if step == 0 {
            structures = next.structures;
        }
    }
    let flat: Vec<T> = preds.into_iter().flat_map(|mut r| {
        r.truncate(horizon);
        r
    }).collect();
    Ok(ForecastOutput {
        predictions: Tensor::new([b, c, horizon], flat)?,
        normalized_steps,
        structures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Predicts `last value + 1, + 2, ...` for each row.
    struct Ramp {
        lookback: usize,
        patch: usize,
    }

    impl PatchForecaster<f64> for Ramp {
        fn lookback(&self) -> usize {
            self.lookback
        }
        fn patch_len(&self) -> usize {
            self.patch
        }
        fn next_patch(&self, context: &Tensor<f64>) -> Result<NextPatch<f64>> {
            let [b, c, l] = *context.shape() else { unreachable!() };
            let data: Vec<f64> = context
                .data()
                .chunks(l)
                .flat_map(|row| (1..=self.patch).map(move |k| row[l - 1] + k as f64))
                .collect();
            let values = Tensor::new([b, c, self.patch], data)?;
            Ok(NextPatch {
                normalized: values.clone(),
                values,
                structures: Vec::new(),
            })
        }
    }

    fn ramp_context(l: usize) -> Tensor<f64> {
        Tensor::from_f64([1, 1, l], &(0..l).map(|v| v as f64).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn step_counts_and_truncation() {
        let r = Ramp { lookback: 96, patch: 48 };
        let out = rolling_forecast(&r, &ramp_context(96), 96).unwrap();
        assert_eq!(out.steps(), 2);
        let r = Ramp { lookback: 672, patch: 96 };
        let out = rolling_forecast(&r, &ramp_context(672), 720).unwrap();
        assert_eq!(out.steps(), 8);
        assert_eq!(out.predictions.shape(), &[1, 1, 720]);
        assert_eq!(out.predictions.data()[719], 672.0 + 719.0);
    }

    #[test]
    fn single_step_matches_stub() {
        let r = Ramp { lookback: 8, patch: 4 };
        let ctx = ramp_context(8);
        let out = rolling_forecast(&r, &ctx, 4).unwrap();
        assert_eq!(out.predictions, r.next_patch(&ctx).unwrap().values);
    }

    #[test]
    fn dropped_context_does_not_matter() {
        let r = Ramp { lookback: 8, patch: 4 };
        let mut long = ramp_context(12);
        let a = rolling_forecast(&r, &long, 4).unwrap().predictions;
        long.data_mut()[0] = 1e6;
        assert_eq!(rolling_forecast(&r, &long, 4).unwrap().predictions, a);
    }
}
