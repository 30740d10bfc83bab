use std::ops::Range;

use hgts_tensor::Tensor;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Raw windows plus, for imputation, the observation and loss masks.
#[derive(Clone, Debug)]
pub struct WindowBatch<T> {
    /// `B×C×W`
    pub values: Tensor<T>,
    pub starts: Vec<usize>,
    pub observed: Option<Tensor<T>>,
    pub loss_mask: Option<Tensor<T>>,
}

/// Starts of every length-`w` window inside `range` at the given stride.
pub fn sliding_starts(range: Range<usize>, w: usize, stride: usize) -> Vec<usize> {
    if w == 0 || stride == 0 || range.len() < w {
        return Vec::new();
    }
    (range.start..=range.end - w).step_by(stride).collect()
}

/// A forecast evaluation window: the context ends where the target begins.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalWindow {
    pub context_start: usize,
    pub target_start: usize,
}

/// Windows whose targets of length `horizon` lie inside `range`, advancing
/// by `stride`. The context may reach back before `range.start`.
pub fn eval_windows(range: Range<usize>, lookback: usize, horizon: usize, stride: usize) -> Vec<EvalWindow> {
    let first = range.start.max(lookback);
    if horizon == 0 || stride == 0 || first + horizon > range.end {
        return Vec::new();
    }
    (first..=range.end - horizon)
        .step_by(stride)
        .map(|t| EvalWindow {
            context_start: t - lookback,
            target_start: t,
        })
        .collect()
}

/// Groups `starts` into batches, shuffled deterministically when a seed is
/// given.
pub fn batches(starts: &[usize], batch_size: usize, shuffle: Option<u64>) -> Vec<Vec<usize>> {
    let mut order = starts.to_vec();
    if let Some(seed) = shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    order.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}
