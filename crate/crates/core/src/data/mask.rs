use hgts_tensor::{Element, Tensor};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{HgtsError, Result};

/// Draws `floor(ratio·L)` hidden positions per `(b, c)` row without
/// replacement. Returns `(observed, loss_mask)` with 1 for observed and
/// hidden points respectively.
///
/// With `shared`, all channels of a batch element hide the same time points.
pub fn make_imputation_mask<T: Element>(
    shape: [usize; 3],
    ratio: f64,
    seed: u64,
    shared: bool,
) -> Result<(Tensor<T>, Tensor<T>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(HgtsError::InvalidArgument(format!("mask ratio must lie in (0, 1), got {ratio}")));
    }
    let [b, c, l] = shape;
    let hidden = (ratio * l as f64 + 1e-9).floor() as usize;
    if l < hidden + 2 {
        return Err(HgtsError::InvalidArgument(format!(
            "hiding {hidden} of {l} points leaves fewer than 2 observed"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observed = vec![T::one(); b * c * l];
    for bi in 0..b {
        let mut picks = sample(&mut rng, l, hidden).into_vec();
        for ci in 0..c {
            if ci > 0 && !shared {
                picks = sample(&mut rng, l, hidden).into_vec();
            }
            let row = (bi * c + ci) * l;
            for &p in &picks {
                observed[row + p] = T::zero();
            }
        }
    }
    let observed = Tensor::new([b, c, l], observed)?;
    let loss = observed.map(|&v| T::one() - v);
    Ok((observed, loss))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_counts() {
        for (ratio, want) in [(0.25, 256), (0.125, 128), (0.375, 384), (0.5, 512)] {
            let (obs, loss) = make_imputation_mask::<f32>([2, 3, 1024], ratio, 1, false).unwrap();
            for (o, m) in obs.data().chunks(1024).zip(loss.data().chunks(1024)) {
                assert_eq!(m.iter().filter(|&&v| v == 1.0).count(), want);
                assert!(o.iter().zip(m).all(|(a, b)| a + b == 1.0));
            }
        }
    }

    #[test]
    fn seeded_and_shared() {
        let a = make_imputation_mask::<f32>([1, 2, 64], 0.25, 7, false).unwrap();
        let b = make_imputation_mask::<f32>([1, 2, 64], 0.25, 7, false).unwrap();
        assert_eq!(a, b);
        let (s, _) = make_imputation_mask::<f32>([1, 2, 64], 0.25, 7, true).unwrap();
        assert_eq!(s.data()[..64], s.data()[64..]);
    }

    #[test]
    fn zero_ratio_rejected() {
        assert!(make_imputation_mask::<f32>([1, 1, 8], 0.0, 0, false).is_err());
        assert!(make_imputation_mask::<f32>([1, 1, 4], 0.75, 0, false).is_err());
    }
}
