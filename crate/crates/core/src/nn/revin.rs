use hgts_tensor::{Element, Tensor};

use crate::error::{HgtsError, Result};

/// Per-(batch, channel) statistics kept for reverse normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct NormStats<T> {
    /// `[B, C, 1]`
    pub mean: Tensor<T>,
    /// `[B, C, 1]`; population std plus `eps`.
    pub std: Tensor<T>,
    pub eps: f64,
}

fn rows_of<T: Element>(x: &Tensor<T>, what: &str) -> Result<(usize, usize, usize)> {
    match *x.shape() {
        [b, c, l] => Ok((b, c, l)),
        _ => Err(HgtsError::InvalidArgument(format!(
            "{what} expects B×C×L, got {:?}",
            x.shape()
        ))),
    }
}

/// Standardizes each row of a `B×C×L` batch over its observed points.
///
/// With a mask, unobserved positions are zero in the output, which is the
/// row mean in normalized units.
pub fn instance_norm<T: Element>(
    x: &Tensor<T>,
    observed: Option<&Tensor<T>>,
    eps: f64,
) -> Result<(Tensor<T>, NormStats<T>)> {
    let (b, c, l) = rows_of(x, "instance_norm")?;
    if l < 2 {
        return Err(HgtsError::Data(format!("instance_norm needs length >= 2, got {l}")));
    }
    if let Some(m) = observed {
        if m.shape() != x.shape() {
            return Err(HgtsError::InvalidArgument(format!(
                "observed mask {:?} does not match input {:?}",
                m.shape(),
                x.shape()
            )));
        }
    }
    let mut out = vec![T::zero(); x.numel()];
    let mut means = Vec::with_capacity(b * c);
    let mut stds = Vec::with_capacity(b * c);
    for (r, row) in x.data().chunks(l).enumerate() {
        let mask = observed.map(|m| &m.data()[r * l..(r + 1) * l]);
        let seen = |i: usize| mask.is_none_or(|m| m[i] != T::zero());
        let (mut n, mut sum) = (0usize, 0.0f64);
        for (i, v) in row.iter().enumerate() {
            if seen(i) {
                n += 1;
                sum += v.as_f64();
            }
        }
        if n < 2 {
            return Err(HgtsError::Data(format!(
                "row {} (batch {}, channel {}) has {n} observed points, need at least 2",
                r,
                r / c,
                r % c
            )));
        }
        let mean = sum / n as f64;
        let var = row
            .iter()
            .enumerate()
            .filter(|&(i, _)| seen(i))
            .map(|(_, v)| (v.as_f64() - mean).powi(2))
            .sum::<f64>()
            / n as f64;
        let std = var.sqrt() + eps;
        for (i, v) in row.iter().enumerate() {
            if seen(i) {
                out[r * l + i] = T::of((v.as_f64() - mean) / std);
            }
        }
        means.push(T::of(mean));
        stds.push(T::of(std));
    }
    let stats = NormStats {
        mean: Tensor::new([b, c, 1], means)?,
        std: Tensor::new([b, c, 1], stds)?,
        eps,
    };
    Ok((Tensor::new([b, c, l], out)?, stats))
}

/// `ŷ·std + mean` per row.
pub fn denormalize<T: Element>(y: &Tensor<T>, stats: &NormStats<T>) -> Result<Tensor<T>> {
    stats.check(y, "denormalize")?;
    let with_std = y.zip_map(&stats.std, |v, s| v * s)?;
    Ok(with_std.zip_map(&stats.mean, |v, m| v + m)?)
}

impl<T: Element> NormStats<T> {
    fn check(&self, y: &Tensor<T>, what: &str) -> Result<()> {
        let (b, c, _) = rows_of(y, what)?;
        if self.mean.shape() != [b, c, 1] {
            return Err(HgtsError::InvalidArgument(format!(
                "{what}: stats for {:?} applied to {:?}",
                self.mean.shape(),
                y.shape()
            )));
        }
        Ok(())
    }

    /// Applies these statistics to other values of the same rows.
    pub fn normalize(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.check(x, "normalize")?;
        let centered = x.zip_map(&self.mean, |v, m| v - m)?;
        Ok(centered.zip_map(&self.std, |v, s| v / s)?)
    }
}
