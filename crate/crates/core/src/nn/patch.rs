use hgts_tensor::{Element, Tensor, Var};

use super::{Ctx, Linear};
use crate::error::{HgtsError, Result};

fn split_len(len: usize, patch: usize) -> Result<usize> {
    if patch == 0 || !len.is_multiple_of(patch) {
        return Err(HgtsError::Config(format!(
            "length {len} is not divisible by patch length {patch}"
        )));
    }
    Ok(len / patch)
}

/// `B×C×L` → `B×C×N×P` with token `i` holding values `[iP, (i+1)P)`.
pub fn patchify<T: Element>(x: &Tensor<T>, patch: usize) -> Result<Tensor<T>> {
    let [b, c, l] = *x.shape() else {
        return Err(HgtsError::InvalidArgument(format!("patchify expects B×C×L, got {:?}", x.shape())));
    };
    let n = split_len(l, patch)?;
    Ok(x.clone().reshape([b, c, n, patch])?)
}

/// Inverse of [`patchify`].
pub fn unpatchify<T: Element>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let [b, c, n, p] = *x.shape() else {
        return Err(HgtsError::InvalidArgument(format!("unpatchify expects B×C×N×P, got {:?}", x.shape())));
    };
    Ok(x.clone().reshape([b, c, n * p])?)
}

/// Embeds non-overlapping patches of a normalized `B×C×L` series into
/// `B×C×N×D` tokens.
pub fn patch_embed<T: Element>(cx: &Ctx<'_, T>, x_norm: Var, patch: usize, embed: &Linear) -> Result<Var> {
    let shape = cx.g.shape(x_norm);
    let [b, c, l] = shape[..] else {
        return Err(HgtsError::InvalidArgument(format!("patch_embed expects B×C×L, got {shape:?}")));
    };
    let n = split_len(l, patch)?;
    if embed.fan_in != patch {
        return Err(HgtsError::Config(format!(
            "embedding takes {} inputs but patch length is {patch}",
            embed.fan_in
        )));
    }
    let patches = cx.g.reshape(x_norm, &[b, c, n, patch])?;
    embed.forward(cx, patches)
}
