use hgts_tensor::{Element, ParamId, Var};

use super::{Ctx, Linear};
use crate::error::Result;

/// Two linear maps around a tanh-approximated GELU.
#[derive(Clone, Debug)]
pub struct Ffn {
    pub up: Linear,
    pub down: Linear,
}

impl Ffn {
    pub fn forward<T: Element>(&self, cx: &Ctx<'_, T>, x: Var) -> Result<Var> {
        let h = self.up.forward(cx, x)?;
        let h = cx.g.gelu(h);
        self.down.forward(cx, h)
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gain: ParamId,
    pub offset: ParamId,
    pub eps: f64,
}

impl LayerNorm {
    pub fn forward<T: Element>(&self, cx: &Ctx<'_, T>, x: Var) -> Result<Var> {
        Ok(cx.g.layer_norm(x, cx.p(self.gain), cx.p(self.offset), T::of(self.eps))?)
    }
}

/// `LN2(FFN(LN1(x))) + x`, the residual tail of every hypergraph block.
pub(crate) fn ln_ffn_ln_residual<T: Element>(
    cx: &Ctx<'_, T>,
    x: Var,
    ln1: &LayerNorm,
    ffn: &Ffn,
    ln2: &LayerNorm,
) -> Result<Var> {
    let h = ln1.forward(cx, x)?;
    let h = ffn.forward(cx, h)?;
    let h = ln2.forward(cx, h)?;
    Ok(cx.g.add(h, x)?)
}
