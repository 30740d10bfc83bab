//! Layers shared by every block of the model.

mod attention;
mod ffn;
mod init;
mod linear;
mod patch;
mod revin;
mod rope;

pub use attention::{multi_head_attention, Mhsa};
pub use ffn::{Ffn, LayerNorm};
pub(crate) use ffn::ln_ffn_ln_residual;
pub use init::ParamInit;
pub use linear::Linear;
pub use patch::{patch_embed, patchify, unpatchify};
pub use revin::{denormalize, instance_norm, NormStats};
pub use rope::{apply_rope, RopeCache};

use hgts_tensor::{Element, Graph, ParamId, ParamStore, Var};

/// A graph paired with the parameters its forward pass reads.
#[derive(Clone, Copy)]
pub struct Ctx<'a, T: Element> {
    pub g: &'a Graph<T>,
    pub params: &'a ParamStore<T>,
}

impl<'a, T: Element> Ctx<'a, T> {
    pub fn new(g: &'a Graph<T>, params: &'a ParamStore<T>) -> Self {
        Ctx { g, params }
    }

    pub fn p(&self, id: ParamId) -> Var {
        self.g.param(self.params, id)
    }
}
