//! Differentiable ops recorded on a [`Graph`](crate::Graph).

mod activation;
mod arith;
mod linalg;
mod norm;
mod reduce;
mod shape;
mod softmax;
mod topk;

pub use activation::sigmoid;
pub use topk::topk_lastdim;
