//! Small dense-tensor engine used by the HGTS-Former crates.
//!
//! [`Tensor`] is a plain row-major array. Differentiable computation happens
//! on a [`Graph`], which records each op with its backward rule; parameters
//! live in a [`ParamStore`] and are updated by [`Adam`].
//!
//! ```
//! use hgts_tensor::{Graph, Tensor};
//!
//! let g = Graph::<f64>::new();
//! let x = g.leaf(Tensor::scalar(3.0));
//! let y = g.square(x);
//! let grads = g.backward(y).unwrap();
//! assert_eq!(grads.get(x).unwrap().item().unwrap(), 6.0);
//! ```

mod element;
mod error;
pub mod gradcheck;
mod graph;
mod kernels;
mod ops;
pub mod optim;
mod param;
mod tensor;

pub use element::{DType, Element};
pub use error::{Result, TensorError};
pub use graph::{Backward, Gradients, Graph, Var};
pub use ops::topk_lastdim;
pub use optim::{Adam, AdamConfig};
pub use param::{Param, ParamId, ParamStore};
pub use tensor::Tensor;

/// Elementwise logistic function on a plain tensor.
pub fn sigmoid<T: Element>(x: &Tensor<T>) -> Tensor<T> {
    ops::sigmoid(x)
}
