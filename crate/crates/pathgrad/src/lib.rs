//! Feature attribution for small networks.
//!
//! The crate answers "which input coordinates drove this prediction?" for
//! networks built on its own reverse-mode autodiff core. The central method
//! cumulates gradients of counterfactual inputs along a scaling path from a
//! baseline to the input (integrated gradients); the surrounding machinery
//! provides the saturation diagnostics that motivate it, rival
//! back-propagation attribution methods for comparison, and evaluation
//! protocols (pixel ablation, localization, Riemann convergence).
//!
//! Start with [`graph::GraphBuilder`] or the constructors in [`models`],
//! wrap a scalar output in [`attribution::ScalarFn`], and hand it to
//! [`attribution::integrated_gradients`]. The book under `book/` walks
//! through every concept with runnable snippets.

pub mod attribution;
pub mod autodiff;
pub mod baselines;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod image;
pub mod models;
pub mod rng;
pub mod tensor;
pub mod verify;

pub mod guide;

pub use error::{Error, Result};
pub use graph::{Graph, GraphBuilder, Network, NodeId};
pub use tensor::Tensor;
