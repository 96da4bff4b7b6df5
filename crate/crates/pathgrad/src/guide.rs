//! Doc-test anchors for the book under `book/`.
//!
//! Each chapter is included as a module's documentation, so
//! `cargo test --doc` compiles and runs every code snippet in the book and
//! the two can never drift apart. (mdbook renders the same files; this
//! module exists purely so rustdoc executes them.)

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/tensors-and-autodiff.md")]
pub mod tensors_and_autodiff {}

#[doc = include_str!("../../../book/src/models-and-training.md")]
pub mod models_and_training {}

#[doc = include_str!("../../../book/src/scaling-paths.md")]
pub mod scaling_paths {}

#[doc = include_str!("../../../book/src/integrated-gradients.md")]
pub mod integrated_gradients_chapter {}

#[doc = include_str!("../../../book/src/rival-methods.md")]
pub mod rival_methods {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation_protocols {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod command_line {}

#[doc = include_str!("../../../book/src/model-format.md")]
pub mod model_format {}
