//! Error type shared by the whole crate.

use thiserror::Error;

/// Errors produced by graph construction, execution, models, and I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or node shapes do not line up.
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    /// A shape or plan is structurally invalid (empty layer list, non-divisible
    /// pool window, rank constraint, ...).
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    /// An input name was bound that the graph does not declare, or a declared
    /// input was left unbound.
    #[error("unknown input: {0}")]
    UnknownInput(String),

    /// A named output does not exist on the graph.
    #[error("unknown output: {0}")]
    UnknownOutput(String),

    /// A named parameter does not exist on the graph.
    #[error("unknown parameter: {0}")]
    UnknownParam(String),

    /// An op was evaluated outside its documented domain (log of a
    /// non-positive value, fractional embedding index, ...).
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// backward() was asked to differentiate a non-scalar output.
    #[error("output '{0}' is not scalar-valued; backward requires a scalar output")]
    NonScalarOutput(String),

    /// An argument violated an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArg(String),

    /// Training diverged (NaN/inf loss).
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Divergence { epoch: usize, loss: f64 },

    /// A model file could not be parsed.
    #[error("malformed model file: {0}")]
    MalformedModel(String),

    /// A model file declares a format version this build does not read.
    #[error("unsupported model format version '{0}' (expected 'v1')")]
    ModelVersionMismatch(String),

    /// A model file's parameters are inconsistent with its architecture line.
    #[error("model shape inconsistency: {0}")]
    ModelShapeInconsistent(String),

    /// An image file could not be parsed.
    #[error("malformed image file: {0}")]
    MalformedImage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
