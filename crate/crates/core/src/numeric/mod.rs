//! Dense `f64` tensors, a reverse-mode tape, Adam, and a finite-difference
//! gradient checker.

mod adam;
mod gradcheck;
mod param;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::{adam_step, Adam, AdamState};
pub use gradcheck::{finite_difference_check, GradCheckReport, RELATIVE_ERROR_FLOOR};
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{nce_value, Tape, Var};
pub use tensor::{softmax, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: index {index} out of range for length {len}")]
    Index {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("parameter {0} already exists")]
    DuplicateParameter(String),
}
