//! Dense-tensor engine with reverse-mode differentiation.
//!
//! Tensors are row-major [`Vec`]-backed values. A [`Tape`] records every
//! primitive executed on it; [`Tape::backward`] replays the record in exact
//! reverse order to populate gradients. One tape corresponds to one forward
//! pass; parameters live outside the tape and are re-bound as leaves each
//! step.

mod adam;
mod gradcheck;
mod tape;
mod tensor;

pub use adam::AdamState;
pub use gradcheck::{finite_diff_check, GradCheckError, GradCheckReport};
pub use tape::{Tape, Var};
pub use tensor::{xavier_init, Tensor};
