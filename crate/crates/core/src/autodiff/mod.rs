//! Reverse-mode differentiation over dense `f64` matrices.
//!
//! Values are recorded on a [`Tape`] as they are computed; [`Tape::backward`]
//! sweeps the record in reverse and returns gradients for the parameter
//! leaves. All training math in this crate goes through these kernels.

mod gradcheck;
mod tape;

pub use gradcheck::{finite_difference_check, GradCheck, GradCheckReport};
pub use tape::{Gradients, Tape, Var, NORM_EPS};
