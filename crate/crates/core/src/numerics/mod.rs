//! Tensor substrate: dense arrays, a recording tape for reverse-mode
//! gradients, and the forward/backward kernels the model is built from.

mod gradcheck;
mod graph;
mod linalg;
pub mod ops;
mod params;
mod tensor;

pub use gradcheck::{grad_check, grad_check_params, relative_error, GradCheckOptions, GradCheckReport, FD_STEP};
pub use graph::{Gradients, Graph, Var};
pub use params::{ParamId, ParamStore};
pub use tensor::Tensor;
