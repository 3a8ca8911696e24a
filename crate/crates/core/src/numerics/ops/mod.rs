mod act;
mod basic;
mod conv;
mod fourier;
mod norm;
mod recurrent;

pub use act::{gelu, sigmoid};
pub use conv::conv_out_len;
pub use fourier::half_len;
pub(crate) use fourier::{fft_forward, fft_inverse};
pub use norm::GROUP_NORM_EPS;
pub use recurrent::LstmVars;
