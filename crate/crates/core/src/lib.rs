//! Sparse band-split music source separation.
//!
//! The crate holds the whole model stack: a small reverse-mode tensor
//! library ([`numerics`]), the STFT front end ([`spectral`]), band
//! partition arithmetic ([`bandplan`]), the encoder / dual-path separator /
//! decoder ([`model`]), training utilities ([`training`]), evaluation
//! ([`metrics`]) and file formats ([`io`]).

pub mod bandplan;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod spectral;
pub mod training;

pub use error::{Error, Result};
pub use numerics::{Graph, ParamStore, Tensor, Var};
pub use rng::RngState;
