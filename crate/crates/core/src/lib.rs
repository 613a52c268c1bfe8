// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandpass;
pub mod demod;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod nyquist;
pub mod optim;
pub mod sparse;
pub mod spectral;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};
