// `!(x > 0.0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod crypto;
pub mod error;
pub mod harness;
pub mod market;
pub mod protocol;
pub mod runtime;
pub(crate) mod wire;

pub use error::{PemError, Result};
