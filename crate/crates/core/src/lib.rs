//! Maximum-likelihood state tomography of qubit chains on matrix product
//! states and operators.

// `!(x > 0.0)` style comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod linalg;
pub mod metrics;
pub mod mle;
pub mod oracle;
pub mod povm;
pub mod sim;
pub mod states;
pub mod tensor_net;

pub use error::{Result, TomoError};
