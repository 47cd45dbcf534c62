//! Matrix product states and operators over the normalized Pauli basis.

pub mod chain;
pub mod compress;
pub mod io;
pub mod mpo;
pub mod mps;
pub mod pauli;
pub mod product;

pub use compress::{CompressOptions, CompressionReport, SweepKind};
pub use mpo::{apply, sandwich_expectation, KNormalForm, Mpo, ProductObservable};
pub use mps::Mps;
pub use pauli::{OperatorBasis, Pauli};
pub use product::Product;
