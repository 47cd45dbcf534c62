//! Measurement model: local block POVMs, the global GHZ elements, measurement
//! records and the data-weighted operator `R(rho)`.

pub mod construction;
pub mod probability;
pub mod r_operator;
pub mod record;
pub mod setting;

pub use construction::{operator_valued_mpo, BlockTerm, PauliSum};
pub use probability::{log_likelihood_from, setting_probabilities};
pub use r_operator::{
    build_global_r, build_global_r_from, build_local_r, build_local_r_from, build_r, build_r_from, dilute,
    element_weights, RBuildOptions, RConstruction, ROperatorBuild, DEFAULT_PROB_FLOOR,
};
pub use record::{MeasurementRecord, PovmKind, SettingRecord, Shots};
pub use setting::{
    outcome_sign, projector, Element, GlobalGhzPovm, GlobalObservable, LocalBlockPovm, PovmSet, SettingLabel,
};
