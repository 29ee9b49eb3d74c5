//! Rotated-digit application: data pipeline, equivariant model builder,
//! training, evaluation and runtime equivariance verification.

pub mod config;
pub mod data;
pub mod eval;
pub mod idx;
pub mod netbuild;
pub mod train;
pub mod verify;

pub use config::Config;
pub use data::{encode_label, prepare_dataset, LabeledSample, RotatePolicy};
pub use eval::{evaluate, EvalReport};
pub use netbuild::build_model;
pub use train::train;
pub use verify::{verify_equivariance, VerifyReport};
