//! Finite-group equivarification: turn any feedforward map into an
//! exactly equivariant one by lifting it into the G-product, and train
//! the resulting networks with a small deterministic CPU engine.

pub mod action;
pub mod equivarify;
pub mod error;
pub mod group;
pub mod mnist;
pub mod nn;

pub use action::{block_shift_action, rot90_action, Carrier, GroupAction};
pub use equivarify::{
    check_equivariance, equivarify_layer, induced_action, lift, lift_through_quotient,
    universal_map, EquivariantMap, GProductValue,
};
pub use error::{Error, Result};
pub use group::{AxiomReport, FiniteGroup, QuotientGroup, Subgroup};
