//! High-order compact scheme derivation and global assembly.

pub mod aux;
pub mod system;
pub mod version;

pub use aux::{derive_aux_fourth, derive_aux_third, AuxRelation, AuxTarget, Axis, FourthKind};
pub use system::{
    assemble_system, dump_stencils, eliminate_ghosts, ghost_targets, DirichletBc, OperatorPair,
};
pub use version::{
    assemble_version, remainder_coefficient, remainder_coefficient_max, SchemeVersion,
};
