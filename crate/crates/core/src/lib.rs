//! Finite-stage construction of torus diffeomorphisms that fibre over an
//! irrational circle rotation with increasingly crooked circular-chain fibres.
//!
//! The crate builds a conjugacy stack `H_n = h_n ∘ … ∘ h_1` of volume-preserving
//! shears, the approximating maps `f_n = H_n⁻¹ ∘ R_α ∘ H_n`, and the nested
//! circular chains that witness the crookedness of the fibres. Every inductive
//! property that drives the construction is machine-checked and the checks are
//! replayable from persisted run data.

pub mod chain;
pub mod crooked;
pub mod render;
pub mod rotation;
pub mod run;
pub mod search;
pub mod stage;
pub mod theta;
pub mod verify;

pub use chain::{
    chain_map, is_circular_chain, is_crooked_inside, lift_chain, standard_chain, ChainError,
    ChainLift, ChainMap, CircleInterval, CircularChain, CrookedVerdict,
};
pub use crooked::{build_zigzag, is_eps_crooked, CrookedCertificate, CrookedError, PiecewiseMonotone};
pub use rotation::{covering_radius, return_period, RotationError, RotationVector};
pub use stage::{flow, ConjugacyStack, LiftPoint, Shear, ShearDirection, StageParams, TorusPoint};
pub use theta::{build_grid_theta, build_theta, CircleMap, CircleMapBackend, ThetaError};


