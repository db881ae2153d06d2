//! Classification of rank-1 holomorphic foliation germs with an isolated
//! singularity of Poincaré type, plus numeric sphere-trace invariants.

pub mod classify;
pub mod germ;
pub mod linalg;
pub mod normalform;
pub mod poly;
pub mod resonance;
pub mod scalar;
pub mod spectral;
pub mod trace;
pub mod verdict;

pub use scalar::{C64, CQ};
