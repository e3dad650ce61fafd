//! Random energy models with generalized index structure: disorder families,
//! model construction, exact-enumeration simulation and the variational
//! free-energy solver.

pub mod disorder;
pub mod error;
pub mod model;
mod quad;
pub mod seed;
pub mod sim;
pub mod varsolve;

pub use disorder::{Convexity, CustomFamily, DisorderFamily, FamilyKind};
pub use error::{Error, Result};
pub use model::{
    block_partition, hamiltonian, reduce_to_chain, sample_disorder, BlockPartition, Configuration, IndexTerm,
    ModelSpec, Realization, Variant,
};
pub use sim::{CoordBox, LogMass, SimOptions};
pub use varsolve::{FreeEnergyResult, GridOptions, Method};
