//! Random conductance fields on periodic lattices.

mod cluster;
mod field;
pub mod io;
mod lattice;
mod law;

pub use cluster::{bad_cluster, bad_cluster_with, w_statistic, BadCluster, WStatistic};
pub use field::{ConductanceField, FieldView, SiteClassification, EDGE_BLOCK};
pub use lattice::{EdgeOffset, Lattice};
pub use law::ConductanceLaw;

use crate::error::Result;
use crate::num::Real;

/// Realization 0 of the i.i.d. field with the given seed.
pub fn sample_field<T: Real>(law: &ConductanceLaw, lattice: &Lattice, seed: u64) -> Result<ConductanceField<T>> {
    ConductanceField::sample_realization(law, lattice, seed, 0)
}
