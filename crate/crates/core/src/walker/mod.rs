//! Exact continuous-time walks on a fixed field and functionals of their paths.

mod ensemble;
mod trajectory;

pub use ensemble::{msd_estimate, walk_stream, EnsembleConfig, MsdCurve, StartRule, WalkerKind};
pub use trajectory::{
    additive_functional, additive_functional_between, env_samples, simulate, simulate_srw, simulate_vsrw, RateTable,
    Trajectory,
};
