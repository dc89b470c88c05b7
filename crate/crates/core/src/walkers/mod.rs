//! Coalescing random walks with heavy-tailed symmetric steps.

pub mod engine;
pub mod kernel;
pub mod renormalize;

pub use engine::{
    cluster_ages, coalescing_density, simulate, simulate_with, survivor_counts, Births, Merge, MergeStats,
    WalkSystem,
};
pub use kernel::{zeta, Kernel};
pub use renormalize::{renormalize, renormalize_with, Prune};

/// Kernel with the given exponent and truncation radius.
pub fn build_kernel(alpha: f64, radius: usize) -> crate::Result<Kernel> {
    Kernel::new(alpha, radius)
}
