//! Monte Carlo experiments on coalescing walks.

pub mod avoidance;
pub mod birth;
pub mod density;
pub mod insulation;
pub mod interval;
pub mod report;
pub mod stats;
pub mod tightness;

pub use avoidance::{avoidance_exponent, avoidance_exponent_with, AvoidanceConfig, Event};
pub use birth::{birth_modulus, birth_modulus_with, displacement_threshold, BirthConfig, RefBox};
pub use density::{density_scan, density_scan_with, DensityConfig};
pub use insulation::{insulation_probe, insulation_probe_with, InsulationConfig};
pub use interval::{interval_coalescence, interval_coalescence_with, IntervalConfig};
pub use tightness::{tightness_scan, tightness_scan_with, TightnessConfig};
pub use report::{Estimate, ExperimentReport};

/// Deterministic list of `count` seeds derived from `base`.
pub fn seed_list(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_mul(1_000_003).wrapping_add(i)).collect()
}
