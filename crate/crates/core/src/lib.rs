//! Simulation and compactness toolkit for coalescing stable-walk webs.
//!
//! Paths carry a spatial coordinate and an age. A web is a set of such
//! paths; the crate provides the path metric, a Hausdorff-type metric on
//! webs, checkers for the tightness conditions, lattice simulators for
//! coalescing walks and Monte Carlo experiments built on them.

pub mod agedpath;
pub mod cadlag;
pub mod collection;
pub mod compactness;
pub mod error;
pub mod experiments;
pub mod scalar;
pub mod walkers;

pub use cadlag::{
    oscillation, oscillation_at_most, path_dist, path_dist_tolerance, PiecewisePath, Segment,
};
pub use agedpath::{AgedPath, Clause, TruncatedPath, Violation};
pub use collection::{hausdorff, pair_dist, web_dist, web_dist_h, PathCollection, Threshold, WebDist};
pub use compactness::{calibrate, check_a, check_b, check_c, check_d, check_e, Budget, CalibrationReport, Tri};
pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision path.
pub type Path = PiecewisePath<f64>;
/// Single-precision path.
pub type Path32 = PiecewisePath<f32>;
/// Double-precision aged path.
pub type Aged = AgedPath<f64>;
/// Double-precision truncated path.
pub type Truncated = TruncatedPath<f64>;
/// Double-precision collection.
pub type Collection = PathCollection<f64>;
