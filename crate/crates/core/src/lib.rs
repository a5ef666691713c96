//! Construction and analysis of `(v, k, t)` covering designs.
//!
//! Two constructors are provided: the random greedy packing with early abort
//! ([`greedy`]), and induced coverings built from the hyperplanes of the
//! affine geometry `AG(t, p)` ([`geometry`]). The [`analysis`] module holds the
//! density laws used to check them: the closed form for the probability that a
//! t-set is still uncovered, a Monte Carlo simulation of the idealized birth
//! tree behind it, and the log-log fit of the density excess.

pub mod analysis;
pub mod bounds;
pub mod combinatorics;
pub mod design;
pub mod error;
pub mod format;
pub mod geometry;
pub mod greedy;
pub mod rng;
pub mod stats;

pub use bounds::{density_bound, density_lower_bound, schonheim_bound, BoundMethod, BoundResult};
pub use combinatorics::{binomial, colex_rank, colex_unrank, Subset};
pub use design::{
    density, verify, CoverageBitmap, CoveringDesign, Density, DesignParams, VerifyKind, VerifyMode,
    VerifyReport,
};
pub use error::{Error, Result};
pub use format::{read_design, write_design};
pub use greedy::{greedy_cover, GreedyConfig, GreedyStats};
