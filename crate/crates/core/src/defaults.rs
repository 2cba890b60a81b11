//! Default numerical parameters, in one place.
//!
//! | name              | value | used by                                   |
//! |-------------------|-------|-------------------------------------------|
//! | `TRUNCATION`      | 8     | cylinder basis, labels `-8..=8`           |
//! | `QUAD_ORDER`      | 64    | Gauss-Hermite nodes per real dimension    |
//! | `HEAT_MODES`      | 12    | mode cutoff of the circle heat kernel     |
//! | `HEAT_X_NODES`    | 256   | periodic trapezoid nodes on `[-pi, pi)`   |
//! | `HEAT_TIME`       | 1.0   | heat-kernel time                          |
//! | `EPSILON`         | 0.05  | complex-time regularization of Green sums |
//! | `GREENS_MODES`    | 40    | spectral Green-function cutoff            |
//! | `GREENS_WINDINGS` | 40    | winding-number cutoff                     |
//! | `DIVISION_GUARD`  | 1e-12 | kernel-ratio guard in the propagator      |

pub const TRUNCATION: usize = 8;
pub const QUAD_ORDER: usize = 64;
pub const HEAT_MODES: usize = 12;
pub const HEAT_X_NODES: usize = 256;
pub const HEAT_TIME: f64 = 1.0;
pub const HEAT_TOLERANCE: f64 = 1e-13;
pub const EPSILON: f64 = 0.05;
pub const GREENS_MODES: usize = 40;
pub const GREENS_WINDINGS: usize = 40;
pub const GREENS_TOLERANCE: f64 = 1e-8;
pub const DIVISION_GUARD: f64 = 1e-12;
/// Largest truncation accepted for the unnormalized basis `e^{ikz}`.
pub const RAW_BASIS_MAX_TRUNCATION: usize = 6;
