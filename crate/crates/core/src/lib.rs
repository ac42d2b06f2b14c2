//! Constant-mean-curvature foliations of asymptotically hyperbolic
//! 3-manifolds.

pub mod conformal;
pub mod error;
pub mod hyperbolic;
pub mod invariants;
pub mod report;
pub mod solver;
pub mod sphere;
pub mod stability;
pub mod surface;
pub mod verify;

pub use error::{Error, Result};
