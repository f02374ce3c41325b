//! Constructive pattern avoidance on dyadic grids.

pub mod analysis;
pub mod avoider;
pub mod builder;
pub mod dyadic;
pub mod error;
pub mod exec;
pub mod interval;
pub mod measure;
pub mod oracle;

pub use dyadic::{Cube, CubeSet, DyadicScale, MAX_EXPONENT};
pub use error::{Error, Result};
pub use exec::Exec;
