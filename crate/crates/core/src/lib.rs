//! Numerical toolkit for classical-quantum hypothesis testing and
//! information-bottleneck converse bounds.

pub mod bottleneck;
pub mod bounds;
pub mod entropy;
pub mod error;
pub mod hypothesis;
pub mod linalg;
pub mod random;
pub mod semigroup;
pub mod tolerance;
pub mod verify;

pub use error::{Error, Result};
