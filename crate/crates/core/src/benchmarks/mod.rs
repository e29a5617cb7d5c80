//! The reference problems.

pub mod groups;
pub mod kde;
pub mod roll;
pub mod ship;
pub mod synthetic;
pub mod waves;

pub use ship::{ShipConfig, ShipRoll};
pub use synthetic::{FourBranch2D, Synthetic1D};
