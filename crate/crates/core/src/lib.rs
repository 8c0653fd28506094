pub mod coding;
pub mod error;
pub mod flow;
pub mod moebius;
pub mod schottky;
pub mod spectral;
pub mod transfer;

pub use coding::{BoundaryVector, MultiIndex};
pub use error::{Error, Result};
pub use flow::{FlatState, TimeVector};
pub use moebius::{BoundaryPoint, MoebiusTransform};
pub use schottky::{Disk, ProductGroup, SchottkyFactor, Word};
