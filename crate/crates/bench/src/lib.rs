//! Shared fixtures for the benchmarks.

use chamberflow::{Disk, ProductGroup, SchottkyFactor};

/// Four unit disks centered at −6, −2, 2, 6 paired as (1, −1), (2, −2).
pub fn fractal() -> SchottkyFactor {
    let disks = [(1, -6.0), (-1, -2.0), (2, 2.0), (-2, 6.0)];
    SchottkyFactor::from_disks(disks.iter().map(|&(i, c)| Disk::new(i, c, 1.0).unwrap()).collect()).unwrap()
}

pub fn fractal_squared() -> ProductGroup {
    ProductGroup::new(vec![fractal(), fractal()]).unwrap()
}
