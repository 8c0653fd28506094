//! The boundary map `F` induced by the strong cross section: rank-one `F_j`
//! on the limit set and the product map `x ↦ g_m(x)` on `D = ⋃_m I^c_{st,m}`.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::moebius::BoundaryPoint;
use crate::schottky::ProductGroup;

/// Working depth for limit-set membership.
pub const DEFAULT_DEPTH: usize = 12;

/// Width (relative to `max(1, |x|)`) below which re-anchored orbit points are
/// considered to sit on the limit set.
const SNAP_WIDTH: f64 = 4e-15;
const SNAP_MAX_DEPTH: usize = 64;

/// A multi-index `m = (m_1, …, m_r)`, one letter per factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<i32>);

impl Deref for MultiIndex {
    type Target = [i32];
    fn deref(&self) -> &[i32] {
        &self.0
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        f.write_str(&parts.join(";"))
    }
}

impl From<Vec<i32>> for MultiIndex {
    fn from(v: Vec<i32>) -> Self {
        MultiIndex(v)
    }
}

/// A point `(x_1, …, x_r)` of the Furstenberg boundary `(ℝ ∪ {∞})^r`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryVector(pub Vec<BoundaryPoint>);

impl BoundaryVector {
    pub fn finite(xs: &[f64]) -> Self {
        BoundaryVector(xs.iter().map(|&x| BoundaryPoint::Finite(x)).collect())
    }

    /// Componentwise maximum of chordal distances.
    pub fn chordal_distance(&self, other: &BoundaryVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.chordal_distance(*b)).fold(0.0, f64::max)
    }
}

impl Deref for BoundaryVector {
    type Target = [BoundaryPoint];
    fn deref(&self) -> &[BoundaryPoint] {
        &self.0
    }
}

fn check_rank(group: &ProductGroup, len: usize) -> Result<()> {
    if len != group.rank() {
        return Err(Error::RankMismatch { expected: group.rank(), got: len });
    }
    Ok(())
}

/// The multi-index `m` with `x_j` in the open diameter of `𝒟_{m_j}` for every
/// `j`. With `depth > 0`, each `x_j` must also lie in the depth-`depth` cover
/// of the limit set. Factor numbers in errors are 1-based.
pub fn locate(group: &ProductGroup, x: &BoundaryVector, depth: usize) -> Result<MultiIndex> {
    check_rank(group, x.len())?;
    let mut m = Vec::with_capacity(x.len());
    for (j, (f, xj)) in group.factors().iter().zip(x.iter()).enumerate() {
        let xj = xj.finite().ok_or(Error::OutsideAllDisks { factor: j + 1 })?;
        let letter = f.disk_containing(xj).ok_or(Error::OutsideAllDisks { factor: j + 1 })?;
        if depth > 0 {
            match f.cover_address(xj, depth) {
                Some(addr) if addr[0] == letter => {}
                _ => return Err(Error::NotInCover { factor: j + 1, depth }),
            }
        }
        m.push(letter);
    }
    Ok(MultiIndex(m))
}

/// One step of the boundary map: `x ↦ g_m(x)` with `m = locate(x)`.
pub fn apply_map(group: &ProductGroup, x: &BoundaryVector) -> Result<(MultiIndex, BoundaryVector)> {
    let m = locate(group, x, 0)?;
    let image = group
        .factors()
        .iter()
        .zip(m.iter())
        .zip(x.iter())
        .map(|((f, &l), &xj)| f.generator(l).boundary_apply(xj))
        .collect();
    Ok((m, BoundaryVector(image)))
}

/// `B(m) = {n : n_j = −m_j for some j}`.
pub fn exclusion_set(group: &ProductGroup, m: &MultiIndex) -> Result<BTreeSet<MultiIndex>> {
    check_rank(group, m.len())?;
    for (f, &l) in group.factors().iter().zip(m.iter()) {
        f.slot(l)?;
    }
    Ok(group
        .multi_indices()
        .into_iter()
        .filter(|n| n.iter().zip(m.iter()).any(|(a, b)| *a == -b))
        .map(MultiIndex)
        .collect())
}

/// Multi-indices allowed after `m`, i.e. `𝒥 ∖ B(m)`, in lexicographic order.
pub fn admissible_successors(group: &ProductGroup, m: &MultiIndex) -> Vec<MultiIndex> {
    group
        .multi_indices()
        .into_iter()
        .filter(|n| n.iter().zip(m.iter()).all(|(a, b)| *a != -b))
        .map(MultiIndex)
        .collect()
}

/// All `(n, g_n^{−1}(x))` with `n ∉ B(m)`, where `m = locate(x)`.
pub fn preimages(group: &ProductGroup, x: &BoundaryVector) -> Result<Vec<(MultiIndex, BoundaryVector)>> {
    let m = locate(group, x, 0)?;
    Ok(admissible_successors(group, &m)
        .into_iter()
        .map(|n| {
            let y = group
                .factors()
                .iter()
                .zip(n.iter())
                .zip(x.iter())
                .map(|((f, &l), &xj)| f.inverse_branch(l).boundary_apply(xj))
                .collect();
            (n, BoundaryVector(y))
        })
        .collect())
}

/// Letters `m^{(1)}, …, m^{(K)}` of the orbit of `x` under `F`.
///
/// With `depth > 0`, every iterate is checked against the depth-`depth` cover and then
/// re-anchored onto the cover (descending the nested intervals to the
/// resolution of doubles) before `F` is applied. Without re-anchoring the
/// expansion of `F` would push a floating-point orbit off the limit set after
/// roughly a dozen steps. The code is exact for as many letters as the start
/// resolves; later letters belong to a shadowing orbit of nearby limit points.
pub fn orbit_code(group: &ProductGroup, x: &BoundaryVector, steps: usize, depth: usize) -> Result<Vec<MultiIndex>> {
    check_rank(group, x.len())?;
    let mut point = x.clone();
    let mut code = Vec::with_capacity(steps);
    for step in 0..steps {
        let m = locate(group, &point, depth).map_err(|e| match e {
            Error::OutsideAllDisks { factor } | Error::NotInCover { factor, .. } => {
                Error::CodeTerminated { step, factor }
            }
            other => other,
        })?;
        let mut next = Vec::with_capacity(point.len());
        for (j, (f, &l)) in group.factors().iter().zip(m.iter()).enumerate() {
            let xj = point[j].finite().expect("located points are finite");
            let anchored = if depth > 0 {
                f.snap_to_cover(xj, SNAP_WIDTH * xj.abs().max(1.0), SNAP_MAX_DEPTH)
                    .map(|(y, _)| y)
                    .unwrap_or(xj)
            } else {
                xj
            };
            next.push(f.generator(l).boundary_apply(BoundaryPoint::Finite(anchored)));
        }
        code.push(m);
        point = BoundaryVector(next);
    }
    Ok(code)
}
