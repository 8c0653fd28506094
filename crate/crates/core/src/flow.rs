//! Weyl chamber flow on products of Schottky surfaces.
//!
//! Per factor, a chamber is an oriented geodesic with a base point. The
//! geodesic from `x⁻` to `x⁺` is parametrized as `γ(t) = h(i·eᵗ)` where `h`
//! maps `0, ∞, i` to `x⁻, x⁺` and the top of the semicircle. In that frame
//! every boundary circle is a semicircle with real endpoints `p, q`, met by the
//! imaginary axis iff `pq < 0`, at `t = ½·ln(−pq)`; crossing times are thus
//! computed in closed form. After each crossing the geodesic is pulled back
//! into the fundamental domain by the pairing generator of the disk entered.

use std::fmt;
use std::ops::Deref;

use num_complex::Complex64;

use crate::coding::{apply_map, orbit_code, BoundaryVector, MultiIndex, DEFAULT_DEPTH};
use crate::error::{Error, Result};
use crate::moebius::{BoundaryPoint, MoebiusTransform};
use crate::schottky::{Disk, ProductGroup, SchottkyFactor, Word};

/// Chordal distance below which a geodesic endpoint counts as an endpoint of
/// a boundary circle (the geodesic is then tangent to the circle at infinity).
pub const TANGENCY_TOL: f64 = 1e-12;

/// Future crossings must lie at least this far past the base point.
const CROSSING_EPS: f64 = 1e-9;

/// Tolerance for "base point lies on the entry circle".
const ON_CIRCLE_TOL: f64 = 1e-9;

const SNAP_WIDTH: f64 = 4e-15;
const MAX_UNFOLD: usize = 1_000_000;

/// Per-factor time components `(t_1, …, t_r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeVector(pub Vec<f64>);

impl Deref for TimeVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TimeVector {
    /// Membership in the open positive cone `τ⁺ = (ℝ_{>0})^r`.
    pub fn is_positive(&self) -> bool {
        self.0.iter().all(|&t| t > 0.0)
    }
}

impl fmt::Display for TimeVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|t| t.to_string()).collect();
        f.write_str(&parts.join(";"))
    }
}

/// Hyperbolic distance in the upper half-plane.
pub fn hyperbolic_distance(z: Complex64, w: Complex64) -> f64 {
    2.0 * ((z - w).norm() / (2.0 * (z.im * w.im).sqrt())).asinh()
}

/// The element `h` with `h(0) = x⁻`, `h(∞) = x⁺` and `h(i)` the top of the
/// geodesic (or `x + i` when one endpoint is ∞).
fn top_frame(backward: BoundaryPoint, forward: BoundaryPoint) -> Result<MoebiusTransform> {
    use BoundaryPoint::*;
    match (backward, forward) {
        (Finite(xm), Finite(xp)) => {
            if xm == xp {
                Err(Error::DegenerateGeodesic)
            } else if xp > xm {
                MoebiusTransform::new(xp, xm, 1.0, 1.0)
            } else {
                MoebiusTransform::new(xp, -xm, 1.0, -1.0)
            }
        }
        (Finite(xm), Infinity) => MoebiusTransform::new(1.0, xm, 0.0, 1.0),
        (Infinity, Finite(xp)) => MoebiusTransform::new(xp, -1.0, 1.0, 0.0),
        (Infinity, Infinity) => Err(Error::DegenerateGeodesic),
    }
}

/// Parameter at which the geodesic (given by its top frame's inverse) meets
/// the boundary circle of `disk`, if it does.
fn circle_param(frame_inv: &MoebiusTransform, disk: &Disk) -> Option<f64> {
    let p = frame_inv.apply_real(disk.center - disk.radius)?;
    let q = frame_inv.apply_real(disk.center + disk.radius)?;
    (p * q < 0.0).then(|| 0.5 * (-p * q).ln())
}

/// Periodic flats remember which closed geodesic they run along: the axis of
/// `word` rotated by `phase`.
#[derive(Clone, Debug, PartialEq)]
struct Anchor {
    word: Word,
    phase: usize,
}

/// One factor of a flat: an oriented geodesic and a base point on it.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorState {
    backward: BoundaryPoint,
    forward: BoundaryPoint,
    /// Parameter of the base point, measured from the top of the geodesic.
    tau: f64,
    /// Boundary circle carrying the base point, when the state is in `C`.
    entry: Option<i32>,
    anchor: Option<Anchor>,
}

/// Result of flowing one factor to its next crossing.
#[derive(Clone, Debug)]
pub struct FactorStep {
    pub letter: i32,
    pub time: f64,
    pub next: FactorState,
    /// `|d_ℍ(base, crossing point) − time|`.
    pub arclength_defect: f64,
    /// Chordal distance between the geometrically pulled-back endpoints and
    /// the re-anchored closed-geodesic endpoints (zero for non-periodic states).
    pub anchor_deviation: f64,
}

impl FactorState {
    /// The geodesic from `backward` to `forward`, based at its top.
    pub fn at_top(backward: BoundaryPoint, forward: BoundaryPoint) -> Result<Self> {
        top_frame(backward, forward)?;
        Ok(FactorState { backward, forward, tau: 0.0, entry: None, anchor: None })
    }

    pub fn backward(&self) -> BoundaryPoint {
        self.backward
    }

    pub fn forward(&self) -> BoundaryPoint {
        self.forward
    }

    pub fn entry(&self) -> Option<i32> {
        self.entry
    }

    fn frame(&self) -> MoebiusTransform {
        top_frame(self.backward, self.forward).expect("endpoints checked at construction")
    }

    /// Chamber representative `h ∘ a_τ`: maps `0, ∞` to the endpoints and `i`
    /// to the base point.
    pub fn chamber(&self) -> MoebiusTransform {
        self.frame().compose(&MoebiusTransform::diagonal(self.tau))
    }

    pub fn base_point(&self) -> Complex64 {
        self.point_at(self.tau)
    }

    fn point_at(&self, t: f64) -> Complex64 {
        self.frame().plane_apply(Complex64::new(0.0, t.exp())).expect("i·eᵗ is in ℍ")
    }

    /// Moves the base point into the closure of the fundamental domain by
    /// applying generators.
    fn reduce(&mut self, f: &SchottkyFactor) -> Result<()> {
        for _ in 0..MAX_UNFOLD {
            let z = self.base_point();
            let Some(disk) = f.disks().iter().find(|d| (z - d.center).norm() < d.radius * (1.0 - 1e-12)) else {
                return Ok(());
            };
            let g = f.generator(disk.index);
            let image = g.apply_complex(z);
            self.backward = g.boundary_apply(self.backward);
            self.forward = g.boundary_apply(self.forward);
            self.tau = self.frame().inverse().apply_complex(image).norm().ln();
            self.entry = None;
        }
        Err(Error::NonConvergence("base point reduction".into()))
    }

    /// The circle entered next: smallest crossing parameter beyond the base
    /// point among all boundary circles.
    fn next_crossing(&self, f: &SchottkyFactor) -> Result<Option<(i32, f64)>> {
        let inv = self.frame().inverse();
        let mut best: Option<(i32, f64)> = None;
        for disk in f.disks() {
            for end in [disk.center - disk.radius, disk.center + disk.radius] {
                for x in [self.backward, self.forward] {
                    let d = x.chordal_distance(BoundaryPoint::Finite(end));
                    if d < TANGENCY_TOL {
                        return Err(Error::TangentCrossing { letter: disk.index, discriminant: d });
                    }
                }
            }
            if let Some(t) = circle_param(&inv, disk) {
                if t > self.tau + CROSSING_EPS && best.map_or(true, |(_, b)| t < b) {
                    best = Some((disk.index, t));
                }
            }
        }
        if let Some((k, _)) = best {
            let enters = self.forward.finite().is_some_and(|x| f.disk(k).contains_open(x));
            if !enters {
                return Err(Error::InvalidArgument(format!(
                    "base point is not in the closed fundamental domain (leaves disk {k})"
                )));
            }
        }
        Ok(best)
    }

    /// Flows to the next crossing within `horizon` and pulls back. With
    /// `snap`, a forward endpoint in the limit-set cover is re-anchored onto
    /// the cover first (see [`crate::coding::orbit_code`]).
    pub fn step(&self, f: &SchottkyFactor, horizon: f64, snap: bool) -> Result<Option<FactorStep>> {
        let mut state = self.clone();
        if snap && state.anchor.is_none() {
            if let BoundaryPoint::Finite(x) = state.forward {
                if f.cover_address(x, DEFAULT_DEPTH).is_some() {
                    if let Some((y, _)) = f.snap_to_cover(x, SNAP_WIDTH * x.abs().max(1.0), 64) {
                        state.forward = BoundaryPoint::Finite(y);
                    }
                }
            }
        }
        let Some((letter, t_cross)) = state.next_crossing(f)? else {
            return Ok(None);
        };
        let time = t_cross - state.tau;
        if time > horizon {
            return Ok(None);
        }
        let arclength_defect = (hyperbolic_distance(state.base_point(), state.point_at(t_cross)) - time).abs();

        let g = f.generator(letter);
        let mut backward = g.boundary_apply(state.backward);
        let mut forward = g.boundary_apply(state.forward);
        let mut anchor_deviation = 0.0;
        let anchor = match &state.anchor {
            Some(Anchor { word, phase }) => {
                let expected = -word.letters()[*phase];
                if letter != expected {
                    return Err(Error::AnchorLost { expected, got: letter });
                }
                let phase = (phase + 1) % word.len();
                let axis = f.closed_geodesic(&word.rotated(phase))?;
                anchor_deviation = backward
                    .chordal_distance(axis.repelling)
                    .max(forward.chordal_distance(axis.attracting));
                backward = axis.repelling;
                forward = axis.attracting;
                Some(Anchor { word: word.clone(), phase })
            }
            None => None,
        };
        let next = FactorState::on_circle(f, backward, forward, -letter, anchor)?;
        Ok(Some(FactorStep { letter, time, next, arclength_defect, anchor_deviation }))
    }

    /// The state based where the geodesic meets the boundary circle `entry`.
    fn on_circle(
        f: &SchottkyFactor,
        backward: BoundaryPoint,
        forward: BoundaryPoint,
        entry: i32,
        anchor: Option<Anchor>,
    ) -> Result<Self> {
        let frame = top_frame(backward, forward)?;
        let tau = circle_param(&frame.inverse(), f.disk(entry))
            .ok_or(Error::InvalidArgument(format!("geodesic does not meet circle {entry}")))?;
        Ok(FactorState { backward, forward, tau, entry: Some(entry), anchor })
    }

    /// Membership in the cross section `C`: base point on the entry circle,
    /// forward endpoint outside the entry disk.
    pub fn in_cross_section(&self, f: &SchottkyFactor) -> bool {
        let Some(e) = self.entry else { return false };
        let disk = f.disk(e);
        let z = self.base_point();
        let on_circle = ((z - disk.center).norm() - disk.radius).abs() <= ON_CIRCLE_TOL * disk.radius.max(1.0);
        let outward = match self.forward {
            BoundaryPoint::Infinity => true,
            BoundaryPoint::Finite(x) => (x - disk.center).abs() > disk.radius,
        };
        on_circle && outward
    }
}

/// A flat: one [`FactorState`] per factor.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatState {
    factors: Vec<FactorState>,
}

impl FlatState {
    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, j: usize) -> &FactorState {
        &self.factors[j]
    }

    pub fn factors(&self) -> &[FactorState] {
        &self.factors
    }

    /// The Furstenberg boundary point `ν(v)`: forward endpoints.
    pub fn forward(&self) -> BoundaryVector {
        BoundaryVector(self.factors.iter().map(|s| s.forward).collect())
    }

    pub fn backward(&self) -> BoundaryVector {
        BoundaryVector(self.factors.iter().map(|s| s.backward).collect())
    }

    /// Flat through the given geodesics, reduced into the fundamental domain
    /// and flowed to its first crossing with `C` in every factor.
    pub fn from_endpoints(group: &ProductGroup, geodesics: &[(BoundaryPoint, BoundaryPoint)], horizon: f64) -> Result<Self> {
        if geodesics.len() != group.rank() {
            return Err(Error::RankMismatch { expected: group.rank(), got: geodesics.len() });
        }
        let mut factors = Vec::with_capacity(geodesics.len());
        for (j, (f, &(b, e))) in group.factors().iter().zip(geodesics).enumerate() {
            let mut s = FactorState::at_top(b, e)?;
            s.reduce(f)?;
            let step = s.step(f, horizon, false)?.ok_or(Error::NoFutureIntersection { factor: j + 1 })?;
            factors.push(step.next);
        }
        Ok(FlatState { factors })
    }
}

/// Compact flat through the closed geodesics of `words` (one cyclic word per
/// factor), oriented toward the attracting fixed points and based at the
/// crossing with the circle of each word's last letter.
pub fn flat_from_words(group: &ProductGroup, words: &[Word]) -> Result<FlatState> {
    if words.len() != group.rank() {
        return Err(Error::RankMismatch { expected: group.rank(), got: words.len() });
    }
    let mut factors = Vec::with_capacity(words.len());
    for (f, w) in group.factors().iter().zip(words) {
        if w.is_empty() {
            return Err(Error::InvalidArgument("flat words must be nonempty".into()));
        }
        let w = Word::new(w.letters().to_vec(), true)?;
        for &l in w.letters() {
            f.slot(l)?;
        }
        let axis = f.closed_geodesic(&w)?;
        let entry = *w.letters().last().unwrap();
        factors.push(FactorState::on_circle(f, axis.repelling, axis.attracting, entry, Some(Anchor { word: w, phase: 0 }))?);
    }
    Ok(FlatState { factors })
}

/// Crossing times in `(0, horizon]` of the geodesic from `geodesic.0` to
/// `geodesic.1`, measured from the top of the semicircle, with the letters of
/// the disks entered.
pub fn factor_crossing_times(
    f: &SchottkyFactor,
    geodesic: (BoundaryPoint, BoundaryPoint),
    horizon: f64,
) -> Result<Vec<(f64, i32)>> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    let mut state = FactorState::at_top(geodesic.0, geodesic.1)?;
    state.reduce(f)?;
    crossings_from(f, &state, 0.0, horizon)
}

/// Unfolds `state` forward; times are offset by `start`.
fn crossings_from(f: &SchottkyFactor, state: &FactorState, start: f64, horizon: f64) -> Result<Vec<(f64, i32)>> {
    let mut out = Vec::new();
    let mut state = state.clone();
    state.anchor = None;
    let mut now = start;
    for _ in 0..MAX_UNFOLD {
        match state.step(f, horizon - now, true)? {
            Some(step) => {
                now += step.time;
                out.push((now, step.letter));
                state = step.next;
            }
            None => return Ok(out),
        }
    }
    Err(Error::NonConvergence("crossing enumeration exceeded its cap".into()))
}

/// Outcome of [`first_return`].
#[derive(Clone, Debug)]
pub struct FirstReturn {
    pub t0: TimeVector,
    pub next: FlatState,
    pub letter: MultiIndex,
    pub arclength_defect: f64,
    pub anchor_deviation: f64,
}

/// First return of a flat in `C` to `C`: per factor, the first future
/// crossing. The joint crossing-time set of a product is the product of the
/// factor sets, so the chamber at `t₀` lies in `Ĉ`; this is asserted.
pub fn first_return(group: &ProductGroup, state: &FlatState, horizon: f64) -> Result<FirstReturn> {
    if state.rank() != group.rank() {
        return Err(Error::RankMismatch { expected: group.rank(), got: state.rank() });
    }
    let mut t0 = Vec::with_capacity(state.rank());
    let mut letters = Vec::with_capacity(state.rank());
    let mut next = Vec::with_capacity(state.rank());
    let (mut arclength_defect, mut anchor_deviation) = (0.0f64, 0.0f64);
    for (j, (f, s)) in group.factors().iter().zip(&state.factors).enumerate() {
        let step = s.step(f, horizon, false)?.ok_or(Error::NoFutureIntersection { factor: j + 1 })?;
        if !(step.time > 0.0) || !step.next.in_cross_section(f) {
            return Err(Error::CrossSection { factor: j + 1 });
        }
        arclength_defect = arclength_defect.max(step.arclength_defect);
        anchor_deviation = anchor_deviation.max(step.anchor_deviation);
        t0.push(step.time);
        letters.push(step.letter);
        next.push(step.next);
    }
    Ok(FirstReturn {
        t0: TimeVector(t0),
        next: FlatState { factors: next },
        letter: MultiIndex(letters),
        arclength_defect,
        anchor_deviation,
    })
}

/// Horizon for word flats: ten times the longest factor translation length.
pub fn default_horizon(group: &ProductGroup, words: &[Word]) -> Result<f64> {
    let mut longest = 0.0f64;
    for (f, w) in group.factors().iter().zip(words) {
        longest = longest.max(f.closed_geodesic(w)?.length);
    }
    Ok(10.0 * longest)
}

#[derive(Clone, Debug)]
pub struct CrossSectionReport {
    /// Every factor returns to `C` within one period of its closed geodesic.
    pub c1: bool,
    pub first_return: TimeVector,
    pub periods: Vec<f64>,
    /// Smallest per-factor gap between consecutive crossings; `None` when no
    /// returns were requested.
    pub gaps: Option<Vec<f64>>,
    /// Every returned chamber lies in `Ĉ`, and over one period the joint
    /// return times agree with independently unfolded factor crossing times.
    pub factorization_ok: bool,
    pub max_time_mismatch: f64,
    pub returns: usize,
}

/// Checks (C1) and (C2) on the compact flat of `words` over `returns` returns.
pub fn check_c1_c2(group: &ProductGroup, words: &[Word], returns: usize) -> Result<CrossSectionReport> {
    let start = flat_from_words(group, words)?;
    let horizon = default_horizon(group, words)?;
    let periods: Vec<f64> = group
        .factors()
        .iter()
        .zip(words)
        .map(|(f, w)| f.closed_geodesic(w).map(|g| g.length))
        .collect::<Result<_>>()?;

    let first = first_return(group, &start, horizon)?;
    let c1 = first.t0.iter().zip(&periods).all(|(t, p)| *t <= p * (1.0 + 1e-9));
    if returns == 0 {
        return Ok(CrossSectionReport {
            c1,
            first_return: first.t0,
            periods,
            gaps: None,
            factorization_ok: true,
            max_time_mismatch: 0.0,
            returns,
        });
    }

    let r = group.rank();
    let mut gaps = vec![f64::INFINITY; r];
    let mut elapsed = vec![Vec::with_capacity(returns); r];
    let mut state = start.clone();
    let mut clock = vec![0.0; r];
    for _ in 0..returns {
        let ret = first_return(group, &state, horizon)?;
        for j in 0..r {
            gaps[j] = gaps[j].min(ret.t0[j]);
            clock[j] += ret.t0[j];
            elapsed[j].push((clock[j], ret.letter[j]));
        }
        state = ret.next;
    }

    let mut factorization_ok = true;
    let mut max_time_mismatch = 0.0f64;
    for (j, f) in group.factors().iter().enumerate() {
        // Unanchored unfolding shadows the periodic orbit only for about a
        // dozen crossings, so the comparison covers one period.
        let until = clock[j].min(periods[j]) * (1.0 + 1e-9);
        let unfolded = crossings_from(f, start.factor(j), 0.0, until)?;
        let expected: Vec<_> = elapsed[j].iter().filter(|(t, _)| *t <= until).collect();
        if unfolded.len() != expected.len() {
            factorization_ok = false;
            continue;
        }
        for ((ta, la), (tb, lb)) in unfolded.iter().zip(expected) {
            max_time_mismatch = max_time_mismatch.max((ta - tb).abs() / (1.0 + tb));
            factorization_ok &= la == lb;
        }
    }
    factorization_ok &= max_time_mismatch <= 1e-8;

    Ok(CrossSectionReport {
        c1,
        first_return: first.t0,
        periods,
        gaps: Some(gaps),
        factorization_ok,
        max_time_mismatch,
        returns,
    })
}

#[derive(Clone, Debug)]
pub struct SemiconjugacyStep {
    pub t0: TimeVector,
    pub flow_letter: MultiIndex,
    pub map_letter: MultiIndex,
    /// Chordal distance between `ν(R(v))` and `F(ν(v))`.
    pub deviation: f64,
}

#[derive(Clone, Debug)]
pub struct SemiconjugacyReport {
    pub steps: Vec<SemiconjugacyStep>,
    pub max_deviation: f64,
    pub letters_agree: bool,
    /// Length of the common prefix of flow letters and the orbit code of the
    /// starting boundary point.
    pub code_prefix: usize,
}

/// Compares the first-return map with the boundary map `F` along `steps`
/// returns from `start`.
pub fn semiconjugacy_check(group: &ProductGroup, start: &FlatState, steps: usize, horizon: f64) -> Result<SemiconjugacyReport> {
    let mut state = start.clone();
    let mut records = Vec::with_capacity(steps);
    for _ in 0..steps {
        let nu = state.forward();
        let (map_letter, image) = apply_map(group, &nu)?;
        let ret = first_return(group, &state, horizon)?;
        let deviation = ret.next.forward().chordal_distance(&image);
        records.push(SemiconjugacyStep { t0: ret.t0, flow_letter: ret.letter, map_letter, deviation });
        state = ret.next;
    }
    let max_deviation = records.iter().map(|s| s.deviation).fold(0.0, f64::max);
    let letters_agree = records.iter().all(|s| s.flow_letter == s.map_letter);
    let code_prefix = match orbit_code(group, &start.forward(), steps, DEFAULT_DEPTH) {
        Ok(code) => code.iter().zip(&records).take_while(|(m, s)| **m == s.flow_letter).count(),
        Err(_) => 0,
    };
    Ok(SemiconjugacyReport { steps: records, max_deviation, letters_agree, code_prefix })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schottky::fixtures::{fractal, fractal_squared};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn w(letters: &[i32]) -> Word {
        Word::new(letters.to_vec(), true).unwrap()
    }

    fn rank_one() -> ProductGroup {
        ProductGroup::new(vec![fractal()]).unwrap()
    }

    fn len1() -> f64 {
        2.0 * 2f64.acosh()
    }

    #[test]
    fn top_frame_maps_endpoints() {
        use BoundaryPoint::*;
        for (b, e) in [(Finite(-1.0), Finite(3.0)), (Finite(3.0), Finite(-1.0)), (Finite(2.0), Infinity), (Infinity, Finite(-5.0))] {
            let h = top_frame(b, e).unwrap();
            assert!(h.boundary_apply(Finite(0.0)).chordal_distance(b) < 1e-15);
            assert!(h.boundary_apply(Infinity).chordal_distance(e) < 1e-15);
        }
        let h = top_frame(Finite(-1.0), Finite(3.0)).unwrap();
        let top = h.plane_apply(Complex64::i()).unwrap();
        assert_relative_eq!(top.re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(top.im, 2.0, epsilon = 1e-15);
        assert_eq!(top_frame(Finite(1.0), Finite(1.0)), Err(Error::DegenerateGeodesic));
    }

    #[test]
    fn circle_param_matches_intersection() {
        // Geodesic from −1 to 3 meets |z − 3| = 2 where both circles intersect.
        let h = top_frame(BoundaryPoint::Finite(-1.0), BoundaryPoint::Finite(3.0)).unwrap();
        let disk = Disk::new(1, 3.0, 2.0).unwrap();
        let t = circle_param(&h.inverse(), &disk).unwrap();
        let z = h.plane_apply(Complex64::new(0.0, t.exp())).unwrap();
        assert_relative_eq!((z - 1.0).norm(), 2.0, epsilon = 1e-14);
        assert_relative_eq!((z - 3.0).norm(), 2.0, epsilon = 1e-14);
        // A disjoint circle is not met.
        assert!(circle_param(&h.inverse(), &Disk::new(1, 10.0, 1.0).unwrap()).is_none());
    }

    #[test]
    fn flat_from_simple_words() {
        let g = fractal_squared();
        let flat = flat_from_words(&g, &[w(&[1]), w(&[1])]).unwrap();
        let s3 = 3f64.sqrt();
        for s in flat.factors() {
            assert_relative_eq!(s.backward().finite().unwrap(), -4.0 - s3, epsilon = 1e-14);
            assert_relative_eq!(s.forward().finite().unwrap(), -4.0 + s3, epsilon = 1e-14);
            assert_eq!(s.entry(), Some(1));
            assert!(s.in_cross_section(&fractal()));
        }
        let periods = check_c1_c2(&g, &[w(&[1]), w(&[1, 2])], 0).unwrap().periods;
        assert_relative_eq!(periods[0], 2.0 * 2f64.acosh(), epsilon = 1e-12);
        assert_relative_eq!(periods[1], 2.0 * 25f64.acosh(), epsilon = 1e-12);
    }

    #[test]
    fn rotated_words_give_shifted_flats() {
        let g = rank_one();
        let a = flat_from_words(&g, &[w(&[1, 2])]).unwrap();
        let b = flat_from_words(&g, &[w(&[2, 1])]).unwrap();
        assert_ne!(a, b);
        // Pulling back across one crossing turns the first into the second.
        let ra = first_return(&g, &a, 100.0).unwrap();
        assert!(ra.next.forward().chordal_distance(&b.forward()) < 1e-12);
        assert!(ra.next.backward().chordal_distance(&b.backward()) < 1e-12);
        assert_relative_eq!(ra.next.factor(0).tau, b.factor(0).tau, epsilon = 1e-10);
    }

    #[test]
    fn axis_crossings_are_periodic() {
        let f = fractal();
        let axis = f.closed_geodesic(&w(&[1])).unwrap();
        // Floating-point unfolding follows the closed geodesic for a few periods
        // before drifting onto a nearby shadowing orbit.
        let times = factor_crossing_times(&f, (axis.repelling, axis.attracting), 15.0).unwrap();
        assert!(times.len() >= 5);
        for pair in times.windows(2) {
            assert_relative_eq!(pair[1].0 - pair[0].0, len1(), epsilon = 1e-9);
        }
        assert!(times.iter().all(|&(_, l)| l == -1));
    }

    #[test]
    fn escaping_geodesics_stop_crossing() {
        let f = fractal();
        let times = factor_crossing_times(&f, (BoundaryPoint::Finite(0.5), BoundaryPoint::Finite(0.7)), 1e3).unwrap();
        assert!(times.is_empty());
        // From 𝒟_2 toward g_1(∞) = −2: one crossing into 𝒟_{−1}, then the
        // forward endpoint is ∞.
        let times = factor_crossing_times(&f, (BoundaryPoint::Finite(2.0), BoundaryPoint::Finite(-2.0)), 1e3).unwrap();
        assert_eq!(times.iter().map(|c| c.1).collect::<Vec<_>>(), vec![-1]);
        // A geodesic aimed at a point that is deep in the cover but not in L
        // still escapes after finitely many crossings; the letters are the
        // code of the target, ending at the center g_{−2}^{−1}(∞) of 𝒟_{−2}.
        let target = f.inverse_branch_word(&[-1, -1, 2, 1]).apply_real(6.0).unwrap();
        let times = factor_crossing_times(&f, (BoundaryPoint::Finite(4.0), BoundaryPoint::Finite(target)), 1e3).unwrap();
        assert_eq!(times.iter().map(|c| c.1).collect::<Vec<_>>(), vec![-1, -1, 2, 1, -2]);
    }

    #[test]
    fn reversal_negates_and_reverses_letters() {
        let f = fractal();
        for word in [w(&[1, 2]), w(&[1, 2, -1, 2]), w(&[-2, 1, 1])] {
            let n = word.len();
            let axis = f.closed_geodesic(&word).unwrap();
            let fwd: Vec<i32> = factor_crossing_times(&f, (axis.repelling, axis.attracting), 200.0)
                .unwrap()
                .iter()
                .map(|c| c.1)
                .take(n)
                .collect();
            let rev: Vec<i32> = factor_crossing_times(&f, (axis.attracting, axis.repelling), 200.0)
                .unwrap()
                .iter()
                .map(|c| c.1)
                .take(n)
                .collect();
            let expected: Vec<i32> = fwd.iter().rev().map(|l| -l).collect();
            assert!((0..n).any(|k| {
                let mut r = rev.clone();
                r.rotate_left(k);
                r == expected
            }));
        }
    }

    #[test]
    fn tangency_is_rejected() {
        let f = fractal();
        let err = factor_crossing_times(&f, (BoundaryPoint::Finite(-5.0), BoundaryPoint::Finite(3.0)), 10.0).unwrap_err();
        assert!(matches!(err, Error::TangentCrossing { letter: 1, .. }));
    }

    #[test]
    fn first_return_on_primitive_flat() {
        let g = fractal_squared();
        let mut state = flat_from_words(&g, &[w(&[1]), w(&[1])]).unwrap();
        for _ in 0..10 {
            let r = first_return(&g, &state, 100.0).unwrap();
            assert!(r.t0.is_positive());
            for t in r.t0.iter() {
                assert!((t - len1()).abs() <= 1e-9);
            }
            assert_eq!(r.letter, MultiIndex(vec![-1, -1]));
            assert!(r.arclength_defect <= 1e-9);
            assert!(r.anchor_deviation <= 1e-12);
            state = r.next;
        }
    }

    #[test]
    fn period_length_identity() {
        let g = rank_one();
        let f = fractal();
        for n in 1..=4 {
            for word in f.primitive_classes(n) {
                let mut state = flat_from_words(&g, &[word.clone()]).unwrap();
                let mut total = 0.0;
                for _ in 0..n {
                    let r = first_return(&g, &state, 200.0).unwrap();
                    total += r.t0[0];
                    state = r.next;
                }
                let len = f.closed_geodesic(&word).unwrap().length;
                assert!((total - len).abs() <= 1e-8, "{word}: {total} vs {len}");
            }
        }
    }

    #[test]
    fn product_components_are_independent() {
        let g = fractal_squared();
        let g1 = rank_one();
        let mut p = flat_from_words(&g, &[w(&[1]), w(&[1, 2])]).unwrap();
        let mut a = flat_from_words(&g1, &[w(&[1])]).unwrap();
        let mut b = flat_from_words(&g1, &[w(&[1, 2])]).unwrap();
        for _ in 0..6 {
            let rp = first_return(&g, &p, 100.0).unwrap();
            let ra = first_return(&g1, &a, 100.0).unwrap();
            let rb = first_return(&g1, &b, 100.0).unwrap();
            assert_eq!(rp.t0.0, vec![ra.t0[0], rb.t0[0]]);
            assert_eq!(rp.letter.0, vec![ra.letter[0], rb.letter[0]]);
            p = rp.next;
            a = ra.next;
            b = rb.next;
        }
    }

    #[test]
    fn c1_c2_reports() {
        let g = fractal_squared();
        let r = check_c1_c2(&g, &[w(&[1]), w(&[1])], 10).unwrap();
        assert!(r.c1 && r.factorization_ok);
        for gap in r.gaps.unwrap() {
            assert_relative_eq!(gap, len1(), epsilon = 1e-9);
        }
        let r = check_c1_c2(&g, &[w(&[1, 2]), w(&[2, 1])], 10).unwrap();
        assert!(r.c1 && r.factorization_ok, "{r:?}");
        assert!(r.gaps.unwrap().iter().all(|&e| e > 1e-6));
        let r = check_c1_c2(&g, &[w(&[1]), w(&[2])], 0).unwrap();
        assert!(r.c1 && r.gaps.is_none());
    }

    #[test]
    fn semiconjugacy_on_periodic_flats() {
        let g = fractal_squared();
        let start = flat_from_words(&g, &[w(&[1]), w(&[1])]).unwrap();
        let rep = semiconjugacy_check(&g, &start, 10, 100.0).unwrap();
        assert!(rep.max_deviation <= 1e-8 && rep.letters_agree);
        let start = flat_from_words(&g, &[w(&[1, 2]), w(&[1, 2])]).unwrap();
        let rep = semiconjugacy_check(&g, &start, 12, 100.0).unwrap();
        assert!(rep.max_deviation <= 1e-8 && rep.letters_agree);
        let letters: Vec<i32> = rep.steps.iter().map(|s| s.flow_letter[0]).collect();
        assert_eq!(letters, [-1, -2].repeat(6));
        assert!(rep.code_prefix >= 8);
    }

    #[test]
    fn semiconjugacy_random_words() {
        let g = fractal_squared();
        let f = fractal();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pool: Vec<Word> = (1..=4).flat_map(|n| f.enumerate_words(n, true)).collect();
        for _ in 0..30 {
            let words = [pool[rng.gen_range(0..pool.len())].clone(), pool[rng.gen_range(0..pool.len())].clone()];
            let start = flat_from_words(&g, &words).unwrap();
            let rep = semiconjugacy_check(&g, &start, 20, default_horizon(&g, &words).unwrap()).unwrap();
            assert!(rep.max_deviation <= 1e-8, "{words:?}: {}", rep.max_deviation);
            assert!(rep.letters_agree);
        }
    }

    #[test]
    fn generic_flat_from_endpoints() {
        let g = rank_one();
        let f = fractal();
        let axis = f.closed_geodesic(&w(&[1, -2])).unwrap();
        let flat = FlatState::from_endpoints(&g, &[(axis.repelling, axis.attracting)], 100.0).unwrap();
        assert!(flat.factor(0).in_cross_section(&f));
        let err = FlatState::from_endpoints(&g, &[(BoundaryPoint::Finite(0.5), BoundaryPoint::Finite(0.7))], 100.0)
            .unwrap_err();
        assert_eq!(err, Error::NoFutureIntersection { factor: 1 });
    }

    #[test]
    fn non_limit_target_exhausts_returns() {
        let g = rank_one();
        let mut state =
            FlatState::from_endpoints(&g, &[(BoundaryPoint::Finite(4.0), BoundaryPoint::Finite(-2.0 + 0.01))], 100.0)
                .unwrap();
        let mut err = None;
        for _ in 0..50 {
            match first_return(&g, &state, 100.0) {
                Ok(r) => state = r.next,
                Err(e) => {
                    err = Some(e);
                    break;
                }
            }
        }
        assert_eq!(err, Some(Error::NoFutureIntersection { factor: 1 }));
    }

    #[test]
    fn chamber_maps_reference_points() {
        let g = fractal_squared();
        let flat = flat_from_words(&g, &[w(&[1, 2]), w(&[-2])]).unwrap();
        for s in flat.factors() {
            let h = s.chamber();
            assert!(h.boundary_apply(BoundaryPoint::Finite(0.0)).chordal_distance(s.backward()) < 1e-12);
            assert!(h.boundary_apply(BoundaryPoint::Infinity).chordal_distance(s.forward()) < 1e-12);
            let z = h.plane_apply(Complex64::i()).unwrap();
            assert!((z - s.base_point()).norm() < 1e-12);
        }
    }
}
