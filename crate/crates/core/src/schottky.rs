//! Schottky factors built from real-centered disks, their words, limit-set
//! covers and closed geodesics, and rank-r product groups.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::moebius::{BoundaryPoint, IsometryClass, MoebiusTransform};

/// A closed disk in ℂ centered on the real axis, labelled by a signed index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disk {
    pub center: f64,
    pub radius: f64,
    pub index: i32,
}

impl Disk {
    pub fn new(index: i32, center: f64, radius: f64) -> Result<Self> {
        if index == 0 {
            return Err(Error::InvalidDisk { index, reason: "index must be nonzero".into() });
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidDisk { index, reason: format!("radius must be positive, got {radius}") });
        }
        if !center.is_finite() {
            return Err(Error::InvalidDisk { index, reason: "center must be finite".into() });
        }
        Ok(Disk { center, radius, index })
    }

    /// The diameter `[c − r, c + r]` on the real line.
    pub fn diameter(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }

    /// Diameter shrunk about the center by `rho ∈ (0, 1]`.
    pub fn shrunk_diameter(&self, rho: f64) -> (f64, f64) {
        (self.center - rho * self.radius, self.center + rho * self.radius)
    }

    pub fn contains_open(&self, x: f64) -> bool {
        (x - self.center).abs() < self.radius
    }

    /// Euclidean gap between two disks; negative when they overlap.
    pub fn gap(&self, other: &Disk) -> f64 {
        (self.center - other.center).abs() - self.radius - other.radius
    }
}

/// A reduced word over the signed alphabet `±1..±q`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    letters: Vec<i32>,
    cyclic: bool,
}

impl Word {
    /// Checks reducedness (`ℓ_{i+1} ≠ −ℓ_i`, and `ℓ_1 ≠ −ℓ_n` when cyclic).
    pub fn new(letters: Vec<i32>, cyclic: bool) -> Result<Self> {
        if let Some(i) = letters.iter().position(|&l| l == 0) {
            return Err(Error::NonReducedWord { position: i });
        }
        if let Some(i) = letters.windows(2).position(|w| w[1] == -w[0]) {
            return Err(Error::NonReducedWord { position: i + 1 });
        }
        if cyclic && letters.len() > 1 && letters[0] == -letters[letters.len() - 1] {
            return Err(Error::NonReducedWord { position: 0 });
        }
        Ok(Word { letters, cyclic })
    }

    pub fn empty() -> Self {
        Word { letters: Vec::new(), cyclic: false }
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_cyclic(&self) -> bool {
        self.cyclic
    }

    /// Moves the first `k` letters to the end.
    pub fn rotated(&self, k: usize) -> Word {
        let mut letters = self.letters.clone();
        if !letters.is_empty() {
            let k = k % letters.len();
            letters.rotate_left(k);
        }
        Word { letters, cyclic: self.cyclic }
    }

    /// The inverse word: reversed, letters negated.
    pub fn inverse(&self) -> Word {
        Word { letters: self.letters.iter().rev().map(|l| -l).collect(), cyclic: self.cyclic }
    }

    /// Smallest `p` dividing the length with `w` equal to its rotation by `p`.
    pub fn primitive_period(&self) -> usize {
        let n = self.letters.len();
        (1..=n)
            .filter(|p| n % p == 0)
            .find(|&p| (0..n).all(|i| self.letters[i] == self.letters[(i + p) % n]))
            .unwrap_or(n)
    }

    pub fn is_primitive(&self) -> bool {
        self.primitive_period() == self.letters.len()
    }
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.letters.iter().map(|l| l.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Position of a letter in the ascending order `−q, …, −1, 1, …, q`.
pub(crate) fn letter_slot(q: usize, letter: i32) -> Option<usize> {
    let q = q as i32;
    match letter {
        l if (-q..0).contains(&l) => Some((l + q) as usize),
        l if (1..=q).contains(&l) => Some((l + q - 1) as usize),
        _ => None,
    }
}

/// One rank-one Schottky group: `2q` disjoint disks and their pairing maps.
#[derive(Clone, Debug)]
pub struct SchottkyFactor {
    q: usize,
    letters: Vec<i32>,
    disks: Vec<Disk>,
    generators: Vec<MoebiusTransform>,
}

/// Result of [`SchottkyFactor::validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    /// `max ||g_k(z) − c_{−k}| − r_{−k}|` over sampled `z ∈ ∂𝒟_k`.
    pub pairing_defect: f64,
    /// `max_k ‖g_k ∘ g_{−k} − id‖_max`.
    pub inverse_defect: f64,
    /// Smallest Euclidean gap between two disks.
    pub min_gap: f64,
    /// Whether `g_k(∞)` lies inside `𝒟_{−k}` for every `k`.
    pub exterior_to_interior: bool,
    pub passed: bool,
}

pub const VALIDATION_TOL: f64 = 1e-10;

/// Relative slack for cover membership of floating-point points.
pub const COVER_SLACK: f64 = 1e-11;

/// The canonical pairing `g_k(z) = c_{−k} + r_k r_{−k} / (c_k − z)`.
fn canonical_generator(from: &Disk, to: &Disk) -> MoebiusTransform {
    let (ck, cm) = (from.center, to.center);
    let prod = from.radius * to.radius;
    MoebiusTransform::new(-cm, cm * ck + prod, -1.0, ck).expect("determinant r_k r_{-k} > 0")
}

impl SchottkyFactor {
    /// Builds the factor with the canonical pairing generators.
    pub fn from_disks(disks: Vec<Disk>) -> Result<Self> {
        Self::build(disks, &[])
    }

    /// Builds the factor with explicit generators `g_k` for some `k > 0`; the
    /// remaining ones are canonical. Every explicit generator must map `∂𝒟_k`
    /// onto `∂𝒟_{−k}` and the exterior of `𝒟_k` into `𝒟_{−k}`.
    pub fn with_generators(disks: Vec<Disk>, explicit: &[(i32, MoebiusTransform)]) -> Result<Self> {
        Self::build(disks, explicit)
    }

    fn build(disks: Vec<Disk>, explicit: &[(i32, MoebiusTransform)]) -> Result<Self> {
        if disks.is_empty() || disks.len() % 2 != 0 {
            return Err(Error::IndexSet(format!("need an even, positive number of disks, got {}", disks.len())));
        }
        let q = disks.len() / 2;
        let mut slots: Vec<Option<Disk>> = vec![None; 2 * q];
        for d in &disks {
            let d = Disk::new(d.index, d.center, d.radius)?;
            let slot = letter_slot(q, d.index)
                .ok_or_else(|| Error::IndexSet(format!("index {} out of range for q = {q}", d.index)))?;
            if slots[slot].is_some() {
                return Err(Error::IndexSet(format!("duplicate index {}", d.index)));
            }
            slots[slot] = Some(d);
        }
        let disks: Vec<Disk> = slots.into_iter().map(|d| d.expect("all slots filled")).collect();
        for (i, a) in disks.iter().enumerate() {
            for b in &disks[i + 1..] {
                let gap = a.gap(b);
                if !(gap > 0.0) {
                    return Err(Error::OverlappingDisks { first: a.index, second: b.index, gap });
                }
            }
        }
        let letters: Vec<i32> = disks.iter().map(|d| d.index).collect();
        let mut generators = vec![MoebiusTransform::IDENTITY; 2 * q];
        for k in 1..=q as i32 {
            let from = disks[letter_slot(q, k).unwrap()];
            let to = disks[letter_slot(q, -k).unwrap()];
            let g = match explicit.iter().find(|(i, _)| *i == k) {
                Some((_, g)) => {
                    let defect = circle_pairing_defect(g, &from, &to, 64);
                    let inside = g
                        .boundary_apply(BoundaryPoint::Infinity)
                        .finite()
                        .map_or(false, |x| to.contains_open(x));
                    if defect > 1e-8 || !inside {
                        return Err(Error::GeneratorMismatch { index: k, defect });
                    }
                    *g
                }
                None => canonical_generator(&from, &to),
            };
            generators[letter_slot(q, k).unwrap()] = g;
            generators[letter_slot(q, -k).unwrap()] = g.inverse();
        }
        if let Some((i, _)) = explicit.iter().find(|(i, _)| *i <= 0 || *i > q as i32) {
            return Err(Error::IndexSet(format!("explicit generator index {i} must be in 1..={q}")));
        }
        Ok(SchottkyFactor { q, letters, disks, generators })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// The alphabet in ascending order `−q, …, −1, 1, …, q`.
    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn alphabet_size(&self) -> usize {
        2 * self.q
    }

    pub fn slot(&self, letter: i32) -> Result<usize> {
        letter_slot(self.q, letter).ok_or(Error::UnknownLetter(letter))
    }

    pub fn disk(&self, letter: i32) -> &Disk {
        &self.disks[letter_slot(self.q, letter).expect("valid letter")]
    }

    pub fn disks(&self) -> &[Disk] {
        &self.disks
    }

    pub fn generator(&self, letter: i32) -> &MoebiusTransform {
        &self.generators[letter_slot(self.q, letter).expect("valid letter")]
    }

    /// The inverse branch `g_ℓ^{−1} = g_{−ℓ}`.
    pub fn inverse_branch(&self, letter: i32) -> &MoebiusTransform {
        self.generator(-letter)
    }

    /// Letter of the disk whose open diameter contains `x`.
    pub fn disk_containing(&self, x: f64) -> Option<i32> {
        self.disks.iter().find(|d| d.contains_open(x)).map(|d| d.index)
    }

    pub fn min_gap(&self) -> f64 {
        let mut gap = f64::INFINITY;
        for (i, a) in self.disks.iter().enumerate() {
            for b in &self.disks[i + 1..] {
                gap = gap.min(a.gap(b));
            }
        }
        gap
    }

    pub fn validate(&self, samples: usize) -> ValidationReport {
        let mut pairing_defect: f64 = 0.0;
        let mut inverse_defect: f64 = 0.0;
        let mut exterior_to_interior = true;
        for &k in &self.letters {
            let g = self.generator(k);
            pairing_defect = pairing_defect.max(circle_pairing_defect(g, self.disk(k), self.disk(-k), samples));
            inverse_defect = inverse_defect.max(g.compose(self.generator(-k)).distance(&MoebiusTransform::IDENTITY));
            exterior_to_interior &= g
                .boundary_apply(BoundaryPoint::Infinity)
                .finite()
                .map_or(false, |x| self.disk(-k).contains_open(x));
        }
        let min_gap = self.min_gap();
        let passed =
            pairing_defect <= VALIDATION_TOL && inverse_defect <= VALIDATION_TOL && min_gap > 0.0 && exterior_to_interior;
        ValidationReport { pairing_defect, inverse_defect, min_gap, exterior_to_interior, passed }
    }

    fn check_letters(&self, w: &Word) -> Result<()> {
        for &l in w.letters() {
            self.slot(l)?;
        }
        Ok(())
    }

    /// `g_{ℓ_1} ∘ g_{ℓ_2} ∘ ⋯ ∘ g_{ℓ_n}`.
    pub fn word_isometry(&self, w: &Word) -> Result<MoebiusTransform> {
        self.check_letters(w)?;
        Ok(w.letters().iter().fold(MoebiusTransform::IDENTITY, |acc, &l| acc.compose(self.generator(l))))
    }

    /// Composite inverse branch `g_{ℓ_1}^{−1} ∘ ⋯ ∘ g_{ℓ_n}^{−1}`.
    pub fn inverse_branch_word(&self, letters: &[i32]) -> MoebiusTransform {
        letters.iter().fold(MoebiusTransform::IDENTITY, |acc, &l| acc.compose(self.inverse_branch(l)))
    }

    /// Admissible successors of `prev` (every letter except `−prev`).
    pub fn successors(&self, prev: i32) -> impl Iterator<Item = i32> + '_ {
        self.letters.iter().copied().filter(move |&l| l != -prev)
    }

    /// All reduced words of length `n`, lexicographic in the letter order. With
    /// `cyclic`, only cyclically reduced words are kept.
    pub fn enumerate_words(&self, n: usize, cyclic: bool) -> Vec<Word> {
        let mut out = Vec::new();
        if n == 0 {
            return out;
        }
        let mut buf = Vec::with_capacity(n);
        self.extend_words(n, cyclic, &mut buf, &mut out);
        out
    }

    fn extend_words(&self, n: usize, cyclic: bool, buf: &mut Vec<i32>, out: &mut Vec<Word>) {
        if buf.len() == n {
            if !cyclic || n == 1 || buf[0] != -buf[n - 1] {
                out.push(Word { letters: buf.clone(), cyclic });
            }
            return;
        }
        for &l in &self.letters {
            if buf.last().map_or(true, |&p| l != -p) {
                buf.push(l);
                self.extend_words(n, cyclic, buf, out);
                buf.pop();
            }
        }
    }

    /// One representative (the lexicographically least rotation) of every
    /// primitive cyclically reduced word of length `n`.
    pub fn primitive_classes(&self, n: usize) -> Vec<Word> {
        let order = |l: i32| letter_slot(self.q, l).unwrap();
        self.enumerate_words(n, true)
            .into_iter()
            .filter(|w| {
                let key: Vec<usize> = w.letters().iter().map(|&l| order(l)).collect();
                w.is_primitive()
                    && (1..n).all(|r| {
                        let rot: Vec<usize> = (0..n).map(|i| key[(i + r) % n]).collect();
                        key < rot
                    })
            })
            .collect()
    }

    /// Cover intervals of depth `n`:
    /// `Δ_w = g_{ℓ_1}^{−1}(⋯ g_{ℓ_{n−1}}^{−1}(diam 𝒟_{ℓ_n}))` for every reduced `w`.
    pub fn limit_cover(&self, depth: usize) -> Result<Vec<(Word, (f64, f64))>> {
        if depth == 0 {
            return Err(Error::InvalidArgument("cover depth must be at least 1".into()));
        }
        let mut out = Vec::with_capacity(2 * self.q * (2 * self.q - 1).pow(depth as u32 - 1));
        let mut buf = Vec::with_capacity(depth);
        for &l in &self.letters {
            buf.push(l);
            self.extend_cover(depth, &MoebiusTransform::IDENTITY, &mut buf, &mut out)?;
            buf.pop();
        }
        Ok(out)
    }

    fn extend_cover(
        &self,
        depth: usize,
        map: &MoebiusTransform,
        buf: &mut Vec<i32>,
        out: &mut Vec<(Word, (f64, f64))>,
    ) -> Result<()> {
        let last = *buf.last().unwrap();
        if buf.len() == depth {
            let iv = image_interval(map, self.disk(last).diameter())?;
            out.push((Word { letters: buf.clone(), cyclic: false }, iv));
            return Ok(());
        }
        let next_map = map.compose(self.inverse_branch(last));
        for l in self.successors(last).collect::<Vec<_>>() {
            buf.push(l);
            self.extend_cover(depth, &next_map, buf, out)?;
            buf.pop();
        }
        Ok(())
    }

    /// Address of `x` in the depth-`depth` cover (the word whose interval
    /// contains `x`), found by descending the nested intervals. Intervals are
    /// widened by [`COVER_SLACK`] relative to `max(1, |x|)`: deep intervals
    /// can be narrower than the spacing of doubles, and membership below that
    /// scale is decided by the nearest interval.
    pub fn cover_address(&self, x: f64, depth: usize) -> Option<Vec<i32>> {
        let tol = COVER_SLACK * x.abs().max(1.0);
        self.descend(x, tol, |len, _| len >= depth).map(|(addr, _)| addr)
    }

    /// Moves `x` onto the cover: descends the nested intervals, taking the
    /// child containing `x` when there is one and the nearest child otherwise,
    /// until the interval is narrower than `width` (or `max_depth` is reached),
    /// and returns that interval's midpoint with its address.
    pub fn snap_to_cover(&self, x: f64, width: f64, max_depth: usize) -> Option<(f64, Vec<i32>)> {
        self.descend(x, f64::INFINITY, |len, (lo, hi)| hi - lo <= width || len >= max_depth)
            .map(|(addr, (lo, hi))| (0.5 * (lo + hi), addr))
    }

    fn descend(
        &self,
        x: f64,
        tol: f64,
        done: impl Fn(usize, (f64, f64)) -> bool,
    ) -> Option<(Vec<i32>, (f64, f64))> {
        let dist = |(lo, hi): (f64, f64)| if x < lo { lo - x } else if x > hi { x - hi } else { 0.0 };
        let nearest = |cands: &mut dyn Iterator<Item = (i32, (f64, f64))>| {
            cands.min_by(|a, b| dist(a.1).total_cmp(&dist(b.1))).filter(|(_, iv)| dist(*iv) <= tol)
        };
        let (first, mut interval) = nearest(&mut self.disks.iter().map(|d| (d.index, d.diameter())))?;
        let mut address = vec![first];
        let mut map = MoebiusTransform::IDENTITY;
        while !done(address.len(), interval) {
            let last = *address.last().unwrap();
            let next_map = map.compose(self.inverse_branch(last));
            let (l, iv) = nearest(
                &mut self
                    .successors(last)
                    .filter_map(|l| image_interval(&next_map, self.disk(l).diameter()).ok().map(|iv| (l, iv))),
            )?;
            address.push(l);
            interval = iv;
            map = next_map;
        }
        Some((address, interval))
    }

    pub fn closed_geodesic(&self, w: &Word) -> Result<ClosedGeodesic> {
        if w.is_empty() {
            return Err(Error::InvalidArgument("closed geodesic needs a nonempty word".into()));
        }
        let cyclic = Word::new(w.letters().to_vec(), true)?;
        let g = self.word_isometry(&cyclic)?;
        let cl = g.classify().map_err(|_| Error::NonHyperbolic)?;
        if cl.class != IsometryClass::Hyperbolic {
            return Err(Error::NonHyperbolic);
        }
        let (repelling, attracting) = cl.fixed_points.unwrap();
        Ok(ClosedGeodesic { repelling, attracting, length: cl.translation_length.unwrap() })
    }
}

/// Axis of a hyperbolic word element, oriented from its repelling to its
/// attracting fixed point. For canonical generators the attracting endpoint
/// lies in `𝒟_{−ℓ_1}` and the repelling one in `𝒟_{ℓ_n}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedGeodesic {
    pub repelling: BoundaryPoint,
    pub attracting: BoundaryPoint,
    pub length: f64,
}

/// Image of `[lo, hi]` under a real Möbius map whose pole lies outside it.
pub(crate) fn image_interval(map: &MoebiusTransform, (lo, hi): (f64, f64)) -> Result<(f64, f64)> {
    if let BoundaryPoint::Finite(p) = map.pole() {
        if lo <= p && p <= hi {
            return Err(Error::PoleInInterval { lo, hi });
        }
    }
    let a = map.apply_real(lo).ok_or(Error::PoleInInterval { lo, hi })?;
    let b = map.apply_real(hi).ok_or(Error::PoleInInterval { lo, hi })?;
    debug_assert!(a <= b, "orientation-preserving branch must keep interval order: {map} [{lo}, {hi}] -> [{a}, {b}]");
    Ok((a.min(b), a.max(b)))
}

fn circle_pairing_defect(g: &MoebiusTransform, from: &Disk, to: &Disk, samples: usize) -> f64 {
    use num_complex::Complex64;
    let samples = samples.max(1);
    (0..samples)
        .map(|i| {
            // Upper semicircle, avoiding the real axis.
            let theta = std::f64::consts::PI * (i as f64 + 0.5) / samples as f64;
            let z = Complex64::new(from.center, 0.0) + Complex64::from_polar(from.radius, theta);
            let w = g.apply_complex(z);
            ((w - to.center).norm() - to.radius).abs()
        })
        .fold(0.0, f64::max)
}

/// The rank-r group `Γ₁ × ⋯ × Γ_r`.
#[derive(Clone, Debug)]
pub struct ProductGroup {
    factors: Vec<SchottkyFactor>,
}

impl ProductGroup {
    pub fn new(factors: Vec<SchottkyFactor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("product group needs at least one factor".into()));
        }
        Ok(ProductGroup { factors })
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[SchottkyFactor] {
        &self.factors
    }

    pub fn factor(&self, j: usize) -> &SchottkyFactor {
        &self.factors[j]
    }

    /// All multi-indices in lexicographic order of `(m_1, …, m_r)`.
    pub fn multi_indices(&self) -> Vec<Vec<i32>> {
        let mut out: Vec<Vec<i32>> = vec![Vec::new()];
        for f in &self.factors {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    f.letters().iter().map(move |&l| {
                        let mut m = prefix.clone();
                        m.push(l);
                        m
                    })
                })
                .collect();
        }
        out
    }

    /// Indices of multi-indices in the lexicographic order, for set-valued results.
    pub fn multi_index_set(&self) -> BTreeSet<Vec<i32>> {
        self.multi_indices().into_iter().collect()
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use approx::assert_relative_eq;

    fn mt(a: f64, b: f64, c: f64, d: f64) -> MoebiusTransform {
        MoebiusTransform::new(a, b, c, d).unwrap()
    }

    #[test]
    fn canonical_generators_of_fixture() {
        let f = fractal();
        assert!(f.generator(1).approx_eq(&mt(2.0, 13.0, -1.0, -6.0), 1e-14));
        assert!(f.generator(2).approx_eq(&mt(-6.0, 13.0, -1.0, 2.0), 1e-14));
        assert!(f.generator(-1).approx_eq(&f.generator(1).inverse(), 0.0));
        assert_eq!(f.generator(1).apply_real(-5.0), Some(-3.0));
        assert_eq!(((-3.0f64) - (-2.0)).abs(), f.disk(-1).radius);
        assert_eq!(f.letters(), &[-2, -1, 1, 2]);
    }

    #[test]
    fn validation_of_fixture() {
        let report = fractal().validate(64);
        assert!(report.passed);
        assert!(report.pairing_defect <= 1e-12, "{}", report.pairing_defect);
        assert!(report.inverse_defect <= 1e-14);
        assert_eq!(report.min_gap, 2.0);
        assert!(report.exterior_to_interior);
    }

    #[test]
    fn recentered_disk_still_valid() {
        let f = disks_at(&[(1, -6.0, 1.0), (-1, -2.0, 1.0), (2, 2.8, 1.0), (-2, 6.0, 1.0)]);
        let report = f.validate(64);
        assert!(report.passed);
        assert!(report.pairing_defect <= 1e-12);
        assert_relative_eq!(report.min_gap, 1.2, epsilon = 1e-12);
    }

    #[test]
    fn build_errors() {
        let d = |i, c, r| Disk { index: i, center: c, radius: r };
        let overlap = SchottkyFactor::from_disks(vec![d(1, -6.0, 3.0), d(-1, -2.0, 1.0), d(2, 2.0, 1.0), d(-2, 6.0, 1.0)]);
        assert!(matches!(overlap, Err(Error::OverlappingDisks { .. })));
        let dup = SchottkyFactor::from_disks(vec![d(1, -6.0, 1.0), d(1, -2.0, 1.0), d(2, 2.0, 1.0), d(-2, 6.0, 1.0)]);
        assert!(matches!(dup, Err(Error::IndexSet(_))));
        let missing = SchottkyFactor::from_disks(vec![d(1, -6.0, 1.0), d(3, -2.0, 1.0)]);
        assert!(matches!(missing, Err(Error::IndexSet(_))));
        let neg = SchottkyFactor::from_disks(vec![d(1, -6.0, -1.0), d(-1, -2.0, 1.0)]);
        assert!(matches!(neg, Err(Error::InvalidDisk { index: 1, .. })));
        let odd = SchottkyFactor::from_disks(vec![d(1, -6.0, 1.0)]);
        assert!(odd.is_err());
    }

    #[test]
    fn explicit_generators_are_checked() {
        let disks = fractal().disks().to_vec();
        let g1 = mt(2.0, 13.0, -1.0, -6.0);
        let f = SchottkyFactor::with_generators(disks.clone(), &[(1, g1)]).unwrap();
        assert!(f.validate(64).passed);
        // Swapping the direction (maps 𝒟_{−1} to 𝒟_1) is rejected.
        let bad = SchottkyFactor::with_generators(disks.clone(), &[(1, g1.inverse())]);
        assert!(matches!(bad, Err(Error::GeneratorMismatch { index: 1, .. })));
        let bad = SchottkyFactor::with_generators(disks, &[(1, MoebiusTransform::diagonal(1.0))]);
        assert!(bad.is_err());
    }

    #[test]
    fn word_isometries() {
        let f = fractal();
        assert_eq!(f.word_isometry(&Word::empty()).unwrap(), MoebiusTransform::IDENTITY);
        let w = Word::new(vec![1], false).unwrap();
        assert!(f.word_isometry(&w).unwrap().approx_eq(&mt(2.0, 13.0, -1.0, -6.0), 1e-14));
        let w = Word::new(vec![1, 2], false).unwrap();
        let g = f.word_isometry(&w).unwrap();
        assert!(g.approx_eq(&mt(-25.0, 52.0, 12.0, -25.0), 1e-12));
        assert_relative_eq!(g.trace().abs(), 50.0, epsilon = 1e-12);
        assert!(matches!(Word::new(vec![1, -1], false), Err(Error::NonReducedWord { position: 1 })));
        assert!(f.word_isometry(&Word::new(vec![3], false).unwrap()).is_err());
    }

    #[test]
    fn inverse_pairing_is_exact() {
        let f = fractal();
        for &k in f.letters() {
            let gk = f.word_isometry(&Word::new(vec![k], false).unwrap()).unwrap();
            let gmk = f.word_isometry(&Word::new(vec![-k], false).unwrap()).unwrap();
            assert!(gk.compose(&gmk).distance(&MoebiusTransform::IDENTITY) <= 1e-14);
        }
    }

    #[test]
    fn depth_one_and_two_cover() {
        let f = fractal();
        let cover = f.limit_cover(1).unwrap();
        let mut ivs: Vec<(f64, f64)> = cover.iter().map(|(_, iv)| *iv).collect();
        ivs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(ivs, vec![(-7.0, -5.0), (-3.0, -1.0), (1.0, 3.0), (5.0, 7.0)]);
        let cover = f.limit_cover(2).unwrap();
        let (_, iv) = cover.iter().find(|(w, _)| w.letters() == [1, 2]).unwrap();
        assert_relative_eq!(iv.0, -19.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(iv.1, -31.0 / 5.0, epsilon = 1e-14);
    }

    /// Brute-force check of counts, disjointness and nesting.
    #[test]
    fn cover_nesting_depth_three() {
        let f = fractal();
        let c2 = f.limit_cover(2).unwrap();
        let c3 = f.limit_cover(3).unwrap();
        assert_eq!(c3.len(), 36);
        let mut sorted: Vec<(f64, f64)> = c3.iter().map(|(_, iv)| *iv).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(sorted.windows(2).all(|p| p[0].1 < p[1].0));
        for (w, iv) in &c3 {
            let (_, parent) = c2.iter().find(|(p, _)| p.letters() == &w.letters()[..2]).unwrap();
            assert!(parent.0 < iv.0 && iv.1 < parent.1);
        }
        let total = |c: &[(Word, (f64, f64))]| c.iter().map(|(_, iv)| iv.1 - iv.0).sum::<f64>();
        assert!(total(&c3) < total(&c2));
    }

    #[test]
    fn word_counts_match_brute_force() {
        let f = fractal();
        for n in 1..=8usize {
            let words = f.enumerate_words(n, false);
            assert_eq!(words.len(), 4 * 3usize.pow(n as u32 - 1));
            // Brute force over all 4^n sequences.
            let letters = f.letters();
            let mut reduced = 0;
            let mut cyclic = 0;
            for code in 0..4usize.pow(n as u32) {
                let seq: Vec<i32> = (0..n).map(|i| letters[(code / 4usize.pow(i as u32)) % 4]).collect();
                if seq.windows(2).all(|w| w[1] != -w[0]) {
                    reduced += 1;
                    if n == 1 || seq[0] != -seq[n - 1] {
                        cyclic += 1;
                    }
                }
            }
            assert_eq!(words.len(), reduced);
            assert_eq!(f.enumerate_words(n, true).len(), cyclic);
        }
        assert_eq!(f.enumerate_words(1, false).len(), 4);
        assert_eq!(f.enumerate_words(2, true).len(), 12);
    }

    #[test]
    fn primitive_classes_partition_cyclic_words() {
        // Every cyclic word of length n is a rotation of a power of exactly one
        // primitive class of length dividing n.
        let f = fractal();
        for n in 1..=6 {
            let total: usize = (1..=n).filter(|d| n % d == 0).map(|d| d * f.primitive_classes(d).len()).sum();
            assert_eq!(total, f.enumerate_words(n, true).len(), "n = {n}");
        }
        assert_eq!(f.primitive_classes(1).len(), 4);
    }

    #[test]
    fn closed_geodesics() {
        let f = fractal();
        let g = f.closed_geodesic(&Word::new(vec![1], true).unwrap()).unwrap();
        assert_relative_eq!(g.repelling.finite().unwrap(), -4.0 - 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(g.attracting.finite().unwrap(), -4.0 + 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(g.length, 2.0 * 2f64.acosh(), epsilon = 1e-14);
        let a = f.closed_geodesic(&Word::new(vec![1, 2], true).unwrap()).unwrap();
        let b = f.closed_geodesic(&Word::new(vec![2, 1], true).unwrap()).unwrap();
        assert_relative_eq!(a.length, 2.0 * 25f64.acosh(), epsilon = 1e-12);
        assert_relative_eq!(a.length, b.length, epsilon = 1e-12);
        assert!(f.closed_geodesic(&Word::empty()).is_err());
    }

    #[test]
    fn attracting_endpoint_in_inverse_first_disk() {
        let f = fractal();
        for n in 1..=4 {
            for w in f.enumerate_words(n, true) {
                let g = f.closed_geodesic(&w).unwrap();
                let first = w.letters()[0];
                let last = *w.letters().last().unwrap();
                assert!(f.disk(-first).contains_open(g.attracting.finite().unwrap()));
                assert!(f.disk(last).contains_open(g.repelling.finite().unwrap()));
                // Fixed points sit inside the cover interval of the periodic code.
                let code: Vec<i32> = (0..8).map(|i| -w.letters()[i % n]).collect();
                assert_eq!(f.cover_address(g.attracting.finite().unwrap(), 8).unwrap(), code);
                assert!(f.cover_address(g.attracting.finite().unwrap(), 12).is_some());
            }
        }
    }

    #[test]
    fn cover_address_agrees_with_enumeration() {
        let f = fractal();
        for (w, (lo, hi)) in f.limit_cover(4).unwrap() {
            let mid = 0.5 * (lo + hi);
            assert_eq!(f.cover_address(mid, 4).unwrap(), w.letters());
        }
        assert_eq!(f.cover_address(0.0, 3), None);
    }

    #[test]
    fn snapping_stays_close() {
        let f = fractal();
        let x = -4.0 + 3f64.sqrt();
        let (y, addr) = f.snap_to_cover(x, 1e-13, 64).unwrap();
        assert!((x - y).abs() < 1e-13);
        assert!(addr.iter().all(|&l| l == -1));
    }

    #[test]
    fn product_multi_indices() {
        let g = fractal_squared();
        let m = g.multi_indices();
        assert_eq!(m.len(), 16);
        assert_eq!(m[0], vec![-2, -2]);
        assert_eq!(m[1], vec![-2, -1]);
        assert!(ProductGroup::new(vec![]).is_err());
    }
}
