//! Real Möbius transformations (elements of PSL₂(ℝ)) and their action on the
//! upper half-plane and on the boundary circle ℝ ∪ {∞}.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A point of the projective line ℝ ∪ {∞}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryPoint {
    Finite(f64),
    Infinity,
}

impl BoundaryPoint {
    pub fn finite(self) -> Option<f64> {
        match self {
            BoundaryPoint::Finite(x) => Some(x),
            BoundaryPoint::Infinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, BoundaryPoint::Infinity)
    }

    /// Chordal distance `2|x−y| / (√(1+x²)√(1+y²))`, extended to ∞.
    pub fn chordal_distance(self, other: BoundaryPoint) -> f64 {
        match (self, other) {
            (BoundaryPoint::Infinity, BoundaryPoint::Infinity) => 0.0,
            (BoundaryPoint::Finite(x), BoundaryPoint::Infinity)
            | (BoundaryPoint::Infinity, BoundaryPoint::Finite(x)) => 2.0 / (1.0 + x * x).sqrt(),
            (BoundaryPoint::Finite(x), BoundaryPoint::Finite(y)) => {
                2.0 * (x - y).abs() / ((1.0 + x * x).sqrt() * (1.0 + y * y).sqrt())
            }
        }
    }
}

impl From<f64> for BoundaryPoint {
    fn from(x: f64) -> Self {
        BoundaryPoint::Finite(x)
    }
}

impl fmt::Display for BoundaryPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryPoint::Finite(x) => write!(f, "{x}"),
            BoundaryPoint::Infinity => f.write_str("inf"),
        }
    }
}

/// Conjugacy type of a nontrivial element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IsometryClass {
    Elliptic,
    Parabolic,
    Hyperbolic,
}

/// Classification result. `fixed_points` is `(repelling, attracting)` and,
/// together with `translation_length`, only present for hyperbolic elements.
#[derive(Clone, Copy, Debug)]
pub struct Classification {
    pub class: IsometryClass,
    pub fixed_points: Option<(BoundaryPoint, BoundaryPoint)>,
    pub translation_length: Option<f64>,
}

/// An element of PSL₂(ℝ), stored as a unimodular matrix `[[a, b], [c, d]]`
/// whose first nonzero coefficient is positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoebiusTransform {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

const PARABOLIC_TOL: f64 = 1e-12;

impl MoebiusTransform {
    pub const IDENTITY: MoebiusTransform = MoebiusTransform { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    /// Normalizes `[[a, b], [c, d]]` into SL₂ by dividing by √det and fixes
    /// the PSL₂ sign. Rejects non-finite entries and det ≤ 0.
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det > 0.0) || ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::NonPositiveDeterminant(det));
        }
        let s = det.sqrt();
        Ok(Self::canonical(a / s, b / s, c / s, d / s))
    }

    pub fn from_rows(m: [[f64; 2]; 2]) -> Result<Self> {
        Self::new(m[0][0], m[0][1], m[1][0], m[1][1])
    }

    fn canonical(a: f64, b: f64, c: f64, d: f64) -> Self {
        let lead = [a, b, c, d].into_iter().find(|v| *v != 0.0).unwrap_or(1.0);
        if lead < 0.0 {
            MoebiusTransform { a: -a, b: -b, c: -c, d: -d }
        } else {
            MoebiusTransform { a, b, c, d }
        }
    }

    /// The diagonal element `a_t = diag(e^{t/2}, e^{−t/2})`, acting by `z ↦ e^t z`.
    pub fn diagonal(t: f64) -> Self {
        let h = (0.5 * t).exp();
        MoebiusTransform { a: h, b: 0.0, c: 0.0, d: 1.0 / h }
    }

    pub fn rotation(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self::canonical(c, -s, s, c)
    }

    pub fn coefficients(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn rows(&self) -> [[f64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub fn determinant(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn compose(&self, h: &MoebiusTransform) -> MoebiusTransform {
        let (g, h) = (self, h);
        let a = g.a * h.a + g.b * h.c;
        let b = g.a * h.b + g.b * h.d;
        let c = g.c * h.a + g.d * h.c;
        let d = g.c * h.b + g.d * h.d;
        // No renormalization: for long words `ad − bc` cancels catastrophically.
        Self::canonical(a, b, c, d)
    }

    pub fn inverse(&self) -> MoebiusTransform {
        Self::canonical(self.d, -self.b, -self.c, self.a)
    }

    /// Largest coefficient difference to `other`, minimized over the PSL₂ sign.
    pub fn distance(&self, other: &MoebiusTransform) -> f64 {
        let p = self.coefficients();
        let q = other.coefficients();
        let plus = p.iter().zip(&q).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let minus = p.iter().zip(&q).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
        plus.min(minus)
    }

    pub fn approx_eq(&self, other: &MoebiusTransform, tol: f64) -> bool {
        self.distance(other) <= tol
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.approx_eq(&Self::IDENTITY, tol)
    }

    /// The pole `−d/c` of the boundary action, if finite.
    pub fn pole(&self) -> BoundaryPoint {
        if self.c == 0.0 {
            BoundaryPoint::Infinity
        } else {
            BoundaryPoint::Finite(-self.d / self.c)
        }
    }

    pub fn boundary_apply(&self, x: BoundaryPoint) -> BoundaryPoint {
        match x {
            BoundaryPoint::Infinity => {
                if self.c == 0.0 {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::Finite(self.a / self.c)
                }
            }
            BoundaryPoint::Finite(x) => {
                let den = self.c * x + self.d;
                if den == 0.0 {
                    BoundaryPoint::Infinity
                } else {
                    BoundaryPoint::Finite((self.a * x + self.b) / den)
                }
            }
        }
    }

    /// Boundary action on a finite point; `None` exactly at the pole.
    pub fn apply_real(&self, x: f64) -> Option<f64> {
        self.boundary_apply(BoundaryPoint::Finite(x)).finite()
    }

    pub fn plane_apply(&self, z: Complex64) -> Result<Complex64> {
        if !(z.im > 0.0) {
            return Err(Error::NotInUpperHalfPlane(z.im));
        }
        Ok(self.apply_complex(z))
    }

    /// Fractional linear action on any complex point off the pole.
    pub(crate) fn apply_complex(&self, z: Complex64) -> Complex64 {
        (z * self.a + self.b) / (z * self.c + self.d)
    }

    /// `d/dx (ax+b)/(cx+d) = 1/(cx+d)²`.
    pub fn boundary_derivative(&self, x: f64) -> Result<f64> {
        let den = self.c * x + self.d;
        if den == 0.0 {
            return Err(Error::Pole(x));
        }
        Ok(1.0 / (den * den))
    }

    pub fn classify(&self) -> Result<Classification> {
        if self.is_identity(1e-14) {
            return Err(Error::IdentityElement);
        }
        let tr = self.trace().abs();
        if tr < 2.0 - PARABOLIC_TOL {
            return Ok(Classification {
                class: IsometryClass::Elliptic,
                fixed_points: None,
                translation_length: None,
            });
        }
        if tr <= 2.0 + PARABOLIC_TOL {
            return Ok(Classification {
                class: IsometryClass::Parabolic,
                fixed_points: None,
                translation_length: None,
            });
        }
        let length = 2.0 * (0.5 * tr).acosh();
        let (p, q) = self.hyperbolic_fixed_points();
        // The attracting fixed point has multiplier e^{−length} < 1.
        let attracting_first = match p {
            BoundaryPoint::Infinity => self.a.abs() > self.d.abs(),
            BoundaryPoint::Finite(x) => self.boundary_derivative(x).map(|m| m < 1.0).unwrap_or(false),
        };
        let pair = if attracting_first { (q, p) } else { (p, q) };
        Ok(Classification {
            class: IsometryClass::Hyperbolic,
            fixed_points: Some(pair),
            translation_length: Some(length),
        })
    }

    /// Real roots of `c x² + (d − a) x − b = 0`, in no particular order.
    fn hyperbolic_fixed_points(&self) -> (BoundaryPoint, BoundaryPoint) {
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        if c == 0.0 {
            // x ↦ (a x + b)/d fixes ∞ and b/(d − a).
            return (BoundaryPoint::Infinity, BoundaryPoint::Finite(b / (d - a)));
        }
        let p = d - a;
        let disc = (a + d) * (a + d) - 4.0;
        let sq = disc.max(0.0).sqrt();
        // Stable quadratic formula: roots of c x² + p x − b.
        let t = -0.5 * (p + p.signum_or_one() * sq);
        let x1 = t / c;
        let x2 = if t != 0.0 { -b / t } else { -p / c - x1 };
        (BoundaryPoint::Finite(x1), BoundaryPoint::Finite(x2))
    }
}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}

impl SignumOrOne for f64 {
    fn signum_or_one(self) -> f64 {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

impl fmt::Display for MoebiusTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn g1() -> MoebiusTransform {
        MoebiusTransform::new(2.0, 13.0, -1.0, -6.0).unwrap()
    }

    fn g2() -> MoebiusTransform {
        MoebiusTransform::new(-6.0, 13.0, -1.0, 2.0).unwrap()
    }

    #[test]
    fn compose_matches_hand_product() {
        let expected = MoebiusTransform::new(-25.0, 52.0, 12.0, -25.0).unwrap();
        assert!(g1().compose(&g2()).approx_eq(&expected, 1e-12));
        assert!(g1().compose(&MoebiusTransform::IDENTITY).approx_eq(&g1(), 0.0));
        assert!(g1().compose(&g1().inverse()).is_identity(1e-14));
    }

    #[test]
    fn inverse_is_adjugate() {
        let expected = MoebiusTransform::new(-6.0, -13.0, 1.0, 2.0).unwrap();
        assert!(g1().inverse().approx_eq(&expected, 0.0));
        assert_eq!(MoebiusTransform::IDENTITY.inverse(), MoebiusTransform::IDENTITY);
        assert_eq!(g1().inverse().inverse(), g1());
    }

    #[test]
    fn sign_is_canonical() {
        let m = MoebiusTransform::new(-2.0, -13.0, 1.0, 6.0).unwrap();
        assert_eq!(m, g1());
        assert_eq!(m.coefficients()[0], 2.0);
    }

    #[test]
    fn rejects_non_positive_determinant() {
        assert!(matches!(
            MoebiusTransform::new(1.0, 2.0, 2.0, 4.0),
            Err(Error::NonPositiveDeterminant(_))
        ));
        assert!(MoebiusTransform::new(0.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn boundary_action() {
        assert_eq!(g1().boundary_apply(BoundaryPoint::Infinity), BoundaryPoint::Finite(-2.0));
        assert_eq!(g1().boundary_apply((-5.0).into()), BoundaryPoint::Finite(-3.0));
        assert_eq!(g1().boundary_apply((-6.0).into()), BoundaryPoint::Infinity);
        assert_eq!(MoebiusTransform::IDENTITY.boundary_apply(0.7.into()), BoundaryPoint::Finite(0.7));
    }

    #[test]
    fn plane_action() {
        let i = Complex64::new(0.0, 1.0);
        assert_eq!(MoebiusTransform::IDENTITY.plane_apply(i).unwrap(), i);
        let w = MoebiusTransform::diagonal(2.0 * std::f64::consts::LN_2).plane_apply(i).unwrap();
        assert_relative_eq!(w.re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(w.im, 4.0, epsilon = 1e-14);
        // (2i + 13)/(−i − 6) = (−80 + i)/37
        let w = g1().plane_apply(i).unwrap();
        assert_relative_eq!(w.re, -80.0 / 37.0, epsilon = 1e-14);
        assert_relative_eq!(w.im, 1.0 / 37.0, epsilon = 1e-15);
        assert!(g1().plane_apply(Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn derivative_values() {
        assert_eq!(MoebiusTransform::IDENTITY.boundary_derivative(3.3).unwrap(), 1.0);
        assert_relative_eq!(g1().boundary_derivative(0.0).unwrap(), 1.0 / 36.0, epsilon = 1e-16);
        assert!(matches!(g1().boundary_derivative(-6.0), Err(Error::Pole(_))));
    }

    #[test]
    fn classify_generator() {
        let cl = g1().classify().unwrap();
        assert_eq!(cl.class, IsometryClass::Hyperbolic);
        let (rep, att) = cl.fixed_points.unwrap();
        assert_relative_eq!(rep.finite().unwrap(), -4.0 - 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(att.finite().unwrap(), -4.0 + 3f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(cl.translation_length.unwrap(), 2.0 * 2f64.acosh(), epsilon = 1e-14);
    }

    #[test]
    fn classify_diagonal_and_rotation() {
        let cl = MoebiusTransform::diagonal(1.5).classify().unwrap();
        assert_eq!(cl.class, IsometryClass::Hyperbolic);
        assert_eq!(cl.fixed_points.unwrap(), (BoundaryPoint::Finite(0.0), BoundaryPoint::Infinity));
        assert_relative_eq!(cl.translation_length.unwrap(), 1.5, epsilon = 1e-14);
        let cl = MoebiusTransform::diagonal(-1.5).classify().unwrap();
        assert_eq!(cl.fixed_points.unwrap(), (BoundaryPoint::Infinity, BoundaryPoint::Finite(0.0)));
        assert_eq!(MoebiusTransform::rotation(1.0).classify().unwrap().class, IsometryClass::Elliptic);
        let parabolic = MoebiusTransform::new(1.0, 1.0, 0.0, 1.0).unwrap();
        assert_eq!(parabolic.classify().unwrap().class, IsometryClass::Parabolic);
        assert!(matches!(MoebiusTransform::IDENTITY.classify(), Err(Error::IdentityElement)));
    }

    #[test]
    fn chordal_metric_handles_infinity() {
        let inf = BoundaryPoint::Infinity;
        assert_eq!(inf.chordal_distance(inf), 0.0);
        assert_relative_eq!(BoundaryPoint::Finite(0.0).chordal_distance(inf), 2.0);
        assert_relative_eq!(BoundaryPoint::Finite(1e9).chordal_distance(inf), 2e-9, max_relative = 1e-6);
    }

    fn arb_transform() -> impl Strategy<Value = MoebiusTransform> {
        (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)
            .prop_filter_map("det > 0.5", |(a, b, c, d)| {
                if a * d - b * c > 0.5 {
                    MoebiusTransform::new(a, b, c, d).ok()
                } else {
                    None
                }
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn normalized(g in arb_transform()) {
            prop_assert!((g.determinant() - 1.0).abs() <= 1e-14);
        }

        #[test]
        fn action_is_homomorphism(g in arb_transform(), h in arb_transform(), x in -10.0..10.0f64) {
            let x = BoundaryPoint::Finite(x);
            let lhs = g.compose(&h).boundary_apply(x);
            let rhs = g.boundary_apply(h.boundary_apply(x));
            prop_assert!(lhs.chordal_distance(rhs) <= 1e-10, "{lhs} vs {rhs}");
        }

        #[test]
        fn chain_rule(g in arb_transform(), h in arb_transform(), x in -10.0..10.0f64) {
            let hx = h.apply_real(x);
            prop_assume!(hx.is_some());
            let hx = hx.unwrap();
            let (Ok(dgh), Ok(dg), Ok(dh)) =
                (g.compose(&h).boundary_derivative(x), g.boundary_derivative(hx), h.boundary_derivative(x))
            else {
                return Ok(());
            };
            prop_assume!(dgh.is_finite() && dgh < 1e4 && dh < 1e4 && dg < 1e4);
            prop_assert!(dgh > 0.0);
            prop_assert!(((dgh - dg * dh) / dgh).abs() <= 1e-10);
        }
    }
}
