//! Bowen dimension, Euler-product zeta values and determinant zero scans.

use std::collections::{BTreeSet, HashMap};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::schottky::{ProductGroup, SchottkyFactor, Word};
use crate::transfer::{
    assemble_factor_operator, assemble_product_operator, eigenvalues, fredholm_det, leading_eigenvalue,
    CollocationBasis, MultiParameter,
};

/// Default collocation degree for rank-one spectral work.
pub const DEFAULT_DEGREE: usize = 24;
/// Default depth of the cover-refinement oracle.
pub const DEFAULT_COVER_DEPTH: usize = 8;
/// Largest number of grid points a scan will evaluate.
pub const MAX_GRID_POINTS: usize = 1_000_000;

/// Root of a continuous function with a sign change on `[a, b]`: secant steps
/// kept inside the bracket, with a bisection step whenever the secant step
/// fails to halve the bracket.
pub fn bracketed_root(
    mut f: impl FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    xtol: f64,
    ftol: f64,
) -> Result<(f64, f64, usize)> {
    let (mut a, mut b) = (a, b);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok((a, 0.0, 0));
    }
    if fb == 0.0 {
        return Ok((b, 0.0, 0));
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Bracketing { lo: a, hi: b });
    }
    let mut width = (b - a).abs();
    for it in 1..=200 {
        let mut x = b - fb * (b - a) / (fb - fa);
        let (lo, hi) = (a.min(b), a.max(b));
        if !(x > lo && x < hi) {
            x = 0.5 * (a + b);
        }
        let fx = f(x)?;
        if fx.abs() <= ftol {
            return Ok((x, fx, it));
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        let new_width = (b - a).abs();
        if new_width > 0.5 * width {
            // Secant stalled on one side: bisect.
            let m = 0.5 * (a + b);
            let fm = f(m)?;
            if fm.abs() <= ftol {
                return Ok((m, fm, it));
            }
            if fm.signum() == fa.signum() {
                a = m;
                fa = fm;
            } else {
                b = m;
                fb = fm;
            }
        }
        width = (b - a).abs();
        if width <= xtol {
            let (x, fx) = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
            return Ok((x, fx, it));
        }
    }
    Err(Error::NonConvergence("bracketed root search".into()))
}

/// Sparse transfer matrix on the depth-`n` cover: state `w = (ℓ_1, …, ℓ_n)`
/// feeds `(ℓ, ℓ_1, …, ℓ_{n−1})` for `ℓ ≠ −ℓ_1` with weight `|h_ℓ′(x_w)|^s`,
/// `x_w` the midpoint of the cover interval of `w` and `h_ℓ = g_ℓ^{−1}`.
pub struct CoverOracle {
    /// Per state: (target state, ln h′ at the midpoint).
    transitions: Vec<Vec<(usize, f64)>>,
}

impl CoverOracle {
    pub fn new(f: &SchottkyFactor, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::InvalidArgument("cover depth must be at least 1".into()));
        }
        let cover = f.limit_cover(depth)?;
        let index: HashMap<&[i32], usize> = cover.iter().enumerate().map(|(i, (w, _))| (w.letters(), i)).collect();
        let mut transitions = Vec::with_capacity(cover.len());
        for (w, (lo, hi)) in &cover {
            let x = 0.5 * (lo + hi);
            let first = w.letters()[0];
            let mut out = Vec::new();
            for l in f.successors(first) {
                let mut target = Vec::with_capacity(depth);
                target.push(l);
                target.extend_from_slice(&w.letters()[..depth - 1]);
                let j = index[target.as_slice()];
                out.push((j, f.inverse_branch(l).boundary_derivative(x)?.ln()));
            }
            transitions.push(out);
        }
        Ok(CoverOracle { transitions })
    }

    pub fn states(&self) -> usize {
        self.transitions.len()
    }

    /// Spectral radius at real `s` (power iteration on the nonnegative matrix).
    pub fn spectral_radius(&self, s: f64) -> Result<f64> {
        let weights: Vec<Vec<(usize, f64)>> =
            self.transitions.iter().map(|row| row.iter().map(|&(j, lw)| (j, (s * lw).exp())).collect()).collect();
        let n = self.states();
        let mut v = vec![1.0; n];
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            let u: Vec<f64> = weights.iter().map(|row| row.iter().map(|&(j, w)| w * v[j]).sum()).collect();
            let est = u.iter().sum::<f64>() / v.iter().sum::<f64>();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = u.into_iter().map(|x| x / norm).collect();
            if (est - lambda).abs() <= 1e-14 * est {
                return Ok(est);
            }
            lambda = est;
        }
        Err(Error::NonConvergence("cover spectral radius".into()))
    }
}

/// Outcome of [`bowen_dimension`].
#[derive(Clone, Debug, PartialEq)]
pub struct BowenDimension {
    /// Root of `λ(s) = 1` for the collocation operator.
    pub delta: f64,
    /// `λ(δ) − 1`.
    pub residual: f64,
    /// Root of `ρ_n(s) = 1` for the cover transfer matrix.
    pub cover_delta: f64,
    /// Change of the cover root from depth `n − 1` to `n`.
    pub cover_increment: f64,
    pub degree: usize,
    pub cover_depth: usize,
    pub iterations: usize,
}

impl BowenDimension {
    pub fn oracle_gap(&self) -> f64 {
        (self.delta - self.cover_delta).abs()
    }
}

fn bracket_decreasing(mut g: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    if g(0.0)? <= 0.0 {
        return Err(Error::Bracketing { lo: 0.0, hi: 0.0 });
    }
    let mut hi = 1.0;
    while g(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 64.0 {
            return Err(Error::Bracketing { lo: 0.0, hi });
        }
    }
    Ok((0.0, hi))
}

/// Bowen parameter `δ` with `λ(δ) = 1`, computed from the collocation operator
/// and cross-validated against the cover-refinement oracle. Fails when the two
/// disagree by more than `10·tol`.
pub fn bowen_dimension(f: &SchottkyFactor, tol: f64) -> Result<BowenDimension> {
    bowen_dimension_with(f, tol, DEFAULT_DEGREE, DEFAULT_COVER_DEPTH)
}

pub fn bowen_dimension_with(f: &SchottkyFactor, tol: f64, degree: usize, cover_depth: usize) -> Result<BowenDimension> {
    if f.q() < 2 {
        return Err(Error::InvalidArgument("dimension routines need at least two generators".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let basis = CollocationBasis::new(f, degree, 1.0)?;
    let lambda = |s: f64| leading_eigenvalue(f, s, &basis).map(|l| l - 1.0);
    let (lo, hi) = bracket_decreasing(lambda)?;
    let ftol = (1e-3 * tol).min(1e-13);
    let (delta, residual, iterations) = bracketed_root(lambda, lo, hi, 1e-15, ftol)?;

    let cover_root = |depth: usize| -> Result<f64> {
        let oracle = CoverOracle::new(f, depth)?;
        let rho = |s: f64| oracle.spectral_radius(s).map(|r| r - 1.0);
        let (lo, hi) = bracket_decreasing(rho)?;
        bracketed_root(rho, lo, hi, 1e-15, ftol).map(|r| r.0)
    };
    let cover_delta = cover_root(cover_depth)?;
    let cover_increment = if cover_depth > 1 { (cover_delta - cover_root(cover_depth - 1)?).abs() } else { f64::NAN };

    let result = BowenDimension { delta, residual, cover_delta, cover_increment, degree, cover_depth, iterations };
    if result.oracle_gap() > 10.0 * tol {
        return Err(Error::NonConvergence(format!(
            "collocation δ = {delta} and cover δ = {cover_delta} differ by {:e}",
            result.oracle_gap()
        )));
    }
    Ok(result)
}

/// Truncated Euler product with its tail estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct EulerZeta {
    pub value: Complex64,
    /// Geometric extrapolation of `Σ |e^{−sℓ}|` over classes longer than the cutoff.
    pub tail_estimate: f64,
    pub classes: usize,
}

/// `∏_{[w]} ∏_{k=0}^{K} (1 − e^{−(s+k)ℓ(w)})` over the distinct rotation
/// classes among `words`, which must be primitive and cyclically reduced.
/// Returns the logarithm of the product and the number of classes used.
pub fn euler_log_product(f: &SchottkyFactor, words: &[Word], s: Complex64, k_cutoff: usize) -> Result<(Complex64, usize)> {
    let mut seen = BTreeSet::new();
    let mut log_value = Complex64::new(0.0, 0.0);
    for w in words {
        if !w.is_cyclic() || !w.is_primitive() {
            return Err(Error::InvalidArgument(format!("{w} is not a primitive cyclic word")));
        }
        let n = w.len();
        let key = (0..n).map(|r| w.rotated(r).letters().to_vec()).min().unwrap_or_default();
        if !seen.insert(key) {
            continue;
        }
        let len = f.closed_geodesic(w)?.length;
        for k in 0..=k_cutoff {
            log_value += (Complex64::new(1.0, 0.0) - (-(s + k as f64) * len).exp()).ln();
        }
    }
    Ok((log_value, seen.len()))
}

/// `∏_{[w], |w| ≤ W} ∏_{k=0}^{K} (1 − e^{−(s+k)ℓ(w)})` over primitive cyclic
/// words up to rotation.
pub fn euler_zeta(f: &SchottkyFactor, s: Complex64, word_cutoff: usize, k_cutoff: usize) -> Result<EulerZeta> {
    let mut log_value = Complex64::new(0.0, 0.0);
    let mut classes = 0;
    let mut level_sums = Vec::with_capacity(word_cutoff);
    for n in 1..=word_cutoff {
        let words = f.primitive_classes(n);
        let (log_level, count) = euler_log_product(f, &words, s, k_cutoff)?;
        log_value += log_level;
        classes += count;
        let mut level = 0.0;
        for w in &words {
            level += (-s.re * f.closed_geodesic(w)?.length).exp();
        }
        level_sums.push(level);
    }
    let tail_estimate = match level_sums.as_slice() {
        [.., a, b] if *a > 0.0 && b / a < 1.0 => {
            let r = b / a;
            b * r / (1.0 - r)
        }
        _ => f64::INFINITY,
    };
    Ok(EulerZeta { value: log_value.exp(), tail_estimate, classes })
}

/// Real interval sampled at `count` equally spaced points (both ends included).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(start: f64, stop: f64, count: usize) -> Result<Self> {
        if count == 0 || !(start <= stop) || (count > 1 && start == stop) {
            return Err(Error::InvalidArgument(format!("invalid axis {start}:{stop}:{count}")));
        }
        Ok(Axis { start, stop, count })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.stop } else { self.start + h * i as f64 }).collect()
    }
}

/// Window of a rank-one zero scan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScanGrid {
    /// Sign changes of the (real) determinant along the real axis.
    Real(Axis),
    /// Argument-principle search in `[re.0, re.1] × [im.0, im.1]`, split into
    /// `resolution × resolution` boxes.
    Complex { re: (f64, f64), im: (f64, f64), resolution: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroRecord {
    pub location: Complex64,
    pub residual: f64,
    pub degree: usize,
    pub iterations: usize,
}

/// Largest dense product operator assembled for the cross-checks of
/// [`product_det_scan`]; larger bases are checked at a reduced degree.
pub const CROSS_CHECK_DIM: usize = 1296;

/// Residual bound for reported zeros.
pub const ZERO_RESIDUAL_TOL: f64 = 1e-8;

/// Zeros of `s ↦ det(I − M_s)` in a window.
pub fn zero_scan(f: &SchottkyFactor, window: ScanGrid, basis: &CollocationBasis) -> Result<Vec<ZeroRecord>> {
    let det = |s: Complex64| -> Result<Complex64> { Ok(fredholm_det(&assemble_factor_operator(f, s, basis)?)?.value) };
    match window {
        ScanGrid::Real(axis) => {
            let xs = axis.points();
            let values: Vec<f64> = xs.par_iter().map(|&x| det(Complex64::new(x, 0.0)).map(|d| d.re)).collect::<Result<_>>()?;
            let mut out = Vec::new();
            for i in 0..xs.len() {
                let exact = values[i] == 0.0 && (i == 0 || values[i - 1] != 0.0);
                if exact {
                    out.push(ZeroRecord { location: Complex64::new(xs[i], 0.0), residual: 0.0, degree: basis.degree(), iterations: 0 });
                }
                if i + 1 < xs.len() && values[i] != 0.0 && values[i + 1] != 0.0 && values[i].signum() != values[i + 1].signum() {
                    let g = |s: f64| det(Complex64::new(s, 0.0)).map(|d| d.re);
                    match bracketed_root(g, xs[i], xs[i + 1], 1e-15, 0.0) {
                        Ok((x, fx, it)) if fx.abs() <= ZERO_RESIDUAL_TOL => out.push(ZeroRecord {
                            location: Complex64::new(x, 0.0),
                            residual: fx.abs(),
                            degree: basis.degree(),
                            iterations: it,
                        }),
                        Ok((x, fx, _)) => eprintln!("warning: dropped zero near {x}: residual {fx:e}"),
                        Err(e) => eprintln!("warning: dropped zero in [{}, {}]: {e}", xs[i], xs[i + 1]),
                    }
                }
            }
            // Sign changes on both sides of a grid point that sits on an even
            // order zero resolve to the same location.
            out.dedup_by(|b, a| (a.location - b.location).norm() <= 1e-9);
            Ok(out)
        }
        ScanGrid::Complex { re, im, resolution } => {
            if resolution == 0 || !(re.0 < re.1) || !(im.0 < im.1) {
                return Err(Error::InvalidArgument("invalid complex scan window".into()));
            }
            // Interior tile edges are nudged off the lattice so they avoid the
            // real axis and other symmetric lines where zeros tend to sit.
            let edges = |(a, b): (f64, f64), jitter: f64| -> Vec<f64> {
                (0..=resolution)
                    .map(|i| {
                        let t = i as f64 / resolution as f64;
                        let nudge = if i == 0 || i == resolution { 0.0 } else { jitter / resolution as f64 };
                        a + (b - a) * (t + nudge)
                    })
                    .collect()
            };
            let (xs, ys) = (edges(re, 0.0137), edges(im, 0.0213));
            let boxes: Vec<(Complex64, Complex64)> = (0..resolution)
                .flat_map(|i| {
                    let (xs, ys) = (&xs, &ys);
                    (0..resolution).map(move |j| (Complex64::new(xs[i], ys[j]), Complex64::new(xs[i + 1], ys[j + 1])))
                })
                .collect();
            let found: Vec<Vec<ZeroRecord>> =
                boxes.par_iter().map(|&(lo, hi)| zeros_in_box(&det, lo, hi, basis.degree(), 0)).collect::<Result<_>>()?;
            let mut out: Vec<ZeroRecord> = Vec::new();
            for z in found.into_iter().flatten() {
                if !out.iter().any(|o| (o.location - z.location).norm() <= 1e-9) {
                    out.push(z);
                }
            }
            // Conjugate pairs share a real part up to rounding; order them by
            // imaginary part.
            let key = |z: &ZeroRecord| (z.location.re * 1e9).round();
            out.sort_by(|a, b| key(a).total_cmp(&key(b)).then(a.location.im.total_cmp(&b.location.im)));
            Ok(out)
        }
    }
}

/// Winding number of `det` around the boundary of the box and the first
/// moment `(1/2πi)∮ z·d(log det)`, with each edge refined until consecutive
/// steps of `log det` stay below π/8.
fn winding(det: &impl Fn(Complex64) -> Result<Complex64>, lo: Complex64, hi: Complex64) -> Result<(i64, Complex64)> {
    const INITIAL_SEGMENTS: usize = 16;
    let corners = [lo, Complex64::new(hi.re, lo.im), hi, Complex64::new(lo.re, hi.im), lo];
    let mut total = 0.0;
    let mut moment = Complex64::new(0.0, 0.0);
    let mut evaluations = 0usize;
    for edge in corners.windows(2) {
        let (a, b) = (edge[0], edge[1]);
        let at = |t: f64| a + (b - a) * t;
        let mut stack = Vec::new();
        let ts: Vec<f64> = (0..=INITIAL_SEGMENTS).map(|i| i as f64 / INITIAL_SEGMENTS as f64).collect();
        let ds: Vec<Complex64> = ts.iter().map(|&t| det(at(t))).collect::<Result<_>>()?;
        for i in (0..INITIAL_SEGMENTS).rev() {
            stack.push((ts[i], ts[i + 1], ds[i], ds[i + 1]));
        }
        while let Some((t0, t1, d0, d1)) = stack.pop() {
            let dlog = (d1 / d0).ln();
            if dlog.norm() > std::f64::consts::FRAC_PI_8 && evaluations < 4_000 {
                let tm = 0.5 * (t0 + t1);
                let dm = det(at(tm))?;
                evaluations += 1;
                stack.push((tm, t1, dm, d1));
                stack.push((t0, tm, d0, dm));
            } else {
                total += dlog.im;
                moment += at(0.5 * (t0 + t1)) * dlog;
            }
        }
    }
    let w = (total / std::f64::consts::TAU).round() as i64;
    Ok((w, moment / Complex64::new(0.0, std::f64::consts::TAU)))
}

fn zeros_in_box(
    det: &impl Fn(Complex64) -> Result<Complex64>,
    lo: Complex64,
    hi: Complex64,
    degree: usize,
    level: usize,
) -> Result<Vec<ZeroRecord>> {
    const MAX_LEVEL: usize = 8;
    let (w, moment) = winding(det, lo, hi)?;
    if w <= 0 {
        return Ok(Vec::new());
    }
    let scale = (hi - lo).norm();
    let owned = |z: Complex64| {
        let slack = 1e-9 * scale;
        z.re >= lo.re - slack && z.re < hi.re + slack && z.im >= lo.im - slack && z.im < hi.im + slack
    };
    if w == 1 || level == MAX_LEVEL {
        // For a simple zero the moment is the zero itself, up to quadrature error.
        let start = if w == 1 && owned(moment) { moment } else { 0.5 * (lo + hi) };
        if let Some(record) = newton_in_box(det, start, lo, hi, degree) {
            if owned(record.location) {
                return Ok(vec![record]);
            }
        }
        if level == MAX_LEVEL {
            eprintln!("warning: Newton refinement failed in box [{lo}, {hi}]");
            return Ok(Vec::new());
        }
    }
    let mid = Complex64::new(lo.re + 0.4871 * (hi.re - lo.re), lo.im + 0.5129 * (hi.im - lo.im));
    let quads = [
        (lo, mid),
        (Complex64::new(mid.re, lo.im), Complex64::new(hi.re, mid.im)),
        (mid, hi),
        (Complex64::new(lo.re, mid.im), Complex64::new(mid.re, hi.im)),
    ];
    let mut out = Vec::new();
    for (a, b) in quads {
        out.extend(zeros_in_box(det, a, b, degree, level + 1)?);
    }
    Ok(out)
}

/// Newton iteration with a central-difference derivative, kept within half a
/// box diagonal of the box. Evaluation failures count as non-convergence.
fn newton_in_box(
    det: &impl Fn(Complex64) -> Result<Complex64>,
    start: Complex64,
    lo: Complex64,
    hi: Complex64,
    degree: usize,
) -> Option<ZeroRecord> {
    let scale = (hi - lo).norm();
    let near = |z: Complex64| {
        z.re >= lo.re - 0.5 * scale && z.re <= hi.re + 0.5 * scale && z.im >= lo.im - 0.5 * scale && z.im <= hi.im + 0.5 * scale
    };
    let h = 1e-6 * scale.max(1e-3);
    let mut s = start;
    for it in 1..=80 {
        let d = det(s).ok()?;
        let dd = (det(s + h).ok()? - det(s - h).ok()?) / (2.0 * h);
        let mut step = d / dd;
        if !step.is_finite() {
            return None;
        }
        if step.norm() > 0.25 * scale {
            step *= 0.25 * scale / step.norm();
        }
        s -= step;
        if !near(s) {
            return None;
        }
        if step.norm() <= 1e-14 * s.norm().max(1.0) {
            let residual = det(s).ok()?.norm();
            return (residual <= ZERO_RESIDUAL_TOL).then_some(ZeroRecord { location: s, residual, degree, iterations: it });
        }
    }
    None
}

/// Parameter grid of a product scan.
#[derive(Clone, Debug, PartialEq)]
pub enum ProductGrid {
    /// Cartesian product of one axis per factor (last factor fastest).
    Tensor(Vec<Axis>),
    /// `s_1 = ⋯ = s_r` along one axis.
    Diagonal(Axis),
}

impl ProductGrid {
    pub fn points(&self, rank: usize) -> Result<Vec<Vec<f64>>> {
        match self {
            ProductGrid::Diagonal(axis) => {
                if axis.count > MAX_GRID_POINTS {
                    return Err(Error::TooLarge { size: axis.count, limit: MAX_GRID_POINTS });
                }
                Ok(axis.points().into_iter().map(|s| vec![s; rank]).collect())
            }
            ProductGrid::Tensor(axes) => {
                if axes.len() != rank {
                    return Err(Error::RankMismatch { expected: rank, got: axes.len() });
                }
                let size = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.count)).unwrap_or(usize::MAX);
                if size > MAX_GRID_POINTS {
                    return Err(Error::TooLarge { size, limit: MAX_GRID_POINTS });
                }
                let mut pts = vec![Vec::new()];
                for a in axes {
                    pts = pts.into_iter().flat_map(|p| a.points().into_iter().map(move |x| [p.clone(), vec![x]].concat())).collect();
                }
                Ok(pts)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductRow {
    pub s: Vec<f64>,
    pub det: Complex64,
    /// Product of the factor leading eigenvalues.
    pub leading: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossCheck {
    pub s: Vec<f64>,
    pub spectral: Complex64,
    pub dense: Complex64,
    pub relative_error: f64,
    /// Per-factor degree used (reduced when the dense matrix would exceed the size guard).
    pub degree: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductScan {
    pub rows: Vec<ProductRow>,
    pub checks: Vec<CrossCheck>,
}

/// Spectra of the factor matrices, cached per distinct parameter value.
fn factor_spectra(f: &SchottkyFactor, basis: &CollocationBasis, values: &[f64]) -> Result<Vec<(f64, Vec<Complex64>)>> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    distinct
        .par_iter()
        .map(|&s| {
            let m = assemble_factor_operator(f, Complex64::new(s, 0.0), basis)?;
            Ok((s, eigenvalues(m.matrix())))
        })
        .collect()
}

/// `det(I − ⊗_j M_j)` from factor spectra: `∏ (1 − λ_{1,i_1}⋯λ_{r,i_r})`.
pub fn kronecker_det(spectra: &[&[Complex64]]) -> Complex64 {
    let mut products = vec![Complex64::new(1.0, 0.0)];
    for sp in spectra {
        products = products.iter().flat_map(|&p| sp.iter().map(move |&l| p * l)).collect();
    }
    products.iter().map(|p| Complex64::new(1.0, 0.0) - p).product()
}

/// Determinant and leading-eigenvalue table of the multi-parameter operator on
/// a real grid, using the Kronecker spectral identity; at least three grid
/// points (ends and middle) are cross-checked against a dense determinant.
pub fn product_det_scan(group: &ProductGroup, grid: &ProductGrid, bases: &[CollocationBasis]) -> Result<ProductScan> {
    let r = group.rank();
    if r < 2 {
        return Err(Error::InvalidArgument("product scans need rank at least 2".into()));
    }
    if bases.len() != r {
        return Err(Error::RankMismatch { expected: r, got: bases.len() });
    }
    let points = grid.points(r)?;
    let spectra: Vec<Vec<(f64, Vec<Complex64>)>> = (0..r)
        .map(|j| {
            let vals: Vec<f64> = points.iter().map(|p| p[j]).collect();
            factor_spectra(group.factor(j), &bases[j], &vals)
        })
        .collect::<Result<_>>()?;
    let lookup = |j: usize, s: f64| -> &[Complex64] {
        let k = spectra[j].binary_search_by(|(x, _)| x.total_cmp(&s)).expect("spectrum cached");
        &spectra[j][k].1
    };
    let rows: Vec<ProductRow> = points
        .par_iter()
        .map(|p| {
            let sp: Vec<&[Complex64]> = (0..r).map(|j| lookup(j, p[j])).collect();
            let leading = sp.iter().map(|e| e[0].re).product();
            ProductRow { s: p.clone(), det: kronecker_det(&sp), leading }
        })
        .collect();

    // Dense cross-checks, at a reduced degree if the full one exceeds the guard.
    let mut check_bases: Vec<CollocationBasis> = bases.to_vec();
    while check_bases.iter().map(|b| b.dim()).product::<usize>() > CROSS_CHECK_DIM {
        let j = (0..r).max_by_key(|&j| check_bases[j].dim()).unwrap();
        let b = &check_bases[j];
        if b.degree() == 0 {
            return Err(Error::TooLarge { size: check_bases.iter().map(|b| b.dim()).product(), limit: CROSS_CHECK_DIM });
        }
        check_bases[j] = CollocationBasis::new(group.factor(j), b.degree() - 1, b.shrink())?;
    }
    let mut picks = vec![0, points.len() / 2, points.len() - 1];
    picks.dedup();
    let checks = picks
        .into_par_iter()
        .map(|i| {
            let p = &points[i];
            let dense = fredholm_det(&assemble_product_operator(group, &MultiParameter::real(p), &check_bases)?)?.value;
            let sp: Vec<Vec<Complex64>> = (0..r)
                .map(|j| {
                    let m = assemble_factor_operator(group.factor(j), Complex64::new(p[j], 0.0), &check_bases[j])?;
                    Ok(eigenvalues(m.matrix()))
                })
                .collect::<Result<_>>()?;
            let refs: Vec<&[Complex64]> = sp.iter().map(|v| v.as_slice()).collect();
            let spectral = kronecker_det(&refs);
            let relative_error = (spectral - dense).norm() / dense.norm().max(spectral.norm()).max(f64::MIN_POSITIVE);
            Ok(CrossCheck {
                s: p.clone(),
                spectral,
                dense,
                relative_error,
                degree: check_bases.iter().map(|b| b.degree()).collect(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ProductScan { rows, checks })
}

/// Parameters in a 1-D product scan where the real part of the determinant
/// changes sign, as `(s_before, s_after)` pairs.
pub fn sign_changes(rows: &[ProductRow]) -> Vec<(Vec<f64>, Vec<f64>)> {
    rows.windows(2)
        .filter(|w| w[0].det.re != 0.0 && w[0].det.re.signum() != w[1].det.re.signum())
        .map(|w| (w[0].s.clone(), w[1].s.clone()))
        .collect()
}
