//! Collocation discretization of the transfer operators
//! `𝓛_s f(x) = Σ_{y : F(y) = x} |F′(y)|^{−s} f(y)`, rank one and multi-parameter.
//!
//! Functions are represented by their values at Chebyshev–Lobatto nodes on
//! each disk diameter. On block `k` the operator reads
//! `(𝓛_s φ)(x) = Σ_{ℓ ≠ −k} |(g_ℓ^{−1})′(x)|^s φ_ℓ(g_ℓ^{−1}(x))`, where `φ_ℓ`
//! is the interpolant of block `ℓ`.
//!
//! Product matrices use Kronecker ordering: the index of
//! `((k_1, i_1), …, (k_r, i_r))` is `Σ_j a_j·∏_{j' > j} D_{j'}` with
//! `a_j = slot(k_j)·(N_j + 1) + i_j` and `D_j = 2q_j(N_j + 1)`, so the product
//! operator is literally `M_1 ⊗ ⋯ ⊗ M_r`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::coding::{locate, preimages, BoundaryVector, MultiIndex};
use crate::error::{Error, Result};
use crate::moebius::IsometryClass;
use crate::schottky::{ProductGroup, SchottkyFactor};

/// Relative slack when checking that a branch image stays in its block.
const ESCAPE_SLACK: f64 = 1e-12;

/// Largest matrix dimension assembled densely.
pub const MAX_DENSE_DIM: usize = 4096;

/// `s = (s_1, …, s_r)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiParameter(pub Vec<Complex64>);

impl MultiParameter {
    pub fn real(s: &[f64]) -> Self {
        MultiParameter(s.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }
}

/// `x^s = exp(s·ln x)` for `x > 0`.
pub fn real_power(x: f64, s: Complex64) -> Complex64 {
    (s * x.ln()).exp()
}

/// Chebyshev–Lobatto nodes on every (shrunk) disk diameter of one factor.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationBasis {
    degree: usize,
    shrink: f64,
    letters: Vec<i32>,
    intervals: Vec<(f64, f64)>,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl CollocationBasis {
    /// Nodes `c_k − ρ·r_k·cos(jπ/N)`, `j = 0..N`, ascending; the center when `N = 0`.
    pub fn new(f: &SchottkyFactor, degree: usize, shrink: f64) -> Result<Self> {
        if !(shrink > 0.0 && shrink <= 1.0) {
            return Err(Error::InvalidArgument(format!("shrink factor must lie in (0, 1], got {shrink}")));
        }
        let letters = f.letters().to_vec();
        let intervals: Vec<(f64, f64)> = letters.iter().map(|&k| f.disk(k).shrunk_diameter(shrink)).collect();
        let nodes = intervals
            .iter()
            .map(|&(lo, hi)| {
                let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                if degree == 0 {
                    vec![c]
                } else {
                    (0..=degree).map(|j| c - h * (j as f64 * std::f64::consts::PI / degree as f64).cos()).collect()
                }
            })
            .collect();
        let weights = (0..=degree)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == degree {
                    0.5 * sign
                } else {
                    sign
                }
            })
            .collect();
        Ok(CollocationBasis { degree, shrink, letters, intervals, nodes, weights })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn shrink(&self) -> f64 {
        self.shrink
    }

    /// Nodes per letter, `N + 1`.
    pub fn block_size(&self) -> usize {
        self.degree + 1
    }

    /// `2q·(N + 1)`.
    pub fn dim(&self) -> usize {
        self.letters.len() * self.block_size()
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn nodes(&self, slot: usize) -> &[f64] {
        &self.nodes[slot]
    }

    pub fn interval(&self, slot: usize) -> (f64, f64) {
        self.intervals[slot]
    }

    /// Values at `y` of the Lagrange basis polynomials of block `slot`
    /// (barycentric formula of the second kind).
    pub fn lagrange_row(&self, slot: usize, y: f64) -> Vec<f64> {
        let nodes = &self.nodes[slot];
        if let Some(j) = nodes.iter().position(|&x| x == y) {
            let mut row = vec![0.0; nodes.len()];
            row[j] = 1.0;
            return row;
        }
        let terms: Vec<f64> = nodes.iter().zip(&self.weights).map(|(&x, &w)| w / (y - x)).collect();
        let total: f64 = terms.iter().sum();
        terms.into_iter().map(|t| t / total).collect()
    }

    /// Interpolant of block `slot` through `values`, evaluated at `y`.
    pub fn interpolate(&self, slot: usize, values: &[Complex64], y: f64) -> Complex64 {
        self.lagrange_row(slot, y).iter().zip(values).map(|(l, v)| v * l).sum()
    }

    /// Samples `g` at every node, in matrix order.
    pub fn sample(&self, g: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        self.nodes.iter().flatten().map(|&x| g(x)).collect()
    }
}

/// One branch term of a row: the column letter, weight `|h′(x)|^s` and the
/// Lagrange row at `h(x)`, where `h = g_ℓ^{−1}`.
struct BranchTerm {
    slot: usize,
    weight: Complex64,
    lagrange: Vec<f64>,
}

fn branch_terms(f: &SchottkyFactor, s: Complex64, basis: &CollocationBasis, k: i32, x: f64) -> Result<Vec<BranchTerm>> {
    f.successors(k)
        .map(|l| {
            let h = f.inverse_branch(l);
            let slot = f.slot(l)?;
            let y = h.apply_real(x).ok_or(Error::BranchEscapes { letter: l, node: x })?;
            let (lo, hi) = basis.interval(slot);
            let slack = ESCAPE_SLACK * (hi - lo).max(1.0);
            if !(y >= lo - slack && y <= hi + slack) {
                return Err(Error::BranchEscapes { letter: l, node: x });
            }
            let d = h.boundary_derivative(x)?;
            assert!(d > 0.0 && d.is_finite(), "inverse branch derivative must be positive, got {d}");
            Ok(BranchTerm { slot, weight: real_power(d, s), lagrange: basis.lagrange_row(slot, y) })
        })
        .collect()
}

fn factor_row(f: &SchottkyFactor, s: Complex64, basis: &CollocationBasis, k: i32, x: f64) -> Result<Vec<Complex64>> {
    let n = basis.block_size();
    let mut row = vec![Complex64::new(0.0, 0.0); basis.dim()];
    for t in branch_terms(f, s, basis, k, x)? {
        for (j, l) in t.lagrange.iter().enumerate() {
            row[t.slot * n + j] += t.weight * l;
        }
    }
    Ok(row)
}

/// The operator row at an arbitrary point `x` of some disk: applied to node
/// values it gives `(𝓛_s φ)(x)` for the interpolated `φ`.
pub fn operator_row(f: &SchottkyFactor, s: Complex64, basis: &CollocationBasis, x: f64) -> Result<Vec<Complex64>> {
    let k = f.disk_containing(x).ok_or(Error::OutsideAllDisks { factor: 1 })?;
    factor_row(f, s, basis, k, x)
}

/// Block shape of one factor: `(number of letters, nodes per letter)`.
pub type BlockShape = (usize, usize);

/// A dense collocation matrix with its parameters.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    matrix: DMatrix<Complex64>,
    s: MultiParameter,
    degrees: Vec<usize>,
    shapes: Vec<BlockShape>,
    fingerprint: u64,
}

impl OperatorMatrix {
    pub fn from_matrix(matrix: DMatrix<Complex64>) -> Self {
        let n = matrix.nrows();
        OperatorMatrix { matrix, s: MultiParameter(vec![]), degrees: vec![], shapes: vec![(1, n)], fingerprint: 0 }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn s(&self) -> &MultiParameter {
        &self.s
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn shapes(&self) -> &[BlockShape] {
        &self.shapes
    }

    /// Hash of the group data the matrix was assembled from.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.shapes.len()];
        for j in (0..self.shapes.len().saturating_sub(1)).rev() {
            let (q2, n) = self.shapes[j + 1];
            strides[j] = strides[j + 1] * q2 * n;
        }
        strides
    }

    /// Matrix indices of the block with per-factor letter slots `slots`, in
    /// Kronecker order (node tuples lexicographic).
    pub fn block_indices(&self, slots: &[usize]) -> Vec<usize> {
        let strides = self.strides();
        let mut idx = vec![0usize];
        for ((&(_, n), &slot), &stride) in self.shapes.iter().zip(slots).zip(&strides) {
            idx = idx.iter().flat_map(|&base| (0..n).map(move |i| base + (slot * n + i) * stride)).collect();
        }
        idx
    }

    /// The submatrix coupling block `rows` to block `cols` (letter slots per factor).
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> DMatrix<Complex64> {
        let (ri, ci) = (self.block_indices(rows), self.block_indices(cols));
        DMatrix::from_fn(ri.len(), ci.len(), |a, b| self.matrix[(ri[a], ci[b])])
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `tr(M^n)`.
    pub fn power_trace(&self, n: usize) -> Complex64 {
        if n == 0 {
            return Complex64::new(self.dim() as f64, 0.0);
        }
        let mut p = self.matrix.clone();
        for _ in 1..n {
            p = &p * &self.matrix;
        }
        p.trace()
    }
}

fn fingerprint(factors: &[&SchottkyFactor]) -> u64 {
    // FNV-1a over the disk data and generator coefficients.
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bits: u64| {
        for b in bits.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    for f in factors {
        for d in f.disks() {
            eat(d.index as i64 as u64);
            eat(d.center.to_bits());
            eat(d.radius.to_bits());
        }
        for &l in f.letters() {
            for c in f.generator(l).coefficients() {
                eat(c.to_bits());
            }
        }
    }
    h
}

/// Rank-one collocation matrix of `𝓛_{s}` on one factor.
pub fn assemble_factor_operator(f: &SchottkyFactor, s: Complex64, basis: &CollocationBasis) -> Result<OperatorMatrix> {
    if basis.letters() != f.letters() {
        return Err(Error::InvalidArgument("basis was built for a different factor".into()));
    }
    let n = basis.block_size();
    let rows: Vec<Vec<Complex64>> = (0..basis.dim())
        .into_par_iter()
        .map(|r| factor_row(f, s, basis, basis.letters()[r / n], basis.nodes(r / n)[r % n]))
        .collect::<Result<_>>()?;
    let dim = basis.dim();
    let matrix = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
    if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonConvergence("non-finite operator entry".into()));
    }
    Ok(OperatorMatrix {
        matrix,
        s: MultiParameter(vec![s]),
        degrees: vec![basis.degree()],
        shapes: vec![(basis.letters().len(), n)],
        fingerprint: fingerprint(&[f]),
    })
}

fn check_product_args(group: &ProductGroup, s: &MultiParameter, bases: &[CollocationBasis]) -> Result<()> {
    if s.0.len() != group.rank() {
        return Err(Error::RankMismatch { expected: group.rank(), got: s.0.len() });
    }
    if bases.len() != group.rank() {
        return Err(Error::RankMismatch { expected: group.rank(), got: bases.len() });
    }
    for (f, b) in group.factors().iter().zip(bases) {
        if b.letters() != f.letters() {
            return Err(Error::InvalidArgument("basis was built for a different factor".into()));
        }
    }
    Ok(())
}

/// Multi-parameter collocation matrix on the tensor grid, assembled block by
/// block from `Σ_{n ∉ B(m)} ω_s(g_n) f_n` with `ω_s(g_n) = ∏_j |(g_{j,n_j}^{−1})′|^{s_j}`.
pub fn assemble_product_operator(
    group: &ProductGroup,
    s: &MultiParameter,
    bases: &[CollocationBasis],
) -> Result<OperatorMatrix> {
    check_product_args(group, s, bases)?;
    let dim: usize = bases.iter().map(|b| b.dim()).product();
    if dim > MAX_DENSE_DIM {
        return Err(Error::TooLarge { size: dim, limit: MAX_DENSE_DIM });
    }
    let r = group.rank();
    let shapes: Vec<BlockShape> = bases.iter().map(|b| (b.letters().len(), b.block_size())).collect();
    let mut strides = vec![1usize; r];
    for j in (0..r.saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * bases[j + 1].dim();
    }

    // Branch terms per factor and local row index.
    let terms: Vec<Vec<Vec<BranchTerm>>> = group
        .factors()
        .iter()
        .zip(bases)
        .zip(&s.0)
        .map(|((f, b), &sj)| {
            let n = b.block_size();
            (0..b.dim())
                .map(|a| branch_terms(f, sj, b, b.letters()[a / n], b.nodes(a / n)[a % n]))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let rows: Vec<Vec<(usize, Complex64)>> = (0..dim)
        .into_par_iter()
        .map(|row| {
            let local: Vec<usize> = (0..r).map(|j| (row / strides[j]) % bases[j].dim()).collect();
            let m: Vec<i32> = (0..r).map(|j| bases[j].letters()[local[j] / shapes[j].1]).collect();
            let mut entries = Vec::new();
            // Enumerate admissible n (each n_j ≠ −m_j) via per-factor term lists.
            let lists: Vec<&Vec<BranchTerm>> = (0..r).map(|j| &terms[j][local[j]]).collect();
            let mut choice = vec![0usize; r];
            loop {
                let chosen: Vec<&BranchTerm> = (0..r).map(|j| &lists[j][choice[j]]).collect();
                debug_assert!(chosen.iter().zip(&m).zip(bases).all(|((t, &mj), b)| b.letters()[t.slot] != -mj));
                let weight: Complex64 = chosen.iter().map(|t| t.weight).product();
                // Tensor of Lagrange rows over node tuples.
                let mut cols = vec![(0usize, weight)];
                for j in 0..r {
                    let (n, stride) = (shapes[j].1, strides[j]);
                    let t = chosen[j];
                    cols = cols
                        .iter()
                        .flat_map(|&(base, w)| {
                            t.lagrange.iter().enumerate().map(move |(i, &l)| (base + (t.slot * n + i) * stride, w * l))
                        })
                        .collect();
                }
                entries.extend(cols);
                let mut j = r;
                loop {
                    if j == 0 {
                        return entries;
                    }
                    j -= 1;
                    choice[j] += 1;
                    if choice[j] < lists[j].len() {
                        break;
                    }
                    choice[j] = 0;
                }
            }
        })
        .collect();
    let mut matrix = DMatrix::zeros(dim, dim);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row {
            matrix[(i, j)] += v;
        }
    }
    let factors: Vec<&SchottkyFactor> = group.factors().iter().collect();
    Ok(OperatorMatrix {
        matrix,
        s: s.clone(),
        degrees: bases.iter().map(|b| b.degree()).collect(),
        shapes,
        fingerprint: fingerprint(&factors),
    })
}

/// Matrix-free evaluation of `(𝓛_s f)(x)` by summing over the preimages of `x`.
pub fn apply_operator_pointwise(
    group: &ProductGroup,
    s: &MultiParameter,
    f: impl Fn(&BoundaryVector) -> Complex64,
    x: &BoundaryVector,
) -> Result<Complex64> {
    if s.0.len() != group.rank() {
        return Err(Error::RankMismatch { expected: group.rank(), got: s.0.len() });
    }
    let mut total = Complex64::new(0.0, 0.0);
    for (n, y) in preimages(group, x)? {
        let mut weight = Complex64::new(1.0, 0.0);
        for (((fj, &nj), yj), &sj) in group.factors().iter().zip(n.iter()).zip(y.iter()).zip(&s.0) {
            let yj = yj.finite().ok_or(Error::InvalidArgument("preimage at infinity".into()))?;
            let d = fj.generator(nj).boundary_derivative(yj)?;
            weight *= real_power(d.abs(), -sj);
        }
        total += weight * f(&y);
    }
    Ok(total)
}

/// Product-operator row at a located point `x`: applied to tensor-grid node
/// values it gives `(𝓛_s φ)(x)` for the tensor interpolant `φ`.
pub fn product_operator_row(
    group: &ProductGroup,
    s: &MultiParameter,
    bases: &[CollocationBasis],
    x: &BoundaryVector,
) -> Result<Vec<Complex64>> {
    check_product_args(group, s, bases)?;
    let m: MultiIndex = locate(group, x, 0)?;
    let mut row = vec![Complex64::new(1.0, 0.0)];
    for (j, ((f, b), &sj)) in group.factors().iter().zip(bases).zip(&s.0).enumerate() {
        let xj = x[j].finite().expect("located points are finite");
        let fr = factor_row(f, sj, b, m[j], xj)?;
        row = row.iter().flat_map(|&a| fr.iter().map(move |&c| a * c)).collect();
    }
    Ok(row)
}

/// `Σ_{|w| = n} μ_w^s / (1 − μ_w)` over cyclically reduced letter sequences,
/// `μ_w` the derivative of the composite inverse branch at its attracting
/// fixed point.
pub fn periodic_trace(f: &SchottkyFactor, s: Complex64, n: usize) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::InvalidArgument("orbit length must be at least 1".into()));
    }
    let mut total = Complex64::new(0.0, 0.0);
    for w in f.enumerate_words(n, true) {
        let mu = branch_multiplier(f, w.letters())?;
        total += real_power(mu, s) / (1.0 - mu);
    }
    Ok(total)
}

/// Derivative of `g_{ℓ_1}^{−1} ∘ ⋯ ∘ g_{ℓ_n}^{−1}` at its attracting fixed point.
pub fn branch_multiplier(f: &SchottkyFactor, letters: &[i32]) -> Result<f64> {
    let phi = f.inverse_branch_word(letters);
    let cl = phi.classify()?;
    if cl.class != IsometryClass::Hyperbolic {
        return Err(Error::NonHyperbolic);
    }
    let (_, attracting) = cl.fixed_points.expect("hyperbolic elements have fixed points");
    let x = attracting.finite().ok_or(Error::InvalidArgument("fixed point at infinity".into()))?;
    phi.boundary_derivative(x)
}

/// `det(I − M)` with its logarithmic form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Determinant {
    pub value: Complex64,
    /// `ln|det|`; `−∞` for a singular matrix.
    pub log_abs: f64,
    /// Argument in `(−π, π]`.
    pub arg: f64,
}

/// `det(I − M)` by partially pivoted LU.
pub fn fredholm_det(m: &OperatorMatrix) -> Result<Determinant> {
    det_one_minus(m.matrix())
}

pub(crate) fn det_one_minus(m: &DMatrix<Complex64>) -> Result<Determinant> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::InvalidArgument("determinant of a non-square matrix".into()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonConvergence("non-finite matrix entry".into()));
    }
    let a = DMatrix::<Complex64>::identity(n, n) - m;
    let lu = a.lu();
    let sign: Complex64 = lu.p().determinant();
    let u = lu.u();
    let mut log_abs = 0.0;
    let mut phase = if sign.re < 0.0 { std::f64::consts::PI } else { 0.0 };
    for i in 0..n {
        let d = u[(i, i)];
        log_abs += d.norm().ln();
        phase += d.arg();
    }
    let arg = phase.sin().atan2(phase.cos());
    let value = if log_abs == f64::NEG_INFINITY {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::from_polar(log_abs.exp(), arg)
    };
    Ok(Determinant { value, log_abs, arg })
}

/// All eigenvalues (complex Schur form), sorted by decreasing modulus.
pub fn eigenvalues(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let (_, t) = m.clone().schur().unpack();
    let mut ev: Vec<Complex64> = t.diagonal().iter().copied().collect();
    ev.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)));
    ev
}

/// Leading eigenvalue `λ(s)` of the real-parameter operator, by power
/// iteration; falls back to the full spectrum if the iteration stalls.
pub fn leading_eigenvalue(f: &SchottkyFactor, s: f64, basis: &CollocationBasis) -> Result<f64> {
    let m = assemble_factor_operator(f, Complex64::new(s, 0.0), basis)?;
    let a = m.matrix().map(|z| z.re);
    leading_eigenvalue_real(&a)
}

pub(crate) fn leading_eigenvalue_real(a: &DMatrix<f64>) -> Result<f64> {
    const MAX_ITER: usize = 20_000;
    let n = a.nrows();
    let mut v = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = f64::NAN;
    for _ in 0..MAX_ITER {
        let w = a * &v;
        let norm = w.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            break;
        }
        let est = v.dot(&w);
        let next = w / norm;
        let converged = (est - lambda).abs() <= 1e-15 * est.abs() && (&next - &v).norm() <= 1e-12;
        lambda = est;
        v = next;
        if converged {
            return Ok(lambda);
        }
    }
    // Deflation safeguard: a complex pair or a near-degenerate leading pair
    // stalls the iteration; read the Perron value off the full spectrum.
    let ev = eigenvalues(&a.map(|x| Complex64::new(x, 0.0)));
    ev.iter()
        .find(|z| z.im.abs() <= 1e-10 * z.norm().max(1.0) && z.re > 0.0)
        .map(|z| z.re)
        .filter(|&l| ev[0].norm() <= l * (1.0 + 1e-10))
        .ok_or_else(|| Error::NonConvergence(format!("leading eigenvalue after {MAX_ITER} power iterations")))
}
