//! End-to-end checks that tie the word combinatorics, the flow and the
//! operator side together through independent code paths.

use chamberflow::coding::{orbit_code, preimages};
use chamberflow::flow::{default_horizon, first_return, flat_from_words, semiconjugacy_check};
use chamberflow::spectral::{bowen_dimension, euler_zeta, product_det_scan, zero_scan, Axis, ProductGrid, ScanGrid};
use chamberflow::transfer::{assemble_factor_operator, fredholm_det, periodic_trace, CollocationBasis};
use chamberflow::{BoundaryVector, Disk, ProductGroup, SchottkyFactor, Word};
use num_complex::Complex64;
use proptest::prelude::*;

fn fractal() -> SchottkyFactor {
    let disks = [(1, -6.0), (-1, -2.0), (2, 2.0), (-2, 6.0)];
    SchottkyFactor::from_disks(disks.iter().map(|&(i, c)| Disk::new(i, c, 1.0).unwrap()).collect()).unwrap()
}

fn squared() -> ProductGroup {
    ProductGroup::new(vec![fractal(), fractal()]).unwrap()
}

fn cyclic_words(max_len: usize) -> Vec<Word> {
    let f = fractal();
    (1..=max_len).flat_map(|n| f.enumerate_words(n, true)).collect()
}

#[test]
fn periodic_trace_from_geodesic_lengths() {
    // Each cyclic word of length n contributes e^{−sℓ}/(1 − e^{−ℓ}) for the
    // length ℓ of its closed geodesic.
    let f = fractal();
    for s in [Complex64::new(0.5, 0.0), Complex64::new(1.0, 3.0)] {
        for n in 1..=4 {
            let mut expected = Complex64::new(0.0, 0.0);
            for w in f.enumerate_words(n, true) {
                let len = f.closed_geodesic(&w).unwrap().length;
                expected += (-s * len).exp() / (1.0 - (-len).exp());
            }
            let got = periodic_trace(&f, s, n).unwrap();
            assert!((got - expected).norm() <= 1e-12 * expected.norm().max(1.0), "n = {n}, s = {s}");
        }
    }
}

#[test]
fn euler_product_agrees_off_the_real_axis() {
    let f = fractal();
    let basis = CollocationBasis::new(&f, 24, 1.0).unwrap();
    for s in [Complex64::new(1.0, 2.0), Complex64::new(0.9, -5.0)] {
        let det = fredholm_det(&assemble_factor_operator(&f, s, &basis).unwrap()).unwrap().value;
        let euler = euler_zeta(&f, s, 12, 30).unwrap();
        assert!((det - euler.value).norm() <= 1e-6, "s = {s}: {det} vs {}", euler.value);
    }
}

#[test]
fn three_routes_to_the_bowen_parameter() {
    let f = fractal();
    let bowen = bowen_dimension(&f, 1e-7).unwrap();
    let basis = CollocationBasis::new(&f, 24, 1.0).unwrap();
    let zeros = zero_scan(&f, ScanGrid::Real(Axis::new(0.05, 1.0, 20).unwrap()), &basis).unwrap();
    assert_eq!(zeros.len(), 1);
    assert!((zeros[0].location.re - bowen.delta).abs() <= 1e-10);

    let g = squared();
    let product_bases = vec![CollocationBasis::new(&f, 16, 1.0).unwrap(); 2];
    let axis = Axis::new(bowen.delta - 0.01, bowen.delta + 0.01 + 1e-3, 11).unwrap();
    let scan = product_det_scan(&g, &ProductGrid::Diagonal(axis), &product_bases).unwrap();
    let crossings = chamberflow::spectral::sign_changes(&scan.rows);
    assert!(crossings.iter().any(|(a, b)| a[0] <= bowen.delta && bowen.delta <= b[0]));
    // The leading product eigenvalue passes through one at the same point.
    for row in &scan.rows {
        assert_eq!(row.leading > 1.0, row.s[0] < bowen.delta, "{row:?}");
    }
}

#[test]
fn flow_letters_reproduce_the_orbit_code() {
    let g = squared();
    let words = [Word::new(vec![1, -2], true).unwrap(), Word::new(vec![2, 2, -1], true).unwrap()];
    let mut state = flat_from_words(&g, &words).unwrap();
    let horizon = default_horizon(&g, &words).unwrap();
    // Iterating the expanding boundary map in floating point leaves the
    // periodic orbit after about ten steps, so only a prefix is compared.
    let code = orbit_code(&g, &state.forward(), 8, 12).unwrap();
    for expected in &code {
        let ret = first_return(&g, &state, horizon).unwrap();
        assert_eq!(&ret.letter, expected);
        state = ret.next;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_and_boundary_map_commute(i in 0usize..1000, j in 0usize..1000) {
        let pool = cyclic_words(4);
        let words = [pool[i % pool.len()].clone(), pool[j % pool.len()].clone()];
        let g = squared();
        let start = flat_from_words(&g, &words).unwrap();
        let report = semiconjugacy_check(&g, &start, 20, default_horizon(&g, &words).unwrap()).unwrap();
        prop_assert!(report.letters_agree);
        prop_assert!(report.max_deviation <= 1e-8, "deviation {}", report.max_deviation);
    }

    #[test]
    fn preimages_of_located_points_round_trip(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let g = squared();
        let f = fractal();
        // Points of the limit set: attracting fixed points of random words.
        let pool = cyclic_words(3);
        let pick = |t: f64| {
            let w = &pool[((t * pool.len() as f64) as usize).min(pool.len() - 1)];
            f.closed_geodesic(w).unwrap().attracting.finite().unwrap()
        };
        let x = BoundaryVector::finite(&[pick(a), pick(b)]);
        let pre = preimages(&g, &x).unwrap();
        prop_assert_eq!(pre.len(), 9);
        for (_, y) in pre {
            let (_, image) = chamberflow::coding::apply_map(&g, &y).unwrap();
            prop_assert!(image.chordal_distance(&x) <= 1e-10);
        }
    }
}
