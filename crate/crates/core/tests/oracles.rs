//! Values computed once by independent means (closed forms, hand
//! enumeration, brute force) and frozen here.

use bitflip_core::dot_fault::table::CellCounts;
use bitflip_core::gmres::{build_rhs, gmres_solve, GmresConfig, RhsMode};
use bitflip_core::monte_carlo::{per_bit_slice, run_surface, McConfig, SliceSelector};
use bitflip_core::sparse::{apply_scaling_to_rhs, equilibrate, gen_poisson, norms, unscale_solution};
use bitflip_core::{classify_errors, ErrorLookupTable, ExponentInterval};

#[test]
fn poisson_spectrum() {
    let a = gen_poisson(100).unwrap();
    let n = norms(&a).unwrap();
    // lambda_max of the 5-point Laplacian: 4 + 4 cos(pi / 101)
    let exact = 4.0 + 4.0 * (std::f64::consts::PI / 101.0).cos();
    assert!((n.two_norm_estimate - exact).abs() < 1e-5, "{}", n.two_norm_estimate);
    // sum of squares: 10000 * 16 + 39600 * 1
    assert_eq!(n.frobenius_norm, 199_600f64.sqrt());
    let (s, sc) = equilibrate(&a).unwrap();
    let ns = norms(&s).unwrap();
    assert_eq!(ns.frobenius_norm, n.frobenius_norm / 4.0);
    assert!(sc.row_scale.iter().all(|&r| r == 0.25));
}

#[test]
fn frozen_table_cells() {
    let t = ErrorLookupTable::build();
    // [small, non_numeric, grey, floors -1 0 1 3 7 15 31 63 127 255 511 1023, total]
    let frozen: [((u16, u16), [u8; 16]); 5] = [
        ((1023, 1023), [0, 2, 3, 31, 0, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0, 39]),
        ((1022, 1022), [21, 0, 0, 10, 2, 3, 0, 0, 0, 0, 0, 0, 0, 0, 3, 39]),
        ((1030, 1000), [29, 0, 0, 0, 0, 0, 0, 0, 3, 1, 1, 1, 1, 1, 2, 39]),
        ((2046, 2046), [0, 15, 2, 20, 0, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 39]),
        ((1, 1), [38, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 39]),
    ];
    for ((a, b), counts) in frozen {
        assert_eq!(t.cell(a, b), CellCounts(counts), "cell ({a},{b})");
        assert_eq!(t.cell(b, a), CellCounts(counts));
    }
    let tally = classify_errors(&ExponentInterval::unit_vector(), &ExponentInterval::new(1022, 1023).unwrap(), &t, 2.0).unwrap();
    assert_eq!(
        [tally.class1_lt_one, tally.class2_grey, tally.class3_detectable, tally.class4_nonnumeric],
        [73_437, 230, 5_102, 1_025]
    );
    assert_eq!(tally.total(), 39 * 1023 * 2);
}

#[test]
fn poisson_solution_recovered() {
    let a = gen_poisson(100).unwrap();
    let b = build_rhs(&a, &RhsMode::OnesSolution).unwrap();
    let cfg = GmresConfig { restart: 100, max_total_iterations: 1000, ..Default::default() };
    let plain = gmres_solve(&a, &b, &cfg, None).unwrap();
    assert!(plain.converged);
    assert!(plain.x.iter().all(|v| (v - 1.0).abs() < 1e-6));

    let (s, sc) = equilibrate(&a).unwrap();
    let scaled = gmres_solve(&s, &apply_scaling_to_rhs(&b, &sc).unwrap(), &cfg, None).unwrap();
    assert!(scaled.converged);
    let x = unscale_solution(&scaled.x, &sc).unwrap();
    for (p, q) in x.iter().zip(&plain.x) {
        assert!((p - q).abs() < 1e-6);
    }
}

#[test]
fn mixed_magnitude_slice() {
    // v at 2^3 has exponent bits 5..=9 clear: every such flip of v fails,
    // while u at 2^-20 has them set and only shrinks
    let cfg = McConfig { vector_length: 6, samples_per_cell: 20, magnitude_grid: vec![-20, 3], failure_threshold: 1.0, seed: 3 };
    let s = run_surface(&cfg).unwrap();
    let rows = per_bit_slice(&s, SliceSelector::Fixed(-20)).unwrap();
    for r in rows.iter().filter(|r| r.mag == 3 && (57..=61).contains(&r.bit)) {
        assert_eq!(r.probability, 0.5, "bit {}", r.bit);
    }
    let floor = s.cell(-20, -20).unwrap();
    assert_eq!(floor.probability(), 1.0 / 64.0);
}
