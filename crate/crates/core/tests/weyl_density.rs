use proptest::prelude::*;
use sqg_core::jacobi::{build, Boundary, OperatorKind};
use sqg_core::weyl::{
    resolvent_00_from_weyl, stripped_green, subordinacy_probe, tau_density, tau_density_stripped, weyl_m, Verdict,
    DEFAULT_LADDER, INITIAL_DEPTH,
};
use sqg_core::{Complex64, NumericConfig};

fn integrated_density(mu: f64, lo: f64, hi: f64, cells: usize) -> f64 {
    let cfg = NumericConfig::default();
    let h = (hi - lo) / cells as f64;
    (0..cells).map(|i| tau_density(mu, lo + (i as f64 + 0.5) * h, &DEFAULT_LADDER, &cfg).unwrap().tau * h).sum()
}

#[test]
fn spectral_measure_has_unit_mass() {
    for mu in [0.3, 0.5, 1.0] {
        let mass = integrated_density(mu, -20.0, 20.0, 1000);
        assert!((mass - 1.0).abs() < 0.05, "mu={mu}: mass {mass}");
    }
}

#[test]
fn density_vanishes_between_discrete_eigenvalues() {
    let cfg = NumericConfig::default();
    let ev = build(OperatorKind::J0 { mu: 1.5 }, 0, 4096).unwrap().lowest_eigenvalues(4, &cfg).unwrap().values;
    for w in ev.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let coarse = tau_density(1.5, mid, &[1e-2, 1e-3], &cfg).unwrap();
        let fine = tau_density(1.5, mid, &DEFAULT_LADDER, &cfg).unwrap();
        assert!(fine.tau < 1e-9, "E={mid}: {}", fine.tau);
        assert!(fine.eps_ladder.last().unwrap().1 <= coarse.eps_ladder[0].1);
    }
}

#[test]
fn density_positive_across_the_line_below_critical() {
    let cfg = NumericConfig::default();
    for e in [-4.0, -1.0, 0.0, 0.7, 3.0] {
        let d = tau_density(0.5, e, &DEFAULT_LADDER, &cfg).unwrap();
        assert!(d.trusted && d.tau > 1e-6, "E={e}: {d:?}");
    }
    let d = tau_density(1.0, -1.0, &DEFAULT_LADDER, &cfg).unwrap();
    assert!(d.tau < 1e-6);
}

#[test]
fn finite_value_near_the_axis() {
    let cfg = NumericConfig::default();
    let z = Complex64::new(0.3, 0.1);
    let w = resolvent_00_from_weyl(0.5, z, &cfg).unwrap();
    assert!(w.re.is_finite() && w.im > 0.0);
    let op = build(OperatorKind::J0 { mu: 0.5 }, 0, 10_000).unwrap().with_boundary(Boundary::Asymptotic);
    let t = op.resolvent_element_00(z).unwrap();
    assert!((t - w).norm() <= 1e-8 * w.norm());
}

#[test]
fn stripping_keeps_the_positivity_pattern() {
    let cfg = NumericConfig::default();
    for e in [-3.0, -1.0, 0.0, 1.0, 3.0] {
        let full = tau_density(0.5, e, &DEFAULT_LADDER, &cfg).unwrap();
        let stripped = tau_density_stripped(0.5, 3, e, &DEFAULT_LADDER, &cfg).unwrap();
        assert_eq!(full.tau > 1e-6, stripped.tau > 1e-6, "E={e}");
    }
}

#[test]
fn subordinacy_matches_spectral_type() {
    assert_eq!(subordinacy_probe(0.5, 0.7, 4000).unwrap().verdict, Verdict::NoSubordinate);
    assert_eq!(subordinacy_probe(1.5, 0.7, 4000).unwrap().verdict, Verdict::SubordinateFound);
}

#[test]
fn cauchy_convergence_above_critical() {
    let cfg = NumericConfig::default();
    for mu in [1.2, 1.5, 2.0] {
        let a = build(OperatorKind::J0 { mu }, 0, 2048).unwrap().lowest_eigenvalues(20, &cfg).unwrap();
        let b = build(OperatorKind::J0 { mu }, 0, 4096).unwrap().lowest_eigenvalues(20, &cfg).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!(*x > 0.0);
            assert!((x - y).abs() < 1e-8, "mu={mu}: {x} vs {y}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn weyl_function_is_herglotz(mu in 0.1f64..3.0, re in -20.0f64..30.0, im in 0.01f64..5.0) {
        let cfg = NumericConfig::default();
        let z = Complex64::new(re, im);
        prop_assert!(weyl_m(mu, z, INITIAL_DEPTH, &cfg).unwrap().im > 0.0);
        prop_assert!(resolvent_00_from_weyl(mu, z, &cfg).unwrap().im > 0.0);
        let lower = weyl_m(mu, z.conj(), INITIAL_DEPTH, &cfg).unwrap();
        let upper = weyl_m(mu, z, INITIAL_DEPTH, &cfg).unwrap();
        prop_assert!((lower - upper.conj()).norm() <= 1e-12 * upper.norm());
    }

    #[test]
    fn stripped_fraction_matches_stripped_truncation(mu in 0.2f64..3.0, strip in 0usize..8, re in -10.0f64..20.0, im in 0.1f64..3.0) {
        let cfg = NumericConfig::default();
        let z = Complex64::new(re, im);
        let g = stripped_green(mu, strip, z, INITIAL_DEPTH, &cfg).unwrap();
        let op = build(OperatorKind::J0 { mu }, strip, 10_000).unwrap().with_boundary(Boundary::Asymptotic);
        let t = op.resolvent_element_00(z).unwrap();
        prop_assert!((g - t).norm() <= 1e-8 * t.norm(), "{} vs {}", g, t);
    }
}
