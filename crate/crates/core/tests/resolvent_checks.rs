use sqg_core::resolvent::{assemble_resolvent, transmission_reduction_check, SourceBundle, SplitGrid};
use sqg_core::{ModelParameters, NumericConfig, SpectralPoint};

#[test]
fn residuals_converge_at_second_order() {
    let cfg = NumericConfig::default();
    let p = ModelParameters::from_mu(1.5, 2).unwrap();
    let l = SpectralPoint::new(0.0, 1.0).unwrap();
    let src = SourceBundle::single_exponential(4);
    let ode: Vec<f64> = [8e-3, 4e-3]
        .iter()
        .map(|&h| {
            let grid = SplitGrid::new(12.0, h).unwrap();
            let (_, r) = assemble_resolvent(&p, &l, &src, &grid, 128, &cfg).unwrap();
            assert!(r.matching_residual < 1e-8 && r.continuity_residual < 1e-10, "{r:?}");
            r.ode_residual
        })
        .collect();
    let order = (ode[0] / ode[1]).log2();
    assert!(order > 1.8, "order {order}");
}

#[test]
fn jacobi_truncation_does_not_move_the_solution() {
    let cfg = NumericConfig::default();
    let p = ModelParameters::from_mu(0.7, 2).unwrap();
    let l = SpectralPoint::new(-1.0, 0.5).unwrap();
    let src = SourceBundle::single_exponential(4);
    let grid = SplitGrid::new(10.0, 1e-2).unwrap();
    let (a, _) = assemble_resolvent(&p, &l, &src, &grid, 64, &cfg).unwrap();
    let (b, _) = assemble_resolvent(&p, &l, &src, &grid, 128, &cfg).unwrap();
    assert!(a.sup_distance(&b) < 1e-8);
}

#[test]
fn transmission_condition_reduces_to_the_jacobi_rows() {
    let q: Vec<f64> = (0..=120).map(|i| -6.0 + 0.1 * i as f64).collect();
    for (seed, mu) in [(21, 0.4), (22, 1.0), (23, 2.5)] {
        let exact = transmission_reduction_check(40, mu, &q, seed, None).unwrap();
        assert!(exact.residual < 1e-8, "{exact:?}");
        let broken = transmission_reduction_check(40, mu, &q, seed, Some(3)).unwrap();
        assert!(broken.residual > 0.1, "{broken:?}");
    }
}
