use serde::{Deserialize, Serialize};

/// Numerical tolerances and iteration caps shared by the solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericConfig {
    /// Absolute width at which Sturm bisection stops.
    pub tol_eig: f64,
    /// Relative stabilization threshold for continued fractions under depth doubling.
    pub weyl_rel_tol: f64,
    /// Once the change under doubling starts to grow (rounding noise dominates),
    /// a previous change below this relative level is accepted.
    pub weyl_noise_tol: f64,
    /// Largest continued-fraction depth tried before giving up.
    pub weyl_max_depth: usize,
    /// Relative accuracy of the smallest-singular-value estimate.
    pub svd_rel_tol: f64,
    pub svd_max_iter: usize,
    /// Relative change below which a Miller solution counts as converged.
    pub miller_rel_tol: f64,
    pub miller_max_doublings: usize,
    /// Relative per-cell tolerance of the adaptive quadrature.
    pub quad_rel_tol: f64,
    pub quad_max_depth: usize,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self {
            tol_eig: 1e-10,
            weyl_rel_tol: 1e-12,
            weyl_noise_tol: 1e-9,
            weyl_max_depth: 1 << 22,
            svd_rel_tol: 1e-6,
            svd_max_iter: 20_000,
            miller_rel_tol: 1e-10,
            miller_max_doublings: 12,
            quad_rel_tol: 1e-13,
            quad_max_depth: 24,
        }
    }
}
