//! Closed-form sequences shared by every other module.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|mu - 1|` below this is treated as the critical value `mu = 1`.
pub const CRITICAL_MU_TOL: f64 = 1e-12;

/// Position of a spectral parameter relative to the cuts `[n + 1/2, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Location {
    UpperHalfPlane,
    LowerHalfPlane,
    /// Real and strictly below the branch point `n0 + 1/2`, on the cuts of all `n < n0`.
    RealBelowCut(usize),
    /// Real and exactly at a branch point `n + 1/2`.
    OnCut,
}

/// Complex spectral parameter `Lambda` tagged with its location.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    re: f64,
    im: f64,
    location: Location,
}

impl SpectralPoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::Domain(format!("non-finite spectral point {re} + {im}i")));
        }
        let location = if im > 0.0 {
            Location::UpperHalfPlane
        } else if im < 0.0 {
            Location::LowerHalfPlane
        } else if re < 0.5 {
            Location::RealBelowCut(0)
        } else {
            let shifted = re - 0.5;
            if shifted.fract() == 0.0 {
                Location::OnCut
            } else {
                Location::RealBelowCut(shifted.floor() as usize + 1)
            }
        };
        Ok(Self { re, im, location })
    }

    pub fn real(re: f64) -> Result<Self> {
        Self::new(re, 0.0)
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn im(&self) -> f64 {
        self.im
    }

    pub fn location(&self) -> Location {
        self.location
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn conj(&self) -> Self {
        // Conjugation only flips the half-plane; reals keep their tag.
        let location = match self.location {
            Location::UpperHalfPlane => Location::LowerHalfPlane,
            Location::LowerHalfPlane => Location::UpperHalfPlane,
            other => other,
        };
        Self { re: self.re, im: -self.im, location }
    }

    pub fn is_real(&self) -> bool {
        self.im == 0.0
    }

    /// Whether `zeta_n` is defined here, i.e. the point is off the cut `[n + 1/2, inf)`.
    pub fn admits(&self, n: usize) -> bool {
        match self.location {
            Location::UpperHalfPlane | Location::LowerHalfPlane => true,
            Location::RealBelowCut(n0) => n >= n0,
            Location::OnCut => false,
        }
    }
}

/// Coupling regime of the Jacobi parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    SubCritical,
    Critical,
    SuperCritical,
}

impl Regime {
    pub fn of(mu: f64) -> Self {
        if (mu - 1.0).abs() <= CRITICAL_MU_TOL {
            Regime::Critical
        } else if mu < 1.0 {
            Regime::SubCritical
        } else {
            Regime::SuperCritical
        }
    }
}

/// Coupling `alpha`, Jacobi parameter `mu` and bond count of the star graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub alpha: f64,
    pub mu: f64,
    pub bonds: u32,
}

impl ModelParameters {
    pub fn from_alpha(alpha: f64, bonds: u32) -> Result<Self> {
        let mu = mu_from_alpha(alpha, bonds)?;
        Ok(Self { alpha, mu, bonds })
    }

    pub fn from_mu(mu: f64, bonds: u32) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::Domain(format!("mu must be positive, got {mu}")));
        }
        if bonds == 0 {
            return Err(Error::Domain("bond count must be at least 1".into()));
        }
        let alpha = bonds as f64 / (mu * SQRT_2);
        Ok(Self { alpha, mu, bonds })
    }

    pub fn regime(&self) -> Regime {
        Regime::of(self.mu)
    }

    /// `alpha >= bonds / sqrt 2`, equivalently `mu <= 1`.
    pub fn is_borderline_or_large(&self) -> bool {
        self.regime() != Regime::SuperCritical
    }
}

/// `mu = m / (alpha sqrt 2)`; for two bonds this is `sqrt 2 / alpha`.
pub fn mu_from_alpha(alpha: f64, bonds: u32) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha must be positive, got {alpha}")));
    }
    if bonds == 0 {
        return Err(Error::Domain("bond count must be at least 1".into()));
    }
    Ok(bonds as f64 / (alpha * SQRT_2))
}

/// Off-diagonal entry `d_n = n^{1/2} (n^2 - 1/4)^{1/4}`, zero at `n = 0`.
pub fn d_entry(n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let x = n as f64;
    x.sqrt() * (x * x - 0.25).powf(0.25)
}

/// Branch of `sqrt(n + 1/2 - Lambda)` with positive real part off the cut.
pub fn zeta(n: usize, lambda: &SpectralPoint) -> Result<Complex64> {
    if !lambda.admits(n) {
        return Err(Error::BranchCut { n, lambda: lambda.value() });
    }
    let arg = Complex64::new(n as f64 + 0.5 - lambda.re(), -lambda.im());
    if lambda.is_real() {
        return Ok(Complex64::new(arg.re.sqrt(), 0.0));
    }
    Ok(arg.sqrt())
}

/// `y_n(Lambda) = (n + 1/2)^{1/2} zeta_n(Lambda)`.
pub fn y_entry(n: usize, lambda: &SpectralPoint) -> Result<Complex64> {
    let h = n as f64 + 0.5;
    if lambda.is_real() {
        // Exact at Lambda = 0, where (n + 1/2)^2 is representable.
        zeta(n, lambda)?;
        return Ok(Complex64::new((h * (h - lambda.re())).sqrt(), 0.0));
    }
    Ok(h.sqrt() * zeta(n, lambda)?)
}

/// `psi_n(Lambda) = y_n - (n + 1/2 - Lambda/2)`, evaluated in the
/// cancellation-free form `-Lambda^2 / (4 y_n + 4 (n + 1/2 - Lambda/2))`.
pub fn psi_entry(n: usize, lambda: &SpectralPoint) -> Result<Complex64> {
    let l = lambda.value();
    let y = y_entry(n, lambda)?;
    let w = Complex64::new(n as f64 + 0.5, 0.0) - 0.5 * l;
    Ok(-(l * l) / (4.0 * (y + w)))
}

/// Decaying half-line solution `eta_n(x; Lambda) = (n + 1/2)^{1/4} exp(-zeta_n |x|)`.
pub fn eta(n: usize, x: f64, lambda: &SpectralPoint) -> Result<Complex64> {
    let z = zeta(n, lambda)?;
    Ok(eta_with_zeta(n, x, z))
}

pub(crate) fn eta_with_zeta(n: usize, x: f64, zeta_n: Complex64) -> Complex64 {
    (n as f64 + 0.5).powf(0.25) * (-zeta_n * x.abs()).exp()
}

/// Derivative jump `eta_n'(0+) - eta_n'(0-) = -2 (n + 1/2)^{1/4} zeta_n`.
pub fn eta_jump(n: usize, lambda: &SpectralPoint) -> Result<Complex64> {
    Ok(-2.0 * (n as f64 + 0.5).powf(0.25) * zeta(n, lambda)?)
}

/// Hermite function value with an underflow marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteValue {
    pub value: f64,
    /// Set when the Gaussian factor underflowed and the value collapsed to zero.
    pub underflow: bool,
}

const RESCALE: f64 = 1e100;

/// `chi_0(q) .. chi_{n_max}(q)`, the L^2-normalized oscillator eigenfunctions.
///
/// Upward recurrence `sqrt(n+1) chi_{n+1} = sqrt 2 q chi_n - sqrt n chi_{n-1}` on
/// mantissas, with the Gaussian kept as a separate log factor.
pub fn hermite_row(n_max: usize, q: f64) -> (Vec<f64>, bool) {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut log_scale = -0.5 * q * q;
    let mut prev = 0.0_f64;
    let mut cur = PI.powf(-0.25);
    let mut any_underflow = false;
    for n in 0..=n_max {
        let v = cur * log_scale.exp();
        if v == 0.0 && cur != 0.0 {
            any_underflow = true;
        }
        out.push(v);
        let nf = n as f64;
        let next = (SQRT_2 * q * cur - nf.sqrt() * prev) / (nf + 1.0).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE {
            cur /= RESCALE;
            prev /= RESCALE;
            log_scale += RESCALE.ln();
        }
    }
    (out, any_underflow)
}

pub fn hermite_chi_guarded(n: usize, q: f64) -> HermiteValue {
    let (row, _) = hermite_row(n, q);
    let value = row[n];
    // Mantissa of an odd function vanishes exactly at q = 0; that is not underflow.
    let underflow = value == 0.0 && q != 0.0;
    HermiteValue { value, underflow }
}

pub fn hermite_chi(n: usize, q: f64) -> f64 {
    hermite_chi_guarded(n, q).value
}

/// `(1/2)^{1/4}`, handy in tests and docs.
pub const ETA0_AT_ORIGIN: f64 = 0.840_896_415_253_714_6;
