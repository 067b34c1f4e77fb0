//! Weyl function of `J0(mu)` by continued fractions, the spectral density
//! `tau(E)` and a subordinacy probe for the eigenvalue recurrence.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::NumericConfig;
use crate::error::{Error, Result};
use crate::recurrence::asymptotics::{tail_set, TailKind};
use crate::recurrence::{forward_from_pair, Recurrence, SolutionSequence};
use crate::special::d_entry;

/// Depth at which the continued fraction is first evaluated.
pub const INITIAL_DEPTH: usize = 256;

/// Continued fraction `G(strip)` for `J0(mu)` restricted to rows `>= strip`,
/// i.e. `((J0^{(strip)} - z)^{-1} e, e)` for the first basis vector `e`,
/// descending from `depth` with the minimal-solution tail as the seed.
fn continued_fraction(mu: f64, strip: usize, z: Complex64, depth: usize) -> Complex64 {
    let tail = tail_set(mu, TailKind::Free { z });
    let depth = depth.max(strip + 1);
    // G(depth+1) = -r(depth) / d(depth+1).
    let mut g = -tail.preferred_ratio(depth) / d_entry(depth + 1);
    for n in (strip..=depth).rev() {
        let b = Complex64::new((2 * n + 1) as f64 * mu, 0.0) - z;
        let d = d_entry(n + 1);
        g = 1.0 / (b - d * d * g);
    }
    g
}

/// `G(strip)` with depth doubling until the relative change drops below `weyl_rel_tol`.
///
/// Near the band edge at `mu = 1` the descent cancels almost all digits of each
/// diagonal entry and the change levels off at a rounding floor; a growing change
/// after one below `weyl_noise_tol` is then taken as convergence.
pub fn stripped_green(mu: f64, strip: usize, z: Complex64, depth: usize, config: &NumericConfig) -> Result<Complex64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("non-finite spectral parameter {z}")));
    }
    let mut depth = depth.max(1).max(strip + 1);
    let mut current = continued_fraction(mu, strip, z, depth);
    let mut rounds = 0;
    let mut last_change = f64::INFINITY;
    while depth * 2 <= config.weyl_max_depth {
        depth *= 2;
        rounds += 1;
        let next = continued_fraction(mu, strip, z, depth);
        let change = (next - current).norm() / next.norm();
        if change <= config.weyl_rel_tol {
            return Ok(next);
        }
        if change > last_change && last_change <= config.weyl_noise_tol {
            return Ok(current);
        }
        current = next;
        last_change = change;
    }
    Err(Error::Convergence { what: "weyl continued fraction", iterations: rounds })
}

/// Weyl function `m(z)` of `J0(mu)` with its first row and column removed.
///
/// Herglotz convention: `Im m(z) > 0` for `Im z > 0`. The top resolvent entry
/// of the full operator is then `(mu - z - d_1^2 m(z))^{-1}`.
pub fn weyl_m(mu: f64, z: Complex64, depth: usize, config: &NumericConfig) -> Result<Complex64> {
    let m = stripped_green(mu, 1, z, depth, config)?;
    if z.im != 0.0 && !(m.im * z.im > 0.0) {
        return Err(Error::HerglotzViolation { z, m });
    }
    Ok(m)
}

/// `((J0(mu) - z)^{-1} e0, e0)` through the Weyl function.
pub fn resolvent_00_from_weyl(mu: f64, z: Complex64, config: &NumericConfig) -> Result<Complex64> {
    let m = weyl_m(mu, z, INITIAL_DEPTH, config)?;
    let d1 = d_entry(1);
    Ok(1.0 / (Complex64::new(mu, 0.0) - z - d1 * d1 * m))
}

/// Default boundary-value ladder.
pub const DEFAULT_LADDER: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Largest stability value of a trusted estimate.
pub const DEFAULT_STABILITY_TOL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub energy: f64,
    pub tau: f64,
    /// `(eps, (1/pi) Im G(E + i eps))` for each rung.
    pub eps_ladder: Vec<(f64, f64)>,
    /// Relative spread of the extrapolants from the last two rung pairs
    /// (of the last two raw rungs for a two-rung ladder).
    pub stability: f64,
    pub trusted: bool,
}

fn validate_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.len() < 2 {
        return Err(Error::Domain("eps ladder needs at least two rungs".into()));
    }
    if ladder.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Domain("eps ladder must be strictly decreasing".into()));
    }
    if ladder.iter().any(|e| !(*e >= 1e-8) || !e.is_finite()) {
        return Err(Error::Domain("eps ladder entries must be finite and at least 1e-8".into()));
    }
    Ok(())
}

/// Density of the spectral measure of `e0` for the operator restricted to rows `>= strip`.
pub fn tau_density_stripped(
    mu: f64,
    strip: usize,
    energy: f64,
    ladder: &[f64],
    config: &NumericConfig,
) -> Result<DensityEstimate> {
    validate_ladder(ladder)?;
    let mut rungs = Vec::with_capacity(ladder.len());
    for &eps in ladder {
        let g = stripped_green(mu, strip, Complex64::new(energy, eps), INITIAL_DEPTH, config)?;
        rungs.push((eps, g.im / PI));
    }
    // Linear extrapolation in eps to eps = 0 from a pair of rungs.
    let extrapolate = |(e1, r1): (f64, f64), (e2, r2): (f64, f64)| (e1 * r2 - e2 * r1) / (e1 - e2);
    let relative = |a: f64, b: f64| {
        let size = a.abs().max(b.abs());
        if size > 0.0 {
            (a - b).abs() / size
        } else {
            0.0
        }
    };
    let k = rungs.len();
    let extrapolated = extrapolate(rungs[k - 2], rungs[k - 1]);
    let stability = if k >= 3 {
        relative(extrapolate(rungs[k - 3], rungs[k - 2]), extrapolated)
    } else {
        relative(rungs[k - 2].1, rungs[k - 1].1)
    };
    Ok(DensityEstimate {
        energy,
        tau: extrapolated.max(0.0),
        eps_ladder: rungs,
        stability,
        trusted: stability <= DEFAULT_STABILITY_TOL,
    })
}

/// `tau(E) = (1/pi) lim Im (mu - z - d_1^2 m(z))^{-1}`, `z = E + i eps`.
pub fn tau_density(mu: f64, energy: f64, ladder: &[f64], config: &NumericConfig) -> Result<DensityEstimate> {
    tau_density_stripped(mu, 0, energy, ladder, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    NoSubordinate,
    SubordinateFound,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub cutoff: usize,
    /// `||u||_L / ||v||_L`.
    pub norm_ratio: f64,
    /// `sqrt(lambda_min / lambda_max)` of the Gram matrix of `(u, v)` on rows `1..=L`.
    pub gram_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubordinacyReport {
    pub energy: f64,
    pub norm_ratio_curve: Vec<CurvePoint>,
    pub verdict: Verdict,
    /// Set when the two initial data are linearly dependent.
    pub degenerate: bool,
}

/// Default ratio bound of the subordinacy verdict.
pub const DEFAULT_RHO: f64 = 10.0;

fn cutoffs(l_max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut l = 10.0_f64;
    while (l as usize) < l_max {
        out.push(l as usize);
        l *= 10f64.powf(0.1);
    }
    out.push(l_max);
    out.dedup();
    out
}

struct Gram {
    uu: f64,
    vv: f64,
    uv: Complex64,
    exp: i32,
}

impl Gram {
    fn add(&mut self, u: &SolutionSequence, v: &SolutionSequence, n: usize) {
        let e = u.exponent(n).max(v.exponent(n));
        if e > self.exp {
            let s = 2f64.powi(2 * (self.exp - e).max(-1000));
            self.uu *= s;
            self.vv *= s;
            self.uv *= s;
            self.exp = e;
        }
        let (a, b) = (u.scaled(n, self.exp), v.scaled(n, self.exp));
        self.uu += a.norm_sqr();
        self.vv += b.norm_sqr();
        self.uv += a.conj() * b;
    }

    fn ratios(&self) -> (f64, f64) {
        let norm_ratio = (self.uu / self.vv).sqrt();
        let tr = self.uu + self.vv;
        let det = (self.uu * self.vv - self.uv.norm_sqr()).max(0.0);
        let disc = ((self.uu - self.vv).powi(2) + 4.0 * self.uv.norm_sqr()).sqrt();
        let lmax = 0.5 * (tr + disc);
        let lmin = if lmax > 0.0 { det / lmax } else { 0.0 };
        (norm_ratio, (lmin / lmax).sqrt())
    }
}

/// Gilbert–Pearson probe on the eigenvalue recurrence of `J0(mu)` at real `E`,
/// using the solutions with initial data `first` and `second` for `(C(0), C(1))`.
pub fn subordinacy_probe_with(
    mu: f64,
    energy: f64,
    l_max: usize,
    rho: f64,
    first: (f64, f64),
    second: (f64, f64),
) -> Result<SubordinacyReport> {
    if l_max < 100 {
        return Err(Error::Domain("subordinacy probe needs L_max >= 100".into()));
    }
    let rec = Recurrence::Free { mu, z: Complex64::new(energy, 0.0) };
    let c = |p: (f64, f64)| (Complex64::new(p.0, 0.0), Complex64::new(p.1, 0.0));
    let (u0, u1) = c(first);
    let (v0, v1) = c(second);
    let u = forward_from_pair(rec, u0, u1, l_max)?;
    let v = forward_from_pair(rec, v0, v1, l_max)?;
    let wronskian = first.0 * second.1 - first.1 * second.0;
    let degenerate = wronskian.abs() <= 1e-14 * (first.0.hypot(first.1) * second.0.hypot(second.1));

    let mut gram = Gram { uu: 0.0, vv: 0.0, uv: Complex64::new(0.0, 0.0), exp: i32::MIN / 4 };
    let mut curve = Vec::new();
    let mut next = 1;
    for cutoff in cutoffs(l_max) {
        while next <= cutoff {
            gram.add(&u, &v, next);
            next += 1;
        }
        let (norm_ratio, gram_ratio) = gram.ratios();
        curve.push(CurvePoint { cutoff, norm_ratio, gram_ratio });
    }
    let verdict = if degenerate {
        Verdict::Inconclusive
    } else {
        let decade: Vec<&CurvePoint> = curve.iter().filter(|p| p.cutoff * 10 >= l_max).collect();
        let lowest = decade.iter().map(|p| p.gram_ratio).fold(f64::INFINITY, f64::min);
        let first_v = decade.first().map(|p| p.gram_ratio).unwrap_or(1.0);
        let last_v = decade.last().map(|p| p.gram_ratio).unwrap_or(1.0);
        if lowest >= 1.0 / rho {
            Verdict::NoSubordinate
        } else if last_v < 1.0 / rho && last_v <= first_v {
            Verdict::SubordinateFound
        } else {
            Verdict::Inconclusive
        }
    };
    Ok(SubordinacyReport { energy, norm_ratio_curve: curve, verdict, degenerate })
}

/// Probe with the default initial data `(1, 0)` and `(0, 1)` and `rho = 10`.
pub fn subordinacy_probe(mu: f64, energy: f64, l_max: usize) -> Result<SubordinacyReport> {
    subordinacy_probe_with(mu, energy, l_max, DEFAULT_RHO, (1.0, 0.0), (0.0, 1.0))
}
