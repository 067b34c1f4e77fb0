//! Solutions of the three-term recurrences
//! `d(n+1) C(n+1) + P(n) C(n) + d(n) C(n-1) = 0`, `d(0) = 0`,
//! with `P(n) = 2 mu y_n(Lambda)` (coupled) or `P(n) = (2n+1) mu - z` (free).

pub mod asymptotics;
pub mod fit;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::NumericConfig;
use crate::error::{Error, Result};
use crate::special::{d_entry, y_entry, SpectralPoint};

pub use asymptotics::{predict_asymptotics, AsymptoticPrediction, AsymptoticTarget, Branch};
pub use fit::{fit_growth, Envelope, FitModel, GrowthFit};

use asymptotics::{tail_set, TailSet};

/// Which recurrence a sequence solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Recurrence {
    Coupled { mu: f64, lambda: SpectralPoint },
    Free { mu: f64, z: Complex64 },
}

impl Recurrence {
    pub fn mu(&self) -> f64 {
        match *self {
            Recurrence::Coupled { mu, .. } | Recurrence::Free { mu, .. } => mu,
        }
    }

    pub fn diagonal(&self, n: usize) -> Result<Complex64> {
        match *self {
            Recurrence::Coupled { mu, lambda } => Ok(2.0 * mu * y_entry(n, &lambda)?),
            Recurrence::Free { mu, z } => Ok(Complex64::new((2 * n + 1) as f64 * mu, 0.0) - z),
        }
    }

    pub fn target(&self) -> AsymptoticTarget {
        match *self {
            Recurrence::Coupled { lambda, .. } => AsymptoticTarget::Coupled(lambda),
            Recurrence::Free { z, .. } => AsymptoticTarget::Free(z),
        }
    }

    pub fn prediction(&self) -> AsymptoticPrediction {
        predict_asymptotics(self.mu(), self.target())
    }

    pub(crate) fn tail(&self) -> TailSet {
        tail_set(self.mu(), self.target().kind())
    }

    fn validate(&self) -> Result<()> {
        let mu = self.mu();
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(Error::Domain(format!("mu must be positive, got {mu}")));
        }
        self.diagonal(0).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Forward,
    MillerBackward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Normalization {
    /// Started from the given `C(0)` with no rescaling.
    Initial,
    /// Scaled so that `C(0) = 1`.
    UnitFirst,
    /// Scaled so that `C(1) = 1` because `C(0)` vanished.
    UnitSecond,
}

/// A finite prefix `C(0..=N)` of a recurrence solution.
///
/// Entries are stored as a mantissa and a binary exponent so that geometric
/// growth or decay over thousands of steps stays representable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSequence {
    mantissa: Vec<Complex64>,
    exponent: Vec<i32>,
    pub method: Method,
    pub recurrence: Recurrence,
    pub normalization: Normalization,
    /// False when a backward solution was requested but no minimal solution exists.
    pub minimal: bool,
}

const SCALE_BITS: i32 = 512;

fn pow2(e: i32) -> f64 {
    if e >= -1022 && e <= 1023 {
        f64::from_bits(((e + 1023) as u64) << 52)
    } else {
        2f64.powi(e)
    }
}

fn scale_by(c: Complex64, e: i32) -> Complex64 {
    // Split so intermediate powers of two stay finite.
    let mut c = c;
    let mut e = e;
    while e > 1000 {
        c *= pow2(1000);
        e -= 1000;
    }
    while e < -1000 {
        c *= pow2(-1000);
        e += 1000;
    }
    c * pow2(e)
}

impl SolutionSequence {
    pub fn len(&self) -> usize {
        self.mantissa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mantissa.is_empty()
    }

    /// `C(n)` as a plain complex number (may over- or underflow).
    pub fn value(&self, n: usize) -> Complex64 {
        scale_by(self.mantissa[n], self.exponent[n])
    }

    /// `C(n) 2^{-e}`.
    pub fn scaled(&self, n: usize, e: i32) -> Complex64 {
        scale_by(self.mantissa[n], self.exponent[n] - e)
    }

    pub fn values(&self) -> Vec<Complex64> {
        (0..self.len()).map(|n| self.value(n)).collect()
    }

    pub fn exponent(&self, n: usize) -> i32 {
        self.exponent[n]
    }

    pub fn max_exponent(&self) -> i32 {
        self.exponent.iter().copied().max().unwrap_or(0)
    }

    /// `ln |C(n)|`, finite whenever the mantissa is nonzero.
    pub fn log_abs(&self, n: usize) -> f64 {
        self.mantissa[n].norm().ln() + self.exponent[n] as f64 * std::f64::consts::LN_2
    }

    /// Largest relative defect of the recurrence over interior rows `1..len-1`.
    pub fn recurrence_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for n in 1..self.len().saturating_sub(1) {
            let e = self.exponent[n];
            let t1 = d_entry(n + 1) * self.scaled(n + 1, e);
            let t0 = self.recurrence.diagonal(n)? * self.scaled(n, e);
            let tm = d_entry(n) * self.scaled(n - 1, e);
            let denom = t1.norm() + t0.norm() + tm.norm();
            if denom > 0.0 {
                worst = worst.max((t1 + t0 + tm).norm() / denom);
            }
        }
        Ok(worst)
    }

    fn normalize_at(&mut self, k: usize) {
        let (m, e) = (self.mantissa[k], self.exponent[k]);
        for n in 0..self.len() {
            self.mantissa[n] /= m;
            self.exponent[n] -= e;
        }
        self.renormalize_entries();
    }

    fn renormalize_entries(&mut self) {
        for n in 0..self.len() {
            let m = self.mantissa[n];
            if m == Complex64::new(0.0, 0.0) || !m.norm().is_finite() {
                continue;
            }
            let shift = m.norm().log2().floor() as i32;
            self.mantissa[n] = scale_by(m, -shift);
            self.exponent[n] += shift;
        }
    }
}

/// Rescaling state for a running pair of consecutive entries.
struct Running {
    exp: i32,
}

impl Running {
    fn rebalance(&mut self, a: &mut Complex64, b: &mut Complex64) {
        let size = a.norm().max(b.norm());
        if size > pow2(SCALE_BITS) {
            *a *= pow2(-SCALE_BITS);
            *b *= pow2(-SCALE_BITS);
            self.exp += SCALE_BITS;
        } else if size > 0.0 && size < pow2(-SCALE_BITS) {
            *a *= pow2(SCALE_BITS);
            *b *= pow2(SCALE_BITS);
            self.exp -= SCALE_BITS;
        }
    }
}

/// Forward recursion from `C(0) = c0`, row 0 fixing `C(1) = -P(0) C(0) / d(1)`.
pub fn forward_solve(recurrence: Recurrence, c0: Complex64, n_max: usize) -> Result<SolutionSequence> {
    if n_max < 1 {
        return Err(Error::Domain("forward_solve needs N >= 1".into()));
    }
    recurrence.validate()?;
    let c1 = -recurrence.diagonal(0)? * c0 / d_entry(1);
    forward_from_pair(recurrence, c0, c1, n_max)
}

/// Forward recursion from arbitrary `(C(0), C(1))`, ignoring row 0.
pub fn forward_from_pair(
    recurrence: Recurrence,
    c0: Complex64,
    c1: Complex64,
    n_max: usize,
) -> Result<SolutionSequence> {
    recurrence.validate()?;
    let mut mantissa = Vec::with_capacity(n_max + 1);
    let mut exponent = Vec::with_capacity(n_max + 1);
    let mut run = Running { exp: 0 };
    let (mut prev, mut cur) = (c0, c1);
    mantissa.push(prev);
    exponent.push(0);
    if n_max >= 1 {
        run.rebalance(&mut prev, &mut cur);
        mantissa.push(cur);
        exponent.push(run.exp);
    }
    for n in 1..n_max {
        let next = -(recurrence.diagonal(n)? * cur + d_entry(n) * prev) / d_entry(n + 1);
        prev = cur;
        cur = next;
        run.rebalance(&mut prev, &mut cur);
        mantissa.push(cur);
        exponent.push(run.exp);
    }
    let mut seq = SolutionSequence {
        mantissa,
        exponent,
        method: Method::Forward,
        recurrence,
        normalization: Normalization::Initial,
        minimal: false,
    };
    seq.renormalize_entries();
    Ok(seq)
}

/// `(C(0), C(1))` of the backward solution started at `start`, scaled to unit
/// length by a positive factor. Returns `None` when no minimal solution exists.
///
/// The scaling is positive, so the result depends continuously on the
/// recurrence parameters for a fixed `start`.
pub fn minimal_head(recurrence: &Recurrence, start: usize) -> Result<Option<(Complex64, Complex64)>> {
    recurrence.validate()?;
    let tail = recurrence.tail();
    if tail.minimal.is_none() {
        return Ok(None);
    }
    let start = start.max(2);
    let mut hi = tail.preferred_ratio(start);
    let mut cur = Complex64::new(1.0, 0.0);
    let mut run = Running { exp: 0 };
    for n in (1..=start).rev() {
        let prev = -(d_entry(n + 1) * hi + recurrence.diagonal(n)? * cur) / d_entry(n);
        hi = cur;
        cur = prev;
        run.rebalance(&mut hi, &mut cur);
    }
    let s = (cur.norm_sqr() + hi.norm_sqr()).sqrt();
    Ok(Some((cur / s, hi / s)))
}

/// Backward recursion from index `start`, seeded with the minimal tail ratio.
///
/// Returns `C(0..=n_max)` satisfying rows `1..start`; row 0 is not imposed.
fn backward_run(recurrence: &Recurrence, tail: &TailSet, n_max: usize, start: usize) -> Result<SolutionSequence> {
    let len = start + 2;
    let mut mantissa = vec![Complex64::new(0.0, 0.0); len];
    let mut exponent = vec![0i32; len];
    let mut run = Running { exp: 0 };
    let mut hi = tail.preferred_ratio(start);
    let mut cur = Complex64::new(1.0, 0.0);
    mantissa[start + 1] = hi;
    mantissa[start] = cur;
    for n in (1..=start).rev() {
        let prev = -(d_entry(n + 1) * hi + recurrence.diagonal(n)? * cur) / d_entry(n);
        hi = cur;
        cur = prev;
        run.rebalance(&mut hi, &mut cur);
        mantissa[n - 1] = cur;
        exponent[n - 1] = run.exp;
    }
    mantissa.truncate(n_max + 2);
    exponent.truncate(n_max + 2);
    let mut seq = SolutionSequence {
        mantissa,
        exponent,
        method: Method::MillerBackward,
        recurrence: *recurrence,
        normalization: Normalization::Initial,
        minimal: tail.minimal.is_some(),
    };
    if seq.mantissa[0].norm() > 0.0 {
        seq.normalize_at(0);
        seq.normalization = Normalization::UnitFirst;
    } else {
        seq.normalize_at(1);
        seq.normalization = Normalization::UnitSecond;
    }
    Ok(seq)
}

/// Largest change between two normalized sequences, measured against the
/// local pair envelope `sqrt(|C(n)|^2 + |C(n+1)|^2)`.
fn sequence_change(a: &SolutionSequence, b: &SolutionSequence, upto: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for n in 0..=upto {
        let e = b.exponent[n];
        let diff = (a.scaled(n, e) - b.scaled(n, e)).norm();
        let env = (b.scaled(n, e).norm_sqr() + b.scaled(n + 1, e).norm_sqr()).sqrt();
        if env > 0.0 {
            worst = worst.max(diff / env);
        } else if diff > 0.0 {
            worst = f64::INFINITY;
        }
    }
    worst
}

/// Minimal solution `C(0..=N)` by backward recursion with buffer doubling.
///
/// The sequence carries `minimal = false` when no minimal solution exists
/// (both branches of equal size, e.g. `mu < 1` with real `Lambda`); the
/// returned values then follow the tie-breaking branch and are not unique.
pub fn miller_minimal(
    recurrence: Recurrence,
    n_max: usize,
    buffer: usize,
    config: &NumericConfig,
) -> Result<SolutionSequence> {
    if n_max < 1 {
        return Err(Error::Domain("miller_minimal needs N >= 1".into()));
    }
    recurrence.validate()?;
    let tail = recurrence.tail();
    let mut buffer = buffer.max(64).max(n_max / 4);
    let mut current = backward_run(&recurrence, &tail, n_max, n_max + buffer)?;
    for _ in 0..config.miller_max_doublings {
        buffer *= 2;
        let next = backward_run(&recurrence, &tail, n_max, n_max + buffer)?;
        let change = sequence_change(&current, &next, n_max);
        current = next;
        if change < config.miller_rel_tol {
            return Ok(current);
        }
    }
    if tail.minimal.is_none() {
        return Ok(current);
    }
    Err(Error::Convergence { what: "miller_minimal", iterations: config.miller_max_doublings })
}

/// Both sides of the summation identity
/// `sum |C(n)|^2 Im P(n) + d(N+1) Im(C(N+1) conj C(N)) = Im(R(0) conj C(0))`,
/// where `R(0) = d(1) C(1) + P(0) C(0)` is the row-0 defect (zero for forward solutions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub weighted_sum: f64,
    pub boundary_flux: f64,
    pub row0_term: f64,
    pub relative_residual: f64,
}

pub fn weighted_sum_identity_check(seq: &SolutionSequence, n_max: usize) -> Result<IdentityCheck> {
    if n_max + 1 >= seq.len() {
        return Err(Error::DimensionMismatch { expected: n_max + 2, found: seq.len() });
    }
    let e = (0..=n_max + 1).map(|n| seq.exponent[n]).max().unwrap_or(0);
    let c = |n: usize| seq.scaled(n, e);
    let rec = &seq.recurrence;
    let mut sum = 0.0;
    let mut scale = 0.0;
    for n in 0..=n_max {
        let im_p = rec.diagonal(n)?.im;
        sum += c(n).norm_sqr() * im_p;
        scale += c(n).norm_sqr() * im_p.abs();
    }
    let cross = c(n_max + 1) * c(n_max).conj();
    let flux = d_entry(n_max + 1) * cross.im;
    let r0 = d_entry(1) * c(1) + rec.diagonal(0)? * c(0);
    let row0 = (r0 * c(0).conj()).im;
    scale += d_entry(n_max + 1) * cross.norm() + (r0 * c(0).conj()).norm();
    let rel = if scale > 0.0 { (sum + flux - row0).abs() / scale } else { 0.0 };
    Ok(IdentityCheck { weighted_sum: sum, boundary_flux: flux, row0_term: row0, relative_residual: rel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn coupled(mu: f64, re: f64, im: f64) -> Recurrence {
        Recurrence::Coupled { mu, lambda: SpectralPoint::new(re, im).unwrap() }
    }

    #[test]
    fn zero_start_gives_zero() {
        let s = forward_solve(coupled(2.0, 0.25, 0.0), Complex64::new(0.0, 0.0), 50).unwrap();
        assert!(s.values().iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn first_step() {
        let rec = coupled(2.0, 0.25, 0.0);
        let s = forward_solve(rec, Complex64::new(1.0, 0.0), 3).unwrap();
        let y0 = (0.5f64).sqrt() * (0.25f64).sqrt();
        assert_relative_eq!(s.value(1).re, -4.0 * y0 / 0.75f64.powf(0.25), epsilon = 1e-14);
        assert!(s.recurrence_residual().unwrap() < 1e-14);
    }

    #[test]
    fn forward_locks_on_dominant_ratio() {
        let s = forward_solve(coupled(2.0, 0.25, 0.0), Complex64::new(1.0, 0.0), 6000).unwrap();
        // Finite-n correction is the power factor ((n+1)/n)^d.
        assert!(!s.value(6000).re.is_finite());
        let l = s.log_abs(6000) - s.log_abs(5999);
        assert_relative_eq!(l, (2.0 + 3f64.sqrt()).ln(), epsilon = 1e-3);
        assert!(s.max_exponent() > 5000);
        assert!(s.recurrence_residual().unwrap() < 1e-12);
    }

    #[test]
    fn miller_decaying_ratio_and_product() {
        let cfg = NumericConfig::default();
        let rec = coupled(2.0, 0.25, 0.0);
        let m = miller_minimal(rec, 2000, 64, &cfg).unwrap();
        assert!(m.minimal);
        assert_eq!(m.normalization, Normalization::UnitFirst);
        assert_relative_eq!(m.value(0).re, 1.0, epsilon = 1e-15);
        let ratio = |s: &SolutionSequence, n: usize| s.scaled(n + 1, s.exponent(n)) / s.scaled(n, s.exponent(n));
        assert!((ratio(&m, 1999).re - (-2.0 + 3f64.sqrt())).abs() < 1e-3);
        // The product is 1 + O(1/n); remove the 1/n term by extrapolation.
        let big = miller_minimal(rec, 200_001, 64, &cfg).unwrap();
        let f = forward_solve(rec, Complex64::new(1.0, 0.0), 200_001).unwrap();
        let prod = |n: usize| ratio(&f, n) * ratio(&big, n);
        let limit = 2.0 * prod(200_000) - prod(100_000);
        assert!((limit - 1.0).norm() < 1e-6, "{limit}");
        assert!((prod(2000) - 1.0).norm() > 1e-5);
        assert!(m.recurrence_residual().unwrap() < 1e-8);
    }

    #[test]
    fn miller_square_summable_at_i() {
        let cfg = NumericConfig::default();
        let m = miller_minimal(coupled(1.5, 0.0, 1.0), 1000, 64, &cfg).unwrap();
        let v = m.values();
        let head: f64 = v[..500].iter().map(|c| c.norm_sqr()).sum();
        let tail: f64 = v[500..=1000].iter().map(|c| c.norm_sqr()).sum();
        assert!(tail < 1e-12 * head);
    }

    #[test]
    fn miller_flags_missing_minimal() {
        let cfg = NumericConfig::default();
        let m = miller_minimal(coupled(0.5, 0.25, 0.0), 200, 64, &cfg).unwrap();
        assert!(!m.minimal);
    }

    #[test]
    fn identity_real_lambda_trivial() {
        let s = forward_solve(coupled(0.8, 0.3, 0.0), Complex64::new(1.0, 0.0), 100).unwrap();
        let chk = weighted_sum_identity_check(&s, 99).unwrap();
        assert_eq!(chk.weighted_sum, 0.0);
        assert_eq!(chk.boundary_flux, 0.0);
        assert_eq!(chk.relative_residual, 0.0);
    }

    #[test]
    fn identity_minimal_at_i() {
        let cfg = NumericConfig::default();
        for mu in [0.7, 1.0, 1.3] {
            let m = miller_minimal(coupled(mu, 0.0, 1.0), 3000, 64, &cfg).unwrap();
            let early = weighted_sum_identity_check(&m, 100).unwrap();
            let late = weighted_sum_identity_check(&m, 2999).unwrap();
            assert!(late.relative_residual < 1e-8, "mu={mu}");
            assert!(late.boundary_flux.abs() < early.boundary_flux.abs());
        }
    }
}
