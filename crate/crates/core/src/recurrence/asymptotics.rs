//! Leading-order and tail asymptotics of the three-term recurrences.
//!
//! Every recurrence handled here has the normalized form
//! `C(n+1) + p1(n) C(n) + p2(n) C(n-1) = 0` with `p1, p2` expandable in `1/n`.
//! The ratio `r(n) = C(n+1)/C(n)` of a solution then obeys the Riccati relation
//! `r(n) r(n-1) + p1(n) r(n-1) + p2(n) = 0`, which is solved as a formal power
//! series in `t`, `1/n = t^q` (`q = 2` in the critical double-root case).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::special::{Regime, SpectralPoint};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Truncated power series with complex coefficients.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Series(pub(crate) Vec<Complex64>);

impl Series {
    fn zeros(len: usize) -> Self {
        Series(vec![ZERO; len])
    }

    fn constant(c: Complex64, len: usize) -> Self {
        let mut s = Self::zeros(len);
        s.0[0] = c;
        s
    }

    fn len(&self) -> usize {
        self.0.len()
    }

    fn add(&self, other: &Series) -> Series {
        Series(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    fn scale(&self, c: Complex64) -> Series {
        Series(self.0.iter().map(|a| a * c).collect())
    }

    fn mul(&self, other: &Series) -> Series {
        let len = self.len();
        let mut out = Self::zeros(len);
        for (i, a) in self.0.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            for (j, b) in other.0.iter().enumerate().take(len - i) {
                out.0[i + j] += a * b;
            }
        }
        out
    }

    /// `self^p` for a series with nonzero constant term, principal branch at the constant.
    fn powc(&self, p: Complex64) -> Series {
        let a0 = self.0[0];
        let u: Vec<Complex64> = self.0.iter().map(|c| c / a0).collect();
        let len = self.len();
        let mut g = vec![ZERO; len];
        g[0] = ONE;
        for k in 1..len {
            let mut acc = ZERO;
            for j in 1..=k {
                acc += (p * j as f64 - (k - j) as f64) * u[j] * g[k - j];
            }
            g[k] = acc / k as f64;
        }
        Series(g).scale(a0.powc(p))
    }

    fn powf(&self, p: f64) -> Series {
        self.powc(Complex64::new(p, 0.0))
    }

    fn div(&self, other: &Series) -> Series {
        self.mul(&other.powf(-1.0))
    }

    /// Substitutes `x = t^q` into a series in `x`, keeping `len` coefficients in `t`.
    fn spread(&self, q: usize, len: usize) -> Series {
        let mut out = Self::zeros(len);
        for (k, c) in self.0.iter().enumerate() {
            if k * q < len {
                out.0[k * q] = *c;
            }
        }
        out
    }
}

/// Spectral data entering the diagonal of the recurrence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum TailKind {
    /// Diagonal `(2n+1) mu - z`.
    Free { z: Complex64 },
    /// Diagonal `2 mu y_n(Lambda) - shift`.
    Coupled { lambda: Complex64, shift: Complex64 },
}

impl TailKind {
    fn upper(&self) -> bool {
        match *self {
            TailKind::Free { z } => z.im >= 0.0,
            TailKind::Coupled { lambda, shift } => {
                lambda.im > 0.0 || (lambda.im == 0.0 && shift.im >= 0.0)
            }
        }
    }
}

/// One formal solution branch `r(n) = sum_k c_k n^{-k/q}`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TailSeries {
    pub(crate) c: Vec<Complex64>,
    pub(crate) q: usize,
}

impl TailSeries {
    /// Sums the series at `n`, stopping at the smallest term (optimal truncation).
    pub(crate) fn ratio(&self, n: usize) -> Complex64 {
        let t = (n as f64).powf(-1.0 / self.q as f64);
        let mut sum = self.c[0];
        let mut tk = 1.0;
        let mut last = f64::INFINITY;
        for (k, ck) in self.c.iter().enumerate().skip(1) {
            tk *= t;
            let term = ck * tk;
            let size = term.norm();
            if k > 1 && size > last {
                break;
            }
            sum += term;
            last = size;
        }
        sum
    }
}

/// Both formal branches, which of them is minimal, and which one a tie defaults to.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TailSet {
    pub(crate) branches: [TailSeries; 2],
    pub(crate) minimal: Option<usize>,
    pub(crate) preferred: usize,
}

impl TailSet {
    pub(crate) fn preferred_ratio(&self, n: usize) -> Complex64 {
        self.branches[self.preferred].ratio(n)
    }
}

const TERMS_Q1: usize = 14;
const TERMS_Q2: usize = 20;

struct Coefficients {
    p1: Series,
    p2: Series,
    shifts: Vec<Series>,
    q: usize,
}

fn coefficients(mu: f64, kind: TailKind, q: usize, len: usize) -> Coefficients {
    // All series are first built in x = 1/n with `len` terms, then spread to t.
    let x = {
        let mut s = Series::zeros(len);
        if len > 1 {
            s.0[1] = ONE;
        }
        s
    };
    let one = Series::constant(ONE, len);
    let quarter = Complex64::new(0.25, 0.0);

    // d_n / n = (1 - x^2/4)^{1/4}
    let dn = one.add(&x.mul(&x).scale(-quarter)).powf(0.25);
    // d_{n+1} / n = (1 + x)(1 - w^2/4)^{1/4}, w = 1/(n+1) = x/(1+x)
    let one_plus_x = one.add(&x);
    let w = x.div(&one_plus_x);
    let dn1 = one_plus_x.mul(&one.add(&w.mul(&w).scale(-quarter)).powf(0.25));

    let diag = match kind {
        TailKind::Free { z } => {
            let mut s = Series::constant(Complex64::new(2.0 * mu, 0.0), len);
            if len > 1 {
                s.0[1] = Complex64::new(mu, 0.0) - z;
            }
            s
        }
        TailKind::Coupled { lambda, shift } => {
            let a = one.add(&x.scale(Complex64::new(0.5, 0.0)));
            let b = one.add(&x.scale(Complex64::new(0.5, 0.0) - lambda));
            a.mul(&b).powf(0.5).scale(Complex64::new(2.0 * mu, 0.0)).add(&x.scale(-shift))
        }
    };

    let p1 = diag.div(&dn1);
    let p2 = dn.div(&dn1);
    let tlen = len * q;
    let one_minus_x = one.add(&x.scale(-ONE));
    let shifts = (0..tlen)
        .map(|k| one_minus_x.powf(-(k as f64) / q as f64).spread(q, tlen))
        .collect();
    Coefficients { p1: p1.spread(q, tlen), p2: p2.spread(q, tlen), shifts, q }
}

impl Coefficients {
    /// Residual series of the Riccati relation for the trial coefficients `c`.
    fn residual(&self, c: &[Complex64]) -> Series {
        let len = self.p1.len();
        let rn = Series(c.to_vec());
        let mut rprev = Series::zeros(len);
        for (k, ck) in c.iter().enumerate() {
            if *ck == ZERO {
                continue;
            }
            let mut term = self.shifts[k].scale(*ck);
            term.0.rotate_right(k);
            for v in term.0.iter_mut().take(k) {
                *v = ZERO;
            }
            rprev = rprev.add(&term);
        }
        rn.mul(&rprev).add(&self.p1.mul(&rprev)).add(&self.p2)
    }
}

fn solve_q1(coef: &Coefficients, lambda: Complex64) -> TailSeries {
    let len = coef.p1.len();
    let a0 = coef.p1.0[0];
    let pivot = 2.0 * lambda + a0;
    let mut c = vec![ZERO; len];
    c[0] = lambda;
    for j in 1..len {
        let r = coef.residual(&c);
        c[j] = -r.0[j] / pivot;
    }
    TailSeries { c, q: coef.q }
}

fn solve_q2(coef: &Coefficients, c1: Complex64) -> TailSeries {
    let len = coef.p1.len();
    let mut c = vec![ZERO; len];
    c[0] = -ONE;
    c[1] = c1;
    for j in 2..len - 1 {
        let r = coef.residual(&c);
        c[j] = -r.0[j + 1] / (2.0 * c1);
    }
    c.truncate(len - 1);
    TailSeries { c, q: coef.q }
}

fn near(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * (a.abs() + b.abs()).max(1e-300)
}

/// Builds both branches of the tail for the recurrence with parameter `mu`.
pub(crate) fn tail_set(mu: f64, kind: TailKind) -> TailSet {
    let upper = kind.upper();
    match Regime::of(mu) {
        Regime::Critical => {
            let coef = coefficients(1.0, kind, 2, TERMS_Q2 / 2);
            let mut probe = vec![ZERO; coef.p1.len()];
            probe[0] = -ONE;
            let r2 = coef.residual(&probe).0[2];
            let c1 = (-r2).sqrt();
            if c1.norm() < 1e-14 {
                let flat = TailSeries { c: vec![-ONE], q: 2 };
                return TailSet { branches: [flat.clone(), flat], minimal: None, preferred: 0 };
            }
            let branches = [solve_q2(&coef, c1), solve_q2(&coef, -c1)];
            // Decay of |C| is governed by Re(c1 / c0) = -Re(c1): larger Re c1 decays.
            let (re0, re1) = (c1.re, -c1.re);
            let (minimal, preferred) = if near(re0, re1) {
                let pick = if (c1.im < 0.0) == upper { 0 } else { 1 };
                (None, pick)
            } else if re0 > re1 {
                (Some(0), 0)
            } else {
                (Some(1), 1)
            };
            TailSet { branches, minimal, preferred }
        }
        _ => {
            let coef = coefficients(mu, kind, 1, TERMS_Q1);
            let disc = Complex64::new(mu * mu - 1.0, 0.0).sqrt();
            let roots = [Complex64::new(-mu, 0.0) + disc, Complex64::new(-mu, 0.0) - disc];
            let branches = [solve_q1(&coef, roots[0]), solve_q1(&coef, roots[1])];
            let (m0, m1) = (roots[0].norm(), roots[1].norm());
            let (minimal, preferred) = if !near(m0, m1) {
                let i = if m0 < m1 { 0 } else { 1 };
                (Some(i), i)
            } else {
                let d0 = (branches[0].c[1] / branches[0].c[0]).re;
                let d1 = (branches[1].c[1] / branches[1].c[0]).re;
                if near(d0, d1) || (d0 - d1).abs() < 1e-13 {
                    let pick = if (roots[0].im < 0.0) == upper { 0 } else { 1 };
                    (None, pick)
                } else if d0 < d1 {
                    (Some(0), 0)
                } else {
                    (Some(1), 1)
                }
            };
            TailSet { branches, minimal, preferred }
        }
    }
}

/// Which recurrence an asymptotic prediction refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AsymptoticTarget {
    /// The coupled recurrence with diagonal `2 mu y_n(Lambda)`.
    Coupled(SpectralPoint),
    /// The free recurrence with diagonal `(2n+1) mu - z`, equivalently `Lambda = z/mu`.
    Free(Complex64),
}

impl AsymptoticTarget {
    pub(crate) fn kind(&self) -> TailKind {
        match *self {
            AsymptoticTarget::Coupled(l) => TailKind::Coupled { lambda: l.value(), shift: ZERO },
            AsymptoticTarget::Free(z) => TailKind::Free { z },
        }
    }
}

/// Leading behaviour of one solution branch.
///
/// Off the critical value, `C(n) ~ ratio^n n^power`. At `mu = 1`,
/// `C(n) ~ ratio^n exp(sqrt_rate sqrt(n)) n^power` with `ratio = -1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub ratio: Complex64,
    pub sqrt_rate: Complex64,
    pub power: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPrediction {
    pub regime: Regime,
    pub branches: [Branch; 2],
    /// Index of the minimal branch; `None` when both branches have equal size.
    pub minimal: Option<usize>,
}

impl AsymptoticPrediction {
    /// Geometric ratio off the critical value, `sqrt n` coefficient at it.
    pub fn ratio_or_rate(&self, branch: usize) -> Complex64 {
        let b = &self.branches[branch];
        match self.regime {
            Regime::Critical => b.sqrt_rate,
            _ => b.ratio,
        }
    }

    pub fn power(&self, branch: usize) -> Complex64 {
        self.branches[branch].power
    }

    pub fn minimal_branch(&self) -> Option<&Branch> {
        self.minimal.map(|i| &self.branches[i])
    }

    pub fn dominant_branch(&self) -> Option<&Branch> {
        self.minimal.map(|i| &self.branches[1 - i])
    }
}

fn leading(series: &TailSeries) -> Branch {
    let c = &series.c;
    if series.q == 1 {
        Branch { ratio: c[0], sqrt_rate: ZERO, power: c[1] / c[0] }
    } else {
        // log(r / c0) = -c1 t - (c2 + c1^2/2) t^2 + ...  with c0 = -1.
        let c1 = c.get(1).copied().unwrap_or(ZERO);
        let c2 = c.get(2).copied().unwrap_or(ZERO);
        Branch { ratio: c[0], sqrt_rate: -2.0 * c1, power: -(c2 + 0.5 * c1 * c1) }
    }
}

/// Leading-order Birkhoff–Adams asymptotics for the given recurrence.
pub fn predict_asymptotics(mu: f64, target: AsymptoticTarget) -> AsymptoticPrediction {
    let set = tail_set(mu, target.kind());
    AsymptoticPrediction {
        regime: Regime::of(mu),
        branches: [leading(&set.branches[0]), leading(&set.branches[1])],
        minimal: set.minimal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn series_power_matches_binomial() {
        let s = Series(vec![c(1.0, 0.0), c(1.0, 0.0), ZERO, ZERO, ZERO]);
        let g = s.powf(0.5);
        let want = [1.0, 0.5, -0.125, 0.0625, -0.0390625];
        for (a, b) in g.0.iter().zip(want) {
            assert_relative_eq!(a.re, b, epsilon = 1e-15);
        }
        let inv = s.powf(-1.0);
        for (k, a) in inv.0.iter().enumerate() {
            assert_relative_eq!(a.re, if k % 2 == 0 { 1.0 } else { -1.0 }, epsilon = 1e-15);
        }
    }

    // Closed-form leading exponent d = (a1 lambda + b1) / (a0 lambda + 2 b0).
    fn closed_form_power(mu: f64, a1: Complex64, lambda: Complex64) -> Complex64 {
        (a1 * lambda - 1.0) / (2.0 * mu * lambda + 2.0)
    }

    #[test]
    fn supercritical_branches() {
        let lam = SpectralPoint::real(0.25).unwrap();
        let p = predict_asymptotics(2.0, AsymptoticTarget::Coupled(lam));
        assert_eq!(p.regime, Regime::SuperCritical);
        let m = p.minimal_branch().unwrap();
        assert_relative_eq!(m.ratio.re, -2.0 + 3f64.sqrt(), epsilon = 1e-14);
        let prod = p.branches[0].ratio * p.branches[1].ratio;
        assert_relative_eq!(prod.re, 1.0, epsilon = 1e-14);
        for b in &p.branches {
            let want = closed_form_power(2.0, c(-2.0 * 1.25, 0.0), b.ratio);
            assert_relative_eq!(b.power.re, want.re, epsilon = 1e-12);
        }
        // -1/2 + Lambda mu / (2 sqrt(mu^2 - 1)) for the decaying branch.
        assert_relative_eq!(m.power.re, -0.5 + 0.25 * 2.0 / (2.0 * 3f64.sqrt()), epsilon = 1e-12);
    }

    #[test]
    fn subcritical_real_tie() {
        let lam = SpectralPoint::real(0.25).unwrap();
        let p = predict_asymptotics(0.5, AsymptoticTarget::Coupled(lam));
        assert_eq!(p.minimal, None);
        for b in &p.branches {
            assert_relative_eq!(b.ratio.norm(), 1.0, epsilon = 1e-14);
            assert_relative_eq!(b.power.re, -0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn subcritical_at_i() {
        for mu in [0.3f64, 0.5, 0.8] {
            let s = (1.0 - mu * mu).sqrt();
            let lam = SpectralPoint::new(0.0, 1.0).unwrap();
            let p = predict_asymptotics(mu, AsymptoticTarget::Coupled(lam));
            let m = p.minimal.expect("complex Lambda has a minimal solution");
            assert_relative_eq!(2.0 * p.power(m).re, -1.0 - mu / s, epsilon = 1e-12);
            assert_relative_eq!(2.0 * p.power(1 - m).re, -1.0 + mu / s, epsilon = 1e-12);
            assert!(p.branches[m].ratio.im < 0.0);
        }
    }

    #[test]
    fn critical_rate() {
        let lam = SpectralPoint::real(-1.0).unwrap();
        let p = predict_asymptotics(1.0, AsymptoticTarget::Coupled(lam));
        assert_eq!(p.regime, Regime::Critical);
        let m = p.minimal.unwrap();
        assert_relative_eq!(p.ratio_or_rate(m).re, -2.0, epsilon = 1e-12);
        assert_relative_eq!(p.ratio_or_rate(1 - m).re, 2.0, epsilon = 1e-12);
        assert_relative_eq!(p.power(m).re, -0.25, epsilon = 1e-12);
        assert_relative_eq!(p.power(1 - m).re, -0.25, epsilon = 1e-12);
    }

    #[test]
    fn free_maps_to_coupled_lambda() {
        // Leading data of the free recurrence at z equal the coupled ones at Lambda = z/mu.
        for (mu, z) in [(2.0, c(0.6, 0.0)), (0.5, c(0.3, 0.1)), (1.5, c(-1.0, 2.0))] {
            let free = predict_asymptotics(mu, AsymptoticTarget::Free(z));
            for b in &free.branches {
                let want = closed_form_power(mu, -(mu + z), b.ratio);
                assert_relative_eq!(b.power.re, want.re, epsilon = 1e-12);
                assert_relative_eq!(b.power.im, want.im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn tail_ratio_satisfies_riccati() {
        // Exact Riccati defect at a moderate index using direct coefficients.
        use crate::special::{d_entry, y_entry};
        let cases = [
            (2.0, SpectralPoint::real(0.25).unwrap()),
            (0.5, SpectralPoint::new(0.0, 1.0).unwrap()),
            (1.0, SpectralPoint::real(-1.0).unwrap()),
            (0.8, SpectralPoint::new(-1.0, 0.5).unwrap()),
        ];
        for (mu, lam) in cases {
            let set = tail_set(mu, TailKind::Coupled { lambda: lam.value(), shift: ZERO });
            let n = 4000;
            let r = |k: usize| set.preferred_ratio(k);
            let p1 = 2.0 * mu * y_entry(n, &lam).unwrap() / d_entry(n + 1);
            let p2 = d_entry(n) / d_entry(n + 1);
            let defect = r(n) * r(n - 1) + p1 * r(n - 1) + p2;
            assert!(defect.norm() < 1e-13, "mu={mu} defect={defect}");
        }
    }
}
