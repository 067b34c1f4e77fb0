//! Spectral conclusions for the full model: eigenvalues below `1/2`, counting
//! asymptotics, the predicted a.c. multiplicity and numerical probes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::NumericConfig;
use crate::error::{Error, Result};
use crate::jacobi::{build, OperatorKind, TridiagonalOperator};
use crate::recurrence::{minimal_head, Recurrence};
use crate::special::{d_entry, y_entry, ModelParameters, Regime, SpectralPoint};
use crate::weyl::{tau_density_stripped, DEFAULT_LADDER};

/// Distance kept from the ends of `(0, 1/2)` in the eigenvalue scan.
pub const DEFAULT_DELTA: f64 = 1e-6;
/// Largest number of truncation doublings tried before declaring instability.
pub const MAX_DOUBLINGS: usize = 4;
/// Tail mass (last quarter of the truncation) below which a null vector counts as localized.
pub const LOCALIZATION_TOL: f64 = 1e-8;
/// Width to which eigenvalues are bracketed.
const ROOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSpectrumResult {
    pub params: ModelParameters,
    /// Eigenvalues from the counting method, ascending, inside `(0, 1/2)`.
    pub eigenvalues: Vec<f64>,
    pub count: usize,
    /// Truncation at which the count stabilized.
    pub truncation: usize,
    /// Eigenvalues from the shooting method.
    pub shooting_eigenvalues: Vec<f64>,
    /// `max |E_count - E_shoot|` over matched pairs; infinite if the counts differ.
    pub method_agreement: f64,
    /// Sturm-count jumps over the scan, before the localization filter.
    pub raw_jumps: usize,
    /// Whether `count_below(J(E), 0)` was non-decreasing on the scan grid.
    pub monotone: bool,
    /// Truncations tried and the filtered counts found at each.
    pub sizes: Vec<usize>,
    pub counts: Vec<usize>,
}

impl PointSpectrumResult {
    pub fn methods_agree(&self, tol: f64) -> bool {
        self.count == self.shooting_eigenvalues.len() && self.method_agreement <= tol
    }
}

fn coupled_at(mu: f64, e: f64, size: usize) -> Result<TridiagonalOperator> {
    build(OperatorKind::JLambda { mu, lambda: SpectralPoint::real(e)? }, 0, size)
}

fn count_at(mu: f64, e: f64, size: usize) -> Result<usize> {
    coupled_at(mu, e, size)?.count_below(0.0)
}

/// Locations of all Sturm-count jumps in `(a, b)`, one entry per unit jump.
fn locate_jumps(mu: f64, size: usize, a: f64, ca: usize, b: f64, cb: usize, out: &mut Vec<f64>) -> Result<()> {
    if ca == cb {
        return Ok(());
    }
    if b - a <= ROOT_TOL {
        let mid = 0.5 * (a + b);
        out.extend(std::iter::repeat(mid).take(cb.abs_diff(ca)));
        return Ok(());
    }
    let m = 0.5 * (a + b);
    let cm = count_at(mu, m, size)?;
    locate_jumps(mu, size, a, ca, m, cm, out)?;
    locate_jumps(mu, size, m, cm, b, cb, out)
}

/// Fraction of the squared norm of the approximate null vector carried by the last quarter.
fn tail_mass(op: &TridiagonalOperator) -> Result<f64> {
    let n = op.size;
    let mut x = vec![Complex64::new(1.0, 0.0); n];
    for _ in 0..4 {
        x = match op.solve(&x) {
            Ok(s) => s.x,
            // An exactly singular truncation already sits on the eigenvalue.
            Err(Error::SingularMatrix { .. }) => {
                let nudged = coupled_perturbed(op)?;
                nudged.solve(&x)?.x
            }
            Err(e) => return Err(e),
        };
        let s = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        x.iter_mut().for_each(|c| *c /= s);
    }
    let total: f64 = x.iter().map(|c| c.norm_sqr()).sum();
    let tail: f64 = x[n - n / 4..].iter().map(|c| c.norm_sqr()).sum();
    Ok(tail / total)
}

fn coupled_perturbed(op: &TridiagonalOperator) -> Result<TridiagonalOperator> {
    match op.kind {
        OperatorKind::JLambda { mu, lambda } => coupled_at(mu, lambda.re() * (1.0 + 1e-13) + 1e-15, op.size),
        OperatorKind::J0 { .. } => Ok(*op),
    }
}

struct CountingOutcome {
    eigenvalues: Vec<f64>,
    raw_jumps: usize,
    monotone: bool,
}

fn counting_method(mu: f64, size: usize, grid: usize, delta: f64) -> Result<CountingOutcome> {
    let (lo, hi) = (delta, 0.5 - delta);
    let points: Vec<f64> = (0..=grid).map(|i| lo + (hi - lo) * i as f64 / grid as f64).collect();
    let counts: Vec<usize> = points.iter().map(|&e| count_at(mu, e, size)).collect::<Result<_>>()?;
    let monotone = counts.windows(2).all(|w| w[0] <= w[1]);
    let mut jumps = Vec::new();
    for i in 0..grid {
        locate_jumps(mu, size, points[i], counts[i], points[i + 1], counts[i + 1], &mut jumps)?;
    }
    let raw_jumps = jumps.len();
    let mut eigenvalues = Vec::new();
    for e in jumps {
        if tail_mass(&coupled_at(mu, e, size)?)? < LOCALIZATION_TOL {
            eigenvalues.push(e);
        }
    }
    Ok(CountingOutcome { eigenvalues, raw_jumps, monotone })
}

/// Boundary defect of the minimal solution, `(2 mu y_0 C(0) + d_1 C(1)) / |C|`.
fn shooting_defect(mu: f64, e: f64, start: usize) -> Result<Option<f64>> {
    let lambda = SpectralPoint::real(e)?;
    let rec = Recurrence::Coupled { mu, lambda };
    let y0 = y_entry(0, &lambda)?;
    Ok(minimal_head(&rec, start)?.map(|(c0, c1)| (2.0 * mu * y0 * c0 + d_entry(1) * c1).re))
}

fn shooting_method(mu: f64, start: usize, grid: usize, delta: f64) -> Result<Vec<f64>> {
    if Regime::of(mu) != Regime::SuperCritical {
        // Real E below the cuts has no minimal solution when mu <= 1.
        return Ok(Vec::new());
    }
    let (lo, hi) = (delta, 0.5 - delta);
    let points: Vec<f64> = (0..=grid).map(|i| lo + (hi - lo) * i as f64 / grid as f64).collect();
    let mut values = Vec::with_capacity(points.len());
    for &e in &points {
        values.push(shooting_defect(mu, e, start)?.unwrap_or(f64::NAN));
    }
    let mut roots = Vec::new();
    for i in 0..grid {
        let (mut a, mut b) = (points[i], points[i + 1]);
        let (mut fa, fb) = (values[i], values[i + 1]);
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if !(fa * fb < 0.0) {
            continue;
        }
        while b - a > ROOT_TOL {
            let m = 0.5 * (a + b);
            let fm = shooting_defect(mu, m, start)?.unwrap_or(f64::NAN);
            if fm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if fa * fm < 0.0 {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        roots.push(0.5 * (a + b));
    }
    Ok(roots)
}

/// Eigenvalues of the model below `1/2`, from `J(E; mu) C = 0` with `C` in `l^2`.
///
/// Method (a) locates jumps of the Sturm count of the truncated `J(E; mu)` and
/// keeps those whose null vector is localized; the truncation is doubled until
/// the count repeats. Method (b) shoots with the minimal solution of the
/// recurrence and finds sign changes of the row-0 defect on `grid` points.
pub fn point_spectrum_with(
    params: ModelParameters,
    size: usize,
    grid: usize,
    delta: f64,
) -> Result<PointSpectrumResult> {
    if size < 8 || grid < 2 {
        return Err(Error::Domain("point_spectrum needs N >= 8 and grid >= 2".into()));
    }
    if !(delta > 0.0 && delta < 0.25) {
        return Err(Error::Domain(format!("delta must lie in (0, 1/4), got {delta}")));
    }
    let mu = params.mu;
    let mut sizes = Vec::new();
    let mut counts = Vec::new();
    let mut outcomes = Vec::new();
    let mut n = size;
    for _ in 0..=MAX_DOUBLINGS {
        let outcome = counting_method(mu, n, grid, delta)?;
        sizes.push(n);
        counts.push(outcome.eigenvalues.len());
        outcomes.push(outcome);
        let k = counts.len();
        if k >= 2 && counts[k - 1] == counts[k - 2] {
            break;
        }
        n *= 2;
    }
    let k = counts.len();
    if k < 2 || counts[k - 1] != counts[k - 2] {
        return Err(Error::TruncationUnstable { sizes, counts });
    }
    let last = outcomes.pop().expect("at least two truncations");
    let monotone = last.monotone && outcomes.iter().all(|o| o.monotone);
    let shooting = shooting_method(mu, *sizes.last().expect("nonempty"), grid, delta)?;
    let method_agreement = if shooting.len() == last.eigenvalues.len() {
        last.eigenvalues.iter().zip(&shooting).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(PointSpectrumResult {
        params,
        count: last.eigenvalues.len(),
        eigenvalues: last.eigenvalues,
        truncation: *sizes.last().expect("nonempty"),
        shooting_eigenvalues: shooting,
        method_agreement,
        raw_jumps: last.raw_jumps,
        monotone,
        sizes,
        counts,
    })
}

pub fn point_spectrum(params: ModelParameters, size: usize, grid: usize) -> Result<PointSpectrumResult> {
    point_spectrum_with(params, size, grid, DEFAULT_DELTA)
}

/// Leading-order eigenvalue count below `1/2`, `1 / (4 sqrt(2 (mu - 1)))`.
pub fn counting_asymptotics(params: &ModelParameters) -> Result<f64> {
    if !(params.mu > 1.0) || params.regime() == Regime::Critical {
        return Err(Error::Domain(format!("counting asymptotics need mu > 1, got {}", params.mu)));
    }
    Ok(1.0 / (4.0 * (2.0 * (params.mu - 1.0)).sqrt()))
}

/// Predicted a.c. multiplicity at energy `E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiplicityMap {
    /// Multiplicity of the unperturbed operator: `bonds * n` on `(n - 1/2, n + 1/2)`, 0 below `1/2`.
    pub base: u32,
    /// 1 when the Jacobi branch contributes.
    pub extra: u32,
    /// `base + extra`; `None` at a boundary point.
    pub total: Option<u32>,
    pub boundary_flag: bool,
}

pub fn predicted_multiplicity(energy: f64, params: &ModelParameters) -> MultiplicityMap {
    let regime = params.regime();
    let shifted = energy - 0.5;
    let at_threshold = shifted >= 0.0 && shifted.fract() == 0.0;
    let at_edge = regime == Regime::Critical && energy == 0.0;
    let base = if energy < 0.5 { 0 } else { params.bonds * (energy + 0.5).floor() as u32 };
    let extra = match regime {
        Regime::SubCritical => 1,
        Regime::Critical => u32::from(energy > 0.0),
        Regime::SuperCritical => 0,
    };
    let boundary_flag = at_threshold || at_edge;
    MultiplicityMap {
        base,
        extra,
        total: if boundary_flag { None } else { Some(base + extra) },
        boundary_flag,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficiencyReport {
    pub mu: f64,
    /// `(N, sigma_min)` of the truncated `J(i; mu)`.
    pub rows: Vec<(usize, f64)>,
    pub floor: f64,
    pub pass: bool,
}

/// `sigma_min` of the largest truncation must stay within this factor of the largest value seen.
pub const DEFICIENCY_RETENTION: f64 = 0.5;

/// Smallest singular values of `J(i; mu)` truncations; passes when they do not drift to zero.
pub fn deficiency_probe(mu: f64, sizes: &[usize], config: &NumericConfig) -> Result<DeficiencyReport> {
    if sizes.len() < 2 {
        return Err(Error::Domain("deficiency probe needs at least two truncations".into()));
    }
    let lambda = SpectralPoint::new(0.0, 1.0)?;
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let op = build(OperatorKind::JLambda { mu, lambda }, 0, n)?;
        rows.push((n, op.smallest_singular_value(config)?));
    }
    let floor = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let peak = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let last = rows.last().expect("nonempty").1;
    let pass = floor > 0.0 && last >= DEFICIENCY_RETENTION * peak;
    Ok(DeficiencyReport { mu, rows, floor, pass })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormDecayReport {
    pub mu: f64,
    /// `(tau, |J(-i tau; mu)^{-1} e0|)`.
    pub rows: Vec<(f64, f64)>,
    /// Least-squares slope of `log |x|` against `log tau`.
    pub slope: f64,
}

pub fn norm_decay_probe(mu: f64, taus: &[f64], size: usize) -> Result<NormDecayReport> {
    if taus.len() < 2 {
        return Err(Error::Domain("norm decay probe needs at least two values of tau".into()));
    }
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        if !(tau > 0.0) {
            return Err(Error::Domain(format!("tau must be positive, got {tau}")));
        }
        let op = build(OperatorKind::JLambda { mu, lambda: SpectralPoint::new(0.0, -tau)? }, 0, size)?;
        let mut e0 = vec![Complex64::new(0.0, 0.0); size];
        e0[0] = Complex64::new(1.0, 0.0);
        let x = op.solve(&e0)?.x;
        rows.push((tau, x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()));
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|(t, v)| (t.ln(), v.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(NormDecayReport { mu, rows, slope: sxy / sxx })
}

/// Density floor above which a trusted estimate counts as positive.
pub const POSITIVITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrippedRow {
    pub energy: f64,
    pub tau_full: f64,
    pub tau_stripped: f64,
    pub positive_full: bool,
    pub positive_stripped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrippedReport {
    pub mu: f64,
    pub strip: usize,
    pub rows: Vec<StrippedRow>,
    pub pattern_match: bool,
    /// For `mu > 1`: whether the lowest eigenvalues of the stripped operator converge in `N`.
    pub discrete_converged: Option<bool>,
    pub pass: bool,
}

/// Compares a.c. positivity of `J0(mu)` with that of `J0(mu)` without its first `m` rows.
pub fn stripped_spectrum_check(mu: f64, strip: usize, energies: &[f64], config: &NumericConfig) -> Result<StrippedReport> {
    if strip > 8 {
        return Err(Error::Domain(format!("strip {strip} exceeds 8")));
    }
    if energies.is_empty() {
        return Err(Error::Domain("energy grid is empty".into()));
    }
    let positive = |t: &crate::weyl::DensityEstimate| t.trusted && t.tau > POSITIVITY_FLOOR;
    let mut rows = Vec::with_capacity(energies.len());
    for &e in energies {
        let full = tau_density_stripped(mu, 0, e, &DEFAULT_LADDER, config)?;
        let cut = tau_density_stripped(mu, strip, e, &DEFAULT_LADDER, config)?;
        rows.push(StrippedRow {
            energy: e,
            tau_full: full.tau,
            tau_stripped: cut.tau,
            positive_full: positive(&full),
            positive_stripped: positive(&cut),
        });
    }
    let pattern_match = rows.iter().all(|r| r.positive_full == r.positive_stripped);
    let discrete_converged = if Regime::of(mu) == Regime::SuperCritical {
        let a = build(OperatorKind::J0 { mu }, strip, 1024)?.lowest_eigenvalues(10, config)?;
        let b = build(OperatorKind::J0 { mu }, strip, 2048)?.lowest_eigenvalues(10, config)?;
        Some(a.values.iter().zip(&b.values).all(|(x, y)| (x - y).abs() < 1e-8))
    } else {
        None
    };
    let pass = pattern_match && discrete_converged.unwrap_or(true);
    Ok(StrippedReport { mu, strip, rows, pattern_match, discrete_converged, pass })
}
