//! Truncated Jacobi operators `J0(mu)`, `J(Lambda; mu)` and their linear algebra.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::NumericConfig;
use crate::error::{Error, Result};
use crate::recurrence::asymptotics::{tail_set, TailKind};
use crate::special::{d_entry, y_entry, SpectralPoint};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OperatorKind {
    /// Diagonal `(2n+1) mu`.
    J0 { mu: f64 },
    /// Diagonal `2 mu y_n(Lambda)`.
    JLambda { mu: f64, lambda: SpectralPoint },
}

impl OperatorKind {
    pub fn mu(&self) -> f64 {
        match *self {
            OperatorKind::J0 { mu } | OperatorKind::JLambda { mu, .. } => mu,
        }
    }
}

/// How the last row of a truncation is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// Plain cutoff: the coupling `d(strip+N)` is dropped.
    Dirichlet,
    /// The dropped coupling is replaced by the minimal-solution tail ratio,
    /// `d(strip+N) C(strip+N) = d(strip+N) r(strip+N-1) C(strip+N-1)`.
    /// Only linear solves use it; eigenvalue routines always use the plain cutoff.
    Asymptotic,
}

/// `N x N` block of a Jacobi operator starting at row `strip`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TridiagonalOperator {
    pub kind: OperatorKind,
    pub strip: usize,
    pub size: usize,
    pub boundary: Boundary,
}

/// Eigenvalues found inside a search interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueBatch {
    pub values: Vec<f64>,
    pub truncation: usize,
    pub residual_bound: f64,
}

/// Solution of a linear system with its relative residual `|A x - b| / |b|`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolve {
    pub x: Vec<Complex64>,
    pub relative_residual: f64,
}

pub fn build(kind: OperatorKind, strip: usize, size: usize) -> Result<TridiagonalOperator> {
    if size == 0 {
        return Err(Error::Domain("truncation size must be at least 1".into()));
    }
    let mu = kind.mu();
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    if let OperatorKind::JLambda { lambda, .. } = kind {
        // Admissibility is monotone in n, so the top row decides.
        y_entry(strip, &lambda)?;
    }
    Ok(TridiagonalOperator { kind, strip, size, boundary: Boundary::Dirichlet })
}

impl TridiagonalOperator {
    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    /// Diagonal entry of row `k` (local index).
    pub fn diagonal(&self, k: usize) -> Complex64 {
        let n = self.strip + k;
        match self.kind {
            OperatorKind::J0 { mu } => Complex64::new((2 * n + 1) as f64 * mu, 0.0),
            OperatorKind::JLambda { mu, lambda } => {
                2.0 * mu * y_entry(n, &lambda).expect("admissibility checked at build")
            }
        }
    }

    /// Coupling between local rows `k-1` and `k`, for `k = 1..N-1`.
    pub fn off_diagonal(&self, k: usize) -> f64 {
        d_entry(self.strip + k)
    }

    pub fn is_real(&self) -> bool {
        match self.kind {
            OperatorKind::J0 { .. } => true,
            OperatorKind::JLambda { lambda, .. } => lambda.is_real(),
        }
    }

    fn tail_kind(&self, z: Complex64) -> TailKind {
        match self.kind {
            OperatorKind::J0 { .. } => TailKind::Free { z },
            OperatorKind::JLambda { lambda, .. } => TailKind::Coupled { lambda: lambda.value(), shift: z },
        }
    }

    /// Diagonal of `op - z`, including the tail closure when requested.
    pub fn shifted_diagonal(&self, z: Complex64) -> Vec<Complex64> {
        let mut diag: Vec<Complex64> = (0..self.size).map(|k| self.diagonal(k) - z).collect();
        if self.boundary == Boundary::Asymptotic {
            let n = self.strip + self.size - 1;
            let tail = tail_set(self.kind.mu(), self.tail_kind(z));
            diag[self.size - 1] += d_entry(n + 1) * tail.preferred_ratio(n.max(1));
        }
        diag
    }

    fn off_diagonals(&self) -> Vec<f64> {
        (1..self.size).map(|k| self.off_diagonal(k)).collect()
    }

    fn real_parts(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if !self.is_real() {
            return Err(Error::NotSymmetric);
        }
        let diag = (0..self.size).map(|k| self.diagonal(k).re).collect();
        let off_sq = (1..self.size).map(|k| self.off_diagonal(k).powi(2)).collect();
        Ok((diag, off_sq))
    }

    /// `(op - z) x` with the same closure as [`Self::solve_shifted`].
    pub fn apply_shifted(&self, z: Complex64, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.size {
            return Err(Error::DimensionMismatch { expected: self.size, found: x.len() });
        }
        let diag = self.shifted_diagonal(z);
        let off = self.off_diagonals();
        Ok(tri_apply(&diag, &off, x))
    }

    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        self.apply_shifted(ZERO, x)
    }

    /// Eigenvalues of the plain truncation inside `[lo, hi)`, ascending.
    pub fn eigenvalues_sym(&self, lo: f64, hi: f64, config: &NumericConfig) -> Result<EigenvalueBatch> {
        let (diag, off_sq) = self.real_parts()?;
        let (glo, ghi) = gershgorin(&diag, &off_sq);
        let lo = lo.max(glo - 1.0);
        let hi = hi.min(ghi + 1.0);
        if !(lo < hi) {
            return Ok(EigenvalueBatch { values: vec![], truncation: self.size, residual_bound: 0.0 });
        }
        let k_lo = sturm_count(&diag, &off_sq, lo);
        let k_hi = sturm_count(&diag, &off_sq, hi);
        let mut values = Vec::with_capacity(k_hi - k_lo);
        let mut width: f64 = 0.0;
        for j in k_lo..k_hi {
            let (a, b) = bisect_index(&diag, &off_sq, j, lo, hi, config.tol_eig);
            values.push(0.5 * (a + b));
            width = width.max(0.5 * (b - a));
        }
        let scale = glo.abs().max(ghi.abs());
        let residual_bound = width + 8.0 * f64::EPSILON * scale * (self.size as f64).sqrt();
        Ok(EigenvalueBatch { values, truncation: self.size, residual_bound })
    }

    /// Lowest `k` eigenvalues of the plain truncation.
    pub fn lowest_eigenvalues(&self, k: usize, config: &NumericConfig) -> Result<EigenvalueBatch> {
        let (diag, off_sq) = self.real_parts()?;
        let (glo, ghi) = gershgorin(&diag, &off_sq);
        let k = k.min(self.size);
        let mut values = Vec::with_capacity(k);
        let mut width: f64 = 0.0;
        for j in 0..k {
            let (a, b) = bisect_index(&diag, &off_sq, j, glo - 1.0, ghi + 1.0, config.tol_eig);
            values.push(0.5 * (a + b));
            width = width.max(0.5 * (b - a));
        }
        let scale = glo.abs().max(ghi.abs());
        let residual_bound = width + 8.0 * f64::EPSILON * scale * (self.size as f64).sqrt();
        Ok(EigenvalueBatch { values, truncation: self.size, residual_bound })
    }

    /// Number of eigenvalues of the plain truncation below `threshold`.
    pub fn count_below(&self, threshold: f64) -> Result<usize> {
        let (diag, off_sq) = self.real_parts()?;
        Ok(sturm_count(&diag, &off_sq, threshold))
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Result<LinearSolve> {
        self.solve_shifted(ZERO, rhs)
    }

    /// Solves `(op - z) x = rhs` by tridiagonal LU with partial pivoting.
    pub fn solve_shifted(&self, z: Complex64, rhs: &[Complex64]) -> Result<LinearSolve> {
        if rhs.len() != self.size {
            return Err(Error::DimensionMismatch { expected: self.size, found: rhs.len() });
        }
        let diag = self.shifted_diagonal(z);
        let off: Vec<Complex64> = self.off_diagonals().into_iter().map(Complex64::from).collect();
        let lu = TriLu::factor(&off, &diag, &off)?;
        let x = lu.solve(rhs);
        let offr = self.off_diagonals();
        let ax = tri_apply(&diag, &offr, &x);
        let rn = norm(rhs);
        let res = norm(&ax.iter().zip(rhs).map(|(a, b)| a - b).collect::<Vec<_>>());
        let relative_residual = if rn > 0.0 { res / rn } else { res };
        Ok(LinearSolve { x, relative_residual })
    }

    /// `((op - z)^{-1} e0, e0)`.
    pub fn resolvent_element_00(&self, z: Complex64) -> Result<Complex64> {
        let mut e0 = vec![ZERO; self.size];
        e0[0] = Complex64::new(1.0, 0.0);
        Ok(self.solve_shifted(z, &e0)?.x[0])
    }

    /// Smallest singular value of the truncation.
    ///
    /// Lanczos iteration on `A^{-1} A^{-H}` (inverse iteration on the normal
    /// equations, Krylov-accelerated), each step costing two tridiagonal solves.
    pub fn smallest_singular_value(&self, config: &NumericConfig) -> Result<f64> {
        let diag = self.shifted_diagonal(ZERO);
        let off: Vec<Complex64> = self.off_diagonals().into_iter().map(Complex64::from).collect();
        let lu = TriLu::factor(&off, &diag, &off)?;
        let n = self.size;
        let apply = |v: &[Complex64]| -> Vec<Complex64> {
            // A^{-H} v = conj(A^{-1} conj v) because A is complex symmetric.
            let conj: Vec<Complex64> = v.iter().map(|c| c.conj()).collect();
            let w: Vec<Complex64> = lu.solve(&conj).into_iter().map(|c| c.conj()).collect();
            lu.solve(&w)
        };
        let start: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(1.0 + 0.5 * ((i as f64) * 0.7548776662466927).fract(), 0.0))
            .collect();
        let top = lanczos_top(apply, start, config.svd_rel_tol * 1e-3, config.svd_max_iter)?;
        Ok(1.0 / top.sqrt())
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

fn tri_apply(diag: &[Complex64], off: &[f64], x: &[Complex64]) -> Vec<Complex64> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut s = diag[i] * x[i];
            if i > 0 {
                s += off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += off[i] * x[i + 1];
            }
            s
        })
        .collect()
}

fn gershgorin(diag: &[f64], off_sq: &[f64]) -> (f64, f64) {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += off_sq[i - 1].sqrt();
        }
        if i + 1 < n {
            r += off_sq[i].sqrt();
        }
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    (lo, hi)
}

/// Number of negative pivots of `T - x I` in the `LDL^T` recursion.
pub(crate) fn sturm_count(diag: &[f64], off_sq: &[f64], x: f64) -> usize {
    let max_off = off_sq.iter().copied().fold(1.0, f64::max);
    let pivmin = f64::MIN_POSITIVE * max_off;
    let mut count = 0;
    let mut q = diag[0] - x;
    if q.abs() < pivmin {
        q = -pivmin;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        q = (diag[i] - x) - off_sq[i - 1] / q;
        if q.abs() < pivmin {
            q = -pivmin;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Bracket `[a, b]` of width at most `tol` around eigenvalue number `j` (0-based).
pub(crate) fn bisect_index(diag: &[f64], off_sq: &[f64], j: usize, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if sturm_count(diag, off_sq, m) > j {
            b = m;
        } else {
            a = m;
        }
    }
    (a, b)
}

/// LU factors of a general tridiagonal matrix with row interchanges.
pub(crate) struct TriLu {
    dl: Vec<Complex64>,
    d: Vec<Complex64>,
    du: Vec<Complex64>,
    du2: Vec<Complex64>,
    swapped: Vec<bool>,
}

impl TriLu {
    pub(crate) fn factor(sub: &[Complex64], diag: &[Complex64], sup: &[Complex64]) -> Result<Self> {
        let n = diag.len();
        let mut dl = sub.to_vec();
        let mut d = diag.to_vec();
        let mut du = sup.to_vec();
        let mut du2 = vec![ZERO; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].norm() >= dl[i].norm() {
                if d[i] != ZERO {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if let Some(p) = d.iter().position(|v| *v == ZERO || !v.norm().is_finite()) {
            return Err(Error::SingularMatrix { pivot: p });
        }
        Ok(Self { dl, d, du, du2, swapped })
    }

    pub(crate) fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let n = self.d.len();
        let mut b = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                let bi = b[i];
                b[i + 1] -= self.dl[i] * bi;
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
        b
    }
}

/// Largest eigenvalue of a Hermitian positive operator given by its action.
fn lanczos_top<F>(apply: F, start: Vec<Complex64>, rel_tol: f64, max_apply: usize) -> Result<f64>
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    const MAX_BASIS: usize = 80;
    let n = start.len();
    let mut v0 = start;
    let mut applied = 0;
    let mut last = 0.0;
    loop {
        let s = norm(&v0);
        let mut basis: Vec<Vec<Complex64>> = vec![v0.iter().map(|c| c / s).collect()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut theta = 0.0;
        let limit = MAX_BASIS.min(n);
        for j in 0..limit {
            let mut w = apply(&basis[j]);
            applied += 1;
            let a: f64 = basis[j].iter().zip(&w).map(|(v, x)| (v.conj() * x).re).sum();
            alpha.push(a);
            // Full reorthogonalization, twice.
            for _ in 0..2 {
                for v in &basis {
                    let h: Complex64 = v.iter().zip(&w).map(|(p, x)| p.conj() * x).sum();
                    for (x, p) in w.iter_mut().zip(v) {
                        *x -= h * p;
                    }
                }
            }
            let (d, osq): (Vec<f64>, Vec<f64>) = (alpha.clone(), beta.iter().map(|b| b * b).collect());
            let (glo, ghi) = gershgorin(&d, &osq);
            let (lo, hi) = bisect_index(&d, &osq, d.len() - 1, glo - 1e-300, ghi * (1.0 + 1e-15) + 1e-300, 0.0);
            theta = 0.5 * (lo + hi);
            let b = norm(&w);
            let converged = last > 0.0 && (theta - last).abs() <= rel_tol * theta;
            last = theta;
            if converged || b <= 1e-14 * theta || j + 1 == n {
                return Ok(theta);
            }
            if applied >= max_apply {
                return Err(Error::Convergence { what: "smallest_singular_value", iterations: applied });
            }
            if j + 1 < limit {
                beta.push(b);
                basis.push(w.iter().map(|c| c / b).collect());
            }
        }
        // Restart from the top Ritz vector.
        let s = ritz_vector(&alpha, &beta, theta);
        let mut next = vec![ZERO; n];
        for (coef, v) in s.iter().zip(&basis) {
            for (x, p) in next.iter_mut().zip(v) {
                *x += *coef * p;
            }
        }
        v0 = next;
    }
}

/// Eigenvector of the real symmetric tridiagonal `(alpha, beta)` for eigenvalue `theta`.
fn ritz_vector(alpha: &[f64], beta: &[f64], theta: f64) -> Vec<f64> {
    let k = alpha.len();
    let shift = theta * (1.0 + 1e-12) + 1e-300;
    let sub: Vec<Complex64> = beta.iter().take(k - 1).map(|b| Complex64::from(*b)).collect();
    let diag: Vec<Complex64> = alpha.iter().map(|a| Complex64::from(a - shift)).collect();
    let mut x = vec![Complex64::new(1.0, 0.0); k];
    if let Ok(lu) = TriLu::factor(&sub, &diag, &sub) {
        for _ in 0..3 {
            x = lu.solve(&x);
            let s = norm(&x);
            x.iter_mut().for_each(|c| *c /= s);
        }
    }
    x.iter().map(|c| c.re).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn j0(mu: f64, strip: usize, n: usize) -> TridiagonalOperator {
        build(OperatorKind::J0 { mu }, strip, n).unwrap()
    }

    #[test]
    fn build_entries() {
        let op = j0(1.5, 0, 3);
        let diag: Vec<f64> = (0..3).map(|k| op.diagonal(k).re).collect();
        assert_eq!(diag, vec![1.5, 4.5, 7.5]);
        assert_relative_eq!(op.off_diagonal(1), 0.930605, epsilon = 1e-6);
        assert_relative_eq!(op.off_diagonal(2), 1.967990, epsilon = 1e-6);
        assert_relative_eq!(j0(2.0, 4, 5).diagonal(0).re, 18.0);
    }

    #[test]
    fn jlambda_at_zero_equals_j0() {
        let l = SpectralPoint::real(0.0).unwrap();
        let a = build(OperatorKind::JLambda { mu: 1.3, lambda: l }, 0, 200).unwrap();
        let b = j0(1.3, 0, 200);
        for k in 0..200 {
            assert_eq!(a.diagonal(k), b.diagonal(k));
        }
    }

    #[test]
    fn build_rejects_cut() {
        let l = SpectralPoint::real(2.0).unwrap();
        assert!(matches!(
            build(OperatorKind::JLambda { mu: 1.0, lambda: l }, 0, 10),
            Err(Error::BranchCut { .. })
        ));
        assert!(build(OperatorKind::JLambda { mu: 1.0, lambda: l }, 2, 10).is_ok());
    }

    #[test]
    fn one_by_one() {
        let cfg = NumericConfig::default();
        let op = j0(1.7, 0, 1);
        let ev = op.eigenvalues_sym(f64::NEG_INFINITY, f64::INFINITY, &cfg).unwrap();
        assert_eq!(ev.values.len(), 1);
        assert!((ev.values[0] - 1.7).abs() < 1e-10);
        assert_eq!(op.count_below(1.6).unwrap(), 0);
        assert_eq!(op.count_below(1.8).unwrap(), 1);
        let z = Complex64::new(0.3, 0.8);
        let g = op.resolvent_element_00(z).unwrap();
        let want = 1.0 / (Complex64::new(1.7, 0.0) - z);
        assert!((g - want).norm() < 1e-15);
        assert_relative_eq!(op.smallest_singular_value(&cfg).unwrap(), 1.7, epsilon = 1e-12);
    }

    #[test]
    fn positive_definite() {
        let op = j0(1.5, 0, 2000);
        assert_eq!(op.count_below(0.0).unwrap(), 0);
        let ev = op.lowest_eigenvalues(1, &NumericConfig::default()).unwrap();
        assert!(ev.values[0] > 0.0);
    }

    #[test]
    fn truncation_convergence_mu2() {
        let cfg = NumericConfig::default();
        let a = j0(2.0, 0, 500).lowest_eigenvalues(10, &cfg).unwrap();
        let b = j0(2.0, 0, 1000).lowest_eigenvalues(10, &cfg).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn complex_rejected_by_sym() {
        let l = SpectralPoint::new(0.0, 1.0).unwrap();
        let op = build(OperatorKind::JLambda { mu: 1.0, lambda: l }, 0, 10).unwrap();
        assert!(matches!(op.count_below(0.0), Err(Error::NotSymmetric)));
    }

    #[test]
    fn solve_consistency() {
        let l = SpectralPoint::new(0.4, -0.3).unwrap();
        let op = build(OperatorKind::JLambda { mu: 0.9, lambda: l }, 1, 64).unwrap();
        let mut e0 = vec![ZERO; 64];
        e0[0] = Complex64::new(1.0, 0.0);
        let rhs = op.apply(&e0).unwrap();
        let s = op.solve(&rhs).unwrap();
        assert!(s.relative_residual < 1e-12);
        for (k, x) in s.x.iter().enumerate() {
            let want = if k == 0 { 1.0 } else { 0.0 };
            assert!((x - want).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_reports_pivot() {
        let op = j0(1.0, 0, 1);
        assert!(matches!(
            op.solve_shifted(Complex64::new(1.0, 0.0), &[Complex64::new(1.0, 0.0)]),
            Err(Error::SingularMatrix { pivot: 0 })
        ));
    }

    #[test]
    fn asymptotic_closure_matches_long_dirichlet() {
        let z = Complex64::new(0.3, 0.5);
        let short = j0(0.6, 0, 200).with_boundary(Boundary::Asymptotic);
        let long = j0(0.6, 0, 200_000);
        let a = short.resolvent_element_00(z).unwrap();
        let b = long.with_boundary(Boundary::Asymptotic).resolvent_element_00(z).unwrap();
        assert!((a - b).norm() < 1e-12 * b.norm(), "{a} {b}");
    }
}
