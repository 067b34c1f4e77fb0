//! Residual verification of the resolvent of the full model.
//!
//! For a source `F = sum f_n(x) chi_n(q)` the resolvent is assembled as
//! `u_n = u0_n + C_n eta_n`, where `u0_n` is the free half-line resolvent
//! `2 zeta_n u0_n(x) = int exp(-zeta_n |x - t|) f_n(t) dt`, and the
//! coefficients solve `J(Lambda; mu) X = mu J` with
//! `J_n = int eta_n(t; Lambda) f_n(t) dt` and `C_n = X_n - J_n / (2 y_n)`.
//! The output is then checked against the defining equations.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::NumericConfig;
use crate::error::{Error, Result};
use crate::jacobi::{build, Boundary, OperatorKind};
use crate::special::{eta_with_zeta, hermite_row, y_entry, zeta, ModelParameters, SpectralPoint};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Uniform grid on `[-X, X]` with the node at 0 stored once per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitGrid {
    pub x_max: f64,
    pub h: f64,
    /// Cells per side, `X = cells * h`.
    pub cells: usize,
}

impl SplitGrid {
    pub fn new(x_max: f64, h: f64) -> Result<Self> {
        if !(x_max > 0.0 && h > 0.0) {
            return Err(Error::Domain("grid needs X > 0 and h > 0".into()));
        }
        let cells = (x_max / h).round() as usize;
        if cells < 8 || ((cells as f64) * h - x_max).abs() > 1e-9 * x_max {
            return Err(Error::Domain(format!("X = {x_max} is not a multiple of h = {h} with at least 8 cells")));
        }
        Ok(Self { x_max, h: x_max / cells as f64, cells })
    }

    /// Node `i` of the left side, `-X + i h`, `i = 0..=cells` (the last is `0-`).
    pub fn left(&self, i: usize) -> f64 {
        -self.x_max + i as f64 * self.h
    }

    /// Node `i` of the right side, `i h` (the first is `0+`).
    pub fn right(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    /// The `2 cells + 1` distinct positions from `-X` to `X`.
    fn positions(&self) -> Vec<f64> {
        (0..=2 * self.cells).map(|i| -self.x_max + i as f64 * self.h).collect()
    }
}

/// Values on both sides of a [`SplitGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub left: Vec<Complex64>,
    pub right: Vec<Complex64>,
}

impl GridFunction {
    fn from_positions(values: &[Complex64], cells: usize) -> Self {
        Self { left: values[..=cells].to_vec(), right: values[cells..].to_vec() }
    }

    pub fn sample(grid: &SplitGrid, f: &dyn Fn(f64) -> Complex64) -> Self {
        Self {
            left: (0..=grid.cells).map(|i| f(grid.left(i))).collect(),
            right: (0..=grid.cells).map(|i| f(grid.right(i))).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.left.iter().chain(&self.right).map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        let l = self.left.iter().zip(&other.left);
        let r = self.right.iter().zip(&other.right);
        l.chain(r).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn conj(&self) -> Self {
        Self {
            left: self.left.iter().map(|c| c.conj()).collect(),
            right: self.right.iter().map(|c| c.conj()).collect(),
        }
    }
}

/// Components `n = 0..M` of a function of `(x, q)` in the oscillator basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunctionBundle {
    pub grid: SplitGrid,
    pub components: Vec<GridFunction>,
}

impl GridFunctionBundle {
    pub fn sup_distance(&self, other: &GridFunctionBundle) -> f64 {
        self.components.iter().zip(&other.components).map(|(a, b)| a.sup_distance(b)).fold(0.0, f64::max)
    }
}

/// A source component, evaluable anywhere so quadrature can refine freely.
pub type Component = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// Source `F` given by its first `M` oscillator components; higher ones vanish.
#[derive(Clone)]
pub struct SourceBundle {
    pub components: Vec<Component>,
}

impl SourceBundle {
    pub fn new(components: Vec<Component>) -> Self {
        Self { components }
    }

    /// `f_0(x) = exp(-|x|)`, all other components zero, `M` components in total.
    pub fn single_exponential(m: usize) -> Self {
        let mut components: Vec<Component> = vec![Arc::new(|x: f64| Complex64::new((-x.abs()).exp(), 0.0))];
        for _ in 1..m {
            components.push(Arc::new(|_| ZERO));
        }
        Self { components }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

const GL4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

const GL8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

fn gauss(rule: &[(f64, f64)], g: &dyn Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    let mut sum = ZERO;
    let mut abs = 0.0;
    for &(x, w) in rule {
        let v = g(c + r * x);
        sum += w * v;
        abs += w * v.norm();
    }
    (sum * r, abs * r)
}

/// Adaptive Gauss–Legendre on `[a, b]`: GL4 against GL8, bisecting on disagreement.
pub fn adaptive_quad(g: &dyn Fn(f64) -> Complex64, a: f64, b: f64, config: &NumericConfig) -> Result<Complex64> {
    fn rec(g: &dyn Fn(f64) -> Complex64, a: f64, b: f64, tol: f64, depth: usize) -> Result<Complex64> {
        let (i4, _) = gauss(&GL4, g, a, b);
        let (i8, abs8) = gauss(&GL8, g, a, b);
        if (i8 - i4).norm() <= tol * abs8 || !(i8 - i4).norm().is_finite() && depth == 0 {
            if !i8.norm().is_finite() {
                return Err(Error::Quadrature { a, b });
            }
            return Ok(i8);
        }
        if depth == 0 {
            return Err(Error::Quadrature { a, b });
        }
        let m = 0.5 * (a + b);
        Ok(rec(g, a, m, tol, depth - 1)? + rec(g, m, b, tol, depth - 1)?)
    }
    rec(g, a, b, config.quad_rel_tol, config.quad_max_depth)
}

/// Free resolvent component `u0_n` on the grid, by two exponential sweeps.
pub fn free_resolvent_component(
    n: usize,
    lambda: &SpectralPoint,
    f: &dyn Fn(f64) -> Complex64,
    grid: &SplitGrid,
    config: &NumericConfig,
) -> Result<GridFunction> {
    let z = zeta(n, lambda)?;
    let x = grid.positions();
    let k = x.len();
    let decay = (-z * grid.h).exp();
    // A(x) = int_{-X}^{x} e^{-z (x - t)} f(t) dt, B(x) = int_{x}^{X} e^{-z (t - x)} f(t) dt.
    let mut fwd = vec![ZERO; k];
    let mut bwd = vec![ZERO; k];
    for i in 0..k - 1 {
        let (a, b) = (x[i], x[i + 1]);
        let cell = adaptive_quad(&|t| (-z * (b - t)).exp() * f(t), a, b, config)?;
        fwd[i + 1] = decay * fwd[i] + cell;
    }
    for i in (0..k - 1).rev() {
        let (a, b) = (x[i], x[i + 1]);
        let cell = adaptive_quad(&|t| (-z * (t - a)).exp() * f(t), a, b, config)?;
        bwd[i] = decay * bwd[i + 1] + cell;
    }
    let u: Vec<Complex64> = fwd.iter().zip(&bwd).map(|(p, q)| (p + q) / (2.0 * z)).collect();
    Ok(GridFunction::from_positions(&u, grid.cells))
}

/// `J_n = int eta_n(t; Lambda) f_n(t) dt` over `[-X, X]`, by panel quadrature.
pub fn eta_moment(
    n: usize,
    lambda: &SpectralPoint,
    f: &dyn Fn(f64) -> Complex64,
    x_max: f64,
    config: &NumericConfig,
) -> Result<Complex64> {
    let z = zeta(n, lambda)?;
    let panels = (x_max / 0.25).ceil() as usize;
    let w = x_max / panels as f64;
    let g = |t: f64| eta_with_zeta(n, t, z) * f(t);
    let mut sum = ZERO;
    for p in 0..panels {
        let (a, b) = (p as f64 * w, (p + 1) as f64 * w);
        sum += adaptive_quad(&g, a, b, config)?;
        sum += adaptive_quad(&g, -b, -a, config)?;
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventCheckReport {
    /// Largest defect of `-u'' + (n + 1/2 - Lambda) u - f` at interior nodes.
    pub ode_residual: f64,
    /// Largest defect of `mu (u_n'(0+) - u_n'(0-)) - sqrt(n+1) u_{n+1}(0) - sqrt(n) u_{n-1}(0)`, `n < M`.
    pub matching_residual: f64,
    pub continuity_residual: f64,
    /// Largest `|f_n|` on the grid.
    pub rhs_norm: f64,
    /// Largest `|2 zeta_n (n+1/2)^{1/4} u0_n(0) - J_n|`.
    pub moment_residual: f64,
    /// Relative residual of the Jacobi solve.
    pub solve_residual: f64,
    /// `|X|` at the last Jacobi row, a monitor for the component tail.
    pub coefficient_tail: f64,
}

impl ResolventCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.ode_residual < tol && self.matching_residual < tol && self.continuity_residual < tol
    }
}

/// The resolvent applied to `F`, on the grid, for components `0..=M`.
pub fn assemble_resolvent(
    params: &ModelParameters,
    lambda: &SpectralPoint,
    source: &SourceBundle,
    grid: &SplitGrid,
    n_jacobi: usize,
    config: &NumericConfig,
) -> Result<(GridFunctionBundle, ResolventCheckReport)> {
    let m = source.len();
    if m == 0 || m > 64 {
        return Err(Error::Domain(format!("source must have 1..=64 components, got {m}")));
    }
    if n_jacobi < 4 * m {
        return Err(Error::Domain(format!("N_jacobi = {n_jacobi} is below 4 M = {}", 4 * m)));
    }
    let mu = params.mu;
    let free: Vec<(GridFunction, Complex64)> = source
        .components
        .par_iter()
        .enumerate()
        .map(|(n, f)| {
            let u0 = free_resolvent_component(n, lambda, f.as_ref(), grid, config)?;
            let jn = eta_moment(n, lambda, f.as_ref(), grid.x_max, config)?;
            Ok((u0, jn))
        })
        .collect::<Result<_>>()?;

    let op = build(OperatorKind::JLambda { mu, lambda: *lambda }, 0, n_jacobi)?.with_boundary(Boundary::Asymptotic);
    let mut rhs = vec![ZERO; n_jacobi];
    for (n, (_, jn)) in free.iter().enumerate() {
        rhs[n] = mu * jn;
    }
    let solved = op.solve(&rhs)?;
    let coeff: Vec<Complex64> = (0..=m)
        .map(|n| {
            let jn = free.get(n).map(|p| p.1).unwrap_or(ZERO);
            Ok(solved.x[n] - jn / (2.0 * y_entry(n, lambda)?))
        })
        .collect::<Result<_>>()?;

    let components: Vec<GridFunction> = (0..=m)
        .map(|n| {
            let z = zeta(n, lambda)?;
            let eta = GridFunction::sample(grid, &|x| eta_with_zeta(n, x, z));
            let mut u = match free.get(n) {
                Some((u0, _)) => u0.clone(),
                None => GridFunction { left: vec![ZERO; grid.cells + 1], right: vec![ZERO; grid.cells + 1] },
            };
            for (v, e) in u.left.iter_mut().zip(&eta.left) {
                *v += coeff[n] * e;
            }
            for (v, e) in u.right.iter_mut().zip(&eta.right) {
                *v += coeff[n] * e;
            }
            Ok(u)
        })
        .collect::<Result<_>>()?;
    let bundle = GridFunctionBundle { grid: *grid, components };

    let sources: Vec<GridFunction> = (0..=m)
        .map(|n| match source.components.get(n) {
            Some(f) => GridFunction::sample(grid, f.as_ref()),
            None => GridFunction { left: vec![ZERO; grid.cells + 1], right: vec![ZERO; grid.cells + 1] },
        })
        .collect();

    let mut moment_residual: f64 = 0.0;
    for (n, (u0, jn)) in free.iter().enumerate() {
        let w = (n as f64 + 0.5).powf(0.25);
        let at0 = 2.0 * zeta(n, lambda)? * w * u0.right[0];
        moment_residual = moment_residual.max((at0 - jn).norm());
    }
    let mut report = check_residuals(params, lambda, &bundle, &sources, m)?;
    report.moment_residual = moment_residual;
    report.solve_residual = solved.relative_residual;
    report.coefficient_tail = solved.x[n_jacobi - 1].norm();
    Ok((bundle, report))
}

fn one_sided_derivative(v: &[Complex64], h: f64, forward: bool) -> Complex64 {
    const C: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
    let k = v.len();
    let mut s = ZERO;
    for (j, c) in C.iter().enumerate() {
        s += *c * if forward { v[j] } else { v[k - 1 - j] };
    }
    if forward {
        s / (12.0 * h)
    } else {
        -s / (12.0 * h)
    }
}

/// ODE, matching and continuity defects of a bundle with components `0..=m`.
pub fn check_residuals(
    params: &ModelParameters,
    lambda: &SpectralPoint,
    bundle: &GridFunctionBundle,
    sources: &[GridFunction],
    m: usize,
) -> Result<ResolventCheckReport> {
    let grid = &bundle.grid;
    let h2 = grid.h * grid.h;
    let mut ode: f64 = 0.0;
    let mut continuity: f64 = 0.0;
    let mut rhs_norm: f64 = 0.0;
    for (n, (u, f)) in bundle.components.iter().zip(sources).enumerate() {
        let pot = Complex64::new(n as f64 + 0.5, 0.0) - lambda.value();
        for side in [(&u.left, &f.left), (&u.right, &f.right)] {
            let (v, g) = side;
            for i in 1..v.len() - 1 {
                let r = -(v[i + 1] - 2.0 * v[i] + v[i - 1]) / h2 + pot * v[i] - g[i];
                ode = ode.max(r.norm());
            }
        }
        continuity = continuity.max((u.left[grid.cells] - u.right[0]).norm());
        rhs_norm = rhs_norm.max(f.sup_norm());
    }
    let at0 = |n: usize| bundle.components[n].right[0];
    let mut matching: f64 = 0.0;
    for n in 0..m.min(bundle.components.len() - 1) {
        let u = &bundle.components[n];
        let jump = one_sided_derivative(&u.right, grid.h, true) - one_sided_derivative(&u.left, grid.h, false);
        let mut r = params.mu * jump - (n as f64 + 1.0).sqrt() * at0(n + 1);
        if n > 0 {
            r -= (n as f64).sqrt() * at0(n - 1);
        }
        matching = matching.max(r.norm());
    }
    Ok(ResolventCheckReport {
        ode_residual: ode,
        matching_residual: matching,
        continuity_residual: continuity,
        rhs_norm,
        moment_residual: 0.0,
        solve_residual: 0.0,
        coefficient_tail: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionReport {
    /// `max_q |sum j_n chi_n(q) - alpha q sum a_n chi_n(q)|`.
    pub residual: f64,
    /// `max_q |alpha q U(0, q)|`, the scale of the condition.
    pub scale: f64,
}

/// Checks `U'(0+, q) - U'(0-, q) = alpha q U(0, q)` on `q_grid` for boundary values
/// `u_n(0) = a[n]`, with the derivative jumps taken from the matching system.
///
/// `perturb = Some(k)` adds 1 to the jump of component `k` (a negative control).
pub fn transmission_residual(a: &[f64], mu: f64, q_grid: &[f64], perturb: Option<usize>) -> Result<TransmissionReport> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    let m = a.len();
    let alpha = std::f64::consts::SQRT_2 / mu;
    let at = |n: usize| a.get(n).copied().unwrap_or(0.0);
    let jumps: Vec<f64> = (0..=m)
        .map(|n| {
            let down = if n > 0 { (n as f64).sqrt() * at(n - 1) } else { 0.0 };
            ((n as f64 + 1.0).sqrt() * at(n + 1) + down) / mu
        })
        .collect();
    let mut jumps = jumps;
    if let Some(k) = perturb {
        if k > m {
            return Err(Error::Domain(format!("perturbed index {k} exceeds M = {m}")));
        }
        jumps[k] += 1.0;
    }
    let mut residual: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &q in q_grid {
        let (chi, _) = hermite_row(m, q);
        let u: f64 = a.iter().zip(&chi).map(|(x, c)| x * c).sum();
        let jump: f64 = jumps.iter().zip(&chi).map(|(x, c)| x * c).sum();
        residual = residual.max((jump - alpha * q * u).abs());
        scale = scale.max((alpha * q * u).abs());
    }
    Ok(TransmissionReport { residual, scale })
}

/// [`transmission_residual`] for `M` seeded random values `u_n(0)` in `[-1, 1)`.
pub fn transmission_reduction_check(
    m: usize,
    mu: f64,
    q_grid: &[f64],
    seed: u64,
    perturb: Option<usize>,
) -> Result<TransmissionReport> {
    if m == 0 || m > 60 {
        return Err(Error::Domain(format!("M must lie in 1..=60, got {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    transmission_residual(&a, mu, q_grid, perturb)
}
