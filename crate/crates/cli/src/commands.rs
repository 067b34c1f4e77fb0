//! Sweeps behind each subcommand. Every sweep is a list of pure work units
//! evaluated in parallel and merged by sorting on the key columns.

use num_complex::Complex64;
use rayon::prelude::*;
use sqg_core::jacobi::{build, OperatorKind};
use sqg_core::model::{
    deficiency_probe, norm_decay_probe, point_spectrum_with, predicted_multiplicity, stripped_spectrum_check,
};
use sqg_core::recurrence::{
    fit_growth, forward_solve, miller_minimal, weighted_sum_identity_check, Envelope, FitModel, Recurrence,
};
use sqg_core::resolvent::{assemble_resolvent, SourceBundle, SplitGrid};
use sqg_core::special::Regime;
use sqg_core::weyl::tau_density;
use sqg_core::{Error, ModelParameters, NumericConfig, SpectralPoint};

use crate::config::{
    DensityParams, MultiplicityParams, Params, PointSpectrumParams, ProbesParams, RecurrenceParams, ResolventParams,
    RunConfig, SolveMethod, SpectrumJ0Params,
};
use crate::output::{Cell, Row, Table};

/// Largest fitted norm-decay slope counted as a pass.
pub const NORM_DECAY_SLOPE_MAX: f64 = -0.45;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_UNSTABLE: i32 = 4;

pub struct Outcome {
    pub table: Table,
    pub diagnostics: Vec<String>,
    pub exit_code: i32,
}

/// Rows of one work unit plus any notes it wants recorded.
type UnitResult = sqg_core::Result<(Vec<Row>, Vec<String>)>;

fn collect(mut table: Table, units: Vec<(String, UnitResult)>) -> Outcome {
    let mut diagnostics = Vec::new();
    let mut exit_code = EXIT_OK;
    for (label, res) in units {
        match res {
            Ok((rows, notes)) => {
                table.rows.extend(rows);
                diagnostics.extend(notes);
            }
            Err(e) => {
                let code = match e {
                    Error::TruncationUnstable { .. } => EXIT_UNSTABLE,
                    _ => EXIT_NUMERICAL,
                };
                exit_code = exit_code.max(code);
                diagnostics.push(format!("{label}: {e}"));
            }
        }
    }
    table.sort();
    Outcome { table, diagnostics, exit_code }
}

fn sweep<T: Sync>(items: &[T], label: impl Fn(&T) -> String + Sync, f: impl Fn(&T) -> UnitResult + Sync) -> Vec<(String, UnitResult)> {
    items.par_iter().map(|it| (label(it), f(it))).collect()
}

pub fn run(cfg: &RunConfig) -> Outcome {
    let num = &cfg.numeric;
    match &cfg.params {
        Params::SpectrumJ0(p) => spectrum_j0(p, num),
        Params::Density(p) => density(p, num),
        Params::PointSpectrum(p) => point_spectrum(p),
        Params::Recurrence(p) => recurrence(p, num),
        Params::ResolventCheck(p) => resolvent_check(p, num),
        Params::MultiplicityMap(p) => multiplicity_map(p),
        Params::Probes(p) => probes(p, num),
    }
}

fn spectrum_j0(p: &SpectrumJ0Params, num: &NumericConfig) -> Outcome {
    let units: Vec<(f64, usize)> = p.mu.iter().flat_map(|&m| p.sizes.iter().map(move |&n| (m, n))).collect();
    let results = sweep(
        &units,
        |(mu, n)| format!("mu={mu} N={n}"),
        |&(mu, n)| {
            let lo = build(OperatorKind::J0 { mu }, 0, n)?.lowest_eigenvalues(p.k, num)?;
            let hi = build(OperatorKind::J0 { mu }, 0, 2 * n)?.lowest_eigenvalues(p.k, num)?;
            let rows = lo
                .values
                .iter()
                .zip(&hi.values)
                .enumerate()
                .map(|(k, (a, b))| vec![mu.into(), n.into(), k.into(), (*a).into(), ((a - b).abs() <= p.cauchy_tol).into()])
                .collect();
            Ok((rows, Vec::new()))
        },
    );
    collect(Table::new(vec!["mu", "N", "k", "lambda_k", "converged"], 3), results)
}

fn density(p: &DensityParams, num: &NumericConfig) -> Outcome {
    let units: Vec<(f64, f64)> = p.mu.iter().flat_map(|&m| p.energies.iter().map(move |&e| (m, e))).collect();
    let results = sweep(
        &units,
        |(mu, e)| format!("mu={mu} E={e}"),
        |&(mu, e)| {
            let d = tau_density(mu, e, &p.eps_ladder, num)?;
            let trusted = d.stability <= p.stability_tol;
            Ok((vec![vec![mu.into(), e.into(), d.tau.into(), d.stability.into(), trusted.into()]], Vec::new()))
        },
    );
    collect(Table::new(vec!["mu", "E", "tau", "stability", "trusted"], 2), results)
}

fn couplings(alpha: &[f64], mu: &[f64], bonds: u32) -> sqg_core::Result<Vec<ModelParameters>> {
    let mut out = Vec::new();
    for &a in alpha {
        out.push(ModelParameters::from_alpha(a, bonds)?);
    }
    for &m in mu {
        out.push(ModelParameters::from_mu(m, bonds)?);
    }
    Ok(out)
}

fn point_spectrum(p: &PointSpectrumParams) -> Outcome {
    let table = Table::new(vec!["mu", "alpha", "k", "eigenvalue", "shooting_eigenvalue", "truncation"], 3);
    let params = match couplings(&p.alpha, &p.mu, p.bonds) {
        Ok(v) => v,
        Err(e) => return collect(table, vec![("couplings".into(), Err(e))]),
    };
    let results = sweep(
        &params,
        |m| format!("mu={} alpha={}", m.mu, m.alpha),
        |m| {
            let r = point_spectrum_with(*m, p.size, p.grid, p.delta)?;
            let rows = r
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    let shoot = r.shooting_eigenvalues.get(k).copied();
                    vec![m.mu.into(), m.alpha.into(), k.into(), (*e).into(), shoot.into(), r.truncation.into()]
                })
                .collect();
            let note = format!(
                "mu={} alpha={}: count {} at sizes {:?} (counts {:?}), method agreement {:e}, monotone {}",
                m.mu, m.alpha, r.count, r.sizes, r.counts, r.method_agreement, r.monotone
            );
            Ok((rows, vec![note]))
        },
    );
    collect(table, results)
}

fn recurrence(p: &RecurrenceParams, num: &NumericConfig) -> Outcome {
    let units: Vec<(f64, Complex64)> = p.mu.iter().flat_map(|&m| p.lambda.iter().map(move |&l| (m, l))).collect();
    let results = sweep(
        &units,
        |(mu, l)| format!("mu={mu} lambda={l}"),
        |&(mu, l)| {
            let lambda = SpectralPoint::from_complex(l)?;
            let rec = Recurrence::Coupled { mu, lambda };
            let seq = match p.method {
                SolveMethod::Forward => forward_solve(rec, Complex64::new(1.0, 0.0), p.size + 1)?,
                SolveMethod::Miller => miller_minimal(rec, p.size + 1, 64, num)?,
            };
            let pred = rec.prediction();
            let branch = match p.method {
                SolveMethod::Forward => pred.dominant_branch(),
                SolveMethod::Miller => pred.minimal_branch(),
            }
            .unwrap_or(&pred.branches[0]);
            let (model, env, rate) = match pred.regime {
                Regime::SuperCritical => (FitModel::Geometric, Envelope::Modulus, branch.ratio.norm().ln()),
                Regime::Critical => (FitModel::SqrtExponential, Envelope::Modulus, branch.sqrt_rate.re),
                Regime::SubCritical => (FitModel::Power, Envelope::Oscillator { mu }, 0.0),
            };
            let start = p.window_start.unwrap_or(p.size / 10).max(1);
            let fit = fit_growth(&seq, start..p.size, model, env)?;
            let identity = weighted_sum_identity_check(&seq, p.size - 1)?;
            let row = vec![
                mu.into(),
                l.re.into(),
                l.im.into(),
                format!("{:?}", pred.regime).as_str().into(),
                format!("{model:?}").as_str().into(),
                rate.into(),
                fit.rate.into(),
                branch.power.re.into(),
                fit.power.into(),
                fit.rms_residual.into(),
                identity.relative_residual.into(),
                seq.recurrence_residual()?.into(),
            ];
            Ok((vec![row], Vec::new()))
        },
    );
    let cols = vec![
        "mu",
        "lambda_re",
        "lambda_im",
        "regime",
        "model",
        "predicted_rate",
        "fitted_rate",
        "predicted_power",
        "fitted_power",
        "fit_rms",
        "identity_residual",
        "recurrence_residual",
    ];
    collect(Table::new(cols, 3), results)
}

fn resolvent_check(p: &ResolventParams, num: &NumericConfig) -> Outcome {
    let units: Vec<(f64, Complex64, f64)> = p
        .mu
        .iter()
        .flat_map(|&m| p.lambda.iter().flat_map(move |&l| p.h.iter().map(move |&h| (m, l, h))))
        .collect();
    let n_jacobi = p.n_jacobi.unwrap_or((4 * p.components).max(256));
    let results = sweep(
        &units,
        |(mu, l, h)| format!("mu={mu} lambda={l} h={h}"),
        |&(mu, l, h)| {
            let params = ModelParameters::from_mu(mu, 2)?;
            let lambda = SpectralPoint::from_complex(l)?;
            let grid = SplitGrid::new(p.x_max, h)?;
            let src = SourceBundle::single_exponential(p.components);
            let (_, r) = assemble_resolvent(&params, &lambda, &src, &grid, n_jacobi, num)?;
            let row = vec![
                mu.into(),
                l.re.into(),
                l.im.into(),
                h.into(),
                r.ode_residual.into(),
                r.matching_residual.into(),
                r.continuity_residual.into(),
                r.rhs_norm.into(),
                r.coefficient_tail.into(),
            ];
            Ok((vec![row], Vec::new()))
        },
    );
    let cols = vec![
        "mu",
        "lambda_re",
        "lambda_im",
        "h",
        "ode_residual",
        "matching_residual",
        "continuity_residual",
        "rhs_norm",
        "coefficient_tail",
    ];
    let mut out = collect(Table::new(cols, 4), results);
    add_orders(&mut out.table);
    out
}

/// Appends the observed ODE-residual order against the next coarser `h` of the same case.
fn add_orders(table: &mut Table) {
    table.columns.push("order");
    let keys: Vec<(u64, u64, u64, f64, f64)> = table
        .rows
        .iter()
        .map(|r| match (&r[0], &r[1], &r[2], &r[3], &r[4]) {
            (
                Cell::Float(a),
                Cell::Float(b),
                Cell::Float(c),
                Cell::Float(h),
                Cell::Float(res),
            ) => (a.to_bits(), b.to_bits(), c.to_bits(), *h, *res),
            _ => unreachable!("resolvent rows start with five floats"),
        })
        .collect();
    for i in 0..table.rows.len() {
        let (a, b, c, h, res) = keys[i];
        let coarser = keys.get(i + 1).filter(|k| (k.0, k.1, k.2) == (a, b, c));
        let order = coarser.map(|k| (k.4 / res).ln() / (k.3 / h).ln());
        table.rows[i].push(order.into());
    }
}

fn multiplicity_map(p: &MultiplicityParams) -> Outcome {
    let table = Table::new(vec!["mu", "alpha", "E", "base", "extra", "total", "boundary"], 3);
    let params = match couplings(&p.alpha, &p.mu, p.bonds) {
        Ok(v) => v,
        Err(e) => return collect(table, vec![("couplings".into(), Err(e))]),
    };
    let units: Vec<(ModelParameters, f64)> =
        params.iter().flat_map(|m| p.energies.iter().map(move |&e| (*m, e))).collect();
    let results = sweep(
        &units,
        |(m, e)| format!("mu={} E={e}", m.mu),
        |(m, e)| {
            let r = predicted_multiplicity(*e, m);
            let row = vec![
                m.mu.into(),
                m.alpha.into(),
                (*e).into(),
                r.base.into(),
                r.extra.into(),
                r.total.into(),
                r.boundary_flag.into(),
            ];
            Ok((vec![row], Vec::new()))
        },
    );
    collect(table, results)
}

#[derive(Clone, Copy)]
enum Probe {
    Deficiency,
    NormDecay,
    Stripped,
}

fn probes(p: &ProbesParams, num: &NumericConfig) -> Outcome {
    let mut kinds = Vec::new();
    if p.deficiency {
        kinds.push(Probe::Deficiency);
    }
    if p.norm_decay {
        kinds.push(Probe::NormDecay);
    }
    if p.stripped {
        kinds.push(Probe::Stripped);
    }
    let units: Vec<(Probe, f64)> = kinds.iter().flat_map(|&k| p.mu.iter().map(move |&m| (k, m))).collect();
    let results = sweep(
        &units,
        |(k, mu)| format!("{} mu={mu}", probe_name(*k)),
        |&(kind, mu)| {
            let name = probe_name(kind);
            let row = |x: f64, v: f64, pass: bool| vec![name.into(), mu.into(), x.into(), v.into(), pass.into()];
            match kind {
                Probe::Deficiency => {
                    let r = deficiency_probe(mu, &p.sizes, num)?;
                    let rows = r.rows.iter().map(|&(n, s)| row(n as f64, s, r.pass)).collect();
                    Ok((rows, vec![format!("{name} mu={mu}: floor {:e}, pass {}", r.floor, r.pass)]))
                }
                Probe::NormDecay => {
                    let r = norm_decay_probe(mu, &p.tau, p.norm_size)?;
                    let pass = r.slope <= NORM_DECAY_SLOPE_MAX;
                    let rows = r.rows.iter().map(|&(t, v)| row(t, v, pass)).collect();
                    Ok((rows, vec![format!("{name} mu={mu}: slope {}, pass {pass}", r.slope)]))
                }
                Probe::Stripped => {
                    let r = stripped_spectrum_check(mu, p.strip, &p.energies, num)?;
                    let rows = r.rows.iter().map(|s| row(s.energy, s.tau_stripped, r.pass)).collect();
                    let note = format!(
                        "{name} mu={mu} strip={}: pattern match {}, discrete converged {:?}, pass {}",
                        r.strip, r.pattern_match, r.discrete_converged, r.pass
                    );
                    Ok((rows, vec![note]))
                }
            }
        },
    );
    collect(Table::new(vec!["probe", "mu", "x", "value", "pass"], 3), results)
}

fn probe_name(p: Probe) -> &'static str {
    match p {
        Probe::Deficiency => "deficiency",
        Probe::NormDecay => "norm-decay",
        Probe::Stripped => "stripped",
    }
}
