//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::f64::consts::SQRT_2;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqg_core::jacobi::{build, Boundary, OperatorKind};
use sqg_core::model::{
    counting_asymptotics, deficiency_probe, norm_decay_probe, point_spectrum, stripped_spectrum_check,
    POSITIVITY_FLOOR,
};
use sqg_core::recurrence::{
    fit_growth, forward_solve, miller_minimal, weighted_sum_identity_check, Envelope, FitModel, Recurrence,
};
use sqg_core::resolvent::{assemble_resolvent, transmission_reduction_check, SourceBundle, SplitGrid};
use sqg_core::weyl::{resolvent_00_from_weyl, tau_density, DEFAULT_LADDER};
use sqg_core::{ModelParameters, NumericConfig, SpectralPoint};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cfg() -> NumericConfig {
    NumericConfig::default()
}

fn lambda(re: f64, im: f64) -> SpectralPoint {
    SpectralPoint::new(re, im).expect("valid spectral point")
}

fn phase_transition() -> Outcome {
    let c = cfg();
    let lo = build(OperatorKind::J0 { mu: 1.5 }, 0, 4096).map_err(|e| e.to_string())?;
    let hi = build(OperatorKind::J0 { mu: 1.5 }, 0, 8192).map_err(|e| e.to_string())?;
    let a = lo.lowest_eigenvalues(10, &c).map_err(|e| e.to_string())?;
    let b = hi.lowest_eigenvalues(10, &c).map_err(|e| e.to_string())?;
    let cauchy = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let positive = a.values.iter().chain(&b.values).all(|v| *v > 0.0);
    let part_a = positive && cauchy < 1e-8 && a.values.len() == 10;

    let mut part_b = 0;
    for i in 0..25 {
        let e = -5.0 + 10.0 * i as f64 / 24.0;
        let d = tau_density(0.5, e, &DEFAULT_LADDER, &c).map_err(|e| e.to_string())?;
        if d.trusted && d.tau > POSITIVITY_FLOOR {
            part_b += 1;
        }
    }
    let mut inside = 0;
    for e in [0.5, 1.0, 2.0, 4.0] {
        let d = tau_density(1.0, e, &DEFAULT_LADDER, &c).map_err(|e| e.to_string())?;
        if d.trusted && d.tau > POSITIVITY_FLOOR {
            inside += 1;
        }
    }
    let mut below = 0.0f64;
    for e in [-0.5, -1.0, -2.0] {
        below = below.max(tau_density(1.0, e, &DEFAULT_LADDER, &c).map_err(|e| e.to_string())?.tau);
    }
    check(
        part_a && part_b == 25 && inside == 4 && below < 1e-4,
        format!(
            "mu=1.5 lowest 10 positive {positive}, N-doubling spread {cauchy:.1e}; mu=0.5 trusted-positive {part_b}/25; \
             mu=1 trusted-positive {inside}/4, max tau below 0 {below:.1e}"
        ),
    )
}

fn counting() -> Outcome {
    let mut counts = Vec::new();
    let mut notes = Vec::new();
    for mu in [1.08, 1.02, 1.005, 1.00125] {
        let p = ModelParameters::from_mu(mu, 2).map_err(|e| e.to_string())?;
        let r = point_spectrum(p, 4096, 400).map_err(|e| format!("mu={mu}: {e}"))?;
        let stable = r.counts.len() >= 2 && r.counts[r.counts.len() - 1] == r.counts[r.counts.len() - 2];
        if !stable {
            return Err(format!("mu={mu}: unstable counts {:?}", r.counts));
        }
        counts.push(r.count);
        notes.push(format!("{mu}:{}", r.count));
    }
    let p = ModelParameters::from_mu(1.00125, 2).map_err(|e| e.to_string())?;
    let predicted = counting_asymptotics(&p).map_err(|e| e.to_string())?;
    let last = counts[3];
    let non_decreasing = counts.windows(2).all(|w| w[0] <= w[1]);
    check(
        (4..=6).contains(&last) && non_decreasing,
        format!("counts {} (predicted {predicted:.3} at mu=1.00125), non-decreasing {non_decreasing}", notes.join(" ")),
    )
}

fn trichotomy() -> Outcome {
    let p = ModelParameters::from_alpha(1.0, 2).map_err(|e| e.to_string())?;
    let r = point_spectrum(p, 4096, 400).map_err(|e| e.to_string())?;
    let inside = r.eigenvalues.iter().all(|e| *e > 0.0 && *e < 0.5);
    let mut detail = format!("alpha=1: count {} eigenvalues {:?}", r.count, r.eigenvalues);
    let mut ok = r.count >= 1 && inside;
    for alpha in [SQRT_2, 2.0] {
        let p = ModelParameters::from_alpha(alpha, 2).map_err(|e| e.to_string())?;
        let r = point_spectrum(p, 4096, 400).map_err(|e| format!("alpha={alpha}: {e}"))?;
        ok &= r.counts.iter().all(|c| *c == 0);
        detail += &format!("; alpha={alpha:.4}: counts {:?} at sizes {:?}", r.counts, r.sizes);
    }
    check(ok, detail)
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn birkhoff_adams() -> Outcome {
    let c = cfg();
    let coupled = |mu: f64, re: f64, im: f64| Recurrence::Coupled { mu, lambda: lambda(re, im) };
    let err = |e: sqg_core::Error| e.to_string();

    let m = miller_minimal(coupled(2.0, 0.25, 0.0), 2000, 64, &c).map_err(err)?;
    let fit = fit_growth(&m, 100..1000, FitModel::Geometric, Envelope::Modulus).map_err(err)?;
    let geometric = relative(fit.ratio_modulus(), 2.0 - 3f64.sqrt());

    let f = forward_solve(coupled(0.5, 0.25, 0.0), Complex64::new(1.0, 0.0), 20_001).map_err(err)?;
    let fit = fit_growth(&f, 1000..20_000, FitModel::Power, Envelope::Oscillator { mu: 0.5 }).map_err(err)?;
    let envelope = relative(fit.power, -0.5);

    let f = forward_solve(coupled(1.0, -1.0, 0.0), Complex64::new(1.0, 0.0), 10_001).map_err(err)?;
    let fit = fit_growth(&f, 1000..10_000, FitModel::SqrtExponential, Envelope::Modulus).map_err(err)?;
    let sqrt_rate = relative(fit.rate, 2.0);

    let mut worst_sa = 0.0f64;
    for mu in [0.3, 0.5, 0.8] {
        let m = miller_minimal(coupled(mu, 0.0, 1.0), 20_001, 64, &c).map_err(err)?;
        let fit = fit_growth(&m, 1000..20_000, FitModel::Power, Envelope::Modulus).map_err(err)?;
        let want = -1.0 - mu / (1.0 - mu * mu).sqrt();
        worst_sa = worst_sa.max(relative(2.0 * fit.power, want));
    }
    check(
        geometric < 0.02 && envelope < 0.02 && sqrt_rate < 0.02 && worst_sa < 0.03,
        format!(
            "relative errors: ratio {geometric:.1e}, power -1/2 {envelope:.1e}, sqrt-n rate {sqrt_rate:.1e}, \
             |C|^2 exponents at Lambda=i {worst_sa:.1e}"
        ),
    )
}

fn identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mu = rng.gen_range(0.2..3.0);
        let l = lambda(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let n = rng.gen_range(10..=500);
        let rec = Recurrence::Coupled { mu, lambda: l };
        let seq = forward_solve(rec, Complex64::new(1.0, 0.0), n).map_err(|e| e.to_string())?;
        let chk = weighted_sum_identity_check(&seq, n - 1).map_err(|e| e.to_string())?;
        worst = worst.max(chk.relative_residual);
    }
    check(worst < 1e-10, format!("worst relative residual {worst:.1e} over 100 instances"))
}

fn weyl_cross_check() -> Outcome {
    let c = cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for mu in [0.5, 1.0, 1.5] {
        let op = build(OperatorKind::J0 { mu }, 0, 10_000).map_err(|e| e.to_string())?.with_boundary(Boundary::Asymptotic);
        for _ in 0..50 {
            let z = Complex64::new(rng.gen_range(-5.0..15.0), rng.gen_range(0.1..3.0));
            let a = resolvent_00_from_weyl(mu, z, &c).map_err(|e| format!("mu={mu} z={z}: {e}"))?;
            let b = op.resolvent_element_00(z).map_err(|e| e.to_string())?;
            worst = worst.max((a - b).norm() / b.norm());
        }
    }
    check(worst <= 1e-8, format!("worst relative deviation {worst:.1e} over 150 points, N=10^4"))
}

fn resolvent() -> Outcome {
    let c = cfg();
    let mut worst = 0.0f64;
    let mut min_order = f64::INFINITY;
    for (re, im, mu) in [(0.0, 1.0, 1.5), (0.2, 0.0, 2.0), (-1.0, 0.5, 0.7)] {
        let p = ModelParameters::from_mu(mu, 2).map_err(|e| e.to_string())?;
        let src = SourceBundle::single_exponential(8);
        let mut ode = Vec::new();
        for h in [2e-3, 1e-3] {
            let grid = SplitGrid::new(20.0, h).map_err(|e| e.to_string())?;
            let (_, r) = assemble_resolvent(&p, &lambda(re, im), &src, &grid, 256, &c).map_err(|e| e.to_string())?;
            ode.push(r.ode_residual);
            if h == 1e-3 {
                worst = worst.max(r.ode_residual).max(r.matching_residual).max(r.continuity_residual);
            }
        }
        min_order = min_order.min((ode[0] / ode[1]).log2());
    }
    check(
        worst < 1e-6 && min_order >= 1.8,
        format!("largest residual at h=1e-3 {worst:.1e}, smallest observed order {min_order:.3}"),
    )
}

fn transmission() -> Outcome {
    let q: Vec<f64> = (0..=240).map(|i| -6.0 + 0.05 * i as f64).collect();
    let mut worst = 0.0f64;
    let mut control = f64::INFINITY;
    for (seed, mu) in [(1, 0.7), (2, 1.0), (3, 1.5)] {
        let r = transmission_reduction_check(40, mu, &q, seed, None).map_err(|e| e.to_string())?;
        worst = worst.max(r.residual);
        let bad = transmission_reduction_check(40, mu, &q, seed, Some(7)).map_err(|e| e.to_string())?;
        control = control.min(bad.residual);
    }
    check(worst < 1e-8 && control > 0.1, format!("residual {worst:.1e}, perturbed residual {control:.2}"))
}

fn probes() -> Outcome {
    let c = cfg();
    let mut detail = Vec::new();
    let mut ok = true;
    for mu in [0.7, 1.0, 1.3] {
        let r = deficiency_probe(mu, &[256, 1024, 4096, 16384], &c).map_err(|e| e.to_string())?;
        ok &= r.pass;
        detail.push(format!("deficiency {mu}: floor {:.3}", r.floor));
    }
    for mu in [0.7, 1.0, 1.3] {
        let r = norm_decay_probe(mu, &[10.0, 100.0, 1000.0, 10000.0], 10_000).map_err(|e| e.to_string())?;
        ok &= r.slope <= -0.45;
        detail.push(format!("slope {mu}: {:.3}", r.slope));
    }
    let energies: Vec<f64> = (0..20).map(|i| -2.9 + 0.5 * i as f64).collect();
    for (mu, strip) in [(0.5, 3), (1.5, 1)] {
        let r = stripped_spectrum_check(mu, strip, &energies, &c).map_err(|e| e.to_string())?;
        ok &= r.pass;
        detail.push(format!("stripped ({mu}, {strip}): {}", r.pass));
    }
    check(ok, detail.join(", "))
}

fn run_cli(dir: &Path, name: &str, threads: usize, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = dir.join(format!("{name}-{threads}.csv"));
    let status = Command::new(env!("CARGO_BIN_EXE_sqg"))
        .args(args)
        .arg("--threads")
        .arg(threads.to_string())
        .arg("--output")
        .arg(&out)
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("{name} exited with {status}"));
    }
    std::fs::read(&out).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs: [(&str, &[&str]); 4] = [
        ("density", &["density", "--mu", "0.5,1,1.5", "--E", "-2,-0.5,0.3,1,2.5,4"]),
        ("point-spectrum", &["point-spectrum", "--mu", "1.005,1.02,1.08", "--N", "2048"]),
        ("resolvent-check", &["resolvent-check", "--mu", "0.7,1.5", "--lambda", "1i", "--h", "0.004,0.008", "--X", "12"]),
        ("spectrum-j0", &["spectrum-j0", "--mu", "1.2,1.5,2", "--N", "512,1024"]),
    ];
    let mut same = Vec::new();
    for (name, args) in runs {
        let one = run_cli(dir.path(), name, 1, args)?;
        let eight = run_cli(dir.path(), name, 8, args)?;
        if one != eight {
            return Err(format!("{name}: rows differ between 1 and 8 workers"));
        }
        same.push(format!("{name} ({} bytes)", one.len()));
    }
    check(true, format!("byte-identical rows: {}", same.join(", ")))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome, Duration); 10] = [
        (1, "phase transition of J0", phase_transition, Duration::from_secs(120)),
        (2, "counting asymptotics", counting, Duration::from_secs(300)),
        (3, "point-spectrum trichotomy", trichotomy, Duration::from_secs(120)),
        (4, "Birkhoff-Adams regimes", birkhoff_adams, Duration::from_secs(60)),
        (5, "summation identity", identity, Duration::from_secs(30)),
        (6, "Weyl cross-check", weyl_cross_check, Duration::from_secs(60)),
        (7, "resolvent representation", resolvent, Duration::from_secs(180)),
        (8, "transmission reduction", transmission, Duration::from_secs(30)),
        (9, "probes", probes, Duration::from_secs(120)),
        (10, "determinism", determinism, Duration::from_secs(300)),
    ];
    let mut failed = 0;
    for (id, name, f, budget) in criteria {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let over = elapsed > budget;
        let (verdict, detail) = match outcome {
            Ok(d) if !over => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over the {budget:?} budget")),
            Err(d) => ("FAIL", d),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!("criterion {id:>2} {verdict} [{name}] ({:.1}s) {detail}", elapsed.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
