use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::{json, Map, Value};
use sqg_cli::commands::EXIT_VALIDATION;
use sqg_cli::config::{CommandName, Format, RawConfig, SolveMethod};

#[derive(Parser)]
#[command(name = "sqg", version, about = "Spectral sweeps for the oscillator coupled to a star graph")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (CSV gets a `.meta.json` sidecar); stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Lowest eigenvalues of truncations of J0(mu).
    SpectrumJ0 {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Vec<f64>,
        #[arg(long = "N", value_delimiter = ',')]
        n: Vec<usize>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Spectral density tau(E) of J0(mu) at e0.
    Density {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Vec<f64>,
        #[arg(long = "E", value_delimiter = ',', allow_hyphen_values = true)]
        e: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        eps_ladder: Vec<f64>,
    },
    /// Eigenvalues of the model below 1/2.
    PointSpectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Vec<f64>,
        #[arg(long)]
        bonds: Option<u32>,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Growth fits of recurrence solutions against the asymptotic prediction.
    Recurrence {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Vec<f64>,
        /// Spectral points such as `0.25`, `1i` or `-1+0.5i`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda: Vec<Complex64>,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long, value_enum)]
        method: Option<SolveMethod>,
    },
    /// Residuals of the assembled resolvent.
    ResolventCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        lambda: Vec<Complex64>,
        #[arg(long, value_delimiter = ',')]
        h: Vec<f64>,
        #[arg(long = "X")]
        x: Option<f64>,
        #[arg(long = "M")]
        m: Option<usize>,
    },
    /// Predicted absolutely continuous multiplicity.
    MultiplicityMap {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Vec<f64>,
        #[arg(long)]
        bonds: Option<u32>,
        #[arg(long = "E", value_delimiter = ',', allow_hyphen_values = true)]
        e: Vec<f64>,
    },
    /// Deficiency, norm-decay and stripped-operator probes.
    Probes {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        mu: Vec<f64>,
        #[arg(long)]
        strip: Option<usize>,
    },
    /// Runs the command named in the config file.
    Run {
        #[command(flatten)]
        common: Common,
    },
}

fn put<T: serde::Serialize>(params: &mut Map<String, Value>, key: &str, v: Option<T>) {
    if let Some(v) = v {
        params.insert(key.into(), json!(v));
    }
}

fn list<T: serde::Serialize>(params: &mut Map<String, Value>, key: &str, v: Vec<T>) {
    if !v.is_empty() {
        params.insert(key.into(), json!(v));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut flags = Map::new();
    let (common, command) = match cli.command {
        Sub::SpectrumJ0 { common, mu, n, k } => {
            list(&mut flags, "mu", mu);
            list(&mut flags, "N", n);
            put(&mut flags, "k", k);
            (common, Some(CommandName::SpectrumJ0))
        }
        Sub::Density { common, mu, e, eps_ladder } => {
            list(&mut flags, "mu", mu);
            list(&mut flags, "E", e);
            list(&mut flags, "eps_ladder", eps_ladder);
            (common, Some(CommandName::Density))
        }
        Sub::PointSpectrum { common, alpha, mu, bonds, n, grid } => {
            list(&mut flags, "alpha", alpha);
            list(&mut flags, "mu", mu);
            put(&mut flags, "bonds", bonds);
            put(&mut flags, "N", n);
            put(&mut flags, "grid", grid);
            (common, Some(CommandName::PointSpectrum))
        }
        Sub::Recurrence { common, mu, lambda, n, method } => {
            list(&mut flags, "mu", mu);
            list(&mut flags, "lambda", lambda);
            put(&mut flags, "N", n);
            put(&mut flags, "method", method);
            (common, Some(CommandName::Recurrence))
        }
        Sub::ResolventCheck { common, mu, lambda, h, x, m } => {
            list(&mut flags, "mu", mu);
            list(&mut flags, "lambda", lambda);
            list(&mut flags, "h", h);
            put(&mut flags, "X", x);
            put(&mut flags, "M", m);
            (common, Some(CommandName::ResolventCheck))
        }
        Sub::MultiplicityMap { common, alpha, mu, bonds, e } => {
            list(&mut flags, "alpha", alpha);
            list(&mut flags, "mu", mu);
            put(&mut flags, "bonds", bonds);
            list(&mut flags, "E", e);
            (common, Some(CommandName::MultiplicityMap))
        }
        Sub::Probes { common, mu, strip } => {
            list(&mut flags, "mu", mu);
            put(&mut flags, "strip", strip);
            (common, Some(CommandName::Probes))
        }
        Sub::Run { common } => (common, None),
    };

    let mut raw = match &common.config {
        Some(path) => match RawConfig::from_path(path) {
            Ok(r) => r,
            Err(e) => return fail(e),
        },
        None => RawConfig::default(),
    };
    raw.params.get_or_insert_with(Map::new).extend(flags);
    if common.output.is_some() {
        raw.output = common.output;
    }
    if common.format.is_some() {
        raw.format = common.format;
    }
    if common.threads.is_some() {
        raw.threads = common.threads;
    }
    let cfg = match raw.resolve(command) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    ExitCode::from(sqg_cli::execute(&cfg) as u8)
}

fn fail(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(EXIT_VALIDATION as u8)
}
