//! Run configuration: a JSON document, optionally overridden by flags.

use std::path::PathBuf;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sqg_core::weyl::{DEFAULT_LADDER, DEFAULT_STABILITY_TOL};
use sqg_core::NumericConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandName {
    SpectrumJ0,
    Density,
    PointSpectrum,
    Recurrence,
    ResolventCheck,
    MultiplicityMap,
    Probes,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::SpectrumJ0 => "spectrum-j0",
            CommandName::Density => "density",
            CommandName::PointSpectrum => "point-spectrum",
            CommandName::Recurrence => "recurrence",
            CommandName::ResolventCheck => "resolvent-check",
            CommandName::MultiplicityMap => "multiplicity-map",
            CommandName::Probes => "probes",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Invalid(msg.into()))
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumJ0Params {
    pub mu: Vec<f64>,
    #[serde(rename = "N", default = "default_sizes")]
    pub sizes: Vec<usize>,
    /// Number of lowest eigenvalues per truncation.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Agreement with the doubled truncation required for `converged`.
    #[serde(default = "default_cauchy")]
    pub cauchy_tol: f64,
}

fn default_sizes() -> Vec<usize> {
    vec![4096]
}
fn default_k() -> usize {
    10
}
fn default_cauchy() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityParams {
    pub mu: Vec<f64>,
    #[serde(rename = "E")]
    pub energies: Vec<f64>,
    #[serde(default = "default_ladder")]
    pub eps_ladder: Vec<f64>,
    #[serde(default = "default_stability")]
    pub stability_tol: f64,
}

fn default_ladder() -> Vec<f64> {
    DEFAULT_LADDER.to_vec()
}
fn default_stability() -> f64 {
    DEFAULT_STABILITY_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSpectrumParams {
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub mu: Vec<f64>,
    #[serde(default = "default_bonds")]
    pub bonds: u32,
    #[serde(rename = "N", default = "default_n")]
    pub size: usize,
    /// Scan points on `[delta, 1/2 - delta]`.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_bonds() -> u32 {
    2
}
fn default_n() -> usize {
    4096
}
fn default_grid() -> usize {
    400
}
fn default_delta() -> f64 {
    sqg_core::model::DEFAULT_DELTA
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolveMethod {
    Forward,
    Miller,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceParams {
    pub mu: Vec<f64>,
    /// Spectral points as `[re, im]` pairs.
    pub lambda: Vec<Complex64>,
    #[serde(rename = "N", default = "default_rec_n")]
    pub size: usize,
    #[serde(default = "default_method")]
    pub method: SolveMethod,
    /// First index of the fit window; the window ends at `N`.
    #[serde(default)]
    pub window_start: Option<usize>,
}

fn default_rec_n() -> usize {
    10_000
}
fn default_method() -> SolveMethod {
    SolveMethod::Forward
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventParams {
    pub mu: Vec<f64>,
    pub lambda: Vec<Complex64>,
    #[serde(default = "default_h")]
    pub h: Vec<f64>,
    #[serde(rename = "X", default = "default_x")]
    pub x_max: f64,
    /// Source components; `f_0 = exp(-|x|)` and the rest vanish.
    #[serde(rename = "M", default = "default_m")]
    pub components: usize,
    #[serde(rename = "N_jacobi", default)]
    pub n_jacobi: Option<usize>,
}

fn default_h() -> Vec<f64> {
    vec![1e-3]
}
fn default_x() -> f64 {
    20.0
}
fn default_m() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplicityParams {
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default)]
    pub mu: Vec<f64>,
    #[serde(default = "default_bonds")]
    pub bonds: u32,
    #[serde(rename = "E")]
    pub energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbesParams {
    pub mu: Vec<f64>,
    #[serde(default = "yes")]
    pub deficiency: bool,
    #[serde(default = "yes")]
    pub norm_decay: bool,
    #[serde(default = "yes")]
    pub stripped: bool,
    /// Truncations for the deficiency probe.
    #[serde(rename = "N", default = "default_probe_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_taus")]
    pub tau: Vec<f64>,
    /// Truncation for the norm-decay probe.
    #[serde(rename = "N_norm", default = "default_norm_n")]
    pub norm_size: usize,
    #[serde(default = "default_strip")]
    pub strip: usize,
    #[serde(rename = "E", default = "default_probe_energies")]
    pub energies: Vec<f64>,
}

fn default_probe_sizes() -> Vec<usize> {
    vec![256, 1024, 4096, 16384]
}
fn default_taus() -> Vec<f64> {
    vec![10.0, 100.0, 1000.0, 10000.0]
}
fn default_norm_n() -> usize {
    10_000
}
fn default_strip() -> usize {
    1
}
fn default_probe_energies() -> Vec<f64> {
    (0..20).map(|i| -2.9 + 0.5 * i as f64).collect()
}

/// Command-specific parameters; serialized without a tag since `command` names the variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Params {
    SpectrumJ0(SpectrumJ0Params),
    Density(DensityParams),
    PointSpectrum(PointSpectrumParams),
    Recurrence(RecurrenceParams),
    ResolventCheck(ResolventParams),
    MultiplicityMap(MultiplicityParams),
    Probes(ProbesParams),
}

fn typed<T: DeserializeOwned>(v: Value) -> Result<T, ConfigError> {
    Ok(serde_json::from_value(v)?)
}

impl Params {
    pub fn parse(command: CommandName, v: Value) -> Result<Self, ConfigError> {
        Ok(match command {
            CommandName::SpectrumJ0 => Params::SpectrumJ0(typed(v)?),
            CommandName::Density => Params::Density(typed(v)?),
            CommandName::PointSpectrum => Params::PointSpectrum(typed(v)?),
            CommandName::Recurrence => Params::Recurrence(typed(v)?),
            CommandName::ResolventCheck => Params::ResolventCheck(typed(v)?),
            CommandName::MultiplicityMap => Params::MultiplicityMap(typed(v)?),
            CommandName::Probes => Params::Probes(typed(v)?),
        })
    }
}

/// The effective configuration of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandName,
    pub output: Option<PathBuf>,
    pub format: Format,
    /// Worker count; `None` uses the available parallelism.
    pub threads: Option<usize>,
    pub numeric: NumericConfig,
    pub params: Params,
}

/// The file form before the command-specific parameters are typed.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub command: Option<CommandName>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub numeric: Option<NumericConfig>,
    #[serde(default)]
    pub params: Option<Map<String, Value>>,
}

impl RawConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::from_json(&text)
    }

    /// Types the parameters for `command` and validates the result.
    pub fn resolve(self, command: Option<CommandName>) -> Result<RunConfig, ConfigError> {
        let command = match (self.command, command) {
            (Some(a), Some(b)) if a != b => {
                return invalid(format!("config is for {} but {} was requested", a.as_str(), b.as_str()))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return invalid("no command given"),
        };
        let params = Params::parse(command, Value::Object(self.params.unwrap_or_default()))?;
        let cfg = RunConfig {
            command,
            output: self.output,
            format: self.format.unwrap_or_default(),
            threads: self.threads,
            numeric: self.numeric.unwrap_or_default(),
            params,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl RunConfig {
    /// Parses a complete config document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        RawConfig::from_json(text)?.resolve(None)
    }

    pub fn echo(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.threads == Some(0) {
            return invalid("threads must be at least 1");
        }
        let n = &self.numeric;
        for (name, v) in [
            ("tol_eig", n.tol_eig),
            ("weyl_rel_tol", n.weyl_rel_tol),
            ("weyl_noise_tol", n.weyl_noise_tol),
            ("svd_rel_tol", n.svd_rel_tol),
            ("miller_rel_tol", n.miller_rel_tol),
            ("quad_rel_tol", n.quad_rel_tol),
        ] {
            positive(name, v)?;
        }
        match &self.params {
            Params::SpectrumJ0(p) => {
                grid("mu", &p.mu)?;
                grid_usize("N", &p.sizes)?;
                positive("cauchy_tol", p.cauchy_tol)?;
                if p.k == 0 {
                    return invalid("k must be at least 1");
                }
                if p.sizes[0] < p.k {
                    return invalid("N must be at least k");
                }
            }
            Params::Density(p) => {
                grid("mu", &p.mu)?;
                grid("E", &p.energies)?;
                positive("stability_tol", p.stability_tol)?;
                if p.eps_ladder.len() < 2 || p.eps_ladder.windows(2).any(|w| !(w[1] < w[0])) {
                    return invalid("eps_ladder needs at least two strictly decreasing entries");
                }
                if p.eps_ladder.iter().any(|e| !(*e >= 1e-8)) {
                    return invalid("eps_ladder entries must be at least 1e-8");
                }
            }
            Params::PointSpectrum(p) => {
                coupling(&p.alpha, &p.mu, p.bonds)?;
                positive("delta", p.delta)?;
                if p.size < 8 || p.grid < 2 {
                    return invalid("point-spectrum needs N >= 8 and grid >= 2");
                }
            }
            Params::Recurrence(p) => {
                grid("mu", &p.mu)?;
                if p.lambda.is_empty() {
                    return invalid("lambda grid is empty");
                }
                sorted_complex(&p.lambda)?;
                let start = p.window_start.unwrap_or(p.size / 10).max(1);
                if p.size < start + 100 {
                    return invalid("fit window must hold at least 100 entries");
                }
            }
            Params::ResolventCheck(p) => {
                grid("mu", &p.mu)?;
                grid("h", &p.h)?;
                if p.lambda.is_empty() {
                    return invalid("lambda grid is empty");
                }
                sorted_complex(&p.lambda)?;
                positive("X", p.x_max)?;
                if p.components == 0 || p.components > 64 {
                    return invalid("M must lie in 1..=64");
                }
                if let Some(n) = p.n_jacobi {
                    if n < 4 * p.components {
                        return invalid("N_jacobi must be at least 4 M");
                    }
                }
            }
            Params::MultiplicityMap(p) => {
                coupling(&p.alpha, &p.mu, p.bonds)?;
                grid("E", &p.energies)?;
            }
            Params::Probes(p) => {
                grid("mu", &p.mu)?;
                if p.deficiency {
                    grid_usize("N", &p.sizes)?;
                    if p.sizes.len() < 2 {
                        return invalid("deficiency probe needs at least two truncations");
                    }
                }
                if p.norm_decay {
                    grid("tau", &p.tau)?;
                    if p.tau.len() < 2 || p.tau[0] <= 0.0 {
                        return invalid("norm-decay probe needs at least two positive tau values");
                    }
                }
                if p.stripped {
                    grid("E", &p.energies)?;
                    if p.strip > 8 {
                        return invalid("strip must be at most 8");
                    }
                }
            }
        }
        Ok(())
    }
}

fn positive(name: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        invalid(format!("{name} must be positive, got {v}"))
    }
}

fn grid(name: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.is_empty() {
        return invalid(format!("{name} grid is empty"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return invalid(format!("{name} grid has non-finite entries"));
    }
    if v.windows(2).any(|w| !(w[0] < w[1])) {
        return invalid(format!("{name} grid must be strictly increasing"));
    }
    Ok(())
}

fn grid_usize(name: &str, v: &[usize]) -> Result<(), ConfigError> {
    if v.is_empty() {
        return invalid(format!("{name} grid is empty"));
    }
    if v.windows(2).any(|w| w[0] >= w[1]) {
        return invalid(format!("{name} grid must be strictly increasing"));
    }
    Ok(())
}

fn sorted_complex(v: &[Complex64]) -> Result<(), ConfigError> {
    let key = |c: &Complex64| (c.re, c.im);
    if v.windows(2).any(|w| key(&w[0]) >= key(&w[1])) {
        return invalid("lambda grid must be strictly increasing by (re, im)");
    }
    Ok(())
}

fn coupling(alpha: &[f64], mu: &[f64], bonds: u32) -> Result<(), ConfigError> {
    if alpha.is_empty() && mu.is_empty() {
        return invalid("give an alpha or a mu grid");
    }
    if !alpha.is_empty() {
        grid("alpha", alpha)?;
    }
    if !mu.is_empty() {
        grid("mu", mu)?;
    }
    if alpha.iter().chain(mu).any(|x| *x <= 0.0) {
        return invalid("alpha and mu must be positive");
    }
    if bonds == 0 {
        return invalid("bonds must be at least 1");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let r = RunConfig::from_json(r#"{"command":"density","params":{"mu":[1],"E":[0],"colour":1}}"#);
        assert!(matches!(r, Err(ConfigError::Parse(_))));
        let r = RunConfig::from_json(r#"{"command":"density","verbose":true,"params":{"mu":[1],"E":[0]}}"#);
        assert!(matches!(r, Err(ConfigError::Parse(_))));
    }

    #[test]
    fn empty_and_unsorted_grids_rejected() {
        let r = RunConfig::from_json(r#"{"command":"density","params":{"mu":[1],"E":[]}}"#);
        assert!(matches!(r, Err(ConfigError::Invalid(_))));
        let r = RunConfig::from_json(r#"{"command":"density","params":{"mu":[2,1],"E":[0]}}"#);
        assert!(matches!(r, Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn echo_round_trips() {
        let cfg = RunConfig::from_json(
            r#"{"command":"resolvent-check","threads":2,"params":{"mu":[1.5],"lambda":[[0,1]],"h":[0.002,0.004]}}"#,
        )
        .unwrap();
        let text = serde_json::to_string(&cfg.echo()).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn command_mismatch_rejected() {
        let raw = RawConfig::from_json(r#"{"command":"density","params":{"mu":[1],"E":[0]}}"#).unwrap();
        assert!(raw.resolve(Some(CommandName::Probes)).is_err());
    }
}
