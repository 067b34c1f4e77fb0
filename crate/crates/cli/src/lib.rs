//! Command-line sweeps over `sqg-core`: configuration, dispatch and output.

pub mod commands;
pub mod config;
pub mod output;

use chrono::{SecondsFormat, Utc};

use commands::{Outcome, EXIT_NUMERICAL};
use config::RunConfig;
use output::{emit, RunRecord};

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Runs a validated configuration on a pool of `threads` workers and writes the result.
/// Returns the process exit code.
pub fn execute(cfg: &RunConfig) -> i32 {
    let started = now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_NUMERICAL;
        }
    };
    let Outcome { table, diagnostics, exit_code } = pool.install(|| commands::run(cfg));
    for d in &diagnostics {
        eprintln!("{d}");
    }
    let record = RunRecord { config: cfg, table: &table, diagnostics: &diagnostics, started, finished: now(), exit_code };
    match emit(&record) {
        Ok(()) => exit_code,
        Err(e) => {
            eprintln!("error: cannot write output: {e}");
            EXIT_NUMERICAL
        }
    }
}
