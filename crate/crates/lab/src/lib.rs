//! Experiment runner for `rcm-core`: environment files, configuration,
//! artifacts with a manifest, and the `rcm-lab` command line.
//!
//! Every run writes into `--out` (default `rcm-out`): the command's result
//! files, `manifest.json`, and on failure `error.json`. Result files depend
//! only on the configuration and the seed, never on `--threads`; the
//! manifest keeps its wall-clock data under the single `timestamp` key.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod envfile;
pub mod error;
pub mod output;

use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::Knobs;
use crate::error::{LabError, LabResult};
use crate::output::{sha256_hex, Artifact, Output};

#[derive(Debug, Parser)]
#[command(name = "rcm-lab", version, about = "Random conductance model experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Command {
    /// Generate (or convert) an environment file.
    Env(Knobs),
    /// Per-site moment functionals and the moment conditions.
    Moments(Knobs),
    /// Sample random walk endpoints.
    Walk(Knobs),
    /// Heat kernel by uniformization and the on-diagonal check.
    Kernel(Knobs),
    /// Corrector, diffusion matrix and sublinearity.
    Corrector(Knobs),
    /// Weak parabolic Harnack comparison.
    Wphi(Knobs),
    /// Maximal inequality audit.
    Maximal(Knobs),
    /// Hölder oscillation decay.
    Holder(Knobs),
    /// Sobolev inequality audit.
    Sobolev(Knobs),
    /// Weighted Poincaré inequality audit.
    Poincare(Knobs),
    /// Local limit theorem error curve.
    Llt(Knobs),
    /// Every applicable audit with default knobs.
    AuditAll(Knobs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Env(_) => "env",
            Command::Moments(_) => "moments",
            Command::Walk(_) => "walk",
            Command::Kernel(_) => "kernel",
            Command::Corrector(_) => "corrector",
            Command::Wphi(_) => "wphi",
            Command::Maximal(_) => "maximal",
            Command::Holder(_) => "holder",
            Command::Sobolev(_) => "sobolev",
            Command::Poincare(_) => "poincare",
            Command::Llt(_) => "llt",
            Command::AuditAll(_) => "audit-all",
        }
    }

    pub fn knobs(&self) -> &Knobs {
        match self {
            Command::Env(k)
            | Command::Moments(k)
            | Command::Walk(k)
            | Command::Kernel(k)
            | Command::Corrector(k)
            | Command::Wphi(k)
            | Command::Maximal(k)
            | Command::Holder(k)
            | Command::Sobolev(k)
            | Command::Poincare(k)
            | Command::Llt(k)
            | Command::AuditAll(k) => k,
        }
    }
}

#[derive(Serialize)]
struct Versions {
    #[serde(rename = "rcm-lab")]
    lab: &'static str,
    #[serde(rename = "rcm-core")]
    core: &'static str,
    env_format: u32,
}

#[derive(Serialize)]
struct Timestamp {
    started_unix_ms: u128,
    elapsed_seconds: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    versions: Versions,
    config: serde_json::Value,
    config_sha256: String,
    environment: Option<commands::EnvSource>,
    exit_code: i32,
    artifacts: &'a [Artifact],
    timestamp: Timestamp,
}

fn execute(name: &str, k: &Knobs, out: &mut Output) -> (Option<commands::EnvSource>, LabResult<i32>) {
    let (env, source) = match commands::environment(k) {
        Ok(e) => e,
        Err(e) => return (None, Err(e)),
    };
    let res = match name {
        "env" => commands::env(k, out, &env).map(|_| 0),
        "moments" => commands::moments(k, out, &env).map(|_| 0),
        "walk" => commands::walk(k, out, &env).map(|_| 0),
        "kernel" => commands::kernel(k, out, &env).map(|_| 0),
        "corrector" => commands::corrector(k, out, &env).map(|_| 0),
        "wphi" => commands::wphi(k, out, &env).map(|_| 0),
        "maximal" => commands::maximal(k, out, &env).map(|_| 0),
        "holder" => commands::holder(k, out, &env).map(|_| 0),
        "sobolev" => commands::sobolev(k, out, &env).map(|_| 0),
        "poincare" => commands::poincare(k, out, &env).map(|_| 0),
        "llt" => commands::llt(k, out, &env).map(|_| 0),
        "audit-all" => commands::audit_all(k, out, &env),
        _ => unreachable!("unknown command {name}"),
    };
    (Some(source), res)
}

/// Runs one command and returns the process exit code.
pub fn run(cmd: Command) -> i32 {
    let started = Instant::now();
    let wall = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let name = cmd.name();
    let knobs = match Knobs::resolve(cmd.knobs().clone()) {
        Ok(k) => k,
        Err(e) => return fail_early(name, &e, cmd.knobs().out.clone()),
    };
    let dir = knobs.out.clone().unwrap_or_else(|| PathBuf::from("rcm-out"));
    let mut out = match Output::create(&dir) {
        Ok(o) => o,
        Err(e) => return fail_early(name, &e, None),
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(knobs.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => return fail_early(name, &LabError::config(e.to_string()), None),
    };
    let (source, res) = pool.install(|| execute(name, &knobs, &mut out));
    let code = match &res {
        Ok(c) => *c,
        Err(e) => {
            let report = e.report(name);
            eprintln!("{}", serde_json::to_string(&report).unwrap_or_default());
            if let Err(w) = out.json("error.json", &report) {
                eprintln!("could not write the error report: {w}");
            }
            e.exit_code()
        }
    };
    let config = knobs.canonical_json();
    let manifest = Manifest {
        command: name,
        versions: Versions {
            lab: env!("CARGO_PKG_VERSION"),
            core: rcm_core::VERSION,
            env_format: envfile::FORMAT_VERSION,
        },
        config_sha256: sha256_hex(config.to_string().as_bytes()),
        config,
        environment: source,
        exit_code: code,
        artifacts: out.artifacts(),
        timestamp: Timestamp {
            started_unix_ms: wall,
            elapsed_seconds: started.elapsed().as_secs_f64(),
        },
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    if let Err(e) = output::write_atomic(&dir.join("manifest.json"), &bytes) {
        eprintln!("could not write the manifest: {e}");
        return code.max(2);
    }
    code
}

fn fail_early(name: &str, e: &LabError, dir: Option<PathBuf>) -> i32 {
    let report = e.report(name);
    eprintln!("{}", serde_json::to_string(&report).unwrap_or_default());
    if let Some(dir) = dir {
        if let Ok(mut out) = Output::create(&dir) {
            let _ = out.json("error.json", &report);
        }
    }
    e.exit_code()
}
