//! One function per subcommand. Each validates its knobs, computes, and
//! writes its artifacts into the run's [`Output`].

mod analysis;
mod audits;
mod basic;

use rcm_core::environment::{dropped_second_moment, long_range_percolation, polynomial_conductance, Model};
use rcm_core::rng::{Domain, StreamFactory};
use rcm_core::{Environment, ExponentSet, Lattice, XiSpec};
use serde::Serialize;

use crate::config::Knobs;
use crate::envfile;
use crate::error::{LabError, LabResult};
use crate::output::{sha256_hex, Output};

pub use analysis::{corrector, llt};
pub use audits::{holder, maximal, poincare, sobolev, wphi};
pub use basic::{env, kernel, moments, walk};

/// Where the environment of a run came from.
#[derive(Clone, Debug, Serialize)]
pub struct EnvSource {
    /// `file` or `generated`.
    pub source: &'static str,
    pub path: Option<String>,
    /// Hash of the file, or of the JSON-lines form of a generated environment.
    pub sha256: String,
}

/// Loads `--env` or generates from the model knobs.
pub fn environment(k: &Knobs) -> LabResult<(Environment, EnvSource)> {
    if let Some(path) = &k.env {
        if k.model.is_some() {
            return Err(LabError::config("give either --env or --model, not both"));
        }
        let (env, bytes) = envfile::load(path)?;
        return Ok((
            env,
            EnvSource {
                source: "file",
                path: Some(path.display().to_string()),
                sha256: sha256_hex(&bytes),
            },
        ));
    }
    let env = generate(k)?;
    let sha = sha256_hex(&envfile::to_jsonl(&env));
    Ok((
        env,
        EnvSource {
            source: "generated",
            path: None,
            sha256: sha,
        },
    ))
}

fn generate(k: &Knobs) -> LabResult<Environment> {
    let model = k
        .model
        .as_deref()
        .ok_or_else(|| LabError::config("an environment needs --env or --model"))?;
    let d = k.d.unwrap_or(2);
    let l = k
        .big_l
        .ok_or_else(|| LabError::config("--L is required to generate an environment"))?;
    let lattice = match k.boundary.as_deref().unwrap_or("torus") {
        "torus" => Lattice::torus(d, 2 * l)?,
        "box" => Lattice::cube(d, l)?,
        other => return Err(LabError::config(format!("unknown boundary `{other}` (torus or box)"))),
    };
    let seed = seed(k);
    let l_max = k.l_max.unwrap_or((l as f64).min(16.0));
    let s = || k.s.ok_or_else(|| LabError::config(format!("model {model} needs --s")));
    Ok(match model {
        "lrp" => long_range_percolation(lattice, s()?, l_max, seed)?,
        "poly" => {
            let xi: XiSpec = k.xi_spec.as_deref().unwrap_or("const:1").parse()?;
            polynomial_conductance(lattice, s()?, xi, l_max, seed)?
        }
        "nn" => Environment::nearest_neighbour(lattice, k.conductance.unwrap_or(1.0))?,
        other => return Err(LabError::config(format!("unknown model `{other}` (lrp, poly or nn)"))),
    })
}

/// `sum_{|z| > l_max} E[C_{0,z}] |z|^2` for the two random families.
pub fn dropped_mass(env: &Environment) -> Option<f64> {
    let d = env.dim();
    let cut = env.jump_cutoff();
    match &env.meta().model {
        Model::LongRangePercolation { s } => Some(dropped_second_moment(d, *s, 1.0, cut)),
        Model::Polynomial { s, xi } => Some(dropped_second_moment(d, *s, xi.mean(), cut)),
        Model::Custom => None,
    }
}

pub fn seed(k: &Knobs) -> u64 {
    k.seed.unwrap_or(0)
}

pub fn trial_streams(k: &Knobs) -> StreamFactory {
    StreamFactory::new(seed(k), Domain::Trials)
}

/// `--x0`, or the lattice origin.
pub fn start_site(env: &Environment, k: &Knobs) -> LabResult<usize> {
    let lat = env.lattice();
    match &k.x0 {
        None => Ok(lat.origin()),
        Some(c) => {
            if c.len() != lat.dim() || !lat.contains(c) {
                return Err(LabError::config(format!("--x0 {c:?} is not a site of the lattice")));
            }
            Ok(lat.index(c).expect("contained site"))
        }
    }
}

pub fn exponents(k: &Knobs, d: usize) -> LabResult<ExponentSet> {
    let mut e = ExponentSet::new(d, k.p.unwrap_or(3.0), k.q.unwrap_or(4.0))?;
    if let Some(m) = k.m.as_ref().and_then(|m| m.first()) {
        e = e.with_m(*m);
    }
    if let Some(s) = k.s {
        e = e.with_s(s);
    }
    Ok(e)
}

pub fn first<T: Copy>(v: &Option<Vec<T>>) -> Option<T> {
    v.as_ref().and_then(|v| v.first().copied())
}

/// Largest radius the lattice admits around the origin.
pub fn reach(env: &Environment) -> f64 {
    env.lattice().inscribed_radius()
}

/// Outcome of one audit inside `audit-all`.
#[derive(Debug, Serialize)]
struct AuditStatus {
    audit: &'static str,
    status: &'static str,
    exit_code: i32,
    message: Option<String>,
}

/// Runs every audit that applies to the environment with default knobs.
/// Individual failures are recorded rather than stopping the run.
pub fn audit_all(k: &Knobs, out: &mut Output, env: &Environment) -> LabResult<i32> {
    type Audit = fn(&Knobs, &mut Output, &Environment) -> LabResult<()>;
    let audits: [(&'static str, Audit); 8] = [
        ("moments", moments),
        ("kernel", kernel),
        ("corrector", corrector),
        ("wphi", wphi),
        ("maximal", maximal),
        ("holder", holder),
        ("sobolev", sobolev),
        ("poincare", poincare),
    ];
    let mut statuses = Vec::new();
    let mut code = 0;
    for (name, f) in audits {
        if name == "corrector" && !env.is_torus() {
            statuses.push(AuditStatus {
                audit: name,
                status: "skipped",
                exit_code: 0,
                message: Some("the corrector needs a torus".into()),
            });
            continue;
        }
        match f(k, out, env) {
            Ok(()) => statuses.push(AuditStatus {
                audit: name,
                status: "ok",
                exit_code: 0,
                message: None,
            }),
            Err(e) => {
                code = code.max(e.exit_code());
                statuses.push(AuditStatus {
                    audit: name,
                    status: "failed",
                    exit_code: e.exit_code(),
                    message: Some(e.to_string()),
                });
            }
        }
    }
    out.json("audit_all.json", &statuses)?;
    Ok(code)
}
