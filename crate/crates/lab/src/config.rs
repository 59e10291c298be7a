//! Experiment configuration: a TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{LabError, LabResult};

/// A TOML list that may also be written as a single value.
fn one_or_many<'de, D, T>(d: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(Option::<OneOrMany<T>>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    }))
}

macro_rules! knobs {
    ($( $(#[$attr:meta])* $name:ident : $ty:ty ),* $(,)?) => {
        /// Every knob of every subcommand. Unset knobs fall back to the
        /// config file, then to per-command defaults.
        #[derive(Args, Clone, Debug, Default, Deserialize, Serialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct Knobs {
            $( $(#[$attr])* pub $name: Option<$ty>, )*
        }

        impl Knobs {
            /// `over` wins wherever it is set.
            pub fn overlay(self, over: Knobs) -> Knobs {
                Knobs { $( $name: over.$name.or(self.$name), )* }
            }
        }
    };
}

knobs! {
    /// TOML file with knob values; flags override it.
    #[arg(long)]
    #[serde(skip)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    #[serde(skip_serializing)]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    #[serde(skip_serializing)]
    threads: usize,
    /// Master seed of every random stream.
    #[arg(long)]
    seed: u64,

    /// Environment file to load instead of generating one.
    #[arg(long)]
    env: PathBuf,
    /// Environment family: lrp, poly or nn.
    #[arg(long)]
    model: String,
    #[arg(long)]
    d: usize,
    /// Box half-width, or half the torus side.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    big_l: usize,
    /// torus or box.
    #[arg(long)]
    boundary: String,
    #[arg(long)]
    s: f64,
    /// Jump cutoff.
    #[arg(long)]
    l_max: f64,
    /// Law of the long-bond weights, e.g. `exp:1` or `pareto:3:1`.
    #[arg(long)]
    xi_spec: String,
    /// Conductance of the nearest-neighbour model.
    #[arg(long)]
    conductance: f64,
    /// Environment file format written by `env`: jsonl or binary.
    #[arg(long)]
    format: String,

    #[arg(long)]
    p: f64,
    #[arg(long)]
    q: f64,
    /// Moment orders (the first is used by `maximal`).
    #[arg(long, value_delimiter = ',')]
    #[serde(deserialize_with = "one_or_many")]
    m: Vec<f64>,

    /// Times (`walk` uses the first).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(deserialize_with = "one_or_many")]
    t: Vec<f64>,
    /// Scales: LLT scales, the walk scale, or the maximal-inequality scale.
    #[arg(long, value_delimiter = ',')]
    #[serde(deserialize_with = "one_or_many")]
    n: Vec<u32>,
    /// Start or source site.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(deserialize_with = "one_or_many")]
    x0: Vec<i64>,
    #[arg(long)]
    samples: usize,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    tol: f64,
    #[arg(long)]
    max_iter: usize,
    /// Sublinearity radii of the corrector.
    #[arg(long, value_delimiter = ',')]
    #[serde(deserialize_with = "one_or_many")]
    radii: Vec<f64>,
    /// Ratio allowed by the on-diagonal check.
    #[arg(long)]
    factor: f64,

    #[arg(long = "R")]
    #[serde(rename = "R")]
    big_r: f64,
    #[arg(long)]
    r: f64,
    #[arg(long, allow_negative_numbers = true)]
    t0: f64,
    /// Time steps per r^2 in the Harnack solve.
    #[arg(long)]
    substeps: usize,
    /// Harnack data: constant, kernel or signed.
    #[arg(long)]
    data: String,
    /// Constant value or kernel mass of the Harnack data.
    #[arg(long, allow_negative_numbers = true)]
    value: f64,
    /// Exterior value of the signed Harnack data.
    #[arg(long, allow_negative_numbers = true)]
    exterior: f64,

    #[arg(long)]
    theta: f64,
    #[arg(long)]
    theta_prime: f64,
    /// Time intervals of the field grid.
    #[arg(long)]
    steps: usize,
    /// Shrink factor of the Hölder cylinders.
    #[arg(long)]
    base: f64,
    /// Poincaré cutoff: indicator or linear.
    #[arg(long)]
    profile: String,
    /// Test function of the Sobolev and Poincaré audits: kernel or random.
    #[arg(long)]
    field: String,

    #[arg(long)]
    t1: f64,
    #[arg(long)]
    t2: f64,
    #[arg(long)]
    t_steps: usize,
    #[arg(long)]
    x_step: f64,
    /// Truncation threshold; a breach exits with status 4.
    #[arg(long)]
    threshold: f64,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    keep_samples: bool,
    /// Diffusion matrix, row-major; solved from the corrector when absent.
    #[arg(long = "M", value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(rename = "M", deserialize_with = "one_or_many")]
    matrix: Vec<f64>,
}

impl Knobs {
    /// Reads `--config` when given and overlays the flags on it.
    pub fn resolve(flags: Knobs) -> LabResult<Knobs> {
        let Some(path) = flags.config.clone() else {
            return Ok(flags);
        };
        Ok(Self::from_file(&path)?.overlay(flags))
    }

    pub fn from_file(path: &Path) -> LabResult<Knobs> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        toml::from_str(&text).map_err(|e| LabError::config(format!("{}: {e}", path.display())))
    }

    /// Canonical JSON of the knobs that determine results.
    pub fn canonical_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("knobs serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file: Knobs = toml::from_str("seed = 3\nL = 8\nn = 16\nM = [2.0, 0.0, 0.0, 2.0]\nt = [1.5, 2]").unwrap();
        assert_eq!(file.n, Some(vec![16]));
        assert_eq!(file.t, Some(vec![1.5, 2.0]));
        let flags = Knobs {
            seed: Some(9),
            ..Default::default()
        };
        let k = file.overlay(flags);
        assert_eq!(k.seed, Some(9));
        assert_eq!(k.big_l, Some(8));
        assert_eq!(k.matrix.as_ref().map(Vec::len), Some(4));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Knobs>("sede = 3").is_err());
    }
}
