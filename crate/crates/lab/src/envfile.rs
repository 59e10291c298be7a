//! Versioned environment files.
//!
//! The JSON-lines form holds a header record followed by one record per
//! unordered edge, sorted lexicographically by `(x, y)`. The binary form
//! carries the same header (as JSON) and the edges as little-endian words.

use std::path::Path;

use rcm_core::environment::{EdgeRecord, EnvMeta, Model};
use rcm_core::{Boundary, Environment, Lattice, XiSpec};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"RCMENVB1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub d: usize,
    /// Box half-width, or `side / 2` on a torus.
    #[serde(rename = "L")]
    pub big_l: usize,
    pub side: usize,
    pub boundary: Boundary,
    pub model: String,
    pub s: Option<f64>,
    pub xi_spec: Option<String>,
    pub seed: Option<u64>,
    pub l_max: f64,
    pub num_edges: usize,
}

impl Header {
    pub fn of(env: &Environment) -> Header {
        let lat = env.lattice();
        let meta = env.meta();
        let xi_spec = match &meta.model {
            Model::Polynomial { xi, .. } => Some(xi.to_string()),
            _ => None,
        };
        Header {
            format_version: FORMAT_VERSION,
            d: lat.dim(),
            big_l: if lat.is_torus() {
                lat.side() / 2
            } else {
                lat.half_width()
            },
            side: lat.side(),
            boundary: lat.boundary(),
            model: meta.model.label(),
            s: meta.model.exponent(),
            xi_spec,
            seed: meta.seed,
            l_max: env.jump_cutoff(),
            num_edges: env.num_edges(),
        }
    }

    fn lattice(&self) -> rcm_core::Result<Lattice> {
        match self.boundary {
            Boundary::Box => Lattice::cube(self.d, self.big_l),
            Boundary::Torus => Lattice::torus(self.d, self.side),
        }
    }

    fn meta(&self) -> Result<EnvMeta, String> {
        let s = || self.s.ok_or_else(|| format!("model {} needs s", self.model));
        let model = match self.model.as_str() {
            "custom" => Model::Custom,
            "lrp" => Model::LongRangePercolation { s: s()? },
            "poly" => {
                let xi: XiSpec = self
                    .xi_spec
                    .as_deref()
                    .ok_or("model poly needs xi_spec")?
                    .parse()
                    .map_err(|e: rcm_core::Error| e.to_string())?;
                Model::Polynomial { s: s()?, xi }
            }
            other => return Err(format!("unknown model `{other}`")),
        };
        Ok(EnvMeta { model, seed: self.seed })
    }
}

pub fn to_jsonl(env: &Environment) -> Vec<u8> {
    let mut out = serde_json::to_vec(&Header::of(env)).expect("header serializes");
    out.push(b'\n');
    for e in env.edge_records() {
        serde_json::to_writer(&mut out, &e).expect("edge serializes");
        out.push(b'\n');
    }
    out
}

pub fn to_binary(env: &Environment) -> Vec<u8> {
    let header = serde_json::to_vec(&Header::of(env)).expect("header serializes");
    let mut out = Vec::with_capacity(16 + header.len() + env.num_edges() * (16 * env.dim() + 8));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for e in env.edge_records() {
        for v in e.x.iter().chain(&e.y) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&e.c.to_le_bytes());
    }
    out
}

/// Parses either format, recognized by the magic bytes of the binary one.
pub fn parse(path: &Path, bytes: &[u8]) -> LabResult<Environment> {
    let bad = |reason: String| LabError::Format {
        path: path.to_path_buf(),
        reason,
    };
    let (header, edges) = if bytes.starts_with(MAGIC) {
        parse_binary(bytes).map_err(bad)?
    } else {
        parse_jsonl(bytes).map_err(bad)?
    };
    if header.format_version != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {}", header.format_version)));
    }
    if edges.len() != header.num_edges {
        return Err(bad(format!(
            "header lists {} edges, found {}",
            header.num_edges,
            edges.len()
        )));
    }
    let meta = header.meta().map_err(bad)?;
    Ok(Environment::from_records(header.lattice()?, header.l_max, meta, edges)?)
}

pub fn load(path: &Path) -> LabResult<(Environment, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| LabError::io(path, e))?;
    Ok((parse(path, &bytes)?, bytes))
}

fn parse_jsonl(bytes: &[u8]) -> Result<(Header, Vec<EdgeRecord>), String> {
    let text = std::str::from_utf8(bytes).map_err(|e| e.to_string())?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or("empty file")?;
    let header: Header = serde_json::from_str(first).map_err(|e| format!("header: {e}"))?;
    let edges = lines
        .map(|(i, l)| {
            let e: EdgeRecord = serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1))?;
            if e.x.len() != header.d || e.y.len() != header.d {
                return Err(format!("line {}: coordinates are not {}-dimensional", i + 1, header.d));
            }
            Ok(e)
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok((header, edges))
}

fn parse_binary(bytes: &[u8]) -> Result<(Header, Vec<EdgeRecord>), String> {
    let word = |at: usize| -> Result<[u8; 8], String> {
        bytes
            .get(at..at + 8)
            .map(|b| b.try_into().unwrap())
            .ok_or_else(|| "truncated file".to_string())
    };
    let hlen = u64::from_le_bytes(word(8)?) as usize;
    let hbytes = bytes.get(16..16 + hlen).ok_or("truncated header")?;
    let header: Header = serde_json::from_slice(hbytes).map_err(|e| format!("header: {e}"))?;
    let d = header.d;
    let rec = 8 * (2 * d + 1);
    let body = &bytes[16 + hlen..];
    if body.len() % rec != 0 {
        return Err(format!("edge block of {} bytes is not a multiple of {rec}", body.len()));
    }
    let edges = body
        .chunks_exact(rec)
        .map(|c| {
            let w = |k: usize| -> [u8; 8] { c[8 * k..8 * k + 8].try_into().unwrap() };
            EdgeRecord {
                x: (0..d).map(|k| i64::from_le_bytes(w(k))).collect(),
                y: (d..2 * d).map(|k| i64::from_le_bytes(w(k))).collect(),
                c: f64::from_le_bytes(w(2 * d)),
            }
        })
        .collect();
    Ok((header, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rcm_core::environment::{long_range_percolation, polynomial_conductance};

    fn same(a: &Environment, b: &Environment) {
        assert_eq!(a.edge_records(), b.edge_records());
        assert_eq!(a.lattice(), b.lattice());
        assert_eq!(a.meta(), b.meta());
        assert_eq!(a.jump_cutoff(), b.jump_cutoff());
        assert_eq!(a.pis(), b.pis());
    }

    #[test]
    fn round_trips() {
        let p = Path::new("mem");
        let envs = [
            long_range_percolation(Lattice::torus(2, 9).unwrap(), 2.0, 4.0, 3).unwrap(),
            polynomial_conductance(
                Lattice::cube(2, 4).unwrap(),
                3.0,
                XiSpec::Exponential { rate: 2.0 },
                3.0,
                5,
            )
            .unwrap(),
            Environment::nearest_neighbour(Lattice::cube(3, 2).unwrap(), 0.5).unwrap(),
            // conductances whose shortest decimal form needs exact parsing
            polynomial_conductance(
                Lattice::torus(2, 16).unwrap(),
                3.0,
                XiSpec::Constant { value: 1.0 },
                8.0,
                3,
            )
            .unwrap(),
        ];
        for env in &envs {
            let text = to_jsonl(env);
            let back = parse(p, &text).unwrap();
            same(env, &back);
            assert_eq!(to_jsonl(&back), text);
            let bin = to_binary(env);
            same(env, &parse(p, &bin).unwrap());
        }
    }

    #[test]
    fn rejects_damage() {
        let env = Environment::nearest_neighbour(Lattice::torus(2, 4).unwrap(), 1.0).unwrap();
        let text = String::from_utf8(to_jsonl(&env)).unwrap();
        let cut: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
        assert!(parse(Path::new("x"), cut.as_bytes()).is_err());
        let v2 = text.replacen("\"format_version\":1", "\"format_version\":2", 1);
        assert!(parse(Path::new("x"), v2.as_bytes()).is_err());
        let mut bin = to_binary(&env);
        bin.pop();
        assert!(parse(Path::new("x"), &bin).is_err());
    }
}
