//! JSON game files, CSV result files and run manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::convergence::RatePoint;
use crate::cost::CostFunction;
use crate::error::Error;
use crate::game::{Game, Structure};
use crate::metric::PerturbationKind;
use crate::sensitivity::{HoelderPoint, SweepRecord};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}{source}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Game { line: Option<usize>, source: Error },
    #[error("csv: {0}")]
    Csv(String),
}

impl IoError {
    pub fn code(&self) -> &'static str {
        match self {
            IoError::File { .. } => "io",
            IoError::Schema { .. } => "schema",
            IoError::Game { source, .. } => source.code(),
            IoError::Csv(_) => "csv",
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            IoError::Schema { line, .. } => Some(*line),
            IoError::Game { line, .. } => *line,
            _ => None,
        }
    }
}

impl From<csv::Error> for IoError {
    fn from(e: csv::Error) -> Self {
        IoError::Csv(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpecFile {
    pub schema: u32,
    pub structure: StructureSpec,
    pub costs: BTreeMap<String, CostFunction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSpec {
    pub arcs: Vec<String>,
    pub od_pairs: Vec<OdPairSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdPairSpec {
    pub id: String,
    pub demand: f64,
    pub paths: Vec<Vec<String>>,
}

impl GameSpecFile {
    pub fn from_game(g: &Game) -> GameSpecFile {
        let s = g.structure();
        let arcs = s.arcs().to_vec();
        let od_pairs = (0..s.num_od_pairs())
            .map(|k| OdPairSpec {
                id: s.od_pairs()[k].clone(),
                demand: g.demands()[k],
                paths: s
                    .od_paths(k)
                    .iter()
                    .map(|p| s.path(*p).iter().map(|a| arcs[*a].clone()).collect())
                    .collect(),
            })
            .collect();
        let costs = arcs
            .iter()
            .cloned()
            .zip(g.costs().iter().cloned())
            .collect();
        GameSpecFile {
            schema: SCHEMA_VERSION,
            structure: StructureSpec { arcs, od_pairs },
            costs,
        }
    }

    pub fn to_game(&self) -> Result<Game, Error> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported schema version {}",
                self.schema
            )));
        }
        let st = &self.structure;
        let structure = Structure::new(
            st.arcs.clone(),
            st.od_pairs
                .iter()
                .map(|o| (o.id.clone(), o.paths.clone()))
                .collect(),
        )?;
        if let Some(extra) = self.costs.keys().find(|k| !st.arcs.contains(k)) {
            return Err(Error::Structure(format!(
                "cost given for unknown arc {extra:?}"
            )));
        }
        let costs = st
            .arcs
            .iter()
            .map(|a| {
                self.costs
                    .get(a)
                    .cloned()
                    .ok_or_else(|| Error::Structure(format!("no cost for arc {a:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let demands = st.od_pairs.iter().map(|o| o.demand).collect();
        Game::new(std::sync::Arc::new(structure), costs, demands)
    }
}

/// Parses and validates a game file; errors carry the offending line when
/// it can be determined.
pub fn parse_game(text: &str) -> Result<Game, IoError> {
    let spec: GameSpecFile = serde_json::from_str(text).map_err(|e| IoError::Schema {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    spec.to_game().map_err(|e| IoError::Game {
        line: locate(text, &e),
        source: e,
    })
}

pub fn load_game(path: impl AsRef<Path>) -> Result<Game, IoError> {
    parse_game(&read(path.as_ref())?)
}

pub fn game_to_json(g: &Game) -> String {
    let mut s = serde_json::to_string_pretty(&GameSpecFile::from_game(g)).expect("game serializes");
    s.push('\n');
    s
}

pub fn save_game(g: &Game, path: impl AsRef<Path>) -> Result<(), IoError> {
    write(path.as_ref(), game_to_json(g).as_bytes())
}

fn read(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset].matches('\n').count() + 1
}

/// Offset of the first `"demand": v` entry with `v == value`.
fn find_demand(text: &str, value: f64) -> Option<usize> {
    text.match_indices("\"demand\"").map(|(o, _)| o).find(|o| {
        let rest = text[o + 8..].trim_start().strip_prefix(':').unwrap_or("");
        let end = rest.find([',', '}', '\n']).unwrap_or(rest.len());
        rest[..end].trim().parse::<f64>().ok() == Some(value)
    })
}

/// Best-effort line of the item an error message names: the first quoted
/// id in the message (its second occurrence for duplicates), the offending
/// demand, or the first demand for a vanishing total demand.
fn locate(text: &str, e: &Error) -> Option<usize> {
    let msg = e.to_string();
    if matches!(e, Error::Condition2(m) if m.starts_with("total demand")) {
        return text.find("\"demand\"").map(|o| line_of(text, o));
    }
    if let Error::InvalidParameter(m) = e {
        if let Some(v) = m
            .strip_prefix("demand ")
            .and_then(|r| r.split_whitespace().next())
        {
            return v
                .parse()
                .ok()
                .and_then(|v| find_demand(text, v))
                .map(|o| line_of(text, o));
        }
    }
    let start = msg.find('"')?;
    let end = start + 1 + msg[start + 1..].find('"')?;
    let needle = &msg[start..=end];
    let mut hits = text.match_indices(needle).map(|(o, _)| o);
    let first = hits.next()?;
    let at = if msg.contains("duplicate") {
        hits.next().unwrap_or(first)
    } else {
        first
    };
    Some(line_of(text, at))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub kind: PerturbationKind,
    pub dist: f64,
    pub dist_err: f64,
    pub base_poa: f64,
    pub pert_poa: f64,
    pub delta: f64,
    pub cert_bound: Option<f64>,
}

impl From<&SweepRecord> for SweepRow {
    fn from(r: &SweepRecord) -> Self {
        SweepRow {
            seed: r.seed,
            kind: r.kind,
            dist: r.dist.value,
            dist_err: r.dist.error_bound,
            base_poa: r.base_poa,
            pert_poa: r.pert_poa,
            delta: r.delta,
            cert_bound: r.cert_bound,
        }
    }
}

impl From<&SweepRow> for HoelderPoint {
    fn from(r: &SweepRow) -> Self {
        HoelderPoint {
            dist: r.dist,
            dist_err: r.dist_err,
            delta: r.delta,
        }
    }
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| IoError::Csv(e.to_string()))
}

fn from_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>, IoError> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(IoError::from))
        .collect()
}

pub fn sweep_csv(records: &[SweepRecord]) -> Result<Vec<u8>, IoError> {
    to_csv(records.iter().map(SweepRow::from))
}

pub fn write_sweep_csv(records: &[SweepRecord], path: impl AsRef<Path>) -> Result<(), IoError> {
    write(path.as_ref(), &sweep_csv(records)?)
}

pub fn read_sweep_csv(path: impl AsRef<Path>) -> Result<Vec<SweepRow>, IoError> {
    from_csv(&read(path.as_ref())?)
}

pub fn rate_csv(points: &[RatePoint]) -> Result<Vec<u8>, IoError> {
    to_csv(points)
}

pub fn write_rate_csv(points: &[RatePoint], path: impl AsRef<Path>) -> Result<(), IoError> {
    write(path.as_ref(), &rate_csv(points)?)
}

pub fn read_rate_csv(path: impl AsRef<Path>) -> Result<Vec<RatePoint>, IoError> {
    from_csv(&read(path.as_ref())?)
}

/// What was run, on what input, with which settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: Option<u64>,
    pub tolerances: BTreeMap<String, f64>,
    pub input_sha256: Vec<String>,
    pub version: String,
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(
        command: &str,
        seed: Option<u64>,
        tolerances: BTreeMap<String, f64>,
        inputs: &[&[u8]],
    ) -> Self {
        RunManifest {
            command: command.to_string(),
            seed,
            tolerances,
            input_sha256: inputs.iter().map(|b| sha256_hex(b)).collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::games_equivalent;

    const PIGOU: &str = r#"{
  "schema": 1,
  "structure": {
    "arcs": ["top", "bottom"],
    "od_pairs": [
      {"id": "st", "demand": 1.0, "paths": [["top"], ["bottom"]]}
    ]
  },
  "costs": {
    "top": {"family": "affine", "params": {"slope": 1.0, "intercept": 0.0}},
    "bottom": {"family": "constant", "params": {"c": 1.0}}
  }
}"#;

    #[test]
    fn parse_and_round_trip() {
        let g = parse_game(PIGOU).unwrap();
        assert_eq!(g.num_arcs(), 2);
        assert_eq!(g.costs()[0], CostFunction::affine(1.0, 0.0));
        let h = parse_game(&game_to_json(&g)).unwrap();
        assert!(games_equivalent(&g, &h, 101).unwrap());
        assert_eq!(g, h);
    }

    #[test]
    fn diagnostics() {
        let one_path = PIGOU.replace(r#"[["top"], ["bottom"]]"#, r#"[["top", "bottom"]]"#);
        let e = parse_game(&one_path).unwrap_err();
        assert_eq!(e.code(), "condition1");
        assert_eq!(e.line(), Some(6));

        let zero = PIGOU.replace(r#""demand": 1.0"#, r#""demand": 0.0"#);
        let e = parse_game(&zero).unwrap_err();
        assert_eq!(e.code(), "condition2");
        assert_eq!(e.line(), Some(6));

        let dup = PIGOU.replace(r#"["top", "bottom"]"#, r#"["top", "top"]"#);
        let e = parse_game(&dup).unwrap_err();
        assert_eq!(e.code(), "structure");
        assert_eq!(e.line(), Some(4));

        let unknown = PIGOU.replace(r#""schema": 1,"#, r#""schema": 1, "extra": 2,"#);
        let e = parse_game(&unknown).unwrap_err();
        assert_eq!(e.code(), "schema");
        assert_eq!(e.line(), Some(2));

        let bad_family = PIGOU.replace("\"constant\"", "\"cubic\"");
        let e = parse_game(&bad_family).unwrap_err();
        assert_eq!(e.code(), "schema");
        assert_eq!(e.line(), Some(11));
    }

    #[test]
    fn csv_round_trip() {
        let pts = vec![
            RatePoint {
                total: 0.1,
                poa_minus_one: 1e-3,
                bound: Some(2.0),
                w: 0.1,
                ln_bound: None,
            },
            RatePoint {
                total: 0.01,
                poa_minus_one: f64::NAN,
                bound: None,
                w: 0.01,
                ln_bound: Some(1.0),
            },
        ];
        let bytes = rate_csv(&pts).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("total,poa_minus_one,bound,w,ln_bound\n"));
        let back: Vec<RatePoint> = from_csv(&text).unwrap();
        assert_eq!(back[0], pts[0]);
        assert!(back[1].poa_minus_one.is_nan());
        assert_eq!(back[1].bound, None);
    }

    #[test]
    fn manifest_hash() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        let m = RunManifest::new(
            "poa",
            Some(3),
            BTreeMap::from([("tol".into(), 1e-10)]),
            &[b"abc"],
        );
        assert_eq!(m.input_sha256.len(), 1);
    }
}
