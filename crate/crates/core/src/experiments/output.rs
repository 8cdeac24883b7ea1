//! CSV tables, manifests and replay.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{run_experiment, ExperimentResult, ExperimentSpec, RunCache, RunConfig};
use crate::error::{Error, Result};
use crate::seeds::SeedSet;

/// Header plus string rows, written as RFC-4180 CSV.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric column by name.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let c = self
            .column(name)
            .ok_or_else(|| Error::Format(format!("no column {name:?}")))?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|e| Error::Format(format!("column {name:?}: {e}")))
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Table> {
        let mut r = csv::Reader::from_reader(bytes);
        let header = r.headers()?.iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Table { header, rows })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub seeds: SeedSet,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

/// Resolved experiment, its runs and the files it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: ExperimentSpec,
    pub runs: Vec<RunRecord>,
    pub wall_clock_secs: f64,
    pub outputs: Vec<OutputFile>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// Writes every table and artifact into `dir` followed by `manifest.json`.
pub fn emit_results(
    result: &ExperimentResult,
    spec: &ExperimentSpec,
    wall_clock_secs: f64,
    dir: &Path,
) -> Result<RunManifest> {
    fs::create_dir_all(dir)?;
    let mut outputs = Vec::new();
    let files = result
        .tables
        .iter()
        .map(|(name, t)| Ok::<_, Error>((name.clone(), t.to_csv()?)))
        .chain(result.artifacts.iter().map(|(n, b)| Ok((n.clone(), b.clone()))));
    for item in files {
        let (name, bytes) = item?;
        fs::write(dir.join(&name), &bytes)?;
        outputs.push(OutputFile {
            path: name,
            sha256: sha256_hex(&bytes),
        });
    }
    let manifest = RunManifest {
        tool: "eigenlearn".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: spec.clone(),
        runs: result
            .runs
            .iter()
            .map(|r| RunRecord {
                config: r.config.clone(),
                seeds: r.seeds,
                elapsed_secs: r.elapsed_secs,
            })
            .collect(),
        wall_clock_secs,
        outputs,
    };
    fs::write(dir.join(MANIFEST_NAME), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Runs `spec` and writes its outputs.
pub fn run_and_emit(spec: &ExperimentSpec, cache: &RunCache, dir: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let result = run_experiment(spec, cache)?;
    emit_results(&result, spec, start.elapsed().as_secs_f64(), dir)
}

/// Outcome of replaying a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub manifest: RunManifest,
    /// (path, recorded hash, reproduced hash)
    pub files: Vec<(String, String, String)>,
}

impl Replay {
    pub fn identical(&self) -> bool {
        self.files.iter().all(|(_, a, b)| a == b)
    }
}

/// Re-runs the experiment recorded at `manifest_path` on one thread into `dir`
/// and compares output hashes.
pub fn rerun_from_manifest(manifest_path: &Path, dir: &Path) -> Result<Replay> {
    let recorded = RunManifest::load(manifest_path)?;
    let mut spec = recorded.experiment.clone();
    spec.threads = 1;
    let manifest = run_and_emit(&spec, &RunCache::new(), dir)?;
    let files = recorded
        .outputs
        .iter()
        .map(|o| {
            let now = manifest
                .outputs
                .iter()
                .find(|n| n.path == o.path)
                .map(|n| n.sha256.clone())
                .unwrap_or_default();
            (o.path.clone(), o.sha256.clone(), now)
        })
        .collect();
    Ok(Replay { manifest, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let t = Table::new(["a", "b"]);
        assert_eq!(t.to_csv().unwrap(), b"a,b\n");
    }

    #[test]
    fn csv_round_trip_quotes_fields() {
        let mut t = Table::new(["tag", "x"]);
        t.push(vec!["plain".into(), "1e0".into()]);
        t.push(vec!["with,comma \"q\"".into(), "-2.5e-1".into()]);
        let bytes = t.to_csv().unwrap();
        assert!(String::from_utf8(bytes.clone()).unwrap().contains("\"with,comma \"\"q\"\"\""));
        let back = Table::from_csv(&bytes).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.floats("x").unwrap(), vec![1.0, -0.25]);
        assert!(back.floats("y").is_err());
    }

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
