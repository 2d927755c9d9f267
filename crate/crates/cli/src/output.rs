//! Result files. Every CSV starts with one `#` metadata line naming what it
//! checks and the seed; the body is full-precision scientific notation.
//! Timings live only in `manifest.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

/// Environment variable holding the output root.
pub const OUTPUT_ROOT_VAR: &str = "HEATLAB_OUT";
pub const DEFAULT_OUTPUT_ROOT: &str = "heatlab-out";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    /// A CSV whose body is produced by `body`.
    pub fn csv<F>(name: &str, checks: &str, seed: u64, body: F) -> Result<Self, CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> heatlab::Result<()>,
    {
        let mut buf = format!("# checks: {checks}; seed: {seed}\n").into_bytes();
        body(&mut buf)?;
        let contents = String::from_utf8(buf).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Artifact { name: name.to_string(), contents })
    }

    pub fn json<T: Serialize>(name: &str, value: &T) -> Result<Self, CliError> {
        Ok(Artifact { name: name.to_string(), contents: serde_json::to_string_pretty(value)? + "\n" })
    }

    /// Contents without the metadata line.
    pub fn body(&self) -> &str {
        match self.contents.strip_prefix('#') {
            Some(rest) => rest.split_once('\n').map(|(_, b)| b).unwrap_or(""),
            None => &self.contents,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// The statement being checked.
    pub checks: String,
    pub measured: BTreeMap<String, f64>,
    pub threshold: String,
    /// Report-only checks never fail a run.
    pub asserted: bool,
    pub pass: bool,
}

impl Check {
    pub fn new(name: &str, checks: &str, threshold: &str, asserted: bool, pass: bool) -> Self {
        Check {
            name: name.to_string(),
            checks: checks.to_string(),
            measured: BTreeMap::new(),
            threshold: threshold.to_string(),
            asserted,
            pass,
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.measured.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    pub fn failed_assertions(&self) -> usize {
        self.checks.iter().filter(|c| c.asserted && !c.pass).count()
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a, C: Serialize> {
    experiment: &'a str,
    version: &'a str,
    config: &'a C,
    wall_time_s: f64,
    pass: bool,
    checks: &'a [Check],
    files: Vec<&'a str>,
}

/// Writes the artifacts and `manifest.json` into `dir`.
pub fn write_outcome<C: Serialize>(
    dir: &Path,
    experiment: &str,
    config: &C,
    outcome: &Outcome,
    wall_time_s: f64,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    for a in &outcome.artifacts {
        std::fs::write(dir.join(&a.name), &a.contents)?;
    }
    let manifest = Manifest {
        experiment,
        version: env!("CARGO_PKG_VERSION"),
        config,
        wall_time_s,
        pass: outcome.failed_assertions() == 0,
        checks: &outcome.checks,
        files: outcome.artifacts.iter().map(|a| a.name.as_str()).collect(),
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_metadata_line_and_body() {
        let a = Artifact::csv("x.csv", "mass conservation", 7, |out| {
            heatlab::io::write_table(out, &["t", "m"], &[vec![1.0, 0.5]])
        })
        .unwrap();
        assert!(a.contents.starts_with("# checks: mass conservation; seed: 7\n"));
        assert!(a.body().starts_with("t,m\n"));
        assert!(!a.body().contains('#'));
    }

    #[test]
    fn manifest_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = Outcome::default();
        o.checks.push(Check::new("c", "something", "≤ 1", true, false).with("value", 2.0));
        o.artifacts.push(Artifact::json("r.json", &vec![1, 2]).unwrap());
        write_outcome(dir.path(), "demo", &serde_json::json!({"a": 1}), &o, 0.5).unwrap();
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["pass"], false);
        assert_eq!(m["checks"][0]["measured"]["value"], 2.0);
        assert!(dir.path().join("r.json").exists());
    }
}
