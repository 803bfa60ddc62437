//! Experiment drivers behind the CLI subcommands: configuration parsing,
//! run manifests, and the cavity / timing / convergence / predictability
//! protocols. Every output file starts with the resolved configuration so a
//! run is reproducible from its own header.

pub mod cavity;
pub mod convergence;
pub mod predictability;
pub mod timing;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ace::StepError;
use crate::mesh::MeshError;
use crate::perturb::BreedError;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Breed(#[from] BreedError),
    #[error("diagnostic failure: {0}")]
    Diag(#[from] crate::diag::DiagError),
}

/// Raw key = value sections parsed from the flat config format.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, DriverError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(i) => &raw_line[..i],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                current = line[1..line.len() - 1].trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(DriverError::Config(format!(
                    "line {}: expected key = value, got {raw_line:?}",
                    lineno + 1
                )));
            };
            sections
                .entry(current.clone())
                .or_default()
                .insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(RawConfig { sections })
    }

    pub fn load(path: &Path) -> Result<Self, DriverError> {
        let text = fs::read_to_string(path).map_err(|source| DriverError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Section view that tracks consumed keys so typos are rejected.
    pub fn section(&self, name: &str) -> SectionReader {
        SectionReader {
            name: name.to_string(),
            entries: self.sections.get(name).cloned().unwrap_or_default(),
            consumed: Vec::new(),
        }
    }

    pub fn known_sections(&self, allowed: &[&str]) -> Result<(), DriverError> {
        for key in self.sections.keys() {
            if !key.is_empty() && !allowed.contains(&key.as_str()) {
                return Err(DriverError::Config(format!("unknown section [{key}]")));
            }
        }
        if let Some(global) = self.sections.get("") {
            if let Some(k) = global.keys().next() {
                return Err(DriverError::Config(format!(
                    "key {k:?} outside any section; use [cavity], [timing], [convergence], [predictability], or [solver]"
                )));
            }
        }
        Ok(())
    }
}

pub struct SectionReader {
    name: String,
    entries: BTreeMap<String, String>,
    consumed: Vec<String>,
}

impl SectionReader {
    fn raw(&mut self, key: &str) -> Option<String> {
        self.consumed.push(key.to_string());
        self.entries.get(key).cloned()
    }

    pub fn f64(&mut self, key: &str, default: f64) -> Result<f64, DriverError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                DriverError::Config(format!("[{}] {key}: not a number: {v:?}", self.name))
            }),
        }
    }

    pub fn usize(&mut self, key: &str, default: usize) -> Result<usize, DriverError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                DriverError::Config(format!("[{}] {key}: not an integer: {v:?}", self.name))
            }),
        }
    }

    pub fn u64(&mut self, key: &str, default: u64) -> Result<u64, DriverError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                DriverError::Config(format!("[{}] {key}: not an integer: {v:?}", self.name))
            }),
        }
    }

    pub fn raw_string(&mut self, key: &str, default: &str) -> Result<String, DriverError> {
        Ok(self.raw(key).unwrap_or_else(|| default.to_string()))
    }

    pub fn bool(&mut self, key: &str, default: bool) -> Result<bool, DriverError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => match v.as_str() {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(DriverError::Config(format!(
                    "[{}] {key}: not a boolean: {v:?}",
                    self.name
                ))),
            },
        }
    }

    pub fn f64_list(&mut self, key: &str, default: &[f64]) -> Result<Vec<f64>, DriverError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| {
                        DriverError::Config(format!("[{}] {key}: bad list entry {s:?}", self.name))
                    })
                })
                .collect(),
        }
    }

    pub fn usize_list(&mut self, key: &str, default: &[usize]) -> Result<Vec<usize>, DriverError> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .split(',')
                .map(|s| {
                    s.trim().parse().map_err(|_| {
                        DriverError::Config(format!("[{}] {key}: bad list entry {s:?}", self.name))
                    })
                })
                .collect(),
        }
    }

    /// Reject any key this driver did not consume.
    pub fn finish(self) -> Result<(), DriverError> {
        for key in self.entries.keys() {
            if !self.consumed.contains(key) {
                return Err(DriverError::Config(format!(
                    "[{}] unknown key {key:?}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// GMRES settings shared by all drivers ([solver] section).
#[derive(Clone, Copy, Debug)]
pub struct SolverSettings {
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    pub pressure_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tol: 1e-10,
            restart: 50,
            max_iter: 2000,
            pressure_tol: 1e-10,
        }
    }
}

impl SolverSettings {
    pub fn from_config(raw: &RawConfig) -> Result<Self, DriverError> {
        let mut s = raw.section("solver");
        let d = SolverSettings::default();
        let out = SolverSettings {
            tol: s.f64("tol", d.tol)?,
            restart: s.usize("restart", d.restart)?,
            max_iter: s.usize("max_iter", d.max_iter)?,
            pressure_tol: s.f64("pressure_tol", d.pressure_tol)?,
        };
        s.finish()?;
        Ok(out)
    }

    pub fn gmres(&self) -> crate::linsolve::GmresParams {
        crate::linsolve::GmresParams {
            tol: self.tol,
            restart: self.restart,
            max_iter: self.max_iter,
        }
    }
}

/// Scale presets for CI-sized runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Full,
    Desk,
}

/// Resolved run description echoed into every output file.
#[derive(Clone, Debug)]
pub struct RunManifest {
    pub command: String,
    pub entries: Vec<(String, String)>,
    pub run_id: String,
}

impl RunManifest {
    pub fn new(command: &str, entries: Vec<(String, String)>) -> Self {
        let mut canon = String::new();
        let _ = writeln!(canon, "command = {command}");
        for (k, v) in &entries {
            let _ = writeln!(canon, "{k} = {v}");
        }
        let digest = Sha256::digest(canon.as_bytes());
        let run_id: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
        RunManifest {
            command: command.to_string(),
            entries,
            run_id,
        }
    }

    pub fn header(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# ace {} run_id={}", self.command, self.run_id);
        for (k, v) in &self.entries {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out
    }
}

/// Write a CSV file with the manifest header block, a column header row, and
/// the given rows.
pub fn write_csv(
    path: &Path,
    manifest: &RunManifest,
    columns: &[&str],
    rows: &[Vec<String>],
) -> Result<(), DriverError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| DriverError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let mut file = fs::File::create(path).map_err(|source| DriverError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut text = manifest.header();
    text.push_str(&columns.join(","));
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        text.push_str(&row.join(","));
        text.push('\n');
    }
    file.write_all(text.as_bytes())
        .map_err(|source| DriverError::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub(crate) fn fmt_f(v: f64) -> String {
    format!("{v}")
}
