//! Run directories, file inventories and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// One pass/fail line of a run. `margin` is positive when the check passes
/// with room to spare.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: String,
    pub margin: f64,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Check {
        Check { name: name.into(), passed: value <= limit, value, threshold: format!("<= {limit}"), margin: limit - value }
    }

    pub fn greater(name: &str, value: f64, limit: f64) -> Check {
        Check { name: name.into(), passed: value > limit, value, threshold: format!("> {limit}"), margin: value - limit }
    }

    /// `lo < value < hi`.
    pub fn inside(name: &str, value: f64, lo: f64, hi: f64) -> Check {
        Check {
            name: name.into(),
            passed: value > lo && value < hi,
            value,
            threshold: format!("in ({lo}, {hi})"),
            margin: (value - lo).min(hi - value),
        }
    }

    /// `lo <= value <= hi`.
    pub fn between(name: &str, value: f64, lo: f64, hi: f64) -> Check {
        Check {
            name: name.into(),
            passed: value >= lo && value <= hi,
            value,
            threshold: format!("in [{lo}, {hi}]"),
            margin: (value - lo).min(hi - value),
        }
    }

    pub fn near(name: &str, value: f64, target: f64, tol: f64) -> Check {
        let d = (value - target).abs();
        Check { name: name.into(), passed: d <= tol, value, threshold: format!("{target} +- {tol}"), margin: tol - d }
    }

    pub fn holds(name: &str, ok: bool, value: f64, what: &str) -> Check {
        Check { name: name.into(), passed: ok, value, threshold: what.into(), margin: if ok { 0.0 } else { -1.0 } }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub started_unix: u64,
    pub wall_clock_s: f64,
    /// `passed`, `failed` (a check failed) or `error` (the run stopped).
    pub status: String,
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub results: serde_json::Value,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn all_passed(&self) -> bool {
        self.status == "passed"
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn read(path: &Path) -> Result<RunManifest, CliError> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A run directory that records every file written through it.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    prefix: String,
    files: Vec<FileRecord>,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<RunDir, CliError> {
        fs::create_dir_all(root)?;
        Ok(RunDir { root: root.to_path_buf(), prefix: String::new(), files: Vec::new() })
    }

    /// A nested directory whose files are recorded with the `name/` prefix.
    pub fn nested(&self, name: &str) -> Result<RunDir, CliError> {
        let root = self.root.join(name);
        fs::create_dir_all(&root)?;
        Ok(RunDir { root, prefix: format!("{}{name}/", self.prefix), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    pub fn absorb(&mut self, other: RunDir) {
        self.files.extend(other.files);
    }

    pub fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.root.join(rel), bytes)?;
        self.files.push(FileRecord {
            path: format!("{}{rel}", self.prefix),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn write_with(
        &mut self,
        rel: &str,
        f: impl FnOnce(&mut Vec<u8>) -> lorenz_stab::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write_bytes(rel, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(rel, &bytes)
    }

    pub fn write_csv(&mut self, rel: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
        let mut s = header.join(",");
        s.push('\n');
        for row in rows {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        self.write_bytes(rel, s.as_bytes())
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(manifest)?;
        bytes.push(b'\n');
        write_atomic(&self.root.join("manifest.json"), &bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recorded_hashes_match_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = RunDir::create(dir.path()).unwrap();
        run.write_csv("data/x.csv", &["a", "b"], vec![vec![1.0, 0.5], vec![2.0, 0.25]]).unwrap();
        let mut sub = run.nested("inner").unwrap();
        sub.write_bytes("y.txt", b"hello").unwrap();
        run.absorb(sub);
        for f in run.files() {
            let bytes = fs::read(dir.path().join(&f.path)).unwrap();
            assert_eq!(sha256_hex(&bytes), f.sha256);
            assert_eq!(bytes.len() as u64, f.bytes);
        }
        assert_eq!(run.files()[1].path, "inner/y.txt");
        assert!(!dir.path().join("data/.x.csv.tmp").exists());
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn check_margins() {
        assert!(Check::at_most("a", 0.5, 1.0).passed);
        assert!(!Check::inside("b", 1.0, 0.0, 1.0).passed);
        assert!(Check::between("c", 1.0, 0.0, 1.0).passed);
        let c = Check::near("d", 1.04, 1.0, 0.05);
        assert!(c.passed && (c.margin - 0.01).abs() < 1e-12);
    }
}
