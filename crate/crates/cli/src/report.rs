//! Check rows, the run report and its file manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use morphic_core::field::fmt_f64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// How a check value is compared with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    Le,
    Lt,
    Ge,
    Gt,
}

impl Comparator {
    pub fn holds(self, value: f64, tolerance: f64) -> bool {
        match self {
            Comparator::Le => value <= tolerance,
            Comparator::Lt => value < tolerance,
            Comparator::Ge => value >= tolerance,
            Comparator::Gt => value > tolerance,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Le => "<=",
            Comparator::Lt => "<",
            Comparator::Ge => ">=",
            Comparator::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub comparator: Comparator,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// NaN values never pass.
    pub fn new(name: impl Into<String>, value: f64, comparator: Comparator, tolerance: f64) -> Self {
        let pass = !value.is_nan() && comparator.holds(value, tolerance);
        Self { name: name.into(), value, comparator, tolerance, pass }
    }

    pub fn with_tolerance(&self, tolerance: f64) -> Self {
        Self::new(self.name.clone(), self.value, self.comparator, tolerance)
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {} {} {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            fmt_f64(self.value),
            self.comparator.symbol(),
            fmt_f64(self.tolerance)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub checks: Vec<Check>,
    pub summary: Summary,
    /// Every file the run wrote except `report.json` itself.
    pub manifest: Vec<ManifestEntry>,
    /// Kept out of the JSON so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunReport {
    pub fn new(scenario: &str, seed: u64, config: serde_json::Value, checks: Vec<Check>) -> Self {
        let passed = checks.iter().filter(|c| c.pass).count();
        let summary = Summary { total: checks.len(), passed, failed: checks.len() - passed };
        Self { scenario: scenario.into(), seed, config, checks, summary, manifest: Vec::new(), wall_time: Duration::ZERO }
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

}

pub fn sha256_file(path: &Path) -> Result<(String, u64), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Records every file written into an output directory.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Path for `name` inside the directory, recorded for the manifest.
    pub fn track(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.root.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.track(name);
        let mut f = fs::File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        f.write_all(bytes)?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        s.push('\n');
        self.write_bytes(name, s.as_bytes())
    }

    /// Field CSV plus its JSON sidecar.
    pub fn write_field(&mut self, name: &str, field: &morphic_core::ScalarField) -> Result<(), CliError> {
        let path = self.track(name);
        let written = field.write_csv(&path)?;
        for p in written.iter().skip(1) {
            let rel = p.file_name().and_then(|s| s.to_str()).expect("utf-8 file name");
            self.track(rel);
        }
        Ok(())
    }

    /// Hashes every tracked file, sorted by path.
    pub fn manifest(&self) -> Result<Vec<ManifestEntry>, CliError> {
        let mut names = self.files.clone();
        names.sort();
        names
            .into_iter()
            .map(|path| {
                let (sha256, bytes) = sha256_file(&self.root.join(&path))?;
                Ok(ManifestEntry { path, sha256, bytes })
            })
            .collect()
    }

    /// Attaches the manifest and writes `report.json` last.
    pub fn finish(self, report: &mut RunReport) -> Result<PathBuf, CliError> {
        report.manifest = self.manifest()?;
        let path = self.root.join("report.json");
        fs::write(&path, report.to_json()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

/// How specifically a tolerance key names a check: an exact name beats a
/// dotted prefix, which beats a single dotted segment.
pub fn key_specificity(key: &str, name: &str) -> Option<usize> {
    if key == name {
        Some(3)
    } else if name.starts_with(key) && name.as_bytes().get(key.len()) == Some(&b'.') {
        Some(2)
    } else if name.split('.').any(|seg| seg == key) {
        Some(1)
    } else {
        None
    }
}

/// Rejects tolerance keys that match none of `names`.
pub fn check_tolerance_keys<'a>(
    keys: impl IntoIterator<Item = &'a String>,
    names: &[&str],
) -> Result<(), CliError> {
    for key in keys {
        if !names.iter().any(|n| key_specificity(key, n).is_some()) {
            return Err(CliError::Config(format!("tolerance `{key}` matches no check")));
        }
    }
    Ok(())
}

/// Replaces each check's tolerance with the most specific matching override.
pub fn apply_tolerances(checks: Vec<Check>, overrides: &BTreeMap<String, f64>) -> Vec<Check> {
    checks
        .into_iter()
        .map(|c| {
            let best = overrides
                .iter()
                .filter_map(|(k, v)| key_specificity(k, &c.name).map(|s| (s, k.len(), *v)))
                .max_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
            match best {
                Some((_, _, tol)) => c.with_tolerance(tol),
                None => c,
            }
        })
        .collect()
}

#[derive(Deserialize)]
struct ManifestOnly {
    manifest: Vec<ManifestEntry>,
}

/// Problems found when re-hashing a report's manifest.
pub fn verify_manifest(report_path: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(report_path).map_err(|e| CliError::Io(format!("{}: {e}", report_path.display())))?;
    let report: ManifestOnly =
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", report_path.display())))?;
    let root = report_path.parent().unwrap_or(Path::new("."));
    let mut problems = Vec::new();
    for entry in &report.manifest {
        let path = root.join(&entry.path);
        if !path.exists() {
            problems.push(format!("missing: {}", entry.path));
            continue;
        }
        let (sha, bytes) = sha256_file(&path)?;
        if sha != entry.sha256 || bytes != entry.bytes {
            problems.push(format!("modified: {}", entry.path));
        }
    }
    Ok(problems)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparators() {
        assert!(Check::new("a", 1.0, Comparator::Le, 1.0).pass);
        assert!(!Check::new("a", 1.0, Comparator::Lt, 1.0).pass);
        assert!(Check::new("a", 0.0, Comparator::Ge, 0.0).pass);
        assert!(!Check::new("a", 0.0, Comparator::Gt, 0.0).pass);
        assert!(!Check::new("a", f64::NAN, Comparator::Le, 1.0).pass);
        assert!(!Check::new("a", 0.5, Comparator::Le, 1.0).with_tolerance(0.1).pass);
    }

    #[test]
    fn tolerance_keys_match_by_specificity() {
        let name = "quantum_potential.convergence.microstate";
        assert_eq!(key_specificity(name, name), Some(3));
        assert_eq!(key_specificity("quantum_potential.convergence", name), Some(2));
        assert_eq!(key_specificity("convergence", name), Some(1));
        assert_eq!(key_specificity("converge", name), None);
        assert_eq!(key_specificity("quantum", name), None);

        let checks = vec![Check::new(name, 0.1, Comparator::Le, 0.5), Check::new("other.x", 0.1, Comparator::Le, 0.5)];
        let mut map = BTreeMap::new();
        map.insert("convergence".to_string(), 1e-30);
        map.insert(name.to_string(), 0.2);
        let out = apply_tolerances(checks, &map);
        assert_eq!(out[0].tolerance, 0.2);
        assert_eq!(out[1].tolerance, 0.5);
        assert!(check_tolerance_keys(map.keys(), &[name]).is_ok());
        assert!(check_tolerance_keys(["nope".to_string()].iter(), &[name]).is_err());
    }

    #[test]
    fn manifest_detects_changes() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write_bytes("a.txt", b"alpha").unwrap();
        out.write_bytes("b.txt", b"beta").unwrap();
        let mut report = RunReport::new("test", 1, serde_json::Value::Null, vec![]);
        let path = out.finish(&mut report).unwrap();
        assert_eq!(report.manifest.len(), 2);
        assert_eq!(report.manifest[0].sha256, hex::encode(Sha256::digest(b"alpha")));
        assert!(verify_manifest(&path).unwrap().is_empty());

        fs::write(dir.path().join("a.txt"), b"alpha!").unwrap();
        fs::remove_file(dir.path().join("b.txt")).unwrap();
        let problems = verify_manifest(&path).unwrap();
        assert_eq!(problems, vec!["modified: a.txt".to_string(), "missing: b.txt".to_string()]);
    }
}
