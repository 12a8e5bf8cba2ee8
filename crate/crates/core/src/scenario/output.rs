//! Scenario output files: hash-stamped CSV/JSON artifacts written atomically,
//! collected into a run manifest.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Record of one completed scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub anchor: String,
    pub config_hash: String,
    pub version: String,
    pub wall_time_s: f64,
    pub threads: usize,
    /// Output files relative to the scenario directory, with content hashes.
    pub outputs: Vec<OutputRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

/// Accumulates output files for one scenario run.
pub struct OutputSink {
    dir: PathBuf,
    config_hash: String,
    records: Vec<OutputRecord>,
}

impl OutputSink {
    pub fn new(out_root: &Path, scenario: &str, config_hash: &str) -> Result<Self> {
        let dir = out_root.join(scenario);
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            config_hash: config_hash.to_string(),
            records: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn preamble(&self) -> Vec<String> {
        vec![format!("config_hash={}", self.config_hash)]
    }

    /// Write bytes atomically (tmp file + rename) and record the hash.
    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let path = self.dir.join(name);
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        let sha: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
        self.records.push(OutputRecord { path: name.to_string(), sha256: sha });
        Ok(())
    }

    /// Write a CSV with the hash preamble and a header row.
    pub fn write_csv(&mut self, name: &str, header: &str, rows: &[String]) -> Result<()> {
        let mut text = String::new();
        for line in self.preamble() {
            text.push_str(&format!("# {line}\n"));
        }
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    /// Write a JSON document wrapping the payload with the config hash.
    pub fn write_json<T: Serialize>(&mut self, name: &str, payload: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Wrapper<'a, T> {
            config_hash: &'a str,
            #[serde(flatten)]
            payload: &'a T,
        }
        let text = serde_json::to_string_pretty(&Wrapper {
            config_hash: &self.config_hash,
            payload,
        })
        .map_err(|e| Error::Config(format!("JSON encode error: {e}")))?;
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_pulse_csv(&mut self, name: &str, pulse: &crate::pulse::SampledPulse) -> Result<()> {
        let mut buf = Vec::new();
        pulse.write_csv(&mut buf, &self.preamble())?;
        self.write_bytes(name, &buf)
    }

    pub fn write_spectrum_csv(&mut self, name: &str, spec: &crate::spectrum::Spectrum) -> Result<()> {
        let mut buf = Vec::new();
        spec.write_csv(&mut buf, &self.preamble())?;
        self.write_bytes(name, &buf)
    }

    pub fn finish(
        mut self,
        scenario: &str,
        anchor: &str,
        wall_time_s: f64,
        threads: usize,
    ) -> Result<RunManifest> {
        let manifest = RunManifest {
            scenario: scenario.to_string(),
            anchor: anchor.to_string(),
            config_hash: self.config_hash.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s,
            threads,
            outputs: self.records.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Config(format!("JSON encode error: {e}")))?;
        // The manifest itself is not part of its own output list.
        let tmp = self.dir.join(".manifest.json.tmp");
        fs::write(&tmp, text.as_bytes())?;
        fs::rename(&tmp, self.dir.join("manifest.json"))?;
        self.records.clear();
        Ok(manifest)
    }
}

/// Fixed-format float for deterministic CSV output.
pub fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}
