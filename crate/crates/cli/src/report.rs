//! Run reporting: an output directory that records every file it writes,
//! plus the `report.json` summary emitted at the end of each run.
//!
//! Data files (CSV and JSON tables) are byte-deterministic for a fixed
//! `(config, seed)`. The report itself additionally carries wall-clock time
//! and the output path, which vary between invocations; its per-file SHA-256
//! table is the deterministic fingerprint to compare across runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Full-precision decimal formatting: 17 significant digits round-trip
/// every finite `f64` exactly and keep file hashes platform-stable.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Minimal CSV builder: fixed header, comma-joined rows, `\n` endings.
/// Fields must not contain commas or newlines; all emitters use plain
/// numbers and short tags.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &str) -> Csv {
        let mut text = String::with_capacity(4096);
        text.push_str(header);
        text.push('\n');
        Csv { text }
    }

    pub fn row<I>(&mut self, fields: I)
    where
        I: IntoIterator,
        I::Item: AsRef<str>,
    {
        let mut first = true;
        for f in fields {
            let f = f.as_ref();
            debug_assert!(
                !f.contains(',') && !f.contains('\n'),
                "unquotable field {f:?}"
            );
            if !first {
                self.text.push(',');
            }
            self.text.push_str(f);
            first = false;
        }
        self.text.push('\n');
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.text.as_bytes()
    }
}

/// One emitted data file, hashed at write time.
#[derive(Clone, Debug, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Serialize)]
struct RunReport<'a> {
    command: &'a str,
    invocation: &'a serde_json::Value,
    versions: BTreeMap<&'a str, &'a str>,
    seed: u64,
    status: &'a str,
    exit_code: u8,
    summary: serde_json::Value,
    warnings: &'a [String],
    files: &'a [FileRecord],
    /// Wall-clock seconds; not covered by the determinism guarantee.
    wall_time_s: f64,
}

/// Collects files and warnings during a run and writes `report.json` once
/// the command body returns, successful or not.
pub struct Reporter {
    command: &'static str,
    invocation: serde_json::Value,
    seed: u64,
    out: PathBuf,
    files: Vec<FileRecord>,
    warnings: Vec<String>,
    started: Instant,
}

impl Reporter {
    pub fn new(
        command: &'static str,
        invocation: serde_json::Value,
        seed: u64,
        out: &Path,
    ) -> Result<Reporter, CliError> {
        fs::create_dir_all(out).map_err(|e| {
            CliError::Usage(format!(
                "cannot create output directory {}: {e}",
                out.display()
            ))
        })?;
        Ok(Reporter {
            command,
            invocation,
            seed,
            out: out.to_path_buf(),
            files: Vec::new(),
            warnings: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        self.warnings.push(message.into());
    }

    /// Writes one data file under the output directory and records its hash.
    pub fn write_file(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.out.join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        let sha256 = hex(&Sha256::digest(contents));
        self.files.push(FileRecord {
            name: name.to_string(),
            bytes: contents.len(),
            sha256,
        });
        Ok(())
    }

    /// Serializes `value` as pretty JSON with a trailing newline.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_file(name, &bytes)
    }

    /// Writes `report.json` and prints the closing status line.
    pub fn finish(self, result: &Result<serde_json::Value, CliError>) -> Result<(), CliError> {
        let (status, exit_code, summary) = match result {
            Ok(summary) => ("ok", 0u8, summary.clone()),
            Err(e) => (
                e.status(),
                e.exit_code(),
                serde_json::json!({ "error": e.to_string() }),
            ),
        };
        let report = RunReport {
            command: self.command,
            invocation: &self.invocation,
            versions: BTreeMap::from([
                ("hetdim-cli", env!("CARGO_PKG_VERSION")),
                ("hetdim-core", hetdim_core::VERSION),
            ]),
            seed: self.seed,
            status,
            exit_code,
            summary,
            warnings: &self.warnings,
            files: &self.files,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let mut bytes = serde_json::to_vec_pretty(&report)?;
        bytes.push(b'\n');
        let path = self.out.join("report.json");
        fs::write(&path, &bytes)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        let noun = if self.files.len() == 1 {
            "file"
        } else {
            "files"
        };
        println!(
            "hetdim {}: {} ({} data {noun} in {})",
            self.command,
            status,
            self.files.len(),
            self.out.display()
        );
        Ok(())
    }
}

fn hex(digest: &[u8]) -> String {
    let mut s = String::with_capacity(2 * digest.len());
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}
