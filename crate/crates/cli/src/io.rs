//! Atomic output writes and input loading.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::CliError;

/// Collects written paths for the progress log.
#[derive(Debug, Default)]
pub struct Outputs {
    pub written: Vec<PathBuf>,
}

impl Outputs {
    /// Writes through a temp file in the target directory, then renames, so
    /// readers never see a partial file.
    pub fn bytes(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        let wrap = |source| CliError::Write {
            path: path.to_path_buf(),
            source,
        };
        let dir = path
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir).map_err(wrap)?;
        let mut tmp = NamedTempFile::new_in(dir).map_err(wrap)?;
        tmp.write_all(bytes).map_err(wrap)?;
        tmp.as_file().sync_all().map_err(wrap)?;
        tmp.persist(path).map_err(|e| wrap(e.error))?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, path: &Path, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(picker_bench::Error::from)?;
        bytes.push(b'\n');
        self.bytes(path, &bytes)
    }

    pub fn ndjson<T: Serialize>(&mut self, path: &Path, rows: &[T]) -> Result<(), CliError> {
        let mut bytes = Vec::new();
        for row in rows {
            serde_json::to_writer(&mut bytes, row).map_err(picker_bench::Error::from)?;
            bytes.push(b'\n');
        }
        self.bytes(path, &bytes)
    }

    pub fn csv<T: Serialize>(&mut self, path: &Path, rows: &[T]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row).map_err(|e| CliError::Write {
                path: path.to_path_buf(),
                source: e.into(),
            })?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Write {
            path: path.to_path_buf(),
            source: e.into_error(),
        })?;
        self.bytes(path, &bytes)
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::missing(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_reader(open(path)?).map_err(|e| {
        CliError::Core(picker_bench::Error::Parse {
            line: e.line(),
            message: format!("{}: {e}", path.display()),
        })
    })
}

pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    use std::io::BufRead;
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| CliError::missing(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| {
            CliError::Core(picker_bench::Error::Parse {
                line: i + 1,
                message: format!("{}: {e}", path.display()),
            })
        })?);
    }
    Ok(out)
}

/// Sorted files in `dir` whose names end with `suffix`; empty if `dir` is absent.
pub fn files_with_suffix(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>, CliError> {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return Ok(Vec::new());
    };
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(suffix))
        })
        .collect();
    out.sort();
    Ok(out)
}
