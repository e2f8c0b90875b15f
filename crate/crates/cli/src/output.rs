use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use shapefair::gam::Provenance;

use crate::CliError;

pub fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Name and content digest of an input file. Digests, not absolute paths,
/// enter the config hash so runs hash identically from any directory.
#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub name: String,
    pub sha256: String,
}

impl InputFile {
    pub fn read(path: &Path) -> Result<(PathBuf, Self), CliError> {
        let resolved = fs::canonicalize(path).map_err(|e| CliError::io(path, e))?;
        let bytes = fs::read(&resolved).map_err(|e| CliError::io(&resolved, e))?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Ok((
            resolved,
            InputFile {
                name,
                sha256: hex_sha256(&bytes),
            },
        ))
    }
}

pub fn optional_input(path: Option<&Path>) -> Result<(Option<PathBuf>, Option<InputFile>), CliError> {
    match path {
        Some(p) => {
            let (r, f) = InputFile::read(p)?;
            Ok((Some(r), Some(f)))
        }
        None => Ok((None, None)),
    }
}

/// Output directory plus the provenance stamped on every artifact.
pub struct Output {
    dir: PathBuf,
    pub provenance: Provenance,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config_hash: &'a str,
    seed: u64,
    #[serde(flatten)]
    body: &'a T,
}

impl Output {
    /// Hashes `{"command": .., "config": ..}` in canonical (sorted-key) JSON.
    pub fn new(dir: &Path, command: &str, config: &impl Serialize, seed: u64) -> Result<Self, CliError> {
        let value = serde_json::json!({ "command": command, "config": config });
        let canonical = serde_json::to_string(&value).expect("config serializes");
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            provenance: Provenance {
                seed,
                config_hash: hex_sha256(canonical.as_bytes()),
            },
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// Pretty JSON with `config_hash` and `seed` ahead of the body's fields.
    pub fn write_json<T: Serialize>(&self, name: &str, body: &T) -> Result<PathBuf, CliError> {
        let env = Envelope {
            config_hash: &self.provenance.config_hash,
            seed: self.provenance.seed,
            body,
        };
        let mut text = serde_json::to_string_pretty(&env).expect("report serializes");
        text.push('\n');
        self.write_text(name, &text)
    }

    /// CSV body preceded by a `#` provenance comment.
    pub fn write_csv(&self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let text = format!("{}{body}", self.comment());
        self.write_text(name, &text)
    }

    pub fn comment(&self) -> String {
        format!(
            "# config_hash={} seed={}\n",
            self.provenance.config_hash, self.provenance.seed
        )
    }
}
