//! Run manifests: what was run, with which configuration and inputs.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Effective configuration after defaults, config file and flags.
    pub config: serde_json::Value,
    pub master_seed: Option<u64>,
    pub tool_version: String,
    pub inputs: Vec<InputDigest>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, master_seed: Option<u64>) -> Self {
        let now = chrono::Utc::now().to_rfc3339();
        Self {
            command: command.to_owned(),
            config,
            master_seed,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            inputs: Vec::new(),
            started_at: now.clone(),
            finished_at: now,
        }
    }

    /// Records digests of a file, or of every file inside a directory.
    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.extend(digest_path(path)?);
        Ok(())
    }

    pub fn write(mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_at = chrono::Utc::now().to_rfc3339();
        fs::create_dir_all(dir)?;
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let k = file.read(&mut buf)?;
        if k == 0 {
            break;
        }
        hasher.update(&buf[..k]);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn digest_path(path: &Path) -> Result<Vec<InputDigest>> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = fs::read_dir(path)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        entries.retain(|p| p.is_file() && p.file_name().is_some_and(|n| n != MANIFEST_FILE));
        entries.sort();
        entries
            .into_iter()
            .map(|p| Ok(InputDigest { sha256: sha256_file(&p)?, path: p }))
            .collect()
    } else if path.is_file() {
        Ok(vec![InputDigest {
            sha256: sha256_file(path)?,
            path: path.to_path_buf(),
        }])
    } else {
        Err(invalid("input", format!("{} does not exist", path.display())))
    }
}

/// The configuration object of a JSON file that is either a plain config or
/// a manifest (whose `config` field is used). A manifest from another
/// command is rejected.
pub fn load_config_object(path: &Path, command: &str) -> Result<serde_json::Map<String, serde_json::Value>> {
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(path)?)?;
    let value = match value {
        serde_json::Value::Object(mut obj) if obj.contains_key("command") && obj.contains_key("config") => {
            let cmd = obj.get("command").and_then(|c| c.as_str()).unwrap_or_default();
            if cmd != command {
                return Err(invalid("config", format!("manifest is for `{cmd}`, not `{command}`")));
            }
            obj.remove("config").unwrap()
        }
        v => v,
    };
    match value {
        serde_json::Value::Object(obj) => Ok(obj),
        _ => Err(invalid("config", "expected a JSON object")),
    }
}
