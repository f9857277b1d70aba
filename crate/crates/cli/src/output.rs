use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};

/// Tool, version, command and config identity stamped on every output.
#[derive(Debug, Clone)]
pub struct Provenance {
    pairs: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: &str, config_hash: &str, seed: u64, timestamp: bool) -> Self {
        let mut pairs = vec![
            ("tool".to_string(), "midecode".to_string()),
            ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("command".to_string(), command.to_string()),
            ("config_hash".to_string(), config_hash.to_string()),
            ("seed".to_string(), seed.to_string()),
        ];
        if timestamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            pairs.push(("timestamp".to_string(), secs.to_string()));
        }
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn to_json(&self) -> Value {
        Value::Object(self.pairs.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect())
    }
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_with(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
        let path = self.path(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
        Ok(())
    }

    /// `value` serialized as an object with a `provenance` member added.
    pub fn write_json(&self, name: &str, value: &impl Serialize, prov: &Provenance) -> Result<()> {
        let mut obj = match serde_json::to_value(value)? {
            Value::Object(m) => m,
            other => {
                let mut m = Map::new();
                m.insert("value".into(), other);
                m
            }
        };
        obj.insert("provenance".into(), prov.to_json());
        let text = serde_json::to_string_pretty(&Value::Object(obj))?;
        self.write_with(name, |w| writeln!(w, "{text}"))
    }
}
