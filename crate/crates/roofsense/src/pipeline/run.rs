//! Run directories: structured logs and the manifest describing a run.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use roofsense_core::metrics::MetricsReport;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::config::RunConfig;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "run_manifest.json";

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// JSON-lines log with a plain-text mirror on stderr and in `log.txt`.
pub struct RunLog {
    jsonl: File,
    text: File,
    timestamps: bool,
    quiet: bool,
}

impl RunLog {
    pub fn create(dir: &Path, timestamps: bool) -> Result<RunLog> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let open = |name: &str| {
            let p = dir.join(name);
            File::create(&p).map_err(|e| Error::io(&p, e))
        };
        Ok(RunLog { jsonl: open("log.jsonl")?, text: open("log.txt")?, timestamps, quiet: false })
    }

    /// Stops mirroring to stderr.
    pub fn quiet(mut self) -> Self {
        self.quiet = true;
        self
    }

    pub fn event(&mut self, level: &str, event: &str, fields: Value) {
        let mut line = json!({ "level": level, "event": event });
        if self.timestamps {
            line["unix_time"] = json!(now());
        }
        if let (Some(obj), Value::Object(extra)) = (line.as_object_mut(), &fields) {
            obj.extend(extra.clone());
        }
        let human = match &fields {
            Value::Object(m) if !m.is_empty() => {
                let kv: Vec<String> = m.iter().map(|(k, v)| format!("{k}={v}")).collect();
                format!("[{level}] {event}: {}", kv.join(" "))
            }
            _ => format!("[{level}] {event}"),
        };
        // Logging is best effort; a full disk surfaces on the next real write.
        let _ = writeln!(self.jsonl, "{line}");
        let _ = writeln!(self.text, "{human}");
        if !self.quiet {
            eprintln!("{human}");
        }
    }

    pub fn info(&mut self, event: &str, fields: Value) {
        self.event("info", event, fields);
    }

    pub fn warn(&mut self, event: &str, fields: Value) {
        self.event("warn", event, fields);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRef {
    pub path: PathBuf,
    pub weights_sha256: String,
}

/// What a run did and with which inputs; enough to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: RunConfig,
    pub dataset_hash: Option<String>,
    pub checkpoints: Vec<CheckpointRef>,
    pub cv_table: Option<PathBuf>,
    pub metrics: Option<MetricsReport>,
    pub outputs: Value,
    pub started_unix: Option<u64>,
    pub finished_unix: Option<u64>,
    pub version: String,
}

impl RunManifest {
    pub fn start(command: &str, config: &RunConfig) -> RunManifest {
        let mut argv = vec![env!("CARGO_PKG_NAME").to_string(), command.to_string()];
        argv.extend(overrides_for(config));
        RunManifest {
            command: command.to_string(),
            argv,
            config: config.clone(),
            dataset_hash: None,
            checkpoints: Vec::new(),
            cv_table: None,
            metrics: None,
            outputs: Value::Null,
            started_unix: (!config.deterministic).then(now),
            finished_unix: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn write(mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_unix = (!self.config.deterministic).then(now);
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_vec_pretty(&self)?).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<RunManifest> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e))
    }
}

/// `--set` flags that rebuild `config` from defaults.
pub fn overrides_for(config: &RunConfig) -> Vec<String> {
    let mut out = Vec::new();
    if let Ok(v) = toml::Value::try_from(config) {
        flatten("", &v, &mut out);
    }
    out
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<String>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => {
            out.push("--set".into());
            out.push(format!("{prefix}={other}"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argv_reconstructs_the_config() {
        let mut cfg = RunConfig { seed: 3, ..RunConfig::default() };
        cfg.train.max_epochs = 4;
        cfg.split.region = Some(roofsense_core::Country::Dominica);
        let m = RunManifest::start("train", &cfg);
        let sets: Vec<String> = m.argv.chunks(2).skip(1).map(|c| c[1].clone()).collect();
        assert_eq!(RunConfig::load(None, &sets).unwrap(), cfg);
    }
}
