//! JSON/CSV output and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::CliError;

/// Collects the files written by one command and finishes with its manifest.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
    started: Instant,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::io("create_output_dir", format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::io("write_json", e))?;
        self.write(name, text + "\n")
    }

    /// Writes `header` and `rows`; every field is formatted with `Display`, so floats
    /// round-trip exactly.
    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let path = self.path(name);
        let mut writer = csv::Writer::from_path(&path).map_err(|e| CliError::io("write_csv", e))?;
        writer
            .write_record(header)
            .map_err(|e| CliError::io("write_csv", e))?;
        for row in rows {
            writer
                .write_record(&row)
                .map_err(|e| CliError::io("write_csv", e))?;
        }
        writer.flush().map_err(|e| CliError::io("write_csv", e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn write(&mut self, name: &str, text: String) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, text)
            .map_err(|e| CliError::io("write_artifact", format!("{}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Writes `<command>.manifest.json`, which can be passed back through `--config`.
    pub fn finish(
        mut self,
        command: &str,
        config: &impl Serialize,
        seed: Option<u64>,
    ) -> Result<(), CliError> {
        let config = serde_json::to_value(config).map_err(|e| CliError::io("write_manifest", e))?;
        let manifest = json!({
            "command": command,
            "config": config,
            "seed": seed,
            "versions": versions(),
            "wall_time_seconds": self.started.elapsed().as_secs_f64(),
            "outputs": self.written.clone(),
        });
        let name = format!("{command}.manifest.json");
        self.json(&name, &manifest)
    }
}

pub fn versions() -> Value {
    json!({
        "stablasso": env!("CARGO_PKG_VERSION"),
        "stablasso-core": stablasso_core::VERSION,
    })
}

/// Resolved config as echoed into artifacts: everything except the output directory and
/// thread count, which do not affect results, so artifacts regenerate byte for byte.
pub fn artifact_config(config: &impl Serialize) -> Value {
    let mut value = serde_json::to_value(config).unwrap_or(Value::Null);
    if let Value::Object(fields) = &mut value {
        fields.remove("out");
        fields.remove("threads");
    }
    value
}

/// Wraps a payload with the resolved config of the run that produced it.
pub fn with_config(config: &impl Serialize, key: &str, payload: impl Serialize) -> Value {
    json!({ "config": artifact_config(config), key: payload })
}

pub fn fmt_indices(indices: &[usize]) -> String {
    indices
        .iter()
        .map(|j| j.to_string())
        .collect::<Vec<_>>()
        .join(";")
}
