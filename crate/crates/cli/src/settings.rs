//! Merges a config file under the command-line flags.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::ArgMatches;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::failure::Failure;

pub struct Resolver<'a> {
    command: String,
    matches: &'a ArgMatches,
    file: Option<Map<String, Value>>,
    config_path: Option<PathBuf>,
}

impl<'a> Resolver<'a> {
    pub fn new(
        command: &str,
        matches: &'a ArgMatches,
        config: Option<&Path>,
    ) -> Result<Self, Failure> {
        let file = config.map(|p| load_config(p, command)).transpose()?;
        Ok(Resolver {
            command: command.to_string(),
            matches,
            file,
            config_path: config.map(Path::to_path_buf),
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn config_path(&self) -> Option<&Path> {
        self.config_path.as_deref()
    }

    /// `args` with every value not given on the command line replaced by the
    /// config file's, when it has one.
    pub fn resolve<T>(&self, args: T) -> Result<T, Failure>
    where
        T: Serialize + DeserializeOwned + clap::Args,
    {
        let Some(file) = &self.file else {
            return Ok(args);
        };
        let known: HashSet<String> = T::augment_args(clap::Command::new("probe"))
            .get_arguments()
            .map(|a| a.get_id().to_string())
            .collect();
        let mut merged = match serde_json::to_value(&args) {
            Ok(Value::Object(m)) => m,
            _ => unreachable!("argument structs serialize to objects"),
        };
        for (key, value) in file {
            let id = key.replace('-', "_");
            if !known.contains(&id) {
                return Err(Failure::usage(format!(
                    "config key {key:?} is not a flag of {}",
                    self.command
                )));
            }
            if self.matches.value_source(&id) == Some(ValueSource::CommandLine) {
                continue;
            }
            merged.insert(key.clone(), value.clone());
        }
        serde_json::from_value(Value::Object(merged))
            .map_err(|e| Failure::usage(format!("config: {e}")))
    }
}

/// A TOML file of flag values, or a JSON report or manifest whose recorded
/// config is reused.
fn load_config(path: &Path, command: &str) -> Result<Map<String, Value>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    let value: Value = if is_json {
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))?;
        let manifest = v.get("manifest").cloned().unwrap_or(v);
        if let Some(recorded) = manifest.get("command").and_then(Value::as_str) {
            if recorded != command {
                return Err(Failure::usage(format!(
                    "config {} was recorded by {recorded}, not {command}",
                    path.display()
                )));
            }
        }
        manifest.get("config").cloned().unwrap_or(manifest)
    } else {
        toml::from_str(&text)
            .map_err(|e| Failure::usage(format!("config {}: {}", path.display(), e.message())))?
    };
    match value {
        Value::Object(mut m) => {
            m.retain(|_, v| !v.is_null());
            Ok(m)
        }
        _ => Err(Failure::usage(format!(
            "config {} is not a table",
            path.display()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn toml_and_report_configs() {
        let dir = tempfile::tempdir().unwrap();
        let toml = write(dir.path(), "a.toml", "stride = 8\nrerank = \"oracle\"\n");
        let m = load_config(&toml, "eval-ppl").unwrap();
        assert_eq!(m["stride"], 8);

        let report = write(
            dir.path(),
            "r.json",
            r#"{"manifest":{"command":"eval-ppl","config":{"stride":2,"index":null}},"result":{}}"#,
        );
        let m = load_config(&report, "eval-ppl").unwrap();
        assert_eq!(m.len(), 1);
        assert!(load_config(&report, "sweep").is_err());
        assert!(load_config(&write(dir.path(), "b.toml", "= 1"), "x").is_err());
    }
}
