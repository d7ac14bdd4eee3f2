//! Versioned TOML run configuration. Values on the command line win over the
//! file; within the file a `[command]` table wins over top-level keys.
//!
//! ```toml
//! version = 1
//! seed = 7
//!
//! [ablate]
//! thresholds = [0, 10, 100]
//! repeats = 5
//! ```

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use crate::error::{CliError, Result};

pub const CONFIG_VERSION: i64 = 1;

#[derive(Debug, Default)]
pub struct Config {
    path: Option<PathBuf>,
    command: String,
    table: toml::Table,
}

impl Config {
    pub fn empty(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn load(path: &Path, command: &str) -> Result<Self> {
        if !path.is_file() {
            return Err(CliError::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })?;
        match table.get("version").and_then(toml::Value::as_integer) {
            Some(CONFIG_VERSION) => {}
            Some(v) => {
                return Err(CliError::Config {
                    path: path.to_path_buf(),
                    message: format!("unsupported version {v} (expected {CONFIG_VERSION})"),
                })
            }
            None => {
                return Err(CliError::Config {
                    path: path.to_path_buf(),
                    message: "missing integer `version`".into(),
                })
            }
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            command: command.to_string(),
            table,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn lookup(&self, key: &str) -> Option<&toml::Value> {
        self.table
            .get(&self.command)
            .and_then(toml::Value::as_table)
            .and_then(|t| t.get(key))
            .or_else(|| self.table.get(key).filter(|v| !v.is_table()))
    }

    fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        match self.lookup(key) {
            None => Ok(None),
            Some(v) => v.clone().try_into().map(Some).map_err(|e: toml::de::Error| CliError::Config {
                path: self.path.clone().unwrap_or_default(),
                message: format!("key `{key}`: {}", e.message()),
            }),
        }
    }

    /// Flag value, else config value, else `None`.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    pub fn pick_or<T: DeserializeOwned>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.pick(flag, key)?.unwrap_or(default))
    }

    /// List-valued flags arrive empty when not given.
    pub fn pick_list<T: DeserializeOwned>(&self, flag: Vec<T>, key: &str) -> Result<Option<Vec<T>>> {
        if flag.is_empty() {
            self.get(key)
        } else {
            Ok(Some(flag))
        }
    }

    pub fn pick_path(&self, flag: Option<PathBuf>, key: &str) -> Result<Option<PathBuf>> {
        let from_file: Option<String> = if flag.is_some() { None } else { self.get(key)? };
        Ok(flag.or_else(|| from_file.map(PathBuf::from)))
    }
}
