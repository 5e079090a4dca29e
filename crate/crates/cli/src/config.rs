//! TOML run-configuration file for `verify ldp`. Every field is optional;
//! command-line flags override file values.

use std::path::Path;

use gempd_core::error::Error as CoreError;

#[derive(Debug, Default)]
pub struct FileConfig {
    pub event: Option<String>,
    pub alpha: Option<f64>,
    pub thetas: Option<Vec<f64>>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub tolerance_factor: Option<f64>,
    pub cells: Option<Vec<f64>>,
    pub nu: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CoreError::Domain(format!("cannot read config {path:?}: {e}")))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| CoreError::Domain(format!("bad config {path:?}: {e}")))?;
        let mut cfg = FileConfig::default();
        for (key, value) in table {
            match key.as_str() {
                "event" => cfg.event = Some(str_value(&key, &value)?),
                "nu" => cfg.nu = Some(str_value(&key, &value)?),
                "alpha" => cfg.alpha = Some(f64_value(&key, &value)?),
                "tolerance_factor" => cfg.tolerance_factor = Some(f64_value(&key, &value)?),
                "samples" => cfg.samples = Some(u64_value(&key, &value)?),
                "seed" => cfg.seed = Some(u64_value(&key, &value)?),
                "workers" => cfg.workers = Some(u64_value(&key, &value)? as usize),
                "thetas" => cfg.thetas = Some(f64_array(&key, &value)?),
                "cells" => cfg.cells = Some(f64_array(&key, &value)?),
                other => {
                    return Err(CoreError::Domain(format!(
                        "unknown config key {other:?}"
                    )))
                }
            }
        }
        Ok(cfg)
    }
}

fn str_value(key: &str, v: &toml::Value) -> Result<String, CoreError> {
    v.as_str()
        .map(String::from)
        .ok_or_else(|| CoreError::Domain(format!("config key {key:?} must be a string")))
}

fn f64_value(key: &str, v: &toml::Value) -> Result<f64, CoreError> {
    v.as_float()
        .or_else(|| v.as_integer().map(|i| i as f64))
        .ok_or_else(|| CoreError::Domain(format!("config key {key:?} must be a number")))
}

fn u64_value(key: &str, v: &toml::Value) -> Result<u64, CoreError> {
    v.as_integer()
        .and_then(|i| u64::try_from(i).ok())
        .ok_or_else(|| CoreError::Domain(format!("config key {key:?} must be a nonnegative integer")))
}

fn f64_array(key: &str, v: &toml::Value) -> Result<Vec<f64>, CoreError> {
    v.as_array()
        .map(|a| a.iter().map(|x| f64_value(key, x)).collect())
        .ok_or_else(|| CoreError::Domain(format!("config key {key:?} must be an array")))?
}
