use std::fs;
use std::path::{Path, PathBuf};

use fastgate::designer::{DesignerConfig, GateKind};
use fastgate::readout::IqClusterModel;
use fastgate::sim::TransmonParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Simulated device. Frequencies are angular, rad/ns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceConfig {
    pub omega_q: f64,
    pub alpha: f64,
    pub levels: usize,
    pub drive_scale: f64,
    /// Drive frequency; defaults to `omega_q`.
    pub omega_d: Option<f64>,
    /// Shift of the simulated qubit frequency away from the drive, rad/ns.
    pub drift: f64,
}

impl Default for DeviceConfig {
    fn default() -> Self {
        let p = TransmonParams::default();
        Self {
            omega_q: p.omega_q,
            alpha: p.alpha,
            levels: p.levels,
            drive_scale: p.drive_scale,
            omega_d: None,
            drift: 0.0,
        }
    }
}

impl DeviceConfig {
    pub fn params(&self) -> TransmonParams {
        TransmonParams {
            omega_q: self.omega_q,
            alpha: self.alpha,
            levels: self.levels,
            drive_scale: self.drive_scale,
            omega_d: self.omega_d.unwrap_or(self.omega_q),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReadoutConfig {
    /// JSON cluster model; the built-in geometry when absent.
    pub model: Option<PathBuf>,
}

/// Everything a pipeline needs, loaded from one TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pipeline: String,
    pub gate: GateKind,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub device: DeviceConfig,
    pub readout: ReadoutConfig,
    pub designer: DesignerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pipeline: "default".into(),
            gate: GateKind::X,
            seeds: vec![0],
            out: PathBuf::from("runs"),
            device: DeviceConfig::default(),
            readout: ReadoutConfig::default(),
            designer: DesignerConfig::default(),
        }
    }
}

impl RunConfig {
    /// Reads `path` (or starts from defaults), applies `key=value` overrides
    /// with dotted keys, then validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.seeds.is_empty() {
            return Err(CliError::Config("seed set is empty".into()));
        }
        if let Some(m) = &self.readout.model {
            if !m.exists() {
                return Err(CliError::Config(format!(
                    "readout model {} does not exist",
                    m.display()
                )));
            }
        }
        self.device
            .params()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.designer
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn readout_model(&self) -> Result<IqClusterModel, CliError> {
        match &self.readout.model {
            Some(p) => {
                let text = fs::read_to_string(p)?;
                IqClusterModel::from_json(&text).map_err(|e| CliError::Config(e.to_string()))
            }
            None => Ok(IqClusterModel::default_for(self.device.levels)),
        }
    }

    /// Designer settings for one member of the seed set.
    pub fn designer_for(&self, seed: u64) -> DesignerConfig {
        DesignerConfig {
            seed,
            ..self.designer.clone()
        }
    }

    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.out.join(format!("seed-{seed}"))
    }
}

/// `a.b.c=value`; the value is parsed as TOML and falls back to a bare string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{spec}` is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{key}`")));
    }
    let mut node = table;
    for p in &parts[..parts.len() - 1] {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{p}` in `{key}` is not a section")))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
