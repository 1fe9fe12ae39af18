//! Versioned TOML configuration files.

use std::path::Path;

use hawkesnet::estimation::FitConfig;
use hawkesnet::experiments::StudyConfig;
use hawkesnet::simulate::DgpConfig;
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub dgp: Option<DgpConfig>,
    pub fit: Option<FitConfig>,
    pub study: Option<StudyConfig>,
}

pub fn parse(text: &str, origin: &str) -> Result<ConfigFile, Failure> {
    let cfg: ConfigFile = toml::from_str(text).map_err(|e| Failure::invalid(format!("{origin}: {e}")))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(Failure::invalid(format!(
            "{origin}: schema_version {} is not supported (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    Ok(cfg)
}

pub fn load(path: Option<&Path>) -> Result<ConfigFile, Failure> {
    match path {
        None => Ok(ConfigFile { schema_version: SCHEMA_VERSION, ..ConfigFile::default() }),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::invalid(format!("{}: {e}", p.display())))?;
            parse(&text, &p.display().to_string())
        }
    }
}
