//! Run configuration: a JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use ife_core::montecarlo::{DesignKind, Method};
use ife_core::Family;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable that overrides the output directory of a config file.
pub const OUTPUT_DIR_ENV: &str = "IFE_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectMethod {
    Ife,
    Hbc,
    BcHn,
}

impl CorrectMethod {
    pub fn name(self) -> &'static str {
        match self {
            CorrectMethod::Ife => "ife",
            CorrectMethod::Hbc => "hbc",
            CorrectMethod::BcHn => "bc_hn",
        }
    }
}

impl FromStr for CorrectMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ife" => Ok(CorrectMethod::Ife),
            "hbc" => Ok(CorrectMethod::Hbc),
            "bc_hn" | "bchn" => Ok(CorrectMethod::BcHn),
            _ => Err(format!("unknown method '{s}' (expected ife, hbc or bc_hn)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Every key may come from the config file or the flag of the same name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<CorrectMethod>,
    #[serde(default, rename = "H", skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<DesignKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<Method>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verbosity: Option<u8>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($field:ident),*) => {
        $(if $src.$field.is_some() {
            $dst.$field = $src.$field.clone();
        })*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))
    }

    /// `flags` win over `self`; the output-directory variable wins over a
    /// directory from the file but not over `--out`.
    pub fn merge(mut self, flags: &RunConfig, env_out: Option<PathBuf>) -> Self {
        if let Some(dir) = env_out {
            self.out = Some(dir);
        }
        overlay!(self, flags, data, schema, family, method, h, seed, r, design, n, t, methods, theta0, out, format, threads, verbosity);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(1)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }

    pub fn verbosity(&self) -> u8 {
        self.verbosity.unwrap_or(0)
    }

    /// The keys that determine results, as echoed into every output file.
    /// Output location, format, thread count and verbosity are left out so
    /// that they cannot change the bytes written.
    pub fn echo(&self) -> RunConfig {
        RunConfig { out: None, format: None, threads: None, verbosity: None, ..self.clone() }
    }

    pub fn require_data(&self) -> Result<&Path, CliError> {
        self.data.as_deref().ok_or_else(|| CliError::Input("missing --data".into()))
    }
}
