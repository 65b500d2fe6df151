//! Run configuration.
//!
//! The file is TOML restricted to dotted keys, one setting per line:
//!
//! ```text
//! seed = 7
//! grid.spacing = 60.0
//! link.dgd_signal = 0.3
//! tomography.method = "mle"
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel_grid::GridParams;
use crate::error::{Error, Result};
use crate::link::LinkParams;
use crate::measure::DetectorParams;
use crate::source::SourceParams;
use crate::tomo::{Method, MleOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographyConfig {
    pub method: Method,
    pub max_evaluations: usize,
    pub rel_tol: f64,
    pub grad_tol: f64,
    pub accidentals: f64,
}

impl Default for TomographyConfig {
    fn default() -> Self {
        let mle = MleOptions::default();
        TomographyConfig {
            method: Method::Mle,
            max_evaluations: mle.max_evaluations,
            rel_tol: mle.rel_tol,
            grad_tol: mle.grad_tol,
            accidentals: mle.accidentals,
        }
    }
}

impl TomographyConfig {
    pub fn mle_options(&self) -> MleOptions {
        MleOptions {
            max_evaluations: self.max_evaluations,
            rel_tol: self.rel_tol,
            grad_tol: self.grad_tol,
            accidentals: self.accidentals,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompensationConfig {
    /// Re-align the drift controllers every this many channel intervals; 0 never.
    pub realign_every: usize,
}

impl Default for CompensationConfig {
    fn default() -> Self {
        CompensationConfig { realign_every: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridParams,
    pub source: SourceParams,
    pub link: LinkParams,
    pub detector: DetectorParams,
    pub tomography: TomographyConfig,
    pub compensation: CompensationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            output_dir: PathBuf::from("out"),
            grid: GridParams::default(),
            source: SourceParams::default(),
            link: LinkParams::default(),
            detector: DetectorParams::default(),
            tomography: TomographyConfig::default(),
            compensation: CompensationConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.source.validate()?;
        self.link.validate()?;
        self.detector.validate()?;
        self.tomography.mle_options().validate()?;
        if (self.grid.pump_wavelength - self.source.pump_center).abs() > 1e-9 {
            return Err(Error::validation(
                "source.pump_center",
                format!(
                    "must equal grid.pump_wavelength ({} != {})",
                    self.source.pump_center, self.grid.pump_wavelength
                ),
            ));
        }
        if let Some(ch) = self.source.optimized_channel {
            if ch > self.grid.channel_count {
                return Err(Error::validation(
                    "source.optimized_channel",
                    format!("channel {ch} exceeds grid.channel_count {}", self.grid.channel_count),
                ));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)?;
    text.parse()
}
