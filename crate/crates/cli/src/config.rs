//! JSON configuration files.
//!
//! Every file carries `schema_version`. Unknown keys are an error unless the
//! caller asked for lenient loading, in which case they are logged and skipped.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sounder_core::filterbank::SynthesisOptions;
use sounder_core::pipeline::{ChopperMapping, DeglitchOptions, DemodOptions};
use sounder_core::radiometry::{CalibrationTable, RadiometerChain};
use sounder_core::synth::Scenario;
use sounder_core::waveguide::{Conductor, WaveguideSpec};

pub const SCHEMA_VERSION: u32 = 1;

pub trait Versioned {
    fn schema_version(&self) -> u32;
}

/// Parse `path` as `T`, rejecting unknown keys unless `lenient`.
pub fn load<T: DeserializeOwned + Versioned>(path: &Path, lenient: bool) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text, lenient).with_context(|| format!("in {}", path.display()))
}

pub fn parse<T: DeserializeOwned + Versioned>(text: &str, lenient: bool) -> Result<T> {
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_ignored::deserialize(&mut de, |path| unknown.push(path.to_string()))?;
    de.end()?;
    if !unknown.is_empty() {
        if lenient {
            for key in &unknown {
                log::warn!("ignoring unknown key {key}");
            }
        } else {
            bail!("unknown key(s): {} (pass --lenient to ignore)", unknown.join(", "));
        }
    }
    if value.schema_version() != SCHEMA_VERSION {
        bail!("unsupported schema_version {} (this build reads {SCHEMA_VERSION})", value.schema_version());
    }
    Ok(value)
}

macro_rules! versioned {
    ($($t:ty),*) => {
        $(impl Versioned for $t {
            fn schema_version(&self) -> u32 {
                self.schema_version
            }
        })*
    };
}

versioned!(BandConfig, ChainConfig, PipelineConfig, ScenarioConfig, CalibrationFile);

/// A catalog guide by name, or explicit dimensions in meters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GuideConfig {
    pub name: String,
    #[serde(default)]
    pub width_m: Option<f64>,
    #[serde(default)]
    pub height_m: Option<f64>,
    #[serde(default)]
    pub conductor: Option<Conductor>,
}

impl GuideConfig {
    pub fn resolve(&self) -> Result<WaveguideSpec> {
        let spec = match (self.width_m, self.height_m) {
            (Some(w), Some(h)) => WaveguideSpec::new(self.name.clone(), w, h, Conductor::default())?,
            (None, None) => WaveguideSpec::standard(&self.name)?,
            _ => bail!("guide {:?}: give both width_m and height_m or neither", self.name),
        };
        Ok(match self.conductor {
            Some(c) => spec.with_conductor(c),
            None => spec,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelTarget {
    pub f0_ghz: f64,
    pub hpbw_ghz: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepConfig {
    pub start_ghz: f64,
    pub stop_ghz: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpacingConfig {
    /// Candidate spacings in guided wavelengths.
    #[serde(default = "sounder_core::filterbank::default_spacing_candidates")]
    pub candidates: Vec<f64>,
    /// Spacing used without `--optimize`, in guided wavelengths.
    #[serde(default = "one")]
    pub default_multiplier: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for SpacingConfig {
    fn default() -> Self {
        Self { candidates: sounder_core::filterbank::default_spacing_candidates(), default_multiplier: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandConfig {
    pub schema_version: u32,
    pub band: String,
    pub guide: GuideConfig,
    pub channels: Vec<ChannelTarget>,
    pub sweep: SweepConfig,
    #[serde(default)]
    pub synthesis: SynthesisOptions,
    #[serde(default)]
    pub spacing: SpacingConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainConfig {
    pub schema_version: u32,
    pub chain: RadiometerChain,
    #[serde(default = "room")]
    pub t_scene_k: f64,
}

fn room() -> f64 {
    290.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub chopper: ChopperMapping,
    /// Nominal rate; estimated from the timestamps when absent.
    #[serde(default)]
    pub sample_rate_hz: Option<f64>,
    #[serde(default)]
    pub deglitch: DeglitchOptions,
    #[serde(default)]
    pub demodulate: DemodOptions,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub scenario: Scenario,
}

/// Calibration table as written by `simulate` and read by `process`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub schema_version: u32,
    #[serde(default)]
    pub tool_version: Option<String>,
    pub calibration: CalibrationTable,
}
