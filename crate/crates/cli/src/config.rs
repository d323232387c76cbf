use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tegnas::bench::TrainConfig;
use tegnas::data::BlobConfig;
use tegnas::indicators::IndicatorConfig;
use tegnas::netgen::{MacroConfig, SearchSpace, SpaceKind};
use tegnas::search::{Method, SearchConfig};

use crate::error::CliError;

/// Landscape export settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandscapeConfig {
    pub grid: usize,
    pub grid_seed: u64,
    pub child_steps: usize,
    pub interp_points: usize,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        LandscapeConfig {
            grid: 512,
            grid_seed: 0,
            child_steps: 50,
            interp_points: 11,
        }
    }
}

/// Everything a run needs. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub space: SpaceKind,
    pub method: Method,
    /// Search seed.
    pub seed: u64,
    /// Write a checkpoint every this many steps (0 = only first and last).
    pub checkpoint_every: usize,
    /// Not part of the snapshot, so a run can be replayed elsewhere.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    #[serde(rename = "macro")]
    pub macro_cfg: MacroConfig,
    pub indicators: IndicatorConfig,
    pub search: SearchConfig,
    pub data: BlobConfig,
    pub train: TrainConfig,
    pub landscape: LandscapeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            space: SpaceKind::Toy,
            method: Method::Reinforce,
            seed: 0,
            checkpoint_every: 10,
            out_dir: None,
            macro_cfg: MacroConfig::default(),
            indicators: IndicatorConfig::default(),
            search: SearchConfig::default(),
            data: BlobConfig::default(),
            train: TrainConfig::default(),
            landscape: LandscapeConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Missing(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// The file at `path`, or defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(RunConfig::default()), RunConfig::load)
    }

    pub fn space(&self) -> SearchSpace {
        SearchSpace::from_kind(self.space).with_macro(self.macro_cfg.clone())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        self.space().validate().map_err(|e| bad(&e))?;
        self.indicators.validate().map_err(|e| bad(&e))?;
        self.search.validate().map_err(|e| bad(&e))?;
        let m = &self.macro_cfg;
        let d = &self.data;
        if (d.channels, d.size, d.classes) != (m.input_channels, m.input_size, m.classes) {
            return Err(CliError::Config(format!(
                "data shape {}x{}x{} with {} classes does not match the macro config {}x{}x{} with {} classes",
                d.channels, d.size, d.size, d.classes, m.input_channels, m.input_size, m.input_size, m.classes
            )));
        }
        if self.landscape.interp_points < 2 {
            return Err(CliError::Config(
                "landscape.interp_points must be at least 2".into(),
            ));
        }
        Ok(())
    }

    /// TOML text of the effective config.
    pub fn snapshot(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_round_trips() {
        let mut c = RunConfig {
            seed: 42,
            method: Method::FpNas,
            ..RunConfig::default()
        };
        c.search.hard_cap = Some(7);
        let back: RunConfig = toml::from_str(&c.snapshot()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sede = 3").is_err());
        assert!(toml::from_str::<RunConfig>("[search]\nrl_lr = 0.1\nbogus = 1").is_err());
        let c: RunConfig =
            toml::from_str("space = \"cell201\"\n[indicators]\nrepeats = 1").unwrap();
        assert_eq!(c.indicators.repeats, 1);
        assert_eq!(c.space, SpaceKind::Cell201);
    }

    #[test]
    fn shape_mismatch_is_a_config_error() {
        let mut c = RunConfig::default();
        c.data.size = 4;
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }
}
