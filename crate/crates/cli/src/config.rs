//! Run configuration. Values come from embedded defaults, then an optional TOML
//! file, then command-line flags, each layer overriding the previous one.

use std::path::{Path, PathBuf};

use mcr_core::baselines::TotConfig;
use mcr_core::env::{HttpConfig, Landscape, MockProfile, QuerySettings};
use mcr_core::SearchConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MockSettings {
    pub landscape: Landscape,
    pub noise: f64,
    pub base_energy: f64,
    pub tier_bonus: f64,
    pub favored_count: usize,
}

impl Default for MockSettings {
    fn default() -> Self {
        let p = MockProfile::new(0, Landscape::PropertyKeyed);
        Self {
            landscape: p.landscape,
            noise: p.noise,
            base_energy: p.base_energy,
            tier_bonus: p.tier_bonus,
            favored_count: p.favored_count,
        }
    }
}

impl MockSettings {
    pub fn profile(&self, seed: u64) -> MockProfile {
        MockProfile {
            landscape: self.landscape,
            noise: self.noise,
            base_energy: self.base_energy,
            tier_bonus: self.tier_bonus,
            favored_count: self.favored_count,
            ..MockProfile::new(seed, self.landscape)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendKind,
    /// Seeds both the search RNG and the mock backend.
    pub seed: u64,
    pub budget: usize,
    pub gamma: f64,
    pub c: f64,
    pub max_depth_guard: usize,
    pub sc_trials: usize,
    pub tot: TotConfig,
    pub query: QuerySettings,
    pub mock: MockSettings,
    pub http: HttpConfig,
    /// Response cache file; http runs default to `<out>/cache.jsonl`.
    pub cache: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let search = SearchConfig::default();
        Self {
            backend: BackendKind::Mock,
            seed: search.rng_seed,
            budget: search.budget,
            gamma: search.gamma,
            c: search.c,
            max_depth_guard: search.max_depth_guard,
            sc_trials: 10,
            tot: TotConfig::default(),
            query: QuerySettings::default(),
            mock: MockSettings::default(),
            http: HttpConfig::default(),
            cache: None,
        }
    }
}

/// Flags given on the command line; `None` leaves the lower layers alone.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub backend: Option<BackendKind>,
    pub seed: Option<u64>,
    pub budget: Option<usize>,
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub landscape: Option<Landscape>,
    pub cache: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Defaults, overlaid with the file (if any), overlaid with the flags.
    pub fn resolve(file: Option<&Path>, overrides: &Overrides) -> Result<Self, ConfigError> {
        let mut config = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
                    path: path.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text, path)?
            }
            None => Self::default(),
        };
        config.apply(overrides);
        config.search(0)?;
        if config.sc_trials == 0 {
            return Err(ConfigError::Invalid("sc_trials must be positive".into()));
        }
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.backend {
            self.backend = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.budget {
            self.budget = v;
        }
        if let Some(v) = o.gamma {
            self.gamma = v;
        }
        if let Some(v) = o.c {
            self.c = v;
        }
        if let Some(v) = o.landscape {
            self.mock.landscape = v;
        }
        if let Some(v) = &o.cache {
            self.cache = Some(v.clone());
        }
    }

    pub fn search(&self, rng_seed: u64) -> Result<SearchConfig, ConfigError> {
        let search = SearchConfig {
            gamma: self.gamma,
            c: self.c,
            budget: self.budget,
            max_depth_guard: self.max_depth_guard,
            rng_seed,
        };
        search
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(search)
    }
}
