use std::fs;
use std::path::{Path, PathBuf};

use mobelcov_core::baseline::DEFAULT_LEVELS;
use mobelcov_core::env::EnvConfig;
use mobelcov_core::pcn::PcnConfig;
use mobelcov_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::args::Common;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub levels: usize,
    pub repeats: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { levels: DEFAULT_LEVELS, repeats: 10 }
    }
}

/// Everything a command needs, after merging file, environment and flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Extra training seeds; the coverage sets are merged into one front.
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub params: Option<PathBuf>,
    pub env: EnvConfig,
    pub pcn: PcnConfig,
    pub baseline: BaselineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            seeds: Vec::new(),
            out: PathBuf::from("runs"),
            params: None,
            env: EnvConfig::default(),
            pcn: PcnConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
        // relative parameter paths are relative to the config file
        if let (Some(p), Some(dir)) = (&cfg.params, path.parent()) {
            if p.is_relative() {
                cfg.params = Some(dir.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn resolve(common: &Common) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(p) = &common.params {
            cfg.params = Some(p.clone());
        }
        if let Some(s) = common.seed {
            cfg.seed = s;
        }
        if let Some(m) = common.mode {
            cfg.env.mode = m;
        }
        if let Some(o) = common.objectives {
            cfg.env.objectives = o;
        }
        if let Some(s) = common.steps {
            cfg.pcn.total_steps = s;
        }
        if let Some(o) = &common.out {
            cfg.out = o.clone();
        }
        if let Some(r) = common.repeats {
            cfg.baseline.repeats = r;
            cfg.pcn.eval_episodes = r;
        }
        if let Some(n) = common.exploration_noise {
            cfg.pcn.exploration_noise = n;
        }
        if let Some(n) = common.return_noise {
            cfg.pcn.desired_return_noise = n;
        }
        if common.sequential {
            cfg.pcn.execution = mobelcov_core::Execution::Sequential;
        }
        if let Some(p) = &cfg.params {
            if !p.is_file() {
                return Err(Error::Config(format!("parameter file {} does not exist", p.display())));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// The master seed followed by any extra seeds, without repeats.
    pub fn all_seeds(&self) -> Vec<u64> {
        let mut out = vec![self.seed];
        for &s in &self.seeds {
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out
    }
}
