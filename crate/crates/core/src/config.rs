//! Experiment configuration files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PsrError, Result};
use crate::estimation::CandidateFamily;
use crate::offline::OfflineConfig;
use crate::online::OnlineConfig;
use crate::pomdp::{random_mdp, random_revealing, reference_instance, tiger, TabularPomdp};
use crate::seeding::child_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Online,
    Offline,
    Verify,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    Reference,
    RandomRevealing {
        seed: u64,
        n_states: usize,
        n_obs: usize,
        n_actions: usize,
        horizon: usize,
        #[serde(default = "unit")]
        concentration: f64,
    },
    Tiger {
        horizon: usize,
    },
    RandomMdp {
        seed: u64,
        n_states: usize,
        n_actions: usize,
        horizon: usize,
    },
    /// A POMDP document; relative paths resolve against the config file.
    File {
        path: PathBuf,
    },
}

fn unit() -> f64 {
    1.0
}

impl EnvSpec {
    pub fn build(&self, base: Option<&Path>) -> Result<TabularPomdp> {
        match self {
            EnvSpec::Reference => Ok(reference_instance()),
            EnvSpec::RandomRevealing {
                seed,
                n_states,
                n_obs,
                n_actions,
                horizon,
                concentration,
            } => random_revealing(*seed, *n_states, *n_obs, *n_actions, *horizon, *concentration),
            EnvSpec::Tiger { horizon } => tiger(*horizon),
            EnvSpec::RandomMdp {
                seed,
                n_states,
                n_actions,
                horizon,
            } => random_mdp(*seed, *n_states, *n_actions, *horizon),
            EnvSpec::File { path } => {
                let full = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                TabularPomdp::from_json(&std::fs::read_to_string(&full)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub environment: EnvSpec,
    #[serde(default)]
    pub online: Option<OnlineConfig>,
    #[serde(default)]
    pub offline: Option<OfflineConfig>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    pub seeds: Vec<u64>,
    /// Episode counts for sweeps.
    #[serde(default)]
    pub k_list: Vec<usize>,
    /// Redraw a dithered candidate class from each run seed.
    #[serde(default)]
    pub reseed_candidates: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        if let EnvSpec::File { path: env } = &cfg.environment {
            let full = match path.parent() {
                Some(b) if env.is_relative() => b.join(env),
                _ => env.clone(),
            };
            if !full.exists() {
                return Err(PsrError::InvalidParameter(format!(
                    "environment file {} does not exist",
                    full.display()
                )));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(PsrError::InvalidParameter("seed list is empty".into()));
        }
        match self.mode {
            Mode::Online if self.online.is_none() => {
                Err(PsrError::InvalidParameter("online mode needs an online section".into()))
            }
            Mode::Offline | Mode::Sweep if self.offline.is_none() => {
                Err(PsrError::InvalidParameter("offline modes need an offline section".into()))
            }
            _ => Ok(()),
        }
    }

    /// The online section with `seed` applied.
    pub fn online_for(&self, seed: u64) -> Option<OnlineConfig> {
        self.online.clone().map(|mut c| {
            c.seed = seed;
            if self.reseed_candidates {
                reseed(&mut c.candidates.family, seed);
            }
            c
        })
    }

    /// The offline section with `seed` (and optionally `episodes`) applied.
    pub fn offline_for(&self, seed: u64, episodes: Option<usize>) -> Option<OfflineConfig> {
        self.offline.clone().map(|mut c| {
            c.seed = seed;
            if let Some(k) = episodes {
                c.episodes = k;
            }
            if self.reseed_candidates {
                reseed(&mut c.candidates.family, seed);
            }
            c
        })
    }
}

fn reseed(family: &mut CandidateFamily, seed: u64) {
    if let CandidateFamily::Dithered { seed: s, .. } = family {
        *s = child_seed(seed, "candidates", 0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_seed_list_is_rejected() {
        let text = r#"{"mode":"verify","environment":{"kind":"reference"},"seeds":[]}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }

    #[test]
    fn builtin_environments_build() {
        for spec in [
            EnvSpec::Reference,
            EnvSpec::Tiger { horizon: 2 },
            EnvSpec::RandomMdp {
                seed: 1,
                n_states: 2,
                n_actions: 2,
                horizon: 2,
            },
        ] {
            spec.build(None).unwrap();
        }
    }

    #[test]
    fn missing_section_is_rejected() {
        let text = r#"{"mode":"online","environment":{"kind":"reference"},"seeds":[1]}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }
}
