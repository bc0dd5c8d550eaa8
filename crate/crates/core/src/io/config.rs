use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autoencoder::AeTrainConfig;
use crate::envs::{EnvConfig, EnvId};
use crate::error::{Error, Result};
use crate::trainer::TrainConfig;

/// Parses `key = value` lines. `#` starts a comment; blank lines are
/// skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("line {}: expected `key = value`, got `{raw}`", n + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Effective settings of one invocation: defaults, then the config file,
/// then command-line overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub ae: AeTrainConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

impl RunConfig {
    pub fn defaults(id: EnvId) -> Self {
        RunConfig {
            env: EnvConfig::default_for(id),
            ae: AeTrainConfig::default(),
            train: TrainConfig::for_env(id),
            seed: 0,
        }
    }

    /// Routes a key by its `env.` / `ae.` / `train.` prefix. Changing
    /// `env.id` resets the environment to that id's defaults first.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.split_once('.') {
            Some(("env", "id")) => {
                let id: EnvId = value.parse()?;
                if id != self.env.id {
                    self.env = EnvConfig::default_for(id);
                }
                Ok(())
            }
            Some(("env", _)) => self.env.set(key, value),
            Some(("ae", _)) => self.ae.set(key, value),
            Some(("train", _)) => self.train.set(key, value),
            None if key == "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("seed: bad value `{value}`")))?;
                Ok(())
            }
            _ => Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
    }

    pub fn apply_all(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_all(&parse_key_values(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.train.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_blank_lines() {
        let kv = parse_key_values("# header\n\nenv.gravity = 15 # heavier\n train.tau=0.01\n").unwrap();
        assert_eq!(
            kv,
            vec![
                ("env.gravity".to_string(), "15".to_string()),
                ("train.tau".to_string(), "0.01".to_string())
            ]
        );
        assert!(parse_key_values("no equals sign").is_err());
    }

    #[test]
    fn routes_by_prefix() {
        let mut c = RunConfig::defaults(EnvId::Pendulum);
        c.set("env.gravity", "15").unwrap();
        c.set("env.mass", "1.1").unwrap();
        c.set("ae.epochs", "10").unwrap();
        c.set("train.batch_size", "32").unwrap();
        c.set("seed", "9").unwrap();
        assert_eq!(c.env, EnvConfig::pendulum_modified());
        assert_eq!(c.ae.epochs, 10);
        assert_eq!(c.train.batch_size, 32);
        assert_eq!(c.seed, 9);
        assert!(c.set("bogus.key", "1").is_err());
        assert!(c.set("env.gravity", "heavy").is_err());
    }

    #[test]
    fn switching_env_resets_physics() {
        let mut c = RunConfig::defaults(EnvId::Pendulum);
        c.set("env.id", "cartpole").unwrap();
        assert_eq!(c.env, EnvConfig::cartpole());
    }

    #[test]
    fn file_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "env.dt = 0.025\ntrain.gamma = 0.95\n").unwrap();
        let mut c = RunConfig::defaults(EnvId::Pendulum);
        c.apply_file(&p).unwrap();
        assert_eq!(c.env.dt, 0.025);
        assert_eq!(c.train.gamma, 0.95);
        c.validate().unwrap();
    }
}
