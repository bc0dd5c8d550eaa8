use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autoencoder::{AeTrainConfig, AeTrainReport, Autoencoder};
use crate::envs::{ActionBounds, EnvConfig, EnvId};
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::policy::{DynamicsNet, LatentPolicy};
use crate::trainer::{Critic, TrainConfig};

pub const FORMAT_VERSION: u32 = 1;

fn hash_nets<'a>(nets: impl IntoIterator<Item = &'a Mlp>) -> String {
    let mut h = Sha256::new();
    for net in nets {
        for layer in net.layers() {
            h.update((layer.weight.rows() as u64).to_le_bytes());
            h.update((layer.weight.cols() as u64).to_le_bytes());
            for v in layer.weight.data().iter().chain(&layer.bias) {
                h.update(v.to_bits().to_le_bytes());
            }
        }
    }
    hex::encode(h.finalize())
}

/// SHA-256 over the exact bit patterns of encoder and decoder weights.
pub fn hash_autoencoder(ae: &Autoencoder) -> String {
    hash_nets([&ae.encoder, &ae.decoder])
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn check_version(text: &str) -> Result<()> {
    #[derive(Deserialize)]
    struct Header {
        format_version: u32,
    }
    let header: Header = serde_json::from_str(text)
        .map_err(|e| Error::Format(format!("missing or invalid format_version: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "format version {} is not supported (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    Ok(())
}

fn parse<T: DeserializeOwned>(text: &str) -> Result<T> {
    check_version(text)?;
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

/// A pretrained, frozen autoencoder together with its training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderFile {
    pub format_version: u32,
    pub env: EnvId,
    pub hd: usize,
    pub bounds: ActionBounds,
    pub autoencoder: Autoencoder,
    pub train_config: AeTrainConfig,
    pub report: AeTrainReport,
    pub content_hash: String,
}

impl AutoencoderFile {
    pub fn new(
        env: EnvId,
        bounds: ActionBounds,
        autoencoder: Autoencoder,
        train_config: AeTrainConfig,
        report: AeTrainReport,
    ) -> Self {
        AutoencoderFile {
            format_version: FORMAT_VERSION,
            env,
            hd: autoencoder.latent_dim(),
            bounds,
            content_hash: hash_autoencoder(&autoencoder),
            autoencoder,
            train_config,
            report,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: AutoencoderFile = parse(text)?;
        if hash_autoencoder(&f.autoencoder) != f.content_hash {
            return Err(Error::Format("autoencoder content hash mismatch".into()));
        }
        if !f.autoencoder.frozen {
            return Err(Error::Format("stored autoencoder is not frozen".into()));
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Everything needed to run and analyse a trained policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub env: EnvConfig,
    pub hd: usize,
    pub bounds: ActionBounds,
    pub autoencoder: Autoencoder,
    pub dynamics: DynamicsNet,
    pub critic: Critic,
    pub train_config: TrainConfig,
    pub content_hash: String,
}

impl ModelBundle {
    pub fn new(
        env: EnvConfig,
        policy: LatentPolicy,
        critic: Critic,
        train_config: TrainConfig,
    ) -> Self {
        let mut b = ModelBundle {
            format_version: FORMAT_VERSION,
            hd: policy.latent_dim(),
            env,
            bounds: policy.bounds,
            autoencoder: policy.autoencoder,
            dynamics: policy.dynamics,
            critic,
            train_config,
            content_hash: String::new(),
        };
        b.content_hash = b.compute_hash();
        b
    }

    pub fn compute_hash(&self) -> String {
        hash_nets([
            &self.autoencoder.encoder,
            &self.autoencoder.decoder,
            &self.dynamics.net,
            &self.critic.net,
        ])
    }

    pub fn policy(&self) -> Result<LatentPolicy> {
        LatentPolicy::new(
            self.autoencoder.clone(),
            self.dynamics.clone(),
            self.bounds.clone(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let b: ModelBundle = parse(text)?;
        if b.compute_hash() != b.content_hash {
            return Err(Error::Format("bundle content hash mismatch".into()));
        }
        if b.dynamics.latent_dim != b.hd || b.autoencoder.latent_dim() != b.hd {
            return Err(Error::Format("bundle latent dimensions disagree".into()));
        }
        Ok(b)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
