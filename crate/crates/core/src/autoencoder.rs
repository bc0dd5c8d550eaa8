//! Encoder/decoder pair that lifts actions into a latent space and back.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::ActionBounds;
use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::nn::{Activation, AdamState, LrSchedule, Mat, Mlp};

/// An encoded action, `z = Enc(a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentAction(pub Vec<f64>);

impl LatentAction {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub frozen: bool,
}

impl Autoencoder {
    /// Encoder `action_dim → enc_hidden… → hd`, decoder `hd → dec_hidden… →
    /// action_dim`, tanh hidden layers and linear outputs.
    pub fn new<R: Rng + ?Sized>(
        action_dim: usize,
        hd: usize,
        enc_hidden: &[usize],
        dec_hidden: &[usize],
        rng: &mut R,
    ) -> Self {
        let enc_sizes: Vec<usize> = std::iter::once(action_dim)
            .chain(enc_hidden.iter().copied())
            .chain(std::iter::once(hd))
            .collect();
        let dec_sizes: Vec<usize> = std::iter::once(hd)
            .chain(dec_hidden.iter().copied())
            .chain(std::iter::once(action_dim))
            .collect();
        Autoencoder {
            encoder: Mlp::new(&enc_sizes, Activation::Tanh, Activation::Identity, rng),
            decoder: Mlp::new(&dec_sizes, Activation::Tanh, Activation::Identity, rng),
            frozen: false,
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn encode(&self, action: &[f64]) -> Result<LatentAction> {
        ensure_len("encode action", self.action_dim(), action.len())?;
        Ok(LatentAction(self.encoder.predict(action)?))
    }

    /// Raw decoder output; no clipping to the action box.
    pub fn decode(&self, z: &LatentAction) -> Result<Vec<f64>> {
        ensure_len("decode latent", self.latent_dim(), z.dim())?;
        ensure_finite("decode latent", &z.0)?;
        self.decoder.predict(&z.0)
    }

    pub fn encode_batch(&self, actions: &Mat) -> Result<Mat> {
        self.encoder.predict_batch(actions)
    }

    /// Mean over samples of the squared reconstruction error `‖a − â‖²`.
    pub fn reconstruction_mse(&self, actions: &Mat) -> Result<f64> {
        if actions.rows() == 0 {
            return Ok(0.0);
        }
        let z = self.encoder.predict_batch(actions)?;
        let rec = self.decoder.predict_batch(&z)?;
        let sq: f64 = rec
            .data()
            .iter()
            .zip(actions.data())
            .map(|(r, a)| (r - a) * (r - a))
            .sum();
        Ok(sq / actions.rows() as f64)
    }

    /// Largest `|a − Dec(Enc(a))|` component over the samples.
    pub fn max_roundtrip_error(&self, actions: &Mat) -> Result<f64> {
        let z = self.encoder.predict_batch(actions)?;
        let rec = self.decoder.predict_batch(&z)?;
        Ok(rec
            .data()
            .iter()
            .zip(actions.data())
            .fold(0.0, |m, (r, a)| m.max((r - a).abs())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Uniform,
    PretrainedAgent,
}

/// Actions used to fit the autoencoder, one per row.
#[derive(Debug, Clone)]
pub struct ActionDataset {
    pub samples: Mat,
    pub source: DatasetSource,
}

impl ActionDataset {
    pub fn uniform<R: Rng + ?Sized>(bounds: &ActionBounds, n: usize, rng: &mut R) -> Self {
        let m = bounds.dim();
        let mut data = Vec::with_capacity(n * m);
        for _ in 0..n {
            for (lo, hi) in bounds.low.iter().zip(&bounds.high) {
                data.push(rng.gen_range(*lo..=*hi));
            }
        }
        ActionDataset {
            samples: Mat::from_vec(n, m, data).expect("sized buffer"),
            source: DatasetSource::Uniform,
        }
    }

    /// Wraps actions collected from an existing agent, rejecting any that
    /// leave the action box.
    pub fn from_agent(actions: &[Vec<f64>], bounds: &ActionBounds) -> Result<Self> {
        if let Some(bad) = actions.iter().find(|a| !bounds.contains(a)) {
            return Err(Error::InvalidConfig(format!(
                "action {bad:?} lies outside the action bounds"
            )));
        }
        Ok(ActionDataset {
            samples: Mat::from_rows(actions)?,
            source: DatasetSource::PretrainedAgent,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.rows() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeTrainConfig {
    pub hd: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub holdout_fraction: f64,
    pub enc_hidden: Vec<usize>,
    pub dec_hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for AeTrainConfig {
    fn default() -> Self {
        AeTrainConfig {
            hd: 3,
            epochs: 500,
            batch_size: 64,
            schedule: LrSchedule {
                initial: 1e-3,
                decay_factor: 0.98,
                decay_every: 1,
            },
            holdout_fraction: 0.1,
            enc_hidden: vec![64, 64],
            dec_hidden: vec![96, 96],
            seed: 0,
        }
    }
}

impl AeTrainConfig {
    /// Applies one `ae.key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.strip_prefix("ae.").unwrap_or(key);
        let err = || Error::InvalidConfig(format!("ae.{key}: bad value `{value}`"));
        let float = || value.parse::<f64>().map_err(|_| err());
        let int = || value.parse::<usize>().map_err(|_| err());
        let list = || -> Result<Vec<usize>> {
            value
                .split(',')
                .map(|v| v.trim().parse::<usize>().map_err(|_| err()))
                .collect()
        };
        match key {
            "hd" => self.hd = int()?,
            "epochs" => self.epochs = int()?,
            "batch_size" => self.batch_size = int()?,
            "lr" => self.schedule.initial = float()?,
            "lr_decay_factor" => self.schedule.decay_factor = float()?,
            "lr_decay_every" => self.schedule.decay_every = int()?,
            "holdout_fraction" => self.holdout_fraction = float()?,
            "enc_hidden" => self.enc_hidden = list()?,
            "dec_hidden" => self.dec_hidden = list()?,
            "seed" => self.seed = value.parse::<u64>().map_err(|_| err())?,
            other => return Err(Error::InvalidConfig(format!("unknown key `ae.{other}`"))),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeTrainReport {
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub holdout_mse: f64,
    pub holdout_max_abs_error: f64,
    pub train_samples: usize,
    pub holdout_samples: usize,
}

/// Fits encoder and decoder jointly on the reconstruction loss, then
/// freezes the pair.
pub fn train_autoencoder(
    dataset: &ActionDataset,
    cfg: &AeTrainConfig,
) -> Result<(Autoencoder, AeTrainReport)> {
    if dataset.is_empty() {
        return Err(Error::InvalidConfig("action dataset is empty".into()));
    }
    if cfg.hd == 0 || cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("hd and batch_size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let m = dataset.samples.cols();
    let mut ae = Autoencoder::new(m, cfg.hd, &cfg.enc_hidden, &cfg.dec_hidden, &mut rng);

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let n_hold = if dataset.len() > 1 {
        ((dataset.len() as f64 * cfg.holdout_fraction).round() as usize).min(dataset.len() - 1)
    } else {
        0
    };
    let gather = |idx: &[usize]| -> Mat {
        let mut data = Vec::with_capacity(idx.len() * m);
        for &i in idx {
            data.extend_from_slice(dataset.samples.row(i));
        }
        Mat::from_vec(idx.len(), m, data).expect("sized buffer")
    };
    let holdout = gather(&order[..n_hold]);
    let mut train_idx: Vec<usize> = order[n_hold..].to_vec();

    let mut enc_opt = AdamState::new(&ae.encoder, cfg.schedule.initial);
    let mut dec_opt = AdamState::new(&ae.decoder, cfg.schedule.initial);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = cfg.schedule.at(epoch);
        enc_opt.lr = lr;
        dec_opt.lr = lr;
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in train_idx.chunks(cfg.batch_size) {
            let x = gather(chunk);
            let b = chunk.len() as f64;
            let (z, enc_trace) = ae.encoder.forward_batch(&x)?;
            let (rec, dec_trace) = ae.decoder.forward_batch(&z)?;
            let mut grad = rec.sub(&x)?;
            total += grad.data().iter().map(|d| d * d).sum::<f64>();
            // d/d(rec) of mean_b ‖rec − x‖²
            grad.data_mut().iter_mut().for_each(|g| *g *= 2.0 / b);
            let (dec_grads, dz) = ae.decoder.backward(&dec_trace, &grad)?;
            let (enc_grads, _) = ae.encoder.backward(&enc_trace, &dz)?;
            dec_opt.step(&mut ae.decoder, &dec_grads)?;
            enc_opt.step(&mut ae.encoder, &enc_grads)?;
        }
        let loss = total / train_idx.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!(
                "autoencoder loss became {loss} at epoch {epoch} (lr {lr}, previous {:?})",
                epoch_losses.last()
            )));
        }
        log::debug!("ae epoch {epoch}: loss {loss:.3e}");
        epoch_losses.push(loss);
    }

    let eval = if holdout.rows() > 0 {
        holdout
    } else {
        gather(&train_idx)
    };
    let holdout_mse = ae.reconstruction_mse(&eval)?;
    let holdout_max_abs_error = ae.max_roundtrip_error(&eval)?;
    ae.frozen = true;
    Ok((
        ae,
        AeTrainReport {
            epoch_losses,
            holdout_mse,
            holdout_max_abs_error,
            train_samples: train_idx.len(),
            holdout_samples: n_hold,
        },
    ))
}
