use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::replay::{Batch, ReplayBuffer, Transition};
use crate::autoencoder::Autoencoder;
use crate::envs::{Env, EnvConfig};
use crate::error::{Error, Result};
use crate::io::hash_autoencoder;
use crate::nn::{Activation, AdamState, ForwardTrace, Mat, Mlp, MlpGrads};
use crate::policy::{rollout, ActionMask, DynamicsNet, LatentPolicy, Start};

/// State-action value network `Q(s, a)`, input `[s | a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    pub net: Mlp,
    pub state_dim: usize,
    pub action_dim: usize,
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        rng: &mut R,
    ) -> Self {
        let sizes: Vec<usize> = std::iter::once(state_dim + action_dim)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(1))
            .collect();
        let mut net = Mlp::new(&sizes, Activation::Tanh, Activation::Identity, rng);
        net.init_output_layer(3e-3, rng);
        Critic {
            net,
            state_dim,
            action_dim,
        }
    }

    pub fn q(&self, state: &[f64], action: &[f64]) -> Result<f64> {
        let input: Vec<f64> = state.iter().chain(action).copied().collect();
        Ok(self.net.predict(&input)?[0])
    }

    fn joint(&self, states: &Mat, actions: &Mat) -> Result<Mat> {
        if states.cols() != self.state_dim {
            return Err(Error::dims("critic state", self.state_dim, states.cols()));
        }
        if actions.cols() != self.action_dim {
            return Err(Error::dims("critic action", self.action_dim, actions.cols()));
        }
        let w = self.state_dim + self.action_dim;
        let mut x = Mat::zeros(states.rows(), w);
        for r in 0..states.rows() {
            let row = x.row_mut(r);
            row[..self.state_dim].copy_from_slice(states.row(r));
            row[self.state_dim..].copy_from_slice(actions.row(r));
        }
        Ok(x)
    }

    pub fn q_batch(&self, states: &Mat, actions: &Mat) -> Result<Vec<f64>> {
        Ok(self.net.predict_batch(&self.joint(states, actions)?)?.into_vec())
    }

    fn forward_batch(&self, states: &Mat, actions: &Mat) -> Result<(Vec<f64>, ForwardTrace)> {
        let (q, trace) = self.net.forward_batch(&self.joint(states, actions)?)?;
        Ok((q.into_vec(), trace))
    }
}

/// Every hyper-parameter of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Initial exploration std as a fraction of the action range.
    pub noise_fraction: f64,
    /// Exploration std at the end of training, relative to the initial std.
    pub noise_final_ratio: f64,
    pub total_steps: usize,
    pub warmup_steps: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Bound for the initial output layer of the dynamics network.
    pub actor_output_init: f64,
    /// Weight of the quadratic penalty on decoded actions outside the box.
    pub bound_penalty: f64,
    /// Weight of the penalty on `‖A_t‖_F²` in the actor objective.
    pub matrix_penalty: f64,
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Stop after this many consecutive evaluations without improvement.
    pub patience: usize,
    /// Stop early once an evaluation reaches this mean return.
    pub target_return: Option<f64>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn for_env(env: crate::envs::EnvId) -> Self {
        use crate::envs::EnvId;
        let base = TrainConfig {
            gamma: 0.99,
            tau: 0.005,
            batch_size: 64,
            buffer_capacity: 100_000,
            noise_fraction: 0.1,
            noise_final_ratio: 0.25,
            total_steps: 30_000,
            warmup_steps: 1_000,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            actor_hidden: vec![200, 200],
            critic_hidden: vec![200, 200],
            actor_output_init: 3e-3,
            bound_penalty: 1.0,
            matrix_penalty: 0.0,
            eval_every: 2_000,
            eval_episodes: 5,
            patience: 1_000,
            target_return: None,
            seed: 0,
        };
        match env {
            EnvId::Pendulum => TrainConfig {
                matrix_penalty: 0.2,
                ..base
            },
            EnvId::CartPole => TrainConfig {
                total_steps: 100_000,
                eval_every: 1_000,
                target_return: Some(1000.0),
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.noise_fraction >= 0.0) || !(self.noise_final_ratio >= 0.0) {
            return bad("exploration noise must be >= 0");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.eval_episodes == 0 {
            return bad("batch size, buffer capacity and eval episodes must be positive");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.strip_prefix("train.").unwrap_or(key);
        let err = || Error::InvalidConfig(format!("train.{key}: bad value `{value}`"));
        let float = || value.parse::<f64>().map_err(|_| err());
        let int = || value.parse::<usize>().map_err(|_| err());
        let list = || -> Result<Vec<usize>> {
            value
                .split(',')
                .map(|v| v.trim().parse::<usize>().map_err(|_| err()))
                .collect()
        };
        match key {
            "gamma" => self.gamma = float()?,
            "tau" => self.tau = float()?,
            "batch_size" => self.batch_size = int()?,
            "buffer_capacity" => self.buffer_capacity = int()?,
            "noise_fraction" => self.noise_fraction = float()?,
            "noise_final_ratio" => self.noise_final_ratio = float()?,
            "total_steps" => self.total_steps = int()?,
            "warmup_steps" => self.warmup_steps = int()?,
            "actor_lr" => self.actor_lr = float()?,
            "critic_lr" => self.critic_lr = float()?,
            "actor_hidden" => self.actor_hidden = list()?,
            "critic_hidden" => self.critic_hidden = list()?,
            "actor_output_init" => self.actor_output_init = float()?,
            "bound_penalty" => self.bound_penalty = float()?,
            "matrix_penalty" => self.matrix_penalty = float()?,
            "eval_every" => self.eval_every = int()?,
            "eval_episodes" => self.eval_episodes = int()?,
            "patience" => self.patience = int()?,
            "target_return" => {
                self.target_return = match value {
                    "none" | "" => None,
                    v => Some(v.parse::<f64>().map_err(|_| err())?),
                }
            }
            "seed" => self.seed = value.parse::<u64>().map_err(|_| err())?,
            other => {
                return Err(Error::InvalidConfig(format!("unknown training key `train.{other}`")))
            }
        }
        Ok(())
    }
}

/// Intermediates of a batched policy evaluation needed by the actor
/// gradient.
struct PolicyForward {
    latent: Mat,
    entries: Mat,
    dyn_trace: ForwardTrace,
    raw: Mat,
    dec_trace: ForwardTrace,
}

fn policy_forward(
    ae: &Autoencoder,
    dynamics: &DynamicsNet,
    states: &Mat,
    prev_actions: &Mat,
) -> Result<PolicyForward> {
    let hd = dynamics.latent_dim;
    let latent = ae.encoder.predict_batch(prev_actions)?;
    let (entries, dyn_trace) = dynamics.forward_batch(states)?;
    let mut next = Mat::zeros(latent.rows(), hd);
    for b in 0..latent.rows() {
        let z = latent.row(b);
        let a = entries.row(b);
        let out = next.row_mut(b);
        for i in 0..hd {
            out[i] = z[i] + crate::nn::dot(&a[i * hd..(i + 1) * hd], z);
        }
    }
    let (raw, dec_trace) = ae.decoder.forward_batch(&next)?;
    Ok(PolicyForward {
        latent,
        entries,
        dyn_trace,
        raw,
        dec_trace,
    })
}

/// Clipped actions of `dynamics` for a batch; used for bootstrap targets.
pub fn policy_actions(
    ae: &Autoencoder,
    dynamics: &DynamicsNet,
    bounds: &crate::envs::ActionBounds,
    states: &Mat,
    prev_actions: &Mat,
) -> Result<Mat> {
    let mut raw = policy_forward(ae, dynamics, states, prev_actions)?.raw;
    let m = raw.cols();
    for b in 0..raw.rows() {
        let clipped = bounds.clip(raw.row(b));
        raw.row_mut(b)[..m].copy_from_slice(&clipped);
    }
    Ok(raw)
}

/// Weights of the auxiliary terms of the actor objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorObjective {
    pub bound_penalty: f64,
    pub matrix_penalty: f64,
}

/// Value and θ-gradient of
/// `J = mean_b Q(s_b, Dec(z_b + N_θ(s_b) z_b)) − penalties`, with
/// `z_b = Enc(a_prev,b)`. The gradient chains `∇_a Q` through the decoder
/// Jacobian, the latent update and `N_θ`; encoder and decoder stay fixed.
pub fn actor_objective_gradient(
    policy: &LatentPolicy,
    critic: &Critic,
    batch: &Batch,
    weights: ActorObjective,
) -> Result<(f64, MlpGrads)> {
    let ae = &policy.autoencoder;
    let hd = policy.latent_dim();
    let n = batch.len() as f64;
    let fwd = policy_forward(ae, &policy.dynamics, &batch.states, &batch.prev_actions)?;
    let (q, critic_trace) = critic.forward_batch(&batch.states, &fwd.raw)?;

    let mut objective = q.iter().sum::<f64>() / n;
    let dq = Mat::from_vec(q.len(), 1, vec![1.0 / n; q.len()])?;
    let dx = critic.net.backward_input(&critic_trace, &dq)?;

    let m = policy.action_dim();
    let mut da = Mat::zeros(fwd.raw.rows(), m);
    for b in 0..fwd.raw.rows() {
        let row = da.row_mut(b);
        row.copy_from_slice(&dx.row(b)[critic.state_dim..]);
        for (j, &a) in fwd.raw.row(b).iter().enumerate() {
            let (lo, hi) = (policy.bounds.low[j], policy.bounds.high[j]);
            let excess = if a > hi {
                a - hi
            } else if a < lo {
                a - lo
            } else {
                0.0
            };
            objective -= weights.bound_penalty * excess * excess / n;
            row[j] -= 2.0 * weights.bound_penalty * excess / n;
        }
    }

    let dz_next = ae.decoder.backward_input(&fwd.dec_trace, &da)?;
    // z' = z + A z  ⇒  ∂J/∂A_ij = ∂J/∂z'_i · z_j
    let mut d_entries = Mat::zeros(fwd.entries.rows(), hd * hd);
    for b in 0..fwd.entries.rows() {
        let g = dz_next.row(b);
        let z = fwd.latent.row(b);
        let a = fwd.entries.row(b);
        let out = d_entries.row_mut(b);
        for i in 0..hd {
            for j in 0..hd {
                let idx = i * hd + j;
                out[idx] = g[i] * z[j] - 2.0 * weights.matrix_penalty * a[idx] / n;
            }
        }
        objective -= weights.matrix_penalty * a.iter().map(|v| v * v).sum::<f64>() / n;
    }
    let grads = policy.dynamics.backward(&fwd.dyn_trace, &d_entries)?;
    Ok((objective, grads))
}

/// One Adam ascent step on the actor objective; only the dynamics network
/// changes. Returns the objective before the step.
pub fn actor_update(
    policy: &mut LatentPolicy,
    critic: &Critic,
    batch: &Batch,
    weights: ActorObjective,
    opt: &mut AdamState,
) -> Result<f64> {
    if !policy.autoencoder.frozen {
        return Err(Error::Contract(
            "actor updates require a frozen autoencoder".into(),
        ));
    }
    let (objective, mut grads) = actor_objective_gradient(policy, critic, batch, weights)?;
    if !objective.is_finite() {
        return Err(Error::Divergence(format!("actor objective is {objective}")));
    }
    grads.scale(-1.0);
    opt.step(&mut policy.dynamics.net, &grads)?;
    Ok(objective)
}

/// Bellman regression targets `r + γ(1 − done)·Q'(s', π'(s', a))`.
pub fn critic_targets(
    target_critic: &Critic,
    target_policy: &LatentPolicy,
    batch: &Batch,
    gamma: f64,
) -> Result<Vec<f64>> {
    let next_actions = policy_actions(
        &target_policy.autoencoder,
        &target_policy.dynamics,
        &target_policy.bounds,
        &batch.next_states,
        &batch.actions,
    )?;
    let q_next = target_critic.q_batch(&batch.next_states, &next_actions)?;
    Ok(batch
        .rewards
        .iter()
        .zip(&batch.dones)
        .zip(q_next)
        .map(|((r, done), qn)| if *done { *r } else { r + gamma * qn })
        .collect())
}

/// One Adam step on the mean squared Bellman error. Returns the loss
/// before the step.
pub fn critic_update(
    critic: &mut Critic,
    target_critic: &Critic,
    target_policy: &LatentPolicy,
    batch: &Batch,
    gamma: f64,
    opt: &mut AdamState,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("critic update needs a non-empty batch".into()));
    }
    let targets = critic_targets(target_critic, target_policy, batch, gamma)?;
    let (q, trace) = critic.forward_batch(&batch.states, &batch.actions)?;
    let n = q.len() as f64;
    let loss = q
        .iter()
        .zip(&targets)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n;
    if !loss.is_finite() {
        return Err(Error::Divergence(format!(
            "critic loss is {loss} (max |target| {})",
            targets.iter().fold(0.0f64, |m, v| m.max(v.abs()))
        )));
    }
    let grad = Mat::from_vec(
        q.len(),
        1,
        q.iter().zip(&targets).map(|(a, b)| 2.0 * (a - b) / n).collect(),
    )?;
    let (grads, _) = critic.net.backward(&trace, &grad)?;
    opt.step(&mut critic.net, &grads)?;
    Ok(loss)
}

/// `target ← τ·online + (1 − τ)·target`
pub fn soft_update(target: &mut Mlp, online: &Mlp, tau: f64) -> Result<()> {
    target.soft_update_from(online, tau)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub steps: usize,
    pub episode_return: f64,
    pub eval_return: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Policy with the best evaluation score seen during training.
    pub policy: LatentPolicy,
    pub critic: Critic,
    pub curve: Vec<CurvePoint>,
    pub best_eval: f64,
    pub steps: usize,
    pub stopped_early: bool,
}

/// Greedy (noise-free) returns of `policy` on episodes seeded by `seeds`.
pub fn evaluate(
    policy: &LatentPolicy,
    env_cfg: &EnvConfig,
    seeds: impl IntoIterator<Item = u64>,
) -> Result<Vec<f64>> {
    seeds
        .into_iter()
        .map(|s| {
            rollout(
                env_cfg,
                policy,
                env_cfg.max_episode_steps,
                &ActionMask::none(),
                Start::Seed(s),
            )
            .map(|t| t.total_reward())
        })
        .collect()
}

/// Seeds used for the periodic evaluations inside [`train`]; kept disjoint
/// from small user-facing seeds.
pub fn training_eval_seeds(cfg: &TrainConfig) -> impl Iterator<Item = u64> {
    let base = 1_000_000 + cfg.seed * 1_000;
    (0..cfg.eval_episodes as u64).map(move |k| base + k)
}

/// Off-policy deterministic actor-critic training of the dynamics network
/// against a critic, with the autoencoder held fixed.
pub fn train(env_cfg: &EnvConfig, ae: &Autoencoder, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(env_cfg, ae, cfg, |_, _, _| {})
}

/// As [`train`], calling `on_episode` after every episode with the curve
/// point and the current online networks.
pub fn train_with_progress(
    env_cfg: &EnvConfig,
    ae: &Autoencoder,
    cfg: &TrainConfig,
    mut on_episode: impl FnMut(&CurvePoint, &LatentPolicy, &Critic),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if !ae.frozen {
        return Err(Error::Contract("autoencoder must be pretrained and frozen".into()));
    }
    let ae_hash = hash_autoencoder(ae);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let state_dim = env_cfg.id.obs_dim();
    let bounds = env_cfg.action_bounds();
    let hd = ae.latent_dim();

    let dynamics = DynamicsNet::new(
        state_dim,
        hd,
        &cfg.actor_hidden,
        Some(cfg.actor_output_init),
        &mut rng,
    );
    let mut policy = LatentPolicy::new(ae.clone(), dynamics, bounds.clone())?;
    let mut target_policy = policy.clone();
    let mut critic = Critic::new(state_dim, bounds.dim(), &cfg.critic_hidden, &mut rng);
    let mut target_critic = critic.clone();
    let mut actor_opt = AdamState::new(&policy.dynamics.net, cfg.actor_lr);
    let mut critic_opt = AdamState::new(&critic.net, cfg.critic_lr);
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let weights = ActorObjective {
        bound_penalty: cfg.bound_penalty,
        matrix_penalty: cfg.matrix_penalty,
    };

    let sigma0 = cfg.noise_fraction * bounds.range();
    let noise_span = cfg.total_steps.saturating_sub(cfg.warmup_steps).max(1) as f64;
    let mut env = Env::new(env_cfg.clone())?;

    let mut best_policy = policy.clone();
    let mut best_critic = critic.clone();
    let mut best_eval = f64::NEG_INFINITY;
    let mut stale_evals = 0usize;
    let mut curve = Vec::new();
    let mut steps = 0usize;
    let mut stopped_early = false;

    'outer: while steps < cfg.total_steps {
        let mut obs = env.reset(rng.gen());
        let mut prev = vec![0.0; bounds.dim()];
        let mut ep_return = 0.0;
        let mut eval_return = None;
        loop {
            let action = if steps < cfg.warmup_steps {
                bounds
                    .low
                    .iter()
                    .zip(&bounds.high)
                    .map(|(lo, hi)| rng.gen_range(*lo..=*hi))
                    .collect::<Vec<_>>()
            } else {
                let progress = (steps - cfg.warmup_steps) as f64 / noise_span;
                let sigma = sigma0 * (1.0 - (1.0 - cfg.noise_final_ratio) * progress.min(1.0));
                let (_, diag) = policy.step(&obs, &prev)?;
                let noisy: Vec<f64> = if sigma > 0.0 {
                    let normal = Normal::new(0.0, sigma).expect("positive std");
                    diag.raw_action.iter().map(|a| a + normal.sample(&mut rng)).collect()
                } else {
                    diag.raw_action
                };
                bounds.clip(&noisy)
            };
            let result = env.step(&action)?;
            ep_return += result.reward;
            buffer.push(Transition {
                state: obs,
                prev_action: prev,
                action: action.clone(),
                reward: result.reward,
                next_state: result.next_observation.clone(),
                done: result.terminated,
            });
            steps += 1;

            if steps > cfg.warmup_steps && buffer.len() >= cfg.batch_size {
                let batch = Batch::from_transitions(&buffer.sample(cfg.batch_size, &mut rng))?;
                critic_update(
                    &mut critic,
                    &target_critic,
                    &target_policy,
                    &batch,
                    cfg.gamma,
                    &mut critic_opt,
                )?;
                actor_update(&mut policy, &critic, &batch, weights, &mut actor_opt)?;
                soft_update(&mut target_critic.net, &critic.net, cfg.tau)?;
                soft_update(&mut target_policy.dynamics.net, &policy.dynamics.net, cfg.tau)?;
            }

            if steps % cfg.eval_every == 0 {
                let returns = evaluate(&policy, env_cfg, training_eval_seeds(cfg))?;
                let mean = returns.iter().sum::<f64>() / returns.len() as f64;
                log::info!("step {steps}: eval return {mean:.2}");
                eval_return = Some(mean);
                if mean > best_eval {
                    best_eval = mean;
                    best_policy = policy.clone();
                    best_critic = critic.clone();
                    stale_evals = 0;
                } else {
                    stale_evals += 1;
                }
                if cfg.target_return.is_some_and(|t| mean >= t) {
                    stopped_early = true;
                }
                if stale_evals >= cfg.patience {
                    log::warn!("no improvement in {stale_evals} evaluations; stopping");
                    stopped_early = true;
                }
            }

            let done = result.done();
            obs = result.next_observation;
            prev = action;
            if done || stopped_early || steps >= cfg.total_steps {
                break;
            }
        }
        let point = CurvePoint {
            episode: curve.len(),
            steps,
            episode_return: ep_return,
            eval_return,
        };
        on_episode(&point, &policy, &critic);
        curve.push(point);
        if stopped_early {
            break 'outer;
        }
    }

    if best_eval == f64::NEG_INFINITY {
        best_policy = policy;
        best_critic = critic;
    }
    if hash_autoencoder(&best_policy.autoencoder) != ae_hash {
        return Err(Error::Contract("autoencoder weights changed during training".into()));
    }
    Ok(TrainOutcome {
        policy: best_policy,
        critic: best_critic,
        curve,
        best_eval,
        steps,
        stopped_early,
    })
}
