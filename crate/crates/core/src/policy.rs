//! The latent-action controller: a state-conditioned matrix `A_t` evolves the
//! encoded previous action, `z' = z + A_t z`, which is decoded, clipped and
//! executed. The executed action is re-encoded on the next step.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{Autoencoder, LatentAction};
use crate::envs::{ActionBounds, Env, EnvConfig};
use crate::error::{ensure_len, Error, Result};
use crate::nn::{Activation, ForwardTrace, Mat, Mlp, MlpGrads};

/// Elementwise bound on `A_t`, enforced by a scaled tanh output.
pub const ENTRY_BOUND: f64 = 2.0;

/// Square latent dynamics matrix with entries in `[−2, 2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DynamicsMatrix(Mat);

impl DynamicsMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dims("DynamicsMatrix", m.rows(), m.cols()));
        }
        if m.max_abs() > ENTRY_BOUND {
            return Err(Error::Contract(format!(
                "dynamics matrix entry {} exceeds the ±{ENTRY_BOUND} bound",
                m.max_abs()
            )));
        }
        Ok(DynamicsMatrix(m))
    }

    pub fn zeros(n: usize) -> Self {
        DynamicsMatrix(Mat::zeros(n, n))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }
}

/// `z' = (I + A) z`
pub fn latent_step(z: &LatentAction, a: &DynamicsMatrix) -> Result<LatentAction> {
    ensure_len("latent_step", a.dim(), z.dim())?;
    let az = a.0.matvec(&z.0)?;
    Ok(LatentAction(
        z.0.iter().zip(az).map(|(zi, azi)| zi + azi).collect(),
    ))
}

/// Network `N_θ` mapping an observation to the `hd × hd` entries of `A_t`
/// (row-major), with output `2·tanh(·)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsNet {
    pub net: Mlp,
    pub latent_dim: usize,
}

impl DynamicsNet {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        latent_dim: usize,
        hidden: &[usize],
        output_init: Option<f64>,
        rng: &mut R,
    ) -> Self {
        let sizes: Vec<usize> = std::iter::once(state_dim)
            .chain(hidden.iter().copied())
            .chain(std::iter::once(latent_dim * latent_dim))
            .collect();
        let mut net = Mlp::new(&sizes, Activation::Tanh, Activation::Tanh, rng);
        if let Some(bound) = output_init {
            net.init_output_layer(bound, rng);
        }
        DynamicsNet { net, latent_dim }
    }

    pub fn from_mlp(net: Mlp, latent_dim: usize) -> Result<Self> {
        ensure_len("DynamicsNet output", latent_dim * latent_dim, net.output_dim())?;
        if net.layers().last().map(|l| l.activation) != Some(Activation::Tanh) {
            return Err(Error::InvalidConfig(
                "dynamics network must end in a tanh layer".into(),
            ));
        }
        Ok(DynamicsNet { net, latent_dim })
    }

    pub fn state_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn matrix(&self, state: &[f64]) -> Result<DynamicsMatrix> {
        ensure_len("dynamics state", self.state_dim(), state.len())?;
        let out = self.net.predict(state)?;
        let data = out.into_iter().map(|v| ENTRY_BOUND * v).collect();
        DynamicsMatrix::new(Mat::from_vec(self.latent_dim, self.latent_dim, data)?)
    }

    /// Batched evaluation: row `b` of the result holds the entries of
    /// `A(states_b)`. The trace refers to the pre-scaling tanh output.
    pub fn forward_batch(&self, states: &Mat) -> Result<(Mat, ForwardTrace)> {
        let (out, trace) = self.net.forward_batch(states)?;
        Ok((out.scale(ENTRY_BOUND), trace))
    }

    /// Backpropagates a gradient with respect to the matrix entries.
    pub fn backward(&self, trace: &ForwardTrace, entry_grad: &Mat) -> Result<MlpGrads> {
        let scaled = entry_grad.scale(ENTRY_BOUND);
        Ok(self.net.backward(trace, &scaled)?.0)
    }
}

/// Intermediates of one policy step, kept for analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub z_before: LatentAction,
    pub z_after: LatentAction,
    pub matrix: DynamicsMatrix,
    pub raw_action: Vec<f64>,
}

/// Frozen autoencoder plus the dynamics network and the action box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPolicy {
    pub autoencoder: Autoencoder,
    pub dynamics: DynamicsNet,
    pub bounds: ActionBounds,
}

impl LatentPolicy {
    pub fn new(autoencoder: Autoencoder, dynamics: DynamicsNet, bounds: ActionBounds) -> Result<Self> {
        ensure_len(
            "policy latent width",
            autoencoder.latent_dim(),
            dynamics.latent_dim,
        )?;
        ensure_len("policy action width", autoencoder.action_dim(), bounds.dim())?;
        Ok(LatentPolicy {
            autoencoder,
            dynamics,
            bounds,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.dynamics.latent_dim
    }

    pub fn action_dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.state_dim()
    }

    /// `z ← Enc(a_prev)`, `A ← N(s)`, `z' ← z + A z`, `a ← clip(Dec(z'))`.
    /// `prev_action` must be the previously executed (clipped) action, or
    /// zero at the first step.
    pub fn step(&self, state: &[f64], prev_action: &[f64]) -> Result<(Vec<f64>, StepDiagnostics)> {
        ensure_len("policy prev_action", self.action_dim(), prev_action.len())?;
        let z = self.autoencoder.encode(prev_action)?;
        let a = self.dynamics.matrix(state)?;
        let z_next = latent_step(&z, &a)?;
        let mut diag = StepDiagnostics {
            z_before: z,
            z_after: z_next,
            matrix: a,
            raw_action: Vec::new(),
        };
        let fail = |stage, diag: StepDiagnostics| Error::PolicyFailure {
            stage,
            diagnostics: Box::new(diag),
        };
        if !diag.z_after.0.iter().all(|v| v.is_finite()) {
            return Err(fail("latent update", diag));
        }
        let raw = self.autoencoder.decoder.predict(&diag.z_after.0)?;
        diag.raw_action = raw;
        if !diag.raw_action.iter().all(|v| v.is_finite()) {
            return Err(fail("decode", diag));
        }
        let action = self.bounds.clip(&diag.raw_action);
        Ok((action, diag))
    }
}

/// Half-open step intervals during which the executed action is forced to
/// zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionMask {
    intervals: Vec<Range<usize>>,
}

impl ActionMask {
    pub fn none() -> Self {
        ActionMask::default()
    }

    pub fn new(mut intervals: Vec<Range<usize>>) -> Result<Self> {
        intervals.retain(|r| !r.is_empty());
        intervals.sort_by_key(|r| r.start);
        for w in intervals.windows(2) {
            if w[1].start < w[0].end {
                return Err(Error::InvalidConfig(format!(
                    "mask intervals {:?} and {:?} overlap",
                    w[0], w[1]
                )));
            }
        }
        Ok(ActionMask { intervals })
    }

    pub fn intervals(&self) -> &[Range<usize>] {
        &self.intervals
    }

    pub fn contains(&self, t: usize) -> bool {
        self.intervals.iter().any(|r| r.contains(&t))
    }

    pub fn validate_horizon(&self, horizon: usize) -> Result<()> {
        match self.intervals.last() {
            Some(r) if r.end > horizon => Err(Error::InvalidConfig(format!(
                "mask interval {r:?} exceeds horizon {horizon}"
            ))),
            _ => Ok(()),
        }
    }
}

impl FromStr for ActionMask {
    type Err = Error;

    /// Parses `"0:30,150:200"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(ActionMask::none());
        }
        let mut intervals = Vec::new();
        for part in s.split(',') {
            let (a, b) = part.trim().split_once(':').ok_or_else(|| {
                Error::InvalidConfig(format!("mask interval `{part}` is not `start:end`"))
            })?;
            let parse = |v: &str| {
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidConfig(format!("bad mask bound `{v}`")))
            };
            let (start, end) = (parse(a)?, parse(b)?);
            if end <= start {
                return Err(Error::InvalidConfig(format!(
                    "mask interval `{part}` is empty or reversed"
                )));
            }
            intervals.push(start..end);
        }
        ActionMask::new(intervals)
    }
}

impl fmt::Display for ActionMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .intervals
            .iter()
            .map(|r| format!("{}:{}", r.start, r.end))
            .collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// Physical state before the step.
    pub state: Vec<f64>,
    /// Observation fed to the policy.
    pub observation: Vec<f64>,
    pub prev_action: Vec<f64>,
    pub raw_action: Vec<f64>,
    /// Action actually sent to the environment.
    pub action: Vec<f64>,
    pub masked: bool,
    pub z_before: Vec<f64>,
    pub z_after: Vec<f64>,
    /// `A_t`, row-major.
    pub matrix: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl StepRecord {
    pub fn dynamics_matrix(&self, hd: usize) -> Result<DynamicsMatrix> {
        DynamicsMatrix::new(Mat::from_vec(hd, hd, self.matrix.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub env: EnvConfig,
    pub seed: u64,
    pub latent_dim: usize,
    pub initial_state: Vec<f64>,
    pub mask: ActionMask,
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.records.iter().map(|r| r.reward).sum()
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.observation.clone()).collect()
    }

    pub fn matrices(&self) -> Result<Vec<DynamicsMatrix>> {
        self.records
            .iter()
            .map(|r| r.dynamics_matrix(self.latent_dim))
            .collect()
    }
}

/// How a rollout picks its initial state.
#[derive(Debug, Clone, PartialEq)]
pub enum Start {
    Seed(u64),
    State(Vec<f64>),
}

/// Runs the policy for up to `horizon` steps. Masked steps execute a zero
/// action but still record the policy's diagnostics for the observed state.
pub fn rollout(
    env_cfg: &EnvConfig,
    policy: &LatentPolicy,
    horizon: usize,
    mask: &ActionMask,
    start: Start,
) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::InvalidConfig("rollout horizon must be >= 1".into()));
    }
    mask.validate_horizon(horizon)?;
    let mut env = Env::new(env_cfg.clone())?;
    let (seed, mut obs) = match &start {
        Start::Seed(s) => (*s, env.reset(*s)),
        Start::State(st) => (env_cfg.seed, env.reset_to(st)?),
    };
    let mut traj = Trajectory {
        env: env_cfg.clone(),
        seed,
        latent_dim: policy.latent_dim(),
        initial_state: env.physical_state(),
        mask: mask.clone(),
        records: Vec::with_capacity(horizon),
    };
    let mut prev = vec![0.0; policy.action_dim()];
    for t in 0..horizon {
        let state = env.physical_state();
        let (action, diag) = match policy.step(&obs, &prev) {
            Ok(v) => v,
            Err(e) => {
                return Err(Error::Rollout {
                    step: t,
                    source: Box::new(e),
                    partial: Box::new(traj),
                })
            }
        };
        let masked = mask.contains(t);
        let executed = if masked {
            vec![0.0; action.len()]
        } else {
            action
        };
        let result = match env.step(&executed) {
            Ok(r) => r,
            Err(e) => {
                return Err(Error::Rollout {
                    step: t,
                    source: Box::new(e),
                    partial: Box::new(traj),
                })
            }
        };
        traj.records.push(StepRecord {
            t,
            state,
            observation: obs,
            prev_action: prev,
            raw_action: diag.raw_action,
            action: executed.clone(),
            masked,
            z_before: diag.z_before.0,
            z_after: diag.z_after.0,
            matrix: diag.matrix.into_mat().into_vec(),
            reward: result.reward,
            terminated: result.terminated,
            truncated: result.truncated,
        });
        prev = executed;
        obs = result.next_observation.clone();
        if result.done() {
            break;
        }
    }
    Ok(traj)
}

/// Steps a fresh environment through recorded actions and returns the
/// physical state before each step.
pub fn replay_states(traj: &Trajectory) -> Result<Vec<Vec<f64>>> {
    let mut env = Env::new(traj.env.clone())?;
    env.reset_to(&traj.initial_state)?;
    let mut states = Vec::with_capacity(traj.len());
    for r in &traj.records {
        states.push(env.physical_state());
        env.step(&r.action)?;
    }
    Ok(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::EnvConfig;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_bias_ae(rng: &mut ChaCha8Rng) -> Autoencoder {
        let mut ae = Autoencoder::new(1, 3, &[16, 16], &[24, 24], rng);
        for net in [&mut ae.encoder, &mut ae.decoder] {
            for l in net.layers_mut() {
                l.bias.iter_mut().for_each(|b| *b = 0.0);
            }
        }
        ae.frozen = true;
        ae
    }

    fn zero_dynamics() -> DynamicsNet {
        DynamicsNet::from_mlp(Mlp::zeros(&[3, 8, 9], Activation::Tanh, Activation::Tanh), 3).unwrap()
    }

    fn random_policy(seed: u64) -> LatentPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ae = Autoencoder::new(1, 3, &[16, 16], &[24, 24], &mut rng);
        let dynamics = DynamicsNet::new(3, 3, &[32, 32], None, &mut rng);
        LatentPolicy::new(ae, dynamics, ActionBounds::symmetric(1, 2.0)).unwrap()
    }

    #[test]
    fn latent_step_cases() {
        let z = LatentAction(vec![1.0, 1.0, 1.0]);
        let zero = latent_step(&LatentAction(vec![0.0; 3]), &DynamicsMatrix::new(Mat::diag(&[0.5; 3])).unwrap()).unwrap();
        assert_eq!(zero.0, vec![0.0; 3]);
        assert_eq!(latent_step(&z, &DynamicsMatrix::zeros(3)).unwrap(), z);
        let half = DynamicsMatrix::new(Mat::diag(&[0.5; 3])).unwrap();
        assert_eq!(latent_step(&z, &half).unwrap().0, vec![1.5; 3]);
        assert!(latent_step(&LatentAction(vec![1.0; 2]), &half).is_err());
    }

    #[test]
    fn dynamics_entries_are_bounded_and_pure() {
        let p = random_policy(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let s: Vec<f64> = (0..3).map(|_| rng.gen_range(-50.0..50.0)).collect();
            let a = p.dynamics.matrix(&s).unwrap();
            assert!(a.as_mat().max_abs() <= ENTRY_BOUND);
            assert_eq!(a, p.dynamics.matrix(&s).unwrap());
        }
        let z = zero_dynamics().matrix(&[0.3, 0.1, -2.0]).unwrap();
        assert_eq!(z, DynamicsMatrix::zeros(3));
        assert!(DynamicsMatrix::new(Mat::diag(&[2.5, 0.0])).is_err());
    }

    #[test]
    fn zero_network_and_zero_bias_gives_zero_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let policy = LatentPolicy::new(
            zero_bias_ae(&mut rng),
            zero_dynamics(),
            ActionBounds::symmetric(1, 2.0),
        )
        .unwrap();
        let (a, d) = policy.step(&[1.0, 0.0, 0.0], &[0.0]).unwrap();
        assert_eq!(a, vec![0.0]);
        assert_eq!(d.z_after.0, vec![0.0; 3]);
    }

    #[test]
    fn decoded_action_is_clipped_after_decoding() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ae = zero_bias_ae(&mut rng);
        ae.decoder.layers_mut().last_mut().unwrap().bias = vec![3.7];
        let policy =
            LatentPolicy::new(ae, zero_dynamics(), ActionBounds::symmetric(1, 2.0)).unwrap();
        let (a, d) = policy.step(&[1.0, 0.0, 0.0], &[0.0]).unwrap();
        assert_eq!(d.raw_action, vec![3.7]);
        assert_eq!(a, vec![2.0]);
    }

    #[test]
    fn next_latent_is_encoding_of_executed_action() {
        let policy = random_policy(8);
        let traj = rollout(
            &EnvConfig::pendulum(),
            &policy,
            50,
            &ActionMask::none(),
            Start::Seed(1),
        )
        .unwrap();
        for w in traj.records.windows(2) {
            let enc = policy.autoencoder.encode(&w[0].action).unwrap();
            assert_eq!(w[1].z_before, enc.0);
            assert_eq!(w[1].prev_action, w[0].action);
        }
        assert_eq!(traj.records[0].prev_action, vec![0.0]);
    }

    #[test]
    fn fully_masked_rollout_equals_zero_action_rollout() {
        let policy = random_policy(2);
        let cfg = EnvConfig::pendulum();
        let mask = ActionMask::new(vec![0..200]).unwrap();
        let traj = rollout(&cfg, &policy, 200, &mask, Start::Seed(5)).unwrap();
        let mut env = Env::new(cfg).unwrap();
        env.reset(5);
        for r in &traj.records {
            assert!(r.masked);
            assert_eq!(r.action, vec![0.0]);
            assert_eq!(env.physical_state(), r.state);
            env.step(&[0.0]).unwrap();
        }
    }

    #[test]
    fn recorded_actions_replay_exactly() {
        let policy = random_policy(6);
        for cfg in [EnvConfig::pendulum(), EnvConfig::cartpole()] {
            let traj = rollout(&cfg, &policy_for(&cfg, 6), 120, &ActionMask::none(), Start::Seed(9)).unwrap();
            let states = replay_states(&traj).unwrap();
            for (s, r) in states.iter().zip(&traj.records) {
                assert_eq!(s, &r.state);
            }
        }
        assert_eq!(policy.latent_dim(), 3);
    }

    fn policy_for(cfg: &EnvConfig, seed: u64) -> LatentPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ae = Autoencoder::new(1, 3, &[16], &[24], &mut rng);
        let dynamics = DynamicsNet::new(cfg.id.obs_dim(), 3, &[32], None, &mut rng);
        LatentPolicy::new(ae, dynamics, cfg.action_bounds()).unwrap()
    }

    #[test]
    fn mask_parsing() {
        let m: ActionMask = "0:30,150:200".parse().unwrap();
        assert_eq!(m.intervals(), &[0..30, 150..200]);
        assert!(m.contains(0) && m.contains(29) && !m.contains(30) && m.contains(199));
        assert_eq!(m.to_string(), "0:30,150:200");
        assert!("0:30,20:40".parse::<ActionMask>().is_err());
        assert!("5:5".parse::<ActionMask>().is_err());
        assert!("a:b".parse::<ActionMask>().is_err());
        assert!(m.validate_horizon(100).is_err());
        assert_eq!("".parse::<ActionMask>().unwrap(), ActionMask::none());
    }

    #[test]
    fn non_finite_policy_step_carries_diagnostics() {
        let policy = random_policy(1);
        match policy.step(&[f64::NAN, 0.0, 0.0], &[0.0]) {
            Err(Error::PolicyFailure { diagnostics, .. }) => {
                assert_eq!(diagnostics.z_before.dim(), 3);
            }
            Err(Error::NonFinite(_)) | Err(Error::Contract(_)) => {}
            other => panic!("expected a policy failure, got {other:?}"),
        }
    }
}
