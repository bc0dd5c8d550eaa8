//! Seedable classic-control environments with Gym-compatible dynamics and
//! rewards.

mod cartpole;
mod pendulum;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

pub use cartpole::{cartpole_step, CartPoleState, PHI_THRESHOLD, X_THRESHOLD};
pub use pendulum::{angle_normalize, pendulum_step, PendulumState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvId {
    Pendulum,
    CartPole,
}

impl EnvId {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvId::Pendulum => "pendulum",
            EnvId::CartPole => "cartpole",
        }
    }

    pub fn obs_dim(self) -> usize {
        match self {
            EnvId::Pendulum => 3,
            EnvId::CartPole => 4,
        }
    }

    pub fn action_dim(self) -> usize {
        1
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pendulum" | "pendulum-v1" => Ok(EnvId::Pendulum),
            "cartpole" | "cartpole-v1" | "cartpole-continuous" => Ok(EnvId::CartPole),
            other => Err(Error::InvalidConfig(format!("unknown environment `{other}`"))),
        }
    }
}

/// Box bounds of the action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ActionBounds {
    pub fn symmetric(dim: usize, limit: f64) -> Self {
        ActionBounds {
            low: vec![-limit; dim],
            high: vec![limit; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn clip(&self, action: &[f64]) -> Vec<f64> {
        action
            .iter()
            .zip(self.low.iter().zip(&self.high))
            .map(|(a, (lo, hi))| a.clamp(*lo, *hi))
            .collect()
    }

    pub fn contains(&self, action: &[f64]) -> bool {
        action.len() == self.dim()
            && action
                .iter()
                .zip(self.low.iter().zip(&self.high))
                .all(|(a, (lo, hi))| *a >= *lo && *a <= *hi)
    }

    /// Width of the widest action component.
    pub fn range(&self) -> f64 {
        self.low
            .iter()
            .zip(&self.high)
            .fold(0.0, |m, (lo, hi)| m.max(hi - lo))
    }
}

/// Physical and episode parameters. Fields that do not apply to an
/// environment are ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub id: EnvId,
    pub gravity: f64,
    /// Pendulum bob mass, or pole mass for CartPole.
    pub mass: f64,
    pub cart_mass: f64,
    /// Pendulum length, or half pole length for CartPole.
    pub length: f64,
    pub dt: f64,
    pub max_episode_steps: usize,
    pub max_torque: f64,
    pub max_speed: f64,
    pub force_mag: f64,
    pub seed: u64,
}

impl EnvConfig {
    pub fn pendulum() -> Self {
        EnvConfig {
            id: EnvId::Pendulum,
            gravity: 10.0,
            mass: 1.0,
            cart_mass: 0.0,
            length: 1.0,
            dt: 0.05,
            max_episode_steps: 200,
            max_torque: 2.0,
            max_speed: 8.0,
            force_mag: 0.0,
            seed: 0,
        }
    }

    /// The heavier pendulum used to provoke periodic failure: `g = 15`,
    /// `m = 1.1`.
    pub fn pendulum_modified() -> Self {
        EnvConfig {
            gravity: 15.0,
            mass: 1.1,
            ..EnvConfig::pendulum()
        }
    }

    pub fn cartpole() -> Self {
        EnvConfig {
            id: EnvId::CartPole,
            gravity: 9.8,
            mass: 0.1,
            cart_mass: 1.0,
            length: 0.5,
            dt: 0.02,
            max_episode_steps: 1000,
            max_torque: 0.0,
            max_speed: 0.0,
            force_mag: 10.0,
            seed: 0,
        }
    }

    pub fn default_for(id: EnvId) -> Self {
        match id {
            EnvId::Pendulum => EnvConfig::pendulum(),
            EnvId::CartPole => EnvConfig::cartpole(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.gravity,
            self.mass,
            self.cart_mass,
            self.length,
            self.dt,
            self.max_torque,
            self.max_speed,
            self.force_mag,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite environment parameter".into()));
        }
        if self.dt <= 0.0 {
            return Err(Error::InvalidConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.max_episode_steps < 1 {
            return Err(Error::InvalidConfig("max_episode_steps must be >= 1".into()));
        }
        if self.mass <= 0.0 || self.length <= 0.0 {
            return Err(Error::InvalidConfig("mass and length must be positive".into()));
        }
        Ok(())
    }

    pub fn action_bounds(&self) -> ActionBounds {
        match self.id {
            EnvId::Pendulum => ActionBounds::symmetric(1, self.max_torque),
            EnvId::CartPole => ActionBounds::symmetric(1, 1.0),
        }
    }

    /// Applies one `key=value` setting. Keys may carry an `env.` prefix.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.strip_prefix("env.").unwrap_or(key);
        let float = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("env.{key}: `{value}` is not a number")))
        };
        let int = || -> Result<u64> {
            value
                .parse::<u64>()
                .map_err(|_| Error::InvalidConfig(format!("env.{key}: `{value}` is not an integer")))
        };
        match key {
            "id" => self.id = value.parse()?,
            "gravity" => self.gravity = float()?,
            "mass" => self.mass = float()?,
            "cart_mass" => self.cart_mass = float()?,
            "length" => self.length = float()?,
            "dt" => self.dt = float()?,
            "max_episode_steps" => self.max_episode_steps = int()? as usize,
            "max_torque" => self.max_torque = float()?,
            "max_speed" => self.max_speed = float()?,
            "force_mag" => self.force_mag = float()?,
            "seed" => self.seed = int()?,
            other => {
                return Err(Error::InvalidConfig(format!("unknown environment key `env.{other}`")))
            }
        }
        Ok(())
    }

    /// Every setting as `env.key=value` pairs, in a fixed order.
    pub fn entries(&self) -> Vec<(String, String)> {
        [
            ("id", self.id.to_string()),
            ("gravity", self.gravity.to_string()),
            ("mass", self.mass.to_string()),
            ("cart_mass", self.cart_mass.to_string()),
            ("length", self.length.to_string()),
            ("dt", self.dt.to_string()),
            ("max_episode_steps", self.max_episode_steps.to_string()),
            ("max_torque", self.max_torque.to_string()),
            ("max_speed", self.max_speed.to_string()),
            ("force_mag", self.force_mag.to_string()),
            ("seed", self.seed.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (format!("env.{k}"), v))
        .collect()
    }
}

/// Outcome of a single environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_observation: Vec<f64>,
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Physical {
    Pendulum(PendulumState),
    CartPole(CartPoleState),
}

/// A stateful environment instance: current physical state plus the step
/// counter used for truncation.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    state: Physical,
    steps: usize,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        let mut env = Env {
            state: match config.id {
                EnvId::Pendulum => Physical::Pendulum(PendulumState::default()),
                EnvId::CartPole => Physical::CartPole(CartPoleState::default()),
            },
            config,
            steps: 0,
        };
        let seed = env.config.seed;
        env.reset(seed);
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn id(&self) -> EnvId {
        self.config.id
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn action_bounds(&self) -> ActionBounds {
        self.config.action_bounds()
    }

    /// Draws a fresh initial state from `seed`. Pendulum: `θ ~ U(−π, π)`,
    /// `θ̇ ~ U(−1, 1)`. CartPole: every component `~ U(−0.05, 0.05)`.
    pub fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = match self.config.id {
            EnvId::Pendulum => Physical::Pendulum(PendulumState {
                theta: rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                theta_dot: rng.gen_range(-1.0..1.0),
            }),
            EnvId::CartPole => {
                let mut u = || rng.gen_range(-0.05..0.05);
                Physical::CartPole(CartPoleState {
                    x: u(),
                    x_dot: u(),
                    phi: u(),
                    phi_dot: u(),
                })
            }
        };
        self.steps = 0;
        self.observation()
    }

    /// Resets to an explicit physical state (see [`Env::physical_state`]).
    pub fn reset_to(&mut self, physical: &[f64]) -> Result<Vec<f64>> {
        ensure_finite("reset state", physical)?;
        self.state = match self.config.id {
            EnvId::Pendulum => {
                if physical.len() != 2 {
                    return Err(Error::dims("pendulum state", 2, physical.len()));
                }
                Physical::Pendulum(PendulumState {
                    theta: physical[0],
                    theta_dot: physical[1],
                })
            }
            EnvId::CartPole => {
                if physical.len() != 4 {
                    return Err(Error::dims("cartpole state", 4, physical.len()));
                }
                Physical::CartPole(CartPoleState {
                    x: physical[0],
                    x_dot: physical[1],
                    phi: physical[2],
                    phi_dot: physical[3],
                })
            }
        };
        self.steps = 0;
        Ok(self.observation())
    }

    /// Internal state: `[θ, θ̇]` or `[x, ẋ, φ, φ̇]`.
    pub fn physical_state(&self) -> Vec<f64> {
        match self.state {
            Physical::Pendulum(s) => vec![s.theta, s.theta_dot],
            Physical::CartPole(s) => vec![s.x, s.x_dot, s.phi, s.phi_dot],
        }
    }

    pub fn observation(&self) -> Vec<f64> {
        match self.state {
            Physical::Pendulum(s) => s.observation().to_vec(),
            Physical::CartPole(s) => s.observation().to_vec(),
        }
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepResult> {
        if action.len() != 1 {
            return Err(Error::dims("env action", 1, action.len()));
        }
        let mut result = match self.state {
            Physical::Pendulum(s) => {
                let (next, r) = pendulum_step(&s, action[0], &self.config)?;
                self.state = Physical::Pendulum(next);
                r
            }
            Physical::CartPole(s) => {
                let (next, r) = cartpole_step(&s, action[0], &self.config)?;
                self.state = Physical::CartPole(next);
                r
            }
        };
        self.steps += 1;
        result.truncated = !result.terminated && self.steps >= self.config.max_episode_steps;
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_observation() {
        for cfg in [EnvConfig::pendulum(), EnvConfig::cartpole()] {
            let mut a = Env::new(cfg.clone()).unwrap();
            let mut b = Env::new(cfg).unwrap();
            assert_eq!(a.reset(42), b.reset(42));
            assert_ne!(a.reset(0), b.reset(1));
        }
    }

    #[test]
    fn reset_distributions_respect_bounds() {
        let mut p = Env::new(EnvConfig::pendulum()).unwrap();
        let mut c = Env::new(EnvConfig::cartpole()).unwrap();
        for seed in 0..200 {
            p.reset(seed);
            let s = p.physical_state();
            assert!(s[0].abs() <= std::f64::consts::PI && s[1].abs() <= 1.0);
            c.reset(seed);
            assert!(c.physical_state().iter().all(|v| v.abs() <= 0.05));
        }
    }

    #[test]
    fn zero_action_rollout_replays_bit_for_bit() {
        let run = || {
            let mut env = Env::new(EnvConfig::pendulum()).unwrap();
            env.reset(7);
            let mut obs = Vec::new();
            loop {
                let r = env.step(&[0.0]).unwrap();
                obs.push(r.next_observation.clone());
                if r.done() {
                    break;
                }
            }
            obs
        };
        let a = run();
        let b = run();
        assert_eq!(a.len(), 200);
        assert!(a
            .iter()
            .flatten()
            .zip(b.iter().flatten())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn pendulum_truncates_at_horizon_and_never_terminates() {
        let mut env = Env::new(EnvConfig::pendulum()).unwrap();
        env.reset(3);
        for t in 0..200 {
            let r = env.step(&[1.0]).unwrap();
            assert!(!r.terminated);
            assert_eq!(r.truncated, t == 199);
        }
    }

    #[test]
    fn cartpole_survives_1000_steps_when_balanced() {
        let mut env = Env::new(EnvConfig::cartpole()).unwrap();
        env.reset_to(&[0.0; 4]).unwrap();
        let mut total = 0.0;
        let mut last = None;
        for _ in 0..1000 {
            let r = env.step(&[0.0]).unwrap();
            total += r.reward;
            last = Some(r);
        }
        let last = last.unwrap();
        assert!(last.truncated && !last.terminated);
        assert_eq!(total, 1000.0);
    }

    #[test]
    fn config_keys_round_trip_and_validate() {
        let mut cfg = EnvConfig::pendulum();
        cfg.set("env.gravity", "15").unwrap();
        cfg.set("mass", "1.1").unwrap();
        assert_eq!(cfg, EnvConfig::pendulum_modified());
        assert!(cfg.set("env.bogus", "1").is_err());
        assert!(cfg.set("env.dt", "abc").is_err());
        cfg.set("env.dt", "0").unwrap();
        assert!(cfg.validate().is_err());
        let mut again = EnvConfig::pendulum();
        for (k, v) in EnvConfig::pendulum_modified().entries() {
            again.set(&k, &v).unwrap();
        }
        assert_eq!(again, EnvConfig::pendulum_modified());
    }

    #[test]
    fn env_rejects_non_finite_action() {
        let mut env = Env::new(EnvConfig::cartpole()).unwrap();
        assert!(matches!(env.step(&[f64::NAN]), Err(Error::NonFinite(_))));
        assert!(env.step(&[0.0, 1.0]).is_err());
    }
}
