use std::f64::consts::PI;

use super::{EnvConfig, StepResult};
use crate::error::{ensure_finite, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PendulumState {
    /// Angle from upright, radians. Not wrapped; the reward wraps it.
    pub theta: f64,
    pub theta_dot: f64,
}

impl PendulumState {
    /// `(cos θ, sin θ, θ̇)`
    pub fn observation(&self) -> [f64; 3] {
        [self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

/// Wraps an angle into `[−π, π)`.
pub fn angle_normalize(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// One semi-implicit Euler step of the Gym pendulum:
/// `θ̈ = 3g/(2l)·sin θ + 3/(m l²)·u`, torque clipped to `±max_torque`,
/// velocity clipped to `±max_speed`, reward `−(θ² + 0.1 θ̇² + 0.001 u²)`.
pub fn pendulum_step(
    state: &PendulumState,
    action: f64,
    cfg: &EnvConfig,
) -> Result<(PendulumState, StepResult)> {
    ensure_finite("pendulum state", &[state.theta, state.theta_dot])?;
    ensure_finite("pendulum action", &[action])?;
    let (g, m, l, dt) = (cfg.gravity, cfg.mass, cfg.length, cfg.dt);
    let u = action.clamp(-cfg.max_torque, cfg.max_torque);
    let th = state.theta;
    let thdot = state.theta_dot;

    let cost = angle_normalize(th).powi(2) + 0.1 * thdot * thdot + 0.001 * u * u;

    let new_thdot = (thdot + (3.0 * g / (2.0 * l) * th.sin() + 3.0 / (m * l * l) * u) * dt)
        .clamp(-cfg.max_speed, cfg.max_speed);
    let new_th = th + new_thdot * dt;
    let next = PendulumState {
        theta: new_th,
        theta_dot: new_thdot,
    };
    Ok((
        next,
        StepResult {
            next_observation: next.observation().to_vec(),
            reward: -cost,
            terminated: false,
            truncated: false,
        },
    ))
}
