use super::{EnvConfig, StepResult};
use crate::error::{ensure_finite, Result};

/// Pole angle beyond which the episode terminates (12°).
pub const PHI_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const X_THRESHOLD: f64 = 2.4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub phi: f64,
    pub phi_dot: f64,
}

impl CartPoleState {
    pub fn observation(&self) -> [f64; 4] {
        [self.x, self.x_dot, self.phi, self.phi_dot]
    }

    pub fn out_of_bounds(&self) -> bool {
        self.x.abs() > X_THRESHOLD || self.phi.abs() > PHI_THRESHOLD
    }
}

/// Explicit Euler step of the Gym cart-pole with a continuous force
/// `clip(action, −1, 1) · force_mag`. Reward is 1 for every step taken.
pub fn cartpole_step(
    state: &CartPoleState,
    action: f64,
    cfg: &EnvConfig,
) -> Result<(CartPoleState, StepResult)> {
    ensure_finite("cartpole state", &state.observation())?;
    ensure_finite("cartpole action", &[action])?;
    let force = action.clamp(-1.0, 1.0) * cfg.force_mag;
    let total_mass = cfg.mass + cfg.cart_mass;
    let polemass_length = cfg.mass * cfg.length;

    let CartPoleState {
        x,
        x_dot,
        phi,
        phi_dot,
    } = *state;
    let (sin, cos) = phi.sin_cos();
    let temp = (force + polemass_length * phi_dot * phi_dot * sin) / total_mass;
    let phi_acc = (cfg.gravity * sin - cos * temp)
        / (cfg.length * (4.0 / 3.0 - cfg.mass * cos * cos / total_mass));
    let x_acc = temp - polemass_length * phi_acc * cos / total_mass;

    let dt = cfg.dt;
    let next = CartPoleState {
        x: x + dt * x_dot,
        x_dot: x_dot + dt * x_acc,
        phi: phi + dt * phi_dot,
        phi_dot: phi_dot + dt * phi_acc,
    };
    Ok((
        next,
        StepResult {
            next_observation: next.observation().to_vec(),
            reward: 1.0,
            terminated: next.out_of_bounds(),
            truncated: false,
        },
    ))
}
