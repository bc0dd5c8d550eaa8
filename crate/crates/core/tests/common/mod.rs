//! Finite-difference oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use salsa_core::nn::{Mat, Mlp};
use salsa_core::trainer::{ActorObjective, Batch, Critic};
use salsa_core::{latent_step, LatentAction, LatentPolicy};

/// Typical step of the difference quotients; sets the rounding floor.
pub const FD_STEP: f64 = 1e-3;

/// Derivative of `f` at 0 by Ridders' method: central differences at
/// steps shrinking from `FD_STEP`, Richardson-extrapolated, keeping
/// the entry of the tableau with the smallest error estimate.
pub fn central_difference(mut f: impl FnMut(f64) -> f64) -> f64 {
    const SHRINK: f64 = 1.4;
    const N: usize = 10;
    let mut table = [[0.0f64; N]; N];
    let mut h = FD_STEP;
    table[0][0] = (f(h) - f(-h)) / (2.0 * h);
    let (mut best, mut err) = (table[0][0], f64::INFINITY);
    for i in 1..N {
        h /= SHRINK;
        table[0][i] = (f(h) - f(-h)) / (2.0 * h);
        let mut fac = SHRINK * SHRINK;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
            fac *= SHRINK * SHRINK;
            let e = (table[j][i] - table[j - 1][i]).abs().max((table[j][i] - table[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = table[j][i];
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    best
}

/// `|a − n| / max(|a|, |n|, floor)`; the floor keeps gradients that are
/// zero up to rounding from dominating the ratio.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Smallest gradient magnitude whose difference quotient is resolved to
/// 1e-4: rounding in a sum of size `value` moves the quotient by about
/// ε·|value|/h.
/// Also never below 1e-6 of the largest analytic entry.
pub fn gradient_floor(value: f64, max_grad: f64) -> f64 {
    let noise = 2.0 * f64::EPSILON * value.abs().max(1.0) / FD_STEP;
    (noise / 1e-4).max(1e-6 * max_grad.max(1e-3))
}

fn weighted_output(net: &Mlp, inputs: &Mat, w: &Mat) -> f64 {
    let out = net.predict_batch(inputs).unwrap();
    out.data().iter().zip(w.data()).map(|(o, w)| o * w).sum()
}

fn param_mut(net: &mut Mlp, mut idx: usize) -> &mut f64 {
    for s in net.param_slices_mut() {
        if idx < s.len() {
            return &mut s[idx];
        }
        idx -= s.len();
    }
    panic!("parameter index out of range");
}

/// Largest relative error between `Mlp::backward` and central differences
/// of `L = Σ w ⊙ net(inputs)` over `probes` random parameters and
/// `probes` random input coordinates.
pub fn mlp_gradient_error<R: Rng>(net: &Mlp, inputs: &Mat, probes: usize, rng: &mut R) -> f64 {
    let w = Mat::from_vec(
        inputs.rows(),
        net.output_dim(),
        (0..inputs.rows() * net.output_dim())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect(),
    )
    .unwrap();
    let (_, trace) = net.forward_batch(inputs).unwrap();
    let (grads, dx) = net.backward(&trace, &w).unwrap();
    let analytic = grads.flatten();
    let n = net.param_count();
    let scale = analytic.iter().chain(dx.data()).fold(0.0f64, |m, g| m.max(g.abs()));
    let magnitude: f64 = net
        .predict_batch(inputs)
        .unwrap()
        .data()
        .iter()
        .zip(w.data())
        .map(|(o, w)| (o * w).abs())
        .sum();
    let floor = gradient_floor(magnitude, scale);

    let mut worst = 0.0f64;
    for _ in 0..probes {
        let i = rng.gen_range(0..n);
        let mut p = net.clone();
        let orig = *param_mut(&mut p, i);
        let numeric = central_difference(|d| {
            *param_mut(&mut p, i) = orig + d;
            weighted_output(&p, inputs, &w)
        });
        worst = worst.max(rel_err(analytic[i], numeric, floor));
    }
    for _ in 0..probes {
        let k = rng.gen_range(0..inputs.data().len());
        let mut x = inputs.clone();
        let orig = x.data()[k];
        let numeric = central_difference(|d| {
            x.data_mut()[k] = orig + d;
            weighted_output(net, &x, &w)
        });
        worst = worst.max(rel_err(dx.data()[k], numeric, floor));
    }
    worst
}

/// The actor objective evaluated sample by sample through the public
/// single-step API, independent of the batched training code.
pub fn actor_objective_oracle(
    policy: &LatentPolicy,
    critic: &Critic,
    batch: &Batch,
    weights: ActorObjective,
) -> f64 {
    let n = batch.states.rows();
    let mut total = 0.0;
    for b in 0..n {
        let s = batch.states.row(b);
        let z: LatentAction = policy.autoencoder.encode(batch.prev_actions.row(b)).unwrap();
        let a = policy.dynamics.matrix(s).unwrap();
        let next = latent_step(&z, &a).unwrap();
        let raw = policy.autoencoder.decode(&next).unwrap();
        total += critic.q(s, &raw).unwrap();
        for (j, &r) in raw.iter().enumerate() {
            let excess = (r - policy.bounds.high[j]).max(0.0) + (r - policy.bounds.low[j]).min(0.0);
            total -= weights.bound_penalty * excess * excess;
        }
        total -= weights.matrix_penalty * a.as_mat().data().iter().map(|v| v * v).sum::<f64>();
    }
    total / n as f64
}

/// Largest relative error between the analytic actor gradient and central
/// differences of the oracle objective over `probes` random parameters of
/// the dynamics network.
pub fn actor_gradient_error<R: Rng>(
    policy: &LatentPolicy,
    critic: &Critic,
    batch: &Batch,
    weights: ActorObjective,
    probes: usize,
    rng: &mut R,
) -> f64 {
    let (value, grads) =
        salsa_core::trainer::actor_objective_gradient(policy, critic, batch, weights).unwrap();
    let oracle = actor_objective_oracle(policy, critic, batch, weights);
    assert!((value - oracle).abs() <= 1e-10 * oracle.abs().max(1.0), "{value} vs {oracle}");
    let analytic = grads.flatten();
    let scale = analytic.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let floor = gradient_floor(oracle, scale);
    let n = policy.dynamics.net.param_count();
    let mut worst = 0.0f64;
    for _ in 0..probes {
        let i = rng.gen_range(0..n);
        let mut p = policy.clone();
        let orig = *param_mut(&mut p.dynamics.net, i);
        let numeric = central_difference(|d| {
            *param_mut(&mut p.dynamics.net, i) = orig + d;
            actor_objective_oracle(&p, critic, batch, weights)
        });
        worst = worst.max(rel_err(analytic[i], numeric, floor));
    }
    worst
}

pub fn random_mat<R: Rng>(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut R) -> Mat {
    Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect()).unwrap()
}
