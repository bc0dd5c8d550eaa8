use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use salsa_core::stability::{
    detect_period, floquet_trajectory, kreiss_trajectory, spectral_report, stability_contour,
    KreissMode, KreissSearch, SweepSpec, Window, DEFAULT_NORMALITY_TOL,
};
use salsa_core::trainer::Critic;
use salsa_core::{
    rollout, ActionMask, Autoencoder, DynamicsNet, EnvConfig, LatentPolicy, ModelBundle, Start,
    TrainConfig, EnvId,
};

/// First autocorrelation peak after the first zero crossing.
fn autocorrelation_period(x: &[f64]) -> usize {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let r: Vec<f64> = (0..c.len() / 2)
        .map(|lag| {
            let n = c.len() - lag;
            c[..n].iter().zip(&c[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
        })
        .collect();
    let start = r.iter().position(|&v| v < 0.0).expect("autocorrelation crosses zero");
    let end = start + r[start..].iter().position(|&v| v > 0.0).expect("rises again");
    let stop = end + r[end..].iter().position(|&v| v < 0.0).unwrap_or(r.len() - end);
    (end..stop).max_by(|&a, &b| r[a].total_cmp(&r[b])).unwrap()
}

#[test]
fn detected_period_agrees_with_autocorrelation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = Normal::new(0.0, 0.01).unwrap();
    for _ in 0..50 {
        let period = rng.gen_range(12.0..60.0);
        let phase = rng.gen_range(0.0..6.3);
        let second = rng.gen_range(0.0..0.3);
        let x: Vec<f64> = (0..200)
            .map(|t| {
                let w = 2.0 * std::f64::consts::PI * t as f64 / period + phase;
                w.sin() + second * (2.0 * w).sin() + noise.sample(&mut rng)
            })
            .collect();
        let (t1, t2) = detect_period(&x).unwrap();
        let oracle = autocorrelation_period(&x);
        let found = t2 - t1;
        assert!(found.abs_diff(oracle) <= 2, "period {period:.1}: peaks {found}, autocorrelation {oracle}");
    }
}

fn bundle(seed: u64) -> ModelBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = EnvConfig::pendulum();
    let mut ae = Autoencoder::new(1, 3, &[16], &[16], &mut rng);
    ae.frozen = true;
    let dynamics = DynamicsNet::new(3, 3, &[16, 16], None, &mut rng);
    let policy = LatentPolicy::new(ae, dynamics, env.action_bounds()).unwrap();
    let critic = Critic::new(3, 1, &[16], &mut rng);
    ModelBundle::new(env, policy, critic, TrainConfig::for_env(EnvId::Pendulum))
}

#[test]
fn analyses_leave_the_bundle_untouched() {
    let b = bundle(9);
    let before = b.to_json().unwrap();
    let hash = b.content_hash.clone();
    let policy = b.policy().unwrap();
    let traj = rollout(&b.env, &policy, 200, &"0:30,150:200".parse().unwrap(), Start::Seed(2)).unwrap();
    for m in traj.matrices().unwrap() {
        spectral_report(&m).unwrap();
    }
    kreiss_trajectory(&traj, KreissMode::Standard, &KreissSearch::default(), DEFAULT_NORMALITY_TOL).unwrap();
    floquet_trajectory(&traj, Window::Detect { component: 2, fallback: Some(50) }, 1.0).unwrap();
    let spec = SweepSpec { dims: vec![0, 2], ranges: vec![(-1.0, 1.0), (-8.0, 8.0)], resolution: 6, every: 50 };
    stability_contour(&b.dynamics, &traj, &spec).unwrap();
    assert_eq!(b.to_json().unwrap(), before);
    assert_eq!(b.compute_hash(), hash);
}

#[test]
fn masked_steps_execute_zero_and_reencode_it() {
    let b = bundle(10);
    let policy = b.policy().unwrap();
    let mask: ActionMask = "0:30,150:200".parse().unwrap();
    let traj = rollout(&b.env, &policy, 200, &mask, Start::Seed(1)).unwrap();
    let z0 = policy.autoencoder.encode(&[0.0]).unwrap();
    for r in &traj.records {
        if mask.contains(r.t) {
            assert_eq!(r.action, vec![0.0]);
        }
        if r.t > 0 && mask.contains(r.t - 1) {
            assert_eq!(r.z_before, z0.0);
        }
    }
}
