mod common;

use common::{actor_gradient_error, mlp_gradient_error, random_mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use salsa_core::nn::{Activation, Mlp};
use salsa_core::trainer::{ActorObjective, Batch, Critic};
use salsa_core::{ActionBounds, Autoencoder, DynamicsNet, LatentPolicy};

#[test]
fn small_tanh_net_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = Mlp::new(&[3, 8, 3], Activation::Tanh, Activation::Tanh, &mut rng);
    let x = random_mat(5, 3, -1.5, 1.5, &mut rng);
    let err = mlp_gradient_error(&net, &x, 200, &mut rng);
    assert!(err < 1e-4, "max relative error {err:e}");
}

#[test]
fn every_network_shape_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for hd in [2, 3, 5] {
        let ae = Autoencoder::new(1, hd, &[32, 32], &[32, 32], &mut rng);
        let actions = random_mat(16, 1, -2.0, 2.0, &mut rng);
        let err = mlp_gradient_error(&ae.encoder, &actions, 100, &mut rng);
        assert!(err < 1e-4, "encoder hd={hd}: {err:e}");
        let z = ae.encoder.predict_batch(&actions).unwrap();
        let err = mlp_gradient_error(&ae.decoder, &z, 100, &mut rng);
        assert!(err < 1e-4, "decoder hd={hd}: {err:e}");

        for state_dim in [3, 4] {
            let dynamics = DynamicsNet::new(state_dim, hd, &[64, 64], None, &mut rng);
            let s = random_mat(16, state_dim, -1.0, 1.0, &mut rng);
            let err = mlp_gradient_error(&dynamics.net, &s, 100, &mut rng);
            assert!(err < 1e-4, "dynamics hd={hd} s={state_dim}: {err:e}");
        }
    }
    for state_dim in [3, 4] {
        let mut critic = Critic::new(state_dim, 1, &[64, 64], &mut rng);
        critic.net.init_output_layer(0.5, &mut rng);
        let x = random_mat(16, state_dim + 1, -1.0, 1.0, &mut rng);
        let err = mlp_gradient_error(&critic.net, &x, 100, &mut rng);
        assert!(err < 1e-4, "critic s={state_dim}: {err:e}");
    }
}

fn batch<R: Rng>(n: usize, state_dim: usize, limit: f64, rng: &mut R) -> Batch {
    let states = random_mat(n, state_dim, -1.0, 1.0, rng);
    Batch {
        prev_actions: random_mat(n, 1, -limit, limit, rng),
        actions: random_mat(n, 1, -limit, limit, rng),
        rewards: (0..n).map(|_| rng.gen_range(-1.0..0.0)).collect(),
        next_states: states.clone(),
        states,
        dones: vec![false; n],
    }
}

#[test]
fn actor_gradient_matches_the_composed_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (state_dim, limit, hd) in [(3, 2.0, 3), (4, 1.0, 3), (3, 2.0, 2)] {
        let mut ae = Autoencoder::new(1, hd, &[16], &[16], &mut rng);
        ae.frozen = true;
        let dynamics = DynamicsNet::new(state_dim, hd, &[32, 32], None, &mut rng);
        let policy = LatentPolicy::new(ae, dynamics, ActionBounds::symmetric(1, limit)).unwrap();
        let mut critic = Critic::new(state_dim, 1, &[32, 32], &mut rng);
        critic.net.init_output_layer(1.0, &mut rng);
        let b = batch(24, state_dim, limit, &mut rng);
        for weights in [
            ActorObjective { bound_penalty: 0.0, matrix_penalty: 0.0 },
            ActorObjective { bound_penalty: 1.0, matrix_penalty: 0.3 },
        ] {
            let err = actor_gradient_error(&policy, &critic, &b, weights, 100, &mut rng);
            assert!(err < 1e-3, "state_dim={state_dim} hd={hd} {weights:?}: {err:e}");
        }
    }
}
