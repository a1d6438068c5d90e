use moprompt_core::pareto::RewardVector;
use moprompt_core::policy::{
    init_policy, per_objective_loss_grads, sample_prompts, sql_loss_and_grad,
    sql_loss_with_targets, sql_targets, PolicyConfig, PolicyParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_EPS: f64 = 1e-4;
const FD_MAX_REL_ERR: f64 = 1e-4;

fn random_policy(rng: &mut ChaCha8Rng) -> (PolicyParams, Vec<f64>) {
    let config = PolicyConfig {
        vocab_size: rng.random_range(2..=4),
        prompt_length: rng.random_range(1..=3),
        hidden_dim: rng.random_range(2..=5),
        context_dim: rng.random_range(1..=3),
        temperature: rng.random_range(0.5..2.0),
        reward_scale: rng.random_range(1.0..10.0),
    };
    let mut params = init_policy(&config, rng.random()).unwrap();
    for v in params.flat_mut() {
        *v += rng.random_range(-0.5..0.5);
    }
    let context = (0..config.context_dim)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    (params, context)
}

/// Largest `|a - b| / max(|a|, |b|, 1e-8)` over all coordinates.
fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

#[test]
fn analytic_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..50 {
        let (params, context) = random_policy(&mut rng);
        let k = rng.random_range(1..=4);
        let samples = sample_prompts(&params, &context, k, rng.random()).unwrap();
        let rewards: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let analytic = sql_loss_and_grad(&params, &context, &samples, &rewards).unwrap();
        let targets = sql_targets(&params, &context, &samples, &rewards).unwrap();
        let base_loss = sql_loss_with_targets(&params, &context, &samples, &targets).unwrap();
        assert_eq!(base_loss, analytic.loss);

        let mut numeric = vec![0.0; params.flat().len()];
        for (i, slot) in numeric.iter_mut().enumerate() {
            let mut plus = params.clone();
            plus.flat_mut()[i] += FD_EPS;
            let mut minus = params.clone();
            minus.flat_mut()[i] -= FD_EPS;
            let lp = sql_loss_with_targets(&plus, &context, &samples, &targets).unwrap();
            let lm = sql_loss_with_targets(&minus, &context, &samples, &targets).unwrap();
            *slot = (lp - lm) / (2.0 * FD_EPS);
        }
        let err = max_relative_error(&analytic.grad, &numeric);
        assert!(
            err < FD_MAX_REL_ERR,
            "case {case}: max relative error {err}"
        );
    }
}

#[test]
fn hand_computed_loss_for_zero_policy() {
    let config = PolicyConfig {
        vocab_size: 2,
        prompt_length: 2,
        hidden_dim: 3,
        context_dim: 1,
        temperature: 1.0,
        reward_scale: 10.0,
    };
    let params = PolicyParams::zeros(config).unwrap();
    let samples = sample_prompts(&params, &[0.0], 1, 0).unwrap();
    let lg = sql_loss_and_grad(&params, &[0.0], &samples, &[0.0]).unwrap();
    let ln2 = core::f64::consts::LN_2;
    assert!((lg.loss - ln2 * ln2 / 4.0).abs() < 1e-15);
}

#[test]
fn per_objective_gradients_equal_independent_calls_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..20 {
        let (params, context) = random_policy(&mut rng);
        let k = rng.random_range(1..=5);
        let m = rng.random_range(1..=4);
        let samples = sample_prompts(&params, &context, k, rng.random()).unwrap();
        let vectors: Vec<RewardVector> = (0..k)
            .map(|_| RewardVector::new((0..m).map(|_| rng.random::<f64>()).collect()).unwrap())
            .collect();
        let (losses, grads) =
            per_objective_loss_grads(&params, &context, &samples, &vectors).unwrap();
        for i in 0..m {
            let column: Vec<f64> = vectors.iter().map(|v| v.values()[i]).collect();
            let single = sql_loss_and_grad(&params, &context, &samples, &column).unwrap();
            assert_eq!(losses[i].to_bits(), single.loss.to_bits());
            assert_eq!(grads.gradients()[i], single.grad);
        }
    }
}
