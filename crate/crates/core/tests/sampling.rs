use moprompt_core::policy::{sample_prompts, PolicyConfig, PolicyParams};

fn one_step_config(vocab_size: usize) -> PolicyConfig {
    PolicyConfig {
        vocab_size,
        prompt_length: 1,
        hidden_dim: 4,
        context_dim: 2,
        temperature: 1.0,
        reward_scale: 10.0,
    }
}

#[test]
fn zero_policy_samples_uniformly() {
    let vocab = 4;
    let n = 100_000;
    let params = PolicyParams::zeros(one_step_config(vocab)).unwrap();
    let mut counts = vec![0usize; vocab];
    for s in sample_prompts(&params, &[0.3, -0.2], n, 5).unwrap() {
        counts[s.tokens[0]] += 1;
    }
    let p = 1.0 / vocab as f64;
    let sigma = (n as f64 * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c as f64 - n as f64 * p).abs() <= 3.0 * sigma, "count {c}");
    }
}

#[test]
fn large_head_bias_dominates_sampling() {
    let config = one_step_config(6);
    let zero = PolicyParams::zeros(config.clone()).unwrap();
    let mut w = zero.weights();
    w.b_out[0] = 10.0;
    let params = PolicyParams::from_weights(config, &w).unwrap();
    let samples = sample_prompts(&params, &[0.0, 0.0], 10_000, 6).unwrap();
    let hits = samples.iter().filter(|s| s.tokens[0] == 0).count();
    assert!(hits as f64 / 10_000.0 > 0.99);
}

#[test]
fn recorded_log_probs_are_consistent_with_temperature() {
    let mut config = one_step_config(4);
    config.temperature = 0.5;
    let params = PolicyParams::zeros(config).unwrap();
    let s = &sample_prompts(&params, &[0.0, 0.0], 1, 0).unwrap()[0];
    assert!((s.log_prob - (0.25f64).ln()).abs() < 1e-15);
}
