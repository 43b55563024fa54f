#![allow(dead_code)]

use dai_core::harness::RunConfig;
use dai_lab::config::ConfigBuilder;

/// A few hundred steps on the point mass with tiny networks.
pub fn tiny_config(algorithm: &str, seed: u64) -> RunConfig {
    let mut b = ConfigBuilder::new();
    b.apply_overrides(&[
        "env=point_mass_2d".to_string(),
        format!("algorithm={algorithm}"),
        "total_steps=400".into(),
        format!("seed={seed}"),
        "eval_every=100".into(),
        "eval_episodes=2".into(),
        "td3.hidden=8,8".into(),
        "td3.batch_size=16".into(),
        "td3.learning_starts=100".into(),
        "replay_capacity=300".into(),
    ]);
    b.build().unwrap()
}
