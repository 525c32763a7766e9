//! Shared manifest builders for the integration tests.
#![allow(dead_code)]

use tslab::config::ExperimentConfig;

/// Thompson sampling on i.i.d. sphere slates with Gaussian noise.
pub fn sphere(dim: usize, arms: usize, horizon: u64, r: f64, delta: f64, seed: u64) -> ExperimentConfig {
    manifest(&format!(
        r#"
schema_version = 1
dim = {dim}
horizon = {horizon}
delta = {delta}
seed = {seed}

[noise]
kind = "gaussian"
scale = {r}

[policy]
kind = "thompson"

[adversary]
kind = "sphere-iid"
arms = {arms}
"#
    ))
}

/// The two-arm greedy-trap instance under `policy` (a TOML inline table body).
pub fn greedy_trap(policy: &str, noise: &str, horizon: u64, seed: u64) -> ExperimentConfig {
    manifest(&format!(
        r#"
schema_version = 1
dim = 2
horizon = {horizon}
delta = 0.1
seed = {seed}
noise = {noise}
policy = {policy}

[adversary]
kind = "greedy-trap"
"#
    ))
}

pub fn manifest(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text).expect("test manifest is valid")
}
