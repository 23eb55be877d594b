#![allow(dead_code)]

use claqs::config::{ModelConfig, RunConfig};
use claqs::data::Document;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The small end-to-end configuration: q=4, n=4, d=3, ℓ=1, d_e=8, h=8, C=2.
pub fn small_model() -> ModelConfig {
    ModelConfig {
        qubits: 4,
        window: 4,
        layers: 1,
        ff_layers: 1,
        degree: 3,
        embed_dim: 8,
        hidden: 8,
        classes: 2,
        ..ModelConfig::default()
    }
}

pub fn run_config(model: ModelConfig) -> RunConfig {
    RunConfig {
        model,
        ..RunConfig::default()
    }
}

/// Random documents over ids `2..vocab` with lengths in `1..=max_len`.
pub fn random_docs(seed: u64, count: usize, vocab: usize, max_len: usize, cfg: &ModelConfig) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let len = rng.random_range(1..=max_len);
            let ids = (0..len).map(|_| rng.random_range(2..vocab)).collect();
            Document::new(ids, i % cfg.classes, cfg.window, cfg.stride())
        })
        .collect()
}
