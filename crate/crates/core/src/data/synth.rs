//! Synthetic majority-token classification task.
//!
//! Each sequence mixes two marker tokens (`a`, `b`) with distractors
//! (`w0`, `w1`, …). The label is 0 when `a` outnumbers `b` and 1 otherwise;
//! tied sequences are redrawn. Classes are generated in exact balance.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tsv::Record;
use crate::error::{Error, Result};

const MARKER_PROB: f64 = 0.75;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthDataset {
    pub train: Vec<Record>,
    pub val: Vec<Record>,
    pub test: Vec<Record>,
}

fn sample_sequence(rng: &mut ChaCha8Rng, n: usize, distractors: usize) -> (usize, Vec<String>) {
    loop {
        let (mut a, mut b) = (0usize, 0usize);
        let mut words = Vec::with_capacity(n);
        for _ in 0..n {
            if distractors == 0 || rng.random_bool(MARKER_PROB) {
                if rng.random_bool(0.5) {
                    a += 1;
                    words.push("a".to_string());
                } else {
                    b += 1;
                    words.push("b".to_string());
                }
            } else {
                words.push(format!("w{}", rng.random_range(0..distractors)));
            }
        }
        if a != b {
            return (usize::from(b > a), words);
        }
    }
}

/// `size` examples of length `n` over `vocab_size` content tokens, shuffled
/// and split 80/10/10.
pub fn synth_majority(seed: u64, size: usize, n: usize, vocab_size: usize) -> Result<SynthDataset> {
    if vocab_size < 2 {
        return Err(Error::Input(format!("synthetic vocabulary needs at least 2 tokens, got {vocab_size}")));
    }
    if n == 0 {
        return Err(Error::Input("synthetic sequence length must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let distractors = vocab_size - 2;
    let mut records: Vec<Record> = (0..size)
        .map(|i| {
            let target = i % 2;
            loop {
                let (label, words) = sample_sequence(&mut rng, n, distractors);
                if label == target {
                    return (label, words.join(" "));
                }
            }
        })
        .collect();
    records.shuffle(&mut rng);
    let n_train = size * 8 / 10;
    let n_val = size / 10;
    let test = records.split_off(n_train + n_val);
    let val = records.split_off(n_train);
    Ok(SynthDataset {
        train: records,
        val,
        test,
    })
}
