//! Synthetic prototype task: noise tokens with a few class-indicative ones.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use super::model::Example;
use crate::rng::seeded;

pub const SYNTH_VOCAB: u32 = 200;
pub const SYNTH_LEN: usize = 32;
/// Tokens `0..8` signal class 0 and `8..16` class 1.
pub const CLASS_TOKENS: u32 = 8;
pub const INDICATIVE_PER_EXAMPLE: usize = 4;

/// `n` examples with alternating labels. Each is `SYNTH_LEN` noise tokens
/// drawn uniformly from `16..SYNTH_VOCAB`, with `INDICATIVE_PER_EXAMPLE`
/// random positions replaced by tokens of the example's class.
pub fn prototype_set(n: usize, seed: u64) -> Vec<Example> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|i| {
            let label = (i % 2) as u8;
            let mut tokens: Vec<u32> = (0..SYNTH_LEN).map(|_| rng.gen_range(2 * CLASS_TOKENS..SYNTH_VOCAB)).collect();
            let mut positions: Vec<usize> = (0..SYNTH_LEN).collect();
            positions.shuffle(&mut rng);
            for &p in &positions[..INDICATIVE_PER_EXAMPLE] {
                tokens[p] = rng.gen_range(0..CLASS_TOKENS) + CLASS_TOKENS * u32::from(label);
            }
            Example { tokens, label }
        })
        .collect()
}

/// Words `t0`..`t199` standing in for token ids, for text-level pipelines.
pub fn as_text(example: &Example) -> String {
    let words: Vec<String> = example.tokens.iter().map(|t| format!("t{t}")).collect();
    words.join(" ")
}
