//! Synthetic inputs shared by the benchmarks.

use std::collections::BTreeMap;

use sentiprobe_core::scorer::{MaskDistribution, ToyBackend};
use sentiprobe_core::{GoldLabel, Review};

/// Deterministic pseudo-random stream (splitmix64), so benches need no RNG crate.
pub struct Stream(u64);

impl Stream {
    pub fn new(seed: u64) -> Self {
        Stream(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

pub fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i:04}")).collect()
}

/// `n` renormalized distributions over `words`.
pub fn distributions(n: usize, words: &[String], seed: u64) -> Vec<MaskDistribution> {
    let mut s = Stream::new(seed);
    (0..n)
        .map(|i| {
            let raw: Vec<f64> = words.iter().map(|_| s.unit() + 1e-6).collect();
            let total: f64 = raw.iter().sum();
            MaskDistribution {
                probe_id: format!("r{i}"),
                probabilities: words.iter().cloned().zip(raw.iter().map(|p| p / total)).collect(),
                excluded: Vec::new(),
            }
        })
        .collect()
}

/// Toy model whose cue table covers `vocab` plus the verbalizers.
pub fn toy_backend(vocab: &[String], seed: u64) -> ToyBackend {
    let mut s = Stream::new(seed);
    let mut cues: BTreeMap<String, f64> = vocab
        .iter()
        .map(|w| (w.clone(), (s.unit() * 2.0 - 1.0) * 0.5))
        .collect();
    cues.insert("great".into(), 1.0);
    cues.insert("terrible".into(), -1.0);
    ToyBackend::new(cues, 3.0).expect("valid toy table")
}

/// Reviews of `len` words drawn from `vocab`, alternating gold labels.
pub fn reviews(n: usize, len: usize, vocab: &[String], seed: u64) -> Vec<Review> {
    let mut s = Stream::new(seed);
    (0..n)
        .map(|i| {
            let text: Vec<&str> = (0..len)
                .map(|_| vocab[(s.next_u64() % vocab.len() as u64) as usize].as_str())
                .collect();
            Review {
                id: format!("r{i:05}"),
                text: text.join(" "),
                gold_label: if i % 2 == 0 { GoldLabel::Positive } else { GoldLabel::Negative },
                source: "synthetic".into(),
            }
        })
        .collect()
}
