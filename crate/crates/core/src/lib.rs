//! Token-level sentiment bias probes for masked language models.
//!
//! Two tests are provided on top of a pluggable mask-filling backend:
//!
//! - the association test ([`sat`]) compares a word's mean mask probability
//!   after positive reviews against its mean after negative reviews, with a
//!   margin of `m` population standard deviations;
//! - the shift test ([`sst`]) appends a word `K` times to every review and
//!   measures how much a `great`/`terrible` cloze classifier loses accuracy on
//!   each gold class, folding the deltas into a single score `q`.
//!
//! [`corpus`] loads lexicons and reviews, [`scorer`] builds cloze probes and
//! talks to backends, and [`analysis`] compares the two tests and writes
//! reports.

pub mod analysis;
pub mod corpus;
pub mod report;
pub mod sat;
pub mod scorer;
pub mod sst;
pub mod summation;

pub use corpus::{
    GoldLabel, LexiconEntry, LexiconSource, LoadSummary, Polarity, Review, WordSelection,
};
pub use sat::{AssociationStats, SatLabel, SatVerdict};
pub use scorer::{
    MaskDistribution, Probe, ProbeTemplate, ScorerBackend, ScorerError, SentimentPrediction,
};
pub use sst::{Baseline, ScoreUnit, ShiftLabel, ShiftRecord, ShiftScore};

/// Bias direction shared by both tests and the overlap analytics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    PositiveBiased,
    NegativeBiased,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::PositiveBiased, Direction::NegativeBiased];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::PositiveBiased => "positive_biased",
            Direction::NegativeBiased => "negative_biased",
        }
    }
}
