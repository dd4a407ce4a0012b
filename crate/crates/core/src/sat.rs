//! Association test: a word leans positive when its mean mask probability
//! after positive reviews exceeds its mean after negative reviews by more
//! than `m` standard deviations of the negative-side probabilities, and
//! symmetrically for negative.

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::GoldLabel;
use crate::scorer::MaskDistribution;
use crate::summation;
use crate::Direction;

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.5, 1.0, 1.5];

#[derive(Debug, Error)]
pub enum SatError {
    #[error("need at least 2 {} distributions, got {got}", .side.as_str())]
    InsufficientSamples { side: GoldLabel, got: usize },
    #[error("word {word:?} is neither scored nor excluded in probe {probe_id}")]
    MissingWord { word: String, probe_id: String },
    #[error("threshold multipliers must be finite and nonnegative, got {0}")]
    InvalidThreshold(f64),
    #[error("at least one threshold multiplier is required")]
    NoThresholds,
}

/// Per-word mean and population standard deviation over each review set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationStats {
    pub word: String,
    pub mean_pos: f64,
    pub mean_neg: f64,
    pub std_pos: f64,
    pub std_neg: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SatLabel {
    PositiveBiased,
    NegativeBiased,
    Unbiased,
}

impl SatLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SatLabel::PositiveBiased => "positive_biased",
            SatLabel::NegativeBiased => "negative_biased",
            SatLabel::Unbiased => "unbiased",
        }
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            SatLabel::PositiveBiased => Some(Direction::PositiveBiased),
            SatLabel::NegativeBiased => Some(Direction::NegativeBiased),
            SatLabel::Unbiased => None,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "positive_biased" => Some(SatLabel::PositiveBiased),
            "negative_biased" => Some(SatLabel::NegativeBiased),
            "unbiased" => Some(SatLabel::Unbiased),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatVerdict {
    pub word: String,
    pub m: f64,
    pub label: SatLabel,
}

/// Statistics for every word scored in all distributions, plus the words
/// dropped because some probe excluded them.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub stats: Vec<AssociationStats>,
    pub dropped: Vec<String>,
}

fn collect(
    dists: &[MaskDistribution],
    word: &str,
) -> Result<Option<Vec<f64>>, SatError> {
    let mut values = Vec::with_capacity(dists.len());
    let mut excluded = false;
    for d in dists {
        match d.get(word) {
            Some(p) => values.push(p),
            None if d.excluded.iter().any(|w| w == word) => excluded = true,
            None => {
                return Err(SatError::MissingWord {
                    word: word.to_string(),
                    probe_id: d.probe_id.clone(),
                })
            }
        }
    }
    Ok((!excluded).then_some(values))
}

/// Computes [`AssociationStats`] for each word, in the order given.
pub fn accumulate_association(
    distributions_pos: &[MaskDistribution],
    distributions_neg: &[MaskDistribution],
    words: &[String],
) -> Result<Association, SatError> {
    for (side, dists) in [
        (GoldLabel::Positive, distributions_pos),
        (GoldLabel::Negative, distributions_neg),
    ] {
        if dists.len() < 2 {
            return Err(SatError::InsufficientSamples {
                side,
                got: dists.len(),
            });
        }
    }

    let mut stats = Vec::with_capacity(words.len());
    let mut dropped = Vec::new();
    for word in words {
        let pos = collect(distributions_pos, word)?;
        let neg = collect(distributions_neg, word)?;
        let (Some(pos), Some(neg)) = (pos, neg) else {
            dropped.push(word.clone());
            continue;
        };
        let mean_pos = summation::mean(&pos).expect("nonempty");
        let mean_neg = summation::mean(&neg).expect("nonempty");
        stats.push(AssociationStats {
            word: word.clone(),
            mean_pos,
            mean_neg,
            std_pos: summation::population_std(&pos, mean_pos),
            std_neg: summation::population_std(&neg, mean_neg),
            n_pos: pos.len(),
            n_neg: neg.len(),
        });
    }
    if !dropped.is_empty() {
        warn!("{} words dropped: excluded by the backend in some probe", dropped.len());
    }
    Ok(Association { stats, dropped })
}

/// Applies the `m`-standard-deviation margin rule with strict inequalities.
pub fn sat_classify(stats: &AssociationStats, m: f64) -> SatVerdict {
    debug_assert!(m >= 0.0, "threshold multiplier must be nonnegative");
    let label = if stats.mean_pos > stats.mean_neg + m * stats.std_neg {
        SatLabel::PositiveBiased
    } else if stats.mean_neg > stats.mean_pos + m * stats.std_pos {
        SatLabel::NegativeBiased
    } else {
        SatLabel::Unbiased
    };
    SatVerdict {
        word: stats.word.clone(),
        m,
        label,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatRow {
    pub stats: AssociationStats,
    /// One label per threshold, aligned with [`SatSweep::thresholds`].
    pub labels: Vec<SatLabel>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalPercent {
    pub positive: f64,
    pub negative: f64,
}

/// Counts for one threshold column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub m: f64,
    pub positive_biased_count: usize,
    pub negative_biased_count: usize,
    /// Relative to every word that was requested, including dropped ones.
    pub percent_of_words: DirectionalPercent,
    /// Relative to the words that were actually scored.
    pub percent_of_scored: DirectionalPercent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatSweep {
    pub thresholds: Vec<f64>,
    pub rows: Vec<SatRow>,
    pub summary: Vec<ThresholdSummary>,
    pub words_requested: usize,
    pub words_scored: usize,
}

fn pct(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

/// Classifies every word at every threshold. `words_requested` is the size
/// of the audited word list before any exclusions.
pub fn sat_sweep(
    stats: &[AssociationStats],
    thresholds: &[f64],
    words_requested: usize,
) -> Result<SatSweep, SatError> {
    if thresholds.is_empty() {
        return Err(SatError::NoThresholds);
    }
    if let Some(&m) = thresholds.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
        return Err(SatError::InvalidThreshold(m));
    }
    let rows: Vec<SatRow> = stats
        .iter()
        .map(|s| SatRow {
            stats: s.clone(),
            labels: thresholds.iter().map(|&m| sat_classify(s, m).label).collect(),
        })
        .collect();
    let words_requested = words_requested.max(stats.len());
    let summary = thresholds
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let count = |label| rows.iter().filter(|r| r.labels[i] == label).count();
            let pos = count(SatLabel::PositiveBiased);
            let neg = count(SatLabel::NegativeBiased);
            ThresholdSummary {
                m,
                positive_biased_count: pos,
                negative_biased_count: neg,
                percent_of_words: DirectionalPercent {
                    positive: pct(pos, words_requested),
                    negative: pct(neg, words_requested),
                },
                percent_of_scored: DirectionalPercent {
                    positive: pct(pos, stats.len()),
                    negative: pct(neg, stats.len()),
                },
            }
        })
        .collect();
    Ok(SatSweep {
        thresholds: thresholds.to_vec(),
        rows,
        summary,
        words_requested,
        words_scored: stats.len(),
    })
}

impl SatSweep {
    /// Words biased in `direction` at threshold column `idx`, strongest mean
    /// gap first, ties broken by word.
    pub fn ranked(&self, idx: usize, direction: Direction) -> Vec<&SatRow> {
        let mut rows: Vec<&SatRow> = self
            .rows
            .iter()
            .filter(|r| r.labels[idx].direction() == Some(direction))
            .collect();
        let gap = |r: &SatRow| match direction {
            Direction::PositiveBiased => r.stats.mean_pos - r.stats.mean_neg,
            Direction::NegativeBiased => r.stats.mean_neg - r.stats.mean_pos,
        };
        rows.sort_by(|a, b| gap(b).total_cmp(&gap(a)).then_with(|| a.stats.word.cmp(&b.stats.word)));
        rows
    }

    /// Words biased in `direction` at threshold column `idx`.
    pub fn biased_words(&self, idx: usize, direction: Direction) -> Vec<String> {
        self.rows
            .iter()
            .filter(|r| r.labels[idx].direction() == Some(direction))
            .map(|r| r.stats.word.clone())
            .collect()
    }
}
