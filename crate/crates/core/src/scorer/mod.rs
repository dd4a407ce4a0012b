//! Cloze probes and mask-position probabilities.
//!
//! A [`ScorerBackend`] turns probe texts containing the literal `[MASK]`
//! placeholder into per-candidate probabilities. [`mask_probabilities`]
//! validates what the backend returned and renormalizes it over the scored
//! candidates; [`classify_batch`] builds the `great`/`terrible` sentiment
//! classifier on top.

mod remote;
mod toy;
pub mod wire;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::GoldLabel;
use crate::summation::NeumaierSum;

pub use remote::{RemoteBackend, RemoteConfig};
pub use toy::{load_cue_table, ToyBackend, DEFAULT_CLAMP};
pub use wire::MaskResult;

pub const MASK: &str = "[MASK]";
pub const TEXT: &str = "{TEXT}";
pub const DEFAULT_TEMPLATE: &str = "{TEXT} It was [MASK].";

/// Label word whose mask probability votes for a positive review.
pub const POSITIVE_VERBALIZER: &str = "great";
/// Label word whose mask probability votes for a negative review.
pub const NEGATIVE_VERBALIZER: &str = "terrible";

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("every candidate was excluded for probe {0}")]
    AllCandidatesExcluded(String),
    #[error("verbalizer {word:?} was excluded for probe {probe_id}")]
    VerbalizerExcluded { probe_id: String, word: String },
    #[error("probe {0} has no [MASK] placeholder")]
    MissingPlaceholder(String),
    #[error("invalid template {template:?}: {detail}")]
    InvalidTemplate { template: String, detail: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
}

/// A prompt template with one `{TEXT}` slot and one `[MASK]` slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeTemplate {
    template: String,
    prefix: String,
    suffix: String,
}

impl ProbeTemplate {
    pub fn parse(template: &str) -> Result<Self, ScorerError> {
        let invalid = |detail: &str| ScorerError::InvalidTemplate {
            template: template.to_string(),
            detail: detail.to_string(),
        };
        if template.matches(TEXT).count() != 1 {
            return Err(invalid("expected exactly one {TEXT} placeholder"));
        }
        if template.matches(MASK).count() != 1 {
            return Err(invalid("expected exactly one [MASK] placeholder"));
        }
        let (prefix, suffix) = template.split_once(TEXT).expect("placeholder counted");
        Ok(Self {
            template: template.to_string(),
            prefix: prefix.to_string(),
            suffix: suffix.to_string(),
        })
    }

    pub fn as_str(&self) -> &str {
        &self.template
    }

    /// Text preceding `{TEXT}`.
    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    /// Text following `{TEXT}`.
    pub fn suffix(&self) -> &str {
        &self.suffix
    }

    /// Recovers the `{TEXT}` part of a probe built from this template.
    pub fn strip<'a>(&self, probe: &'a str) -> Option<&'a str> {
        probe.strip_prefix(self.prefix.as_str())?.strip_suffix(self.suffix.as_str())
    }
}

impl Default for ProbeTemplate {
    fn default() -> Self {
        Self::parse(DEFAULT_TEMPLATE).expect("default template is valid")
    }
}

/// Fills the template with a review, optionally followed by `count` copies of a word.
pub fn build_probe(
    review_text: &str,
    appended: Option<(&str, usize)>,
    template: &ProbeTemplate,
) -> String {
    let mut text = review_text.to_string();
    if let Some((word, count)) = appended {
        for _ in 0..count {
            text.push(' ');
            text.push_str(word);
        }
    }
    format!("{}{}{}", template.prefix, text, template.suffix)
}

/// A probe text with a stable identifier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Probe {
    pub id: String,
    pub text: String,
}

impl Probe {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

/// Anything that can fill a `[MASK]` slot with probabilities over candidate words.
///
/// Implementations must be deterministic and safe to share across threads.
pub trait ScorerBackend: Send + Sync {
    fn model_id(&self) -> &str;

    /// One result per text, in request order. Probabilities may be on any
    /// positive scale; candidates the backend cannot score as a single mask
    /// fill go to `excluded`.
    fn score(&self, texts: &[String], candidates: &[String]) -> Result<Vec<MaskResult>, ScorerError>;
}

impl<B: ScorerBackend + ?Sized> ScorerBackend for &B {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn score(&self, texts: &[String], candidates: &[String]) -> Result<Vec<MaskResult>, ScorerError> {
        (**self).score(texts, candidates)
    }
}

impl<B: ScorerBackend + ?Sized> ScorerBackend for Box<B> {
    fn model_id(&self) -> &str {
        (**self).model_id()
    }

    fn score(&self, texts: &[String], candidates: &[String]) -> Result<Vec<MaskResult>, ScorerError> {
        (**self).score(texts, candidates)
    }
}

/// How backend probabilities are post-processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Rescale to sum to one over the scored candidates.
    #[default]
    Candidates,
    /// Keep backend values; they must already lie in `[0, 1]`.
    Raw,
}

impl Normalization {
    pub fn is_normalized(self) -> bool {
        self == Normalization::Candidates
    }
}

/// Probability mass over candidate words at the mask position of one probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskDistribution {
    pub probe_id: String,
    pub probabilities: BTreeMap<String, f64>,
    pub excluded: Vec<String>,
}

impl MaskDistribution {
    pub fn get(&self, word: &str) -> Option<f64> {
        self.probabilities.get(word).copied()
    }
}

/// Queries the backend and renormalizes every result over its scored candidates.
pub fn mask_probabilities<B: ScorerBackend + ?Sized>(
    backend: &B,
    probes: &[Probe],
    candidates: &[String],
) -> Result<Vec<MaskDistribution>, ScorerError> {
    mask_probabilities_with(backend, probes, candidates, Normalization::Candidates)
}

pub fn mask_probabilities_with<B: ScorerBackend + ?Sized>(
    backend: &B,
    probes: &[Probe],
    candidates: &[String],
    normalization: Normalization,
) -> Result<Vec<MaskDistribution>, ScorerError> {
    if candidates.is_empty() {
        return Err(ScorerError::InvalidRequest("empty candidate set".into()));
    }
    let requested: HashSet<&str> = candidates.iter().map(String::as_str).collect();
    if requested.len() != candidates.len() {
        return Err(ScorerError::InvalidRequest("duplicate candidates".into()));
    }
    if probes.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(p) = probes.iter().find(|p| !p.text.contains(MASK)) {
        return Err(ScorerError::MissingPlaceholder(p.id.clone()));
    }

    let texts: Vec<String> = probes.iter().map(|p| p.text.clone()).collect();
    let results = backend.score(&texts, candidates)?;
    if results.len() != probes.len() {
        return Err(ScorerError::ProtocolViolation(format!(
            "expected {} results, got {}",
            probes.len(),
            results.len()
        )));
    }

    probes
        .iter()
        .zip(results)
        .map(|(probe, result)| validate(probe, result, &requested, normalization))
        .collect()
}

fn validate(
    probe: &Probe,
    result: MaskResult,
    requested: &HashSet<&str>,
    normalization: Normalization,
) -> Result<MaskDistribution, ScorerError> {
    let violation = |detail: String| {
        ScorerError::ProtocolViolation(format!("probe {}: {detail}", probe.id))
    };
    for word in result.probabilities.keys().chain(&result.excluded) {
        if !requested.contains(word.as_str()) {
            return Err(violation(format!("candidate {word:?} was not requested")));
        }
    }
    let mut excluded = result.excluded;
    excluded.sort();
    excluded.dedup();
    if let Some(w) = excluded.iter().find(|w| result.probabilities.contains_key(*w)) {
        return Err(violation(format!("candidate {w:?} both scored and excluded")));
    }
    if result.probabilities.len() + excluded.len() != requested.len() {
        return Err(violation("some candidates were neither scored nor excluded".into()));
    }
    if result.probabilities.is_empty() {
        return Err(ScorerError::AllCandidatesExcluded(probe.id.clone()));
    }
    for (word, &p) in &result.probabilities {
        if !p.is_finite() || p < 0.0 {
            return Err(violation(format!("probability {p} for {word:?}")));
        }
        if normalization == Normalization::Raw && p > 1.0 {
            return Err(violation(format!("raw probability {p} for {word:?} exceeds 1")));
        }
    }

    let probabilities = match normalization {
        Normalization::Raw => result.probabilities,
        Normalization::Candidates => {
            let total: NeumaierSum = result.probabilities.values().sum();
            let total = total.sum();
            if !(total > 0.0) || !total.is_finite() {
                return Err(violation(format!("probability mass {total} cannot be renormalized")));
            }
            result
                .probabilities
                .into_iter()
                .map(|(w, p)| (w, (p / total).min(1.0)))
                .collect()
        }
    };
    Ok(MaskDistribution {
        probe_id: probe.id.clone(),
        probabilities,
        excluded,
    })
}

/// Outcome of the `great`/`terrible` cloze classifier on one probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentPrediction {
    pub label: GoldLabel,
    pub p_great: f64,
    pub p_terrible: f64,
}

impl SentimentPrediction {
    /// Ties go to `Negative`.
    pub fn from_probabilities(p_great: f64, p_terrible: f64) -> Self {
        let label = if p_great > p_terrible {
            GoldLabel::Positive
        } else {
            GoldLabel::Negative
        };
        Self {
            label,
            p_great,
            p_terrible,
        }
    }
}

pub fn classify_sentiment<B: ScorerBackend + ?Sized>(
    backend: &B,
    probe: &Probe,
) -> Result<SentimentPrediction, ScorerError> {
    let mut out = classify_batch(backend, std::slice::from_ref(probe))?;
    Ok(out.pop().expect("one prediction per probe"))
}

/// Classifies each probe by comparing the mask probabilities of the two verbalizers.
pub fn classify_batch<B: ScorerBackend + ?Sized>(
    backend: &B,
    probes: &[Probe],
) -> Result<Vec<SentimentPrediction>, ScorerError> {
    let candidates = [POSITIVE_VERBALIZER.to_string(), NEGATIVE_VERBALIZER.to_string()];
    let dists = mask_probabilities(backend, probes, &candidates)?;
    dists
        .into_iter()
        .map(|d| {
            let get = |word: &str| {
                d.get(word).ok_or_else(|| ScorerError::VerbalizerExcluded {
                    probe_id: d.probe_id.clone(),
                    word: word.to_string(),
                })
            };
            Ok(SentimentPrediction::from_probabilities(
                get(POSITIVE_VERBALIZER)?,
                get(NEGATIVE_VERBALIZER)?,
            ))
        })
        .collect()
}
