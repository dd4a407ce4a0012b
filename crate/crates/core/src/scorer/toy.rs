use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{MaskResult, ProbeTemplate, ScorerBackend, ScorerError, MASK};

pub const DEFAULT_CLAMP: f64 = 3.0;

/// Deterministic stand-in for a masked language model.
///
/// The valence of a probe is the sum of cue values of its whitespace tokens
/// (template text excluded), clamped to `[-clamp, clamp]`. A candidate `c`
/// scores `cue(c) * valence` and probabilities are the softmax of those
/// scores over the requested candidates. Unknown words have cue 0.
#[derive(Debug, Clone)]
pub struct ToyBackend {
    cues: BTreeMap<String, f64>,
    clamp: f64,
    template: ProbeTemplate,
    model_id: String,
}

impl ToyBackend {
    pub fn new(cues: BTreeMap<String, f64>, clamp: f64) -> Result<Self, ScorerError> {
        Self::with_template(cues, clamp, ProbeTemplate::default())
    }

    pub fn with_template(
        cues: BTreeMap<String, f64>,
        clamp: f64,
        template: ProbeTemplate,
    ) -> Result<Self, ScorerError> {
        if !(clamp > 0.0) || !clamp.is_finite() {
            return Err(ScorerError::InvalidConfig(format!("clamp must be positive, got {clamp}")));
        }
        if let Some((w, v)) = cues.iter().find(|(_, v)| !(-1.0..=1.0).contains(*v)) {
            return Err(ScorerError::InvalidConfig(format!("cue {w:?} = {v} outside [-1, 1]")));
        }
        let mut hasher = Sha256::new();
        for (w, v) in &cues {
            hasher.update(format!("{w}\t{v}\n"));
        }
        hasher.update(format!("clamp\t{clamp}\n"));
        let model_id = format!("toy-{}", &hex::encode(hasher.finalize())[..12]);
        Ok(Self {
            cues,
            clamp,
            template,
            model_id,
        })
    }

    pub fn cue(&self, word: &str) -> f64 {
        self.cues.get(word).copied().unwrap_or(0.0)
    }

    pub fn clamp(&self) -> f64 {
        self.clamp
    }

    /// Clamped cue sum over the review part of a probe.
    pub fn valence(&self, probe: &str) -> f64 {
        let body = self.template.strip(probe).unwrap_or(probe);
        let mut v = 0.0;
        for token in body.split_whitespace().filter(|t| !t.contains(MASK)) {
            v += self.cue(normalize_token(token));
        }
        v.clamp(-self.clamp, self.clamp)
    }

    fn distribution(&self, valence: f64, candidates: &[String]) -> BTreeMap<String, f64> {
        let scores: Vec<f64> = candidates.iter().map(|c| self.cue(c) * valence).collect();
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total = crate::summation::sum(&exps);
        candidates
            .iter()
            .cloned()
            .zip(exps.into_iter().map(|e| e / total))
            .collect()
    }
}

/// Strips leading and trailing punctuation from a whitespace token.
pub(crate) fn normalize_token(token: &str) -> &str {
    token.trim_matches(|c: char| !c.is_alphanumeric())
}

impl ScorerBackend for ToyBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn score(&self, texts: &[String], candidates: &[String]) -> Result<Vec<MaskResult>, ScorerError> {
        Ok(texts
            .iter()
            .map(|t| MaskResult {
                probabilities: self.distribution(self.valence(t), candidates),
                excluded: Vec::new(),
            })
            .collect())
    }
}

/// Reads a `word<TAB>valence` cue table; blank lines and `#` comments are skipped.
pub fn load_cue_table(path: &Path) -> Result<BTreeMap<String, f64>, ScorerError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScorerError::InvalidConfig(format!("{}: {e}", path.display())))?;
    let mut cues = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || ScorerError::InvalidConfig(format!("{}:{}: bad cue line", path.display(), idx + 1));
        let (word, value) = line.split_once('\t').ok_or_else(bad)?;
        let value: f64 = value.trim().parse().map_err(|_| bad())?;
        cues.insert(word.trim().to_string(), value);
    }
    Ok(cues)
}
