//! Shift test: append a word `K` times to every review and watch the
//! `great`/`terrible` classifier's accuracy move on each gold class.
//!
//! For a sweep of `K` values the score is
//! `q = (1/n) * sum_K (neg_diff_K - pos_diff_K) / K^2`, where a diff is the
//! accuracy before appending minus the accuracy after. A word that lowers
//! accuracy on negative reviews (pushes them positive) gets `q > 0`.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{GoldLabel, Review};
use crate::scorer::{build_probe, classify_batch, Probe, ProbeTemplate, ScorerBackend, ScorerError};
use crate::Direction;

pub const DEFAULT_KS: [usize; 3] = [5, 10, 15];
pub const DEFAULT_Q_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SstError {
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("no {} reviews", .0.as_str())]
    EmptyClass(GoldLabel),
    #[error("append count must be at least 1")]
    ZeroK,
    #[error("K = {0} appears more than once")]
    DuplicateK(usize),
    #[error("no shift records to score")]
    NoRecords,
    #[error("records mix words {0:?} and {1:?}")]
    MixedWords(String, String),
}

/// Unit in which accuracies (and therefore diffs and `q`) are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreUnit {
    /// Percentage points in `[0, 100]`.
    #[default]
    Percent,
    /// Fraction in `[0, 1]`.
    Fraction,
    /// Number of correctly classified reviews.
    RawCount,
}

impl ScoreUnit {
    pub fn accuracy(self, correct: usize, total: usize) -> f64 {
        match self {
            ScoreUnit::Percent => 100.0 * correct as f64 / total as f64,
            ScoreUnit::Fraction => correct as f64 / total as f64,
            ScoreUnit::RawCount => correct as f64,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreUnit::Percent => "percent",
            ScoreUnit::Fraction => "fraction",
            ScoreUnit::RawCount => "raw_count",
        }
    }
}

impl std::str::FromStr for ScoreUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "percent" => Ok(ScoreUnit::Percent),
            "fraction" => Ok(ScoreUnit::Fraction),
            "raw_count" => Ok(ScoreUnit::RawCount),
            other => Err(format!("unknown score unit {other:?}")),
        }
    }
}

/// Classifier accuracy on the unmodified reviews. Computed once per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Baseline {
    pub pos_correct: usize,
    pub pos_total: usize,
    pub neg_correct: usize,
    pub neg_total: usize,
    pub unit: ScoreUnit,
}

impl Baseline {
    pub fn acc_pos(&self) -> f64 {
        self.unit.accuracy(self.pos_correct, self.pos_total)
    }

    pub fn acc_neg(&self) -> f64 {
        self.unit.accuracy(self.neg_correct, self.neg_total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftRecord {
    pub word: String,
    pub k: usize,
    pub acc_pos_base: f64,
    pub acc_pos_after: f64,
    pub acc_neg_base: f64,
    pub acc_neg_after: f64,
    pub pos_diff: f64,
    pub neg_diff: f64,
}

impl ShiftRecord {
    /// Builds a record from correct-classification counts after appending.
    pub fn from_counts(word: &str, k: usize, baseline: &Baseline, pos_correct: usize, neg_correct: usize) -> Self {
        let acc_pos_base = baseline.acc_pos();
        let acc_neg_base = baseline.acc_neg();
        let acc_pos_after = baseline.unit.accuracy(pos_correct, baseline.pos_total);
        let acc_neg_after = baseline.unit.accuracy(neg_correct, baseline.neg_total);
        Self {
            word: word.to_string(),
            k,
            acc_pos_base,
            acc_pos_after,
            acc_neg_base,
            acc_neg_after,
            pos_diff: acc_pos_base - acc_pos_after,
            neg_diff: acc_neg_base - acc_neg_after,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftLabel {
    PositiveBiased,
    NegativeBiased,
    TrulyNeutral,
    Indeterminate,
}

impl ShiftLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ShiftLabel::PositiveBiased => "positive_biased",
            ShiftLabel::NegativeBiased => "negative_biased",
            ShiftLabel::TrulyNeutral => "truly_neutral",
            ShiftLabel::Indeterminate => "indeterminate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            ShiftLabel::PositiveBiased,
            ShiftLabel::NegativeBiased,
            ShiftLabel::TrulyNeutral,
            ShiftLabel::Indeterminate,
        ]
        .into_iter()
        .find(|l| l.as_str() == s)
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            ShiftLabel::PositiveBiased => Some(Direction::PositiveBiased),
            ShiftLabel::NegativeBiased => Some(Direction::NegativeBiased),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftScore {
    pub word: String,
    pub ks: Vec<usize>,
    pub q: f64,
    pub n: usize,
    pub label: ShiftLabel,
}

fn validate_reviews(reviews: &[&Review], label: GoldLabel) -> Result<(), SstError> {
    if reviews.is_empty() {
        Err(SstError::EmptyClass(label))
    } else {
        Ok(())
    }
}

/// Number of reviews the classifier gets right, optionally after appending
/// `count` copies of a word to each.
pub fn correct_count<B: ScorerBackend + ?Sized>(
    backend: &B,
    reviews: &[&Review],
    appended: Option<(&str, usize)>,
    template: &ProbeTemplate,
) -> Result<usize, ScorerError> {
    let probes: Vec<Probe> = reviews
        .iter()
        .map(|r| {
            let id = match appended {
                Some((w, k)) => format!("{}+{w}x{k}", r.id),
                None => r.id.clone(),
            };
            Probe::new(id, build_probe(&r.text, appended, template))
        })
        .collect();
    let predictions = classify_batch(backend, &probes)?;
    Ok(reviews
        .iter()
        .zip(&predictions)
        .filter(|(r, p)| p.label == r.gold_label)
        .count())
}

/// Splits reviews by gold label, preserving order.
pub fn split_by_label(reviews: &[Review]) -> (Vec<&Review>, Vec<&Review>) {
    reviews.iter().partition(|r| r.gold_label == GoldLabel::Positive)
}

pub fn baseline_accuracy<B: ScorerBackend + ?Sized>(
    backend: &B,
    reviews: &[Review],
    template: &ProbeTemplate,
    unit: ScoreUnit,
) -> Result<Baseline, SstError> {
    let (pos, neg) = split_by_label(reviews);
    validate_reviews(&pos, GoldLabel::Positive)?;
    validate_reviews(&neg, GoldLabel::Negative)?;
    Ok(Baseline {
        pos_correct: correct_count(backend, &pos, None, template)?,
        pos_total: pos.len(),
        neg_correct: correct_count(backend, &neg, None, template)?,
        neg_total: neg.len(),
        unit,
    })
}

/// Appends `word` `k` times to every review and compares against `baseline`.
pub fn shift_once<B: ScorerBackend + ?Sized>(
    backend: &B,
    reviews_pos: &[&Review],
    reviews_neg: &[&Review],
    word: &str,
    k: usize,
    template: &ProbeTemplate,
    baseline: &Baseline,
) -> Result<ShiftRecord, SstError> {
    if k == 0 {
        return Err(SstError::ZeroK);
    }
    validate_reviews(reviews_pos, GoldLabel::Positive)?;
    validate_reviews(reviews_neg, GoldLabel::Negative)?;
    let pos_correct = correct_count(backend, reviews_pos, Some((word, k)), template)?;
    let neg_correct = correct_count(backend, reviews_neg, Some((word, k)), template)?;
    Ok(ShiftRecord::from_counts(word, k, baseline, pos_correct, neg_correct))
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Folds one word's records into `q` and a label.
///
/// A word whose two diffs share a sign at every `K` (both zero included) is
/// `TrulyNeutral` whatever `q` is; otherwise the sign of `q` beyond `q_eps`
/// decides.
pub fn sst_score(records: &[ShiftRecord], q_eps: f64) -> Result<ShiftScore, SstError> {
    let first = records.first().ok_or(SstError::NoRecords)?;
    if let Some(other) = records.iter().find(|r| r.word != first.word) {
        return Err(SstError::MixedWords(first.word.clone(), other.word.clone()));
    }
    let mut seen = HashSet::new();
    for r in records {
        if r.k == 0 {
            return Err(SstError::ZeroK);
        }
        if !seen.insert(r.k) {
            return Err(SstError::DuplicateK(r.k));
        }
    }
    let mut sorted: Vec<&ShiftRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.k);

    let n = sorted.len();
    let mut total = 0.0;
    for r in &sorted {
        total += (r.neg_diff - r.pos_diff) / (r.k * r.k) as f64;
    }
    let q = total / n as f64;

    let label = if sorted.iter().all(|r| sign(r.neg_diff) == sign(r.pos_diff)) {
        ShiftLabel::TrulyNeutral
    } else if q > q_eps {
        ShiftLabel::PositiveBiased
    } else if q < -q_eps {
        ShiftLabel::NegativeBiased
    } else {
        ShiftLabel::Indeterminate
    };
    Ok(ShiftScore {
        word: first.word.clone(),
        ks: sorted.iter().map(|r| r.k).collect(),
        q,
        n,
        label,
    })
}

/// Scores sorted for the positive, negative and truly-neutral tables.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SstRanking {
    /// `PositiveBiased` words, highest `q` first.
    pub positive: Vec<ShiftScore>,
    /// `NegativeBiased` words, lowest `q` first.
    pub negative: Vec<ShiftScore>,
    /// `TrulyNeutral` words, smallest `|q|` first.
    pub truly_neutral: Vec<ShiftScore>,
}

impl SstRanking {
    pub fn direction(&self, direction: Direction) -> &[ShiftScore] {
        match direction {
            Direction::PositiveBiased => &self.positive,
            Direction::NegativeBiased => &self.negative,
        }
    }
}

pub fn sst_rank(scores: &[ShiftScore]) -> SstRanking {
    let pick = |label| scores.iter().filter(|s| s.label == label).cloned().collect::<Vec<_>>();
    let mut positive = pick(ShiftLabel::PositiveBiased);
    positive.sort_by(|a, b| b.q.total_cmp(&a.q).then_with(|| a.word.cmp(&b.word)));
    let mut negative = pick(ShiftLabel::NegativeBiased);
    negative.sort_by(|a, b| a.q.total_cmp(&b.q).then_with(|| a.word.cmp(&b.word)));
    let mut truly_neutral = pick(ShiftLabel::TrulyNeutral);
    truly_neutral.sort_by(|a, b| a.q.abs().total_cmp(&b.q.abs()).then_with(|| a.word.cmp(&b.word)));
    SstRanking {
        positive,
        negative,
        truly_neutral,
    }
}

/// Single-`K` view of a sweep, one row of the per-`K` table.
#[derive(Debug, Clone, PartialEq)]
pub struct KSummary {
    pub k: usize,
    pub ranking: SstRanking,
    pub words_scored: usize,
    pub positive_pct: f64,
    pub negative_pct: f64,
}

/// Scores each word at every single `K` on its own.
pub fn per_k_summary(records: &[ShiftRecord], q_eps: f64) -> Result<Vec<KSummary>, SstError> {
    let mut by_k: BTreeMap<usize, Vec<ShiftScore>> = BTreeMap::new();
    for r in records {
        by_k.entry(r.k)
            .or_default()
            .push(sst_score(std::slice::from_ref(r), q_eps)?);
    }
    Ok(by_k
        .into_iter()
        .map(|(k, scores)| {
            let ranking = sst_rank(&scores);
            let n = scores.len();
            let pct = |c: usize| 100.0 * c as f64 / n as f64;
            KSummary {
                k,
                positive_pct: pct(ranking.positive.len()),
                negative_pct: pct(ranking.negative.len()),
                words_scored: n,
                ranking,
            }
        })
        .collect())
}

/// Groups records by word (first-appearance order) and scores each word.
pub fn score_all(records: &[ShiftRecord], q_eps: f64) -> Result<Vec<ShiftScore>, SstError> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<ShiftRecord>> = BTreeMap::new();
    for r in records {
        let g = groups.entry(r.word.as_str()).or_default();
        if g.is_empty() {
            order.push(r.word.as_str());
        }
        g.push(r.clone());
    }
    order.into_iter().map(|w| sst_score(&groups[w], q_eps)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::ToyBackend;
    use proptest::prelude::*;

    fn record(word: &str, k: usize, pos_diff: f64, neg_diff: f64) -> ShiftRecord {
        ShiftRecord {
            word: word.into(),
            k,
            acc_pos_base: 100.0,
            acc_pos_after: 100.0 - pos_diff,
            acc_neg_base: 100.0,
            acc_neg_after: 100.0 - neg_diff,
            pos_diff,
            neg_diff,
        }
    }

    fn review(id: &str, text: &str, label: GoldLabel) -> Review {
        Review {
            id: id.into(),
            text: text.into(),
            gold_label: label,
            source: "test".into(),
        }
    }

    fn toy(pairs: &[(&str, f64)]) -> ToyBackend {
        let mut cues: BTreeMap<String, f64> =
            [("great", 1.0), ("terrible", -1.0)].iter().map(|(w, v)| (w.to_string(), *v)).collect();
        cues.extend(pairs.iter().map(|(w, v)| (w.to_string(), *v)));
        ToyBackend::new(cues, 10.0).unwrap()
    }

    #[test]
    fn zero_diffs_truly_neutral() {
        let s = sst_score(&[record("w", 5, 0.0, 0.0), record("w", 10, 0.0, 0.0)], DEFAULT_Q_EPS).unwrap();
        assert_eq!(s.q, 0.0);
        assert_eq!(s.label, ShiftLabel::TrulyNeutral);
    }

    #[test]
    fn single_k_negative() {
        let s = sst_score(&[record("w", 5, 50.0, 0.0)], DEFAULT_Q_EPS).unwrap();
        assert_eq!(s.q, -2.0);
        assert_eq!(s.label, ShiftLabel::NegativeBiased);
        assert_eq!((s.n, s.ks.clone()), (1, vec![5]));
    }

    #[test]
    fn two_k_positive() {
        // (neg - pos) = 25 at K=5, 100 at K=10
        let s = sst_score(&[record("w", 10, -50.0, 50.0), record("w", 5, 0.0, 25.0)], DEFAULT_Q_EPS).unwrap();
        assert_eq!(s.q, 1.0);
        assert_eq!(s.label, ShiftLabel::PositiveBiased);
        assert_eq!(s.ks, [5, 10]);
    }

    #[test]
    fn score_errors() {
        assert!(matches!(
            sst_score(&[record("w", 5, 0.0, 0.0), record("w", 5, 1.0, 0.0)], 0.0),
            Err(SstError::DuplicateK(5))
        ));
        assert!(matches!(sst_score(&[], 0.0), Err(SstError::NoRecords)));
        assert!(matches!(
            sst_score(&[record("a", 5, 0.0, 0.0), record("b", 10, 0.0, 0.0)], 0.0),
            Err(SstError::MixedWords(..))
        ));
    }

    #[test]
    fn indeterminate_inside_eps() {
        let s = sst_score(&[record("w", 5, 1e-12, 0.0)], 1e-9).unwrap();
        assert_eq!(s.label, ShiftLabel::Indeterminate);
    }

    #[test]
    fn ranking_order() {
        let mk = |w: &str, q: f64, label| ShiftScore { word: w.into(), ks: vec![5], q, n: 1, label };
        let r = sst_rank(&[
            mk("a", 2.0, ShiftLabel::PositiveBiased),
            mk("b", -3.0, ShiftLabel::NegativeBiased),
            mk("c", 0.0, ShiftLabel::TrulyNeutral),
            mk("d", 2.0, ShiftLabel::PositiveBiased),
            mk("e", -1.0, ShiftLabel::NegativeBiased),
        ]);
        let words = |v: &[ShiftScore]| v.iter().map(|s| s.word.clone()).collect::<Vec<_>>();
        assert_eq!(words(&r.positive), ["a", "d"]);
        assert_eq!(words(&r.negative), ["b", "e"]);
        assert_eq!(words(&r.truly_neutral), ["c"]);
    }

    #[test]
    fn baseline_counts() {
        let backend = toy(&[("good", 1.0), ("bad", -1.0)]);
        let reviews = [
            review("p1", "good", GoldLabel::Positive),
            review("p2", "good good", GoldLabel::Positive),
            review("p3", "good stuff", GoldLabel::Positive),
            review("p4", "meh", GoldLabel::Positive),
            review("n1", "bad", GoldLabel::Negative),
            review("n2", "bad bad", GoldLabel::Negative),
        ];
        let t = ProbeTemplate::default();
        let b = baseline_accuracy(&backend, &reviews, &t, ScoreUnit::Percent).unwrap();
        assert_eq!((b.acc_pos(), b.acc_neg()), (75.0, 100.0));
        let all_right = baseline_accuracy(&backend, &reviews[..3].iter().chain(&reviews[4..]).cloned().collect::<Vec<_>>(), &t, ScoreUnit::Percent).unwrap();
        assert_eq!((all_right.acc_pos(), all_right.acc_neg()), (100.0, 100.0));
        assert!(matches!(
            baseline_accuracy(&backend, &reviews[4..], &t, ScoreUnit::Percent),
            Err(SstError::EmptyClass(GoldLabel::Positive))
        ));
        assert_eq!(ScoreUnit::Fraction.accuracy(3, 4), 0.75);
        assert_eq!(ScoreUnit::RawCount.accuracy(3, 4), 3.0);
    }

    #[test]
    fn shift_flips_exactly_two() {
        // positive cue sums 3, 4, 6, 7 against an appended -1 x 5
        let backend = toy(&[("good", 1.0), ("bad", -1.0), ("deadly", -1.0)]);
        let reviews = [
            review("p1", "good good good", GoldLabel::Positive),
            review("p2", "good good good good", GoldLabel::Positive),
            review("p3", "good good good good good good", GoldLabel::Positive),
            review("p4", "good good good good good good good", GoldLabel::Positive),
            review("n1", "bad", GoldLabel::Negative),
            review("n2", "bad bad", GoldLabel::Negative),
            review("n3", "bad bad bad", GoldLabel::Negative),
            review("n4", "bad", GoldLabel::Negative),
        ];
        let t = ProbeTemplate::default();
        let b = baseline_accuracy(&backend, &reviews, &t, ScoreUnit::Percent).unwrap();
        assert_eq!((b.acc_pos(), b.acc_neg()), (100.0, 100.0));
        let (pos, neg) = split_by_label(&reviews);
        let r = shift_once(&backend, &pos, &neg, "deadly", 5, &t, &b).unwrap();
        assert_eq!((r.pos_diff, r.neg_diff), (50.0, 0.0));

        let neutral = shift_once(&backend, &pos, &neg, "quarter", 5, &t, &b).unwrap();
        assert_eq!((neutral.pos_diff, neutral.neg_diff), (0.0, 0.0));
        assert_eq!(neutral.acc_pos_after, neutral.acc_pos_base);

        let once = shift_once(&backend, &pos, &neg, "deadly", 1, &t, &b).unwrap();
        assert!(once.pos_diff >= 0.0);
        assert!(matches!(
            shift_once(&backend, &pos, &neg, "deadly", 0, &t, &b),
            Err(SstError::ZeroK)
        ));
    }

    #[test]
    fn per_k_table() {
        let recs = [
            record("a", 5, 0.0, 10.0),
            record("a", 10, 0.0, 0.0),
            record("b", 5, 10.0, 0.0),
            record("b", 10, 10.0, 0.0),
        ];
        let rows = per_k_summary(&recs, DEFAULT_Q_EPS).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].k, rows[0].positive_pct, rows[0].negative_pct), (5, 50.0, 50.0));
        assert_eq!((rows[1].positive_pct, rows[1].negative_pct), (0.0, 50.0));
        let scores = score_all(&recs, DEFAULT_Q_EPS).unwrap();
        assert_eq!(scores.iter().map(|s| s.word.as_str()).collect::<Vec<_>>(), ["a", "b"]);
    }

    fn arb_records() -> impl Strategy<Value = Vec<ShiftRecord>> {
        proptest::collection::btree_map(1usize..30, (-100i32..=100, -100i32..=100), 1..6).prop_map(|m| {
            m.into_iter()
                .map(|(k, (p, n))| record("w", k, p as f64 * 0.5, n as f64 * 0.5))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn sweep_is_mean_of_single_k(records in arb_records()) {
            let sweep = sst_score(&records, DEFAULT_Q_EPS).unwrap();
            let singles: Vec<f64> = records
                .iter()
                .map(|r| sst_score(std::slice::from_ref(r), DEFAULT_Q_EPS).unwrap().q)
                .collect();
            let mean = singles.iter().sum::<f64>() / singles.len() as f64;
            prop_assert!((sweep.q - mean).abs() <= 1e-12);
            for (r, q) in records.iter().zip(&singles) {
                prop_assert_eq!(*q, (r.neg_diff - r.pos_diff) / (r.k * r.k) as f64);
            }
        }

        #[test]
        fn same_signs_are_truly_neutral(records in arb_records()) {
            let same = records.iter().all(|r| sign(r.neg_diff) == sign(r.pos_diff));
            let s = sst_score(&records, DEFAULT_Q_EPS).unwrap();
            prop_assert_eq!(same, s.label == ShiftLabel::TrulyNeutral);
        }
    }
}
