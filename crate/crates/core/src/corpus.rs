//! Lexicon and review ingestion, and selection of the probe word lists.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cutoff on `|mean_score|` for drawing strongly polar VADER words.
pub const DEFAULT_MIN_ABS_SCORE: f64 = 1.5;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line_no}: malformed line: {detail}")]
    MalformedLine {
        path: PathBuf,
        line_no: usize,
        detail: String,
    },
    #[error("{path}:{line_no}: malformed record: {detail}")]
    MalformedRecord {
        path: PathBuf,
        line_no: usize,
        detail: String,
    },
    #[error("{path}: duplicate review id {id:?}")]
    DuplicateId { path: PathBuf, id: String },
    #[error("{path}: no lexicon entries pass the score threshold")]
    EmptyResult { path: PathBuf },
    #[error("no {0} candidate words to select from")]
    InsufficientWords(Polarity),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
}

impl std::fmt::Display for Polarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconSource {
    Vader,
    Mpqa,
    Custom,
}

/// A lexicon word with its gold polarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub word: String,
    pub polarity: Polarity,
    /// VADER mean rating in `[-4, 4]`; `0.0` for MPQA neutrals.
    pub source_score: f64,
    pub source: LexiconSource,
}

impl LexiconEntry {
    /// Checks the word shape and the sign rule for VADER entries.
    pub fn is_valid(&self) -> bool {
        if self.word.is_empty() || self.word.chars().any(char::is_whitespace) {
            return false;
        }
        if self.source != LexiconSource::Vader {
            return true;
        }
        match self.polarity {
            Polarity::Positive => self.source_score > 0.0,
            Polarity::Negative => self.source_score < 0.0,
            Polarity::Neutral => true,
        }
    }
}

/// Gold binary label of a review.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoldLabel {
    Positive,
    Negative,
}

impl GoldLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            GoldLabel::Positive => "positive",
            GoldLabel::Negative => "negative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub id: String,
    pub text: String,
    pub gold_label: GoldLabel,
    pub source: String,
}

/// Counts reported after loading a review file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadSummary {
    pub positive: usize,
    pub negative: usize,
    pub by_source: BTreeMap<String, usize>,
}

/// Lexicon entries plus the number of duplicate words that were dropped.
#[derive(Debug, Clone)]
pub struct LoadedLexicon {
    pub entries: Vec<LexiconEntry>,
    pub duplicates: usize,
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads strongly polar words from a VADER `token<TAB>mean<TAB>std<TAB>ratings` file.
///
/// Entries with `|mean| < min_abs_score` (and exact zeros) are skipped. Repeated
/// tokens keep their first occurrence.
pub fn load_vader_lexicon(path: &Path, min_abs_score: f64) -> Result<LoadedLexicon, CorpusError> {
    let text = read(path)?;
    let malformed = |line_no, detail: String| CorpusError::MalformedLine {
        path: path.to_path_buf(),
        line_no,
        detail,
    };

    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    let mut duplicates = 0;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let token = fields.next().unwrap_or_default();
        let score = fields
            .next()
            .ok_or_else(|| malformed(line_no, "expected tab-separated token and score".into()))?;
        let score: f64 = score
            .trim()
            .parse()
            .map_err(|e| malformed(line_no, format!("bad mean score {score:?}: {e}")))?;
        if token.is_empty() || token.chars().any(char::is_whitespace) || !score.is_finite() {
            return Err(malformed(line_no, format!("bad token {token:?}")));
        }
        if score == 0.0 || score.abs() < min_abs_score {
            continue;
        }
        if !seen.insert(token.to_string()) {
            duplicates += 1;
            continue;
        }
        entries.push(LexiconEntry {
            word: token.to_string(),
            polarity: if score > 0.0 {
                Polarity::Positive
            } else {
                Polarity::Negative
            },
            source_score: score,
            source: LexiconSource::Vader,
        });
    }
    if duplicates > 0 {
        warn!("{}: {duplicates} duplicate tokens ignored", path.display());
    }
    if entries.is_empty() {
        return Err(CorpusError::EmptyResult {
            path: path.to_path_buf(),
        });
    }
    Ok(LoadedLexicon {
        entries,
        duplicates,
    })
}

/// Loads the `priorpolarity=neutral` records of an MPQA subjectivity-clue file,
/// sorted lexicographically.
pub fn load_mpqa_neutral(path: &Path) -> Result<LoadedLexicon, CorpusError> {
    let text = read(path)?;
    let mut words = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = HashMap::new();
        for pair in line.split_whitespace() {
            let (key, value) = pair.split_once('=').ok_or_else(|| CorpusError::MalformedLine {
                path: path.to_path_buf(),
                line_no,
                detail: format!("expected key=value, found {pair:?}"),
            })?;
            fields.insert(key, value);
        }
        let (Some(word), Some(prior)) = (fields.get("word1"), fields.get("priorpolarity")) else {
            return Err(CorpusError::MalformedLine {
                path: path.to_path_buf(),
                line_no,
                detail: "missing word1 or priorpolarity".into(),
            });
        };
        if *prior == "neutral" && !word.is_empty() {
            words.push(word.to_string());
        }
    }
    words.sort();
    let before = words.len();
    words.dedup();
    let duplicates = before - words.len();
    if duplicates > 0 {
        warn!("{}: {duplicates} duplicate neutral words ignored", path.display());
    }
    Ok(LoadedLexicon {
        entries: words
            .into_iter()
            .map(|word| LexiconEntry {
                word,
                polarity: Polarity::Neutral,
                source_score: 0.0,
                source: LexiconSource::Mpqa,
            })
            .collect(),
        duplicates,
    })
}

#[derive(Deserialize)]
struct ReviewRecord {
    id: String,
    text: String,
    label: String,
    source: String,
}

/// Loads a JSON Lines review file.
pub fn load_reviews(path: &Path) -> Result<(Vec<Review>, LoadSummary), CorpusError> {
    let text = read(path)?;
    let malformed = |line_no, detail: String| CorpusError::MalformedRecord {
        path: path.to_path_buf(),
        line_no,
        detail,
    };

    let mut ids = HashSet::new();
    let mut reviews = Vec::new();
    let mut summary = LoadSummary::default();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: ReviewRecord =
            serde_json::from_str(line).map_err(|e| malformed(line_no, e.to_string()))?;
        let gold_label = match record.label.as_str() {
            "positive" => GoldLabel::Positive,
            "negative" => GoldLabel::Negative,
            other => return Err(malformed(line_no, format!("unknown label {other:?}"))),
        };
        let text = record.text.trim();
        if text.is_empty() {
            return Err(malformed(line_no, "empty text".into()));
        }
        if !ids.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId {
                path: path.to_path_buf(),
                id: record.id,
            });
        }
        match gold_label {
            GoldLabel::Positive => summary.positive += 1,
            GoldLabel::Negative => summary.negative += 1,
        }
        *summary.by_source.entry(record.source.clone()).or_default() += 1;
        reviews.push(Review {
            id: record.id,
            text: text.to_string(),
            gold_label,
            source: record.source,
        });
    }
    Ok((reviews, summary))
}

/// The three word lists probed by both tests.
#[derive(Debug, Clone, PartialEq)]
pub struct WordSelection {
    pub positive_words: Vec<LexiconEntry>,
    pub negative_words: Vec<LexiconEntry>,
    pub neutral_words: Vec<LexiconEntry>,
    pub per_class_count: usize,
    /// Words dropped because they tied across classes.
    pub excluded_ties: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SerializedEntry {
    word: String,
    score: f64,
    source: LexiconSource,
}

#[derive(Debug, Serialize, Deserialize)]
struct SerializedSelection {
    per_class_count: usize,
    positive: Vec<SerializedEntry>,
    negative: Vec<SerializedEntry>,
    neutral: Vec<SerializedEntry>,
}

impl WordSelection {
    /// All selected words: positive, negative, then neutral.
    pub fn all_words(&self) -> Vec<String> {
        self.positive_words
            .iter()
            .chain(&self.negative_words)
            .chain(&self.neutral_words)
            .map(|e| e.word.clone())
            .collect()
    }

    pub fn to_json(&self) -> String {
        let conv = |entries: &[LexiconEntry]| {
            entries
                .iter()
                .map(|e| SerializedEntry {
                    word: e.word.clone(),
                    score: e.source_score,
                    source: e.source,
                })
                .collect()
        };
        let s = SerializedSelection {
            per_class_count: self.per_class_count,
            positive: conv(&self.positive_words),
            negative: conv(&self.negative_words),
            neutral: conv(&self.neutral_words),
        };
        let mut out = serde_json::to_string_pretty(&s).expect("selection serializes");
        out.push('\n');
        out
    }

    pub fn from_json(json: &str) -> serde_json::Result<Self> {
        let s: SerializedSelection = serde_json::from_str(json)?;
        let conv = |entries: Vec<SerializedEntry>, polarity| {
            entries
                .into_iter()
                .map(|e| LexiconEntry {
                    word: e.word,
                    polarity,
                    source_score: e.score,
                    source: e.source,
                })
                .collect()
        };
        Ok(WordSelection {
            positive_words: conv(s.positive, Polarity::Positive),
            negative_words: conv(s.negative, Polarity::Negative),
            neutral_words: conv(s.neutral, Polarity::Neutral),
            per_class_count: s.per_class_count,
            excluded_ties: Vec::new(),
        })
    }
}

/// Resolves cross-class collisions and truncates each class deterministically.
///
/// A word listed under several classes stays in the class where its
/// `|source_score|` is largest; a tie removes it from every class.
pub fn select_words(
    pos: &[LexiconEntry],
    neg: &[LexiconEntry],
    neu: &[LexiconEntry],
    per_class_count: usize,
) -> Result<WordSelection, CorpusError> {
    for (list, class) in [
        (pos, Polarity::Positive),
        (neg, Polarity::Negative),
        (neu, Polarity::Neutral),
    ] {
        if list.is_empty() {
            return Err(CorpusError::InsufficientWords(class));
        }
    }

    // strongest |score| per word across all classes, with the winning class
    let mut best: HashMap<&str, (f64, Option<Polarity>)> = HashMap::new();
    for (list, class) in [
        (pos, Polarity::Positive),
        (neg, Polarity::Negative),
        (neu, Polarity::Neutral),
    ] {
        let mut seen = HashSet::new();
        for entry in list {
            if !seen.insert(entry.word.as_str()) {
                continue;
            }
            let strength = entry.source_score.abs();
            best.entry(entry.word.as_str())
                .and_modify(|(s, owner)| {
                    if strength > *s {
                        *s = strength;
                        *owner = Some(class);
                    } else if strength == *s {
                        *owner = None;
                    }
                })
                .or_insert((strength, Some(class)));
        }
    }

    let mut excluded_ties: Vec<String> = best
        .iter()
        .filter(|(_, (_, owner))| owner.is_none())
        .map(|(w, _)| w.to_string())
        .collect();
    excluded_ties.sort();
    if !excluded_ties.is_empty() {
        warn!(
            "{} words tie across lexicon classes and were excluded",
            excluded_ties.len()
        );
    }

    let keep = |list: &[LexiconEntry], class| -> Vec<LexiconEntry> {
        let mut seen = HashSet::new();
        list.iter()
            .filter(|e| best.get(e.word.as_str()).and_then(|b| b.1) == Some(class))
            .filter(|e| seen.insert(e.word.clone()))
            .cloned()
            .collect()
    };

    let mut positive_words = keep(pos, Polarity::Positive);
    positive_words.sort_by(|a, b| {
        b.source_score
            .total_cmp(&a.source_score)
            .then_with(|| a.word.cmp(&b.word))
    });
    positive_words.truncate(per_class_count);

    let mut negative_words = keep(neg, Polarity::Negative);
    negative_words.sort_by(|a, b| {
        a.source_score
            .total_cmp(&b.source_score)
            .then_with(|| a.word.cmp(&b.word))
    });
    negative_words.truncate(per_class_count);

    let mut neutral_words = keep(neu, Polarity::Neutral);
    neutral_words.sort_by(|a, b| a.word.cmp(&b.word));
    neutral_words.truncate(per_class_count);

    for (list, class) in [
        (&positive_words, Polarity::Positive),
        (&negative_words, Polarity::Negative),
        (&neutral_words, Polarity::Neutral),
    ] {
        if list.is_empty() {
            return Err(CorpusError::InsufficientWords(class));
        }
    }

    Ok(WordSelection {
        positive_words,
        negative_words,
        neutral_words,
        per_class_count,
        excluded_ties,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn entry(word: &str, polarity: Polarity, score: f64) -> LexiconEntry {
        LexiconEntry {
            word: word.into(),
            polarity,
            source_score: score,
            source: LexiconSource::Custom,
        }
    }

    #[test]
    fn vader_single_strong_word() {
        let f = file("good\t1.9\t0.9434\t[2, 1, 1, 3, 2, 4, 2, 2, 1, 1]\n");
        let lex = load_vader_lexicon(f.path(), 1.5).unwrap();
        assert_eq!(lex.entries.len(), 1);
        assert_eq!(lex.entries[0].word, "good");
        assert_eq!(lex.entries[0].polarity, Polarity::Positive);
        assert_eq!(lex.entries[0].source_score, 1.9);
    }

    #[test]
    fn vader_threshold_filter() {
        let f = file("alpha\t2.1\t0.5\t[2]\nbeta\t-3.0\t0.5\t[-3]\ngamma\t0.2\t0.5\t[0]\n");
        let lex = load_vader_lexicon(f.path(), 1.0).unwrap();
        let got: Vec<_> = lex.entries.iter().map(|e| (e.word.as_str(), e.polarity)).collect();
        assert_eq!(
            got,
            [("alpha", Polarity::Positive), ("beta", Polarity::Negative)]
        );
        assert!(lex.entries.iter().all(LexiconEntry::is_valid));
    }

    #[test]
    fn vader_bounded_scores_give_empty_result() {
        let f = file("alpha\t4.0\t0.5\t[4]\nbeta\t-4.0\t0.5\t[-4]\n");
        assert!(matches!(
            load_vader_lexicon(f.path(), 5.0),
            Err(CorpusError::EmptyResult { .. })
        ));
    }

    #[test]
    fn vader_malformed_and_duplicates() {
        let f = file("alpha\t2.1\t0.5\t[2]\nbroken line\n");
        assert!(matches!(
            load_vader_lexicon(f.path(), 1.0),
            Err(CorpusError::MalformedLine { line_no: 2, .. })
        ));
        let f = file("alpha\t2.1\t0.5\t[2]\nalpha\t-2.5\t0.5\t[2]\n");
        let lex = load_vader_lexicon(f.path(), 1.0).unwrap();
        assert_eq!(lex.duplicates, 1);
        assert_eq!(lex.entries[0].source_score, 2.1);
    }

    #[test]
    fn mpqa_keeps_only_neutrals_sorted() {
        let f = file(
            "type=weaksubj len=1 word1=quarter pos1=noun stemmed1=n priorpolarity=neutral\n\
             type=strongsubj len=1 word1=abandon pos1=verb stemmed1=y priorpolarity=negative\n\
             type=weaksubj len=1 word1=amuse pos1=verb stemmed1=y priorpolarity=positive\n\
             type=weaksubj len=1 word1=absolute pos1=adj stemmed1=n priorpolarity=neutral\n\
             type=weaksubj len=1 word1=beautiful pos1=adj stemmed1=n priorpolarity=positive\n",
        );
        let lex = load_mpqa_neutral(f.path()).unwrap();
        let words: Vec<_> = lex.entries.iter().map(|e| e.word.as_str()).collect();
        assert_eq!(words, ["absolute", "quarter"]);
        assert!(lex
            .entries
            .iter()
            .all(|e| e.polarity == Polarity::Neutral && e.source_score == 0.0));
    }

    #[test]
    fn mpqa_malformed() {
        let f = file("type=weaksubj len=1 word1=x priorpolarity=neutral\ngarbage\n");
        assert!(matches!(
            load_mpqa_neutral(f.path()),
            Err(CorpusError::MalformedLine { line_no: 2, .. })
        ));
    }

    #[test]
    fn reviews_load_and_summarize() {
        let f = file(
            r#"{"id":"a1","text":"Great film.","label":"positive","source":"imdb"}
{"id":"a2","text":" Loved it ","label":"positive","source":"yelp","extra":1}
{"id":"b1","text":"Awful.","label":"negative","source":"imdb"}
{"id":"b2","text":"Bad food.","label":"negative","source":"yelp"}
"#,
        );
        let (reviews, summary) = load_reviews(f.path()).unwrap();
        assert_eq!(reviews[0].gold_label, GoldLabel::Positive);
        assert_eq!(reviews[1].text, "Loved it");
        assert_eq!((summary.positive, summary.negative), (2, 2));
        assert_eq!(summary.by_source["imdb"], 2);
    }

    #[test]
    fn reviews_schema_errors() {
        let f = file(r#"{"id":"a1","text":"Great film.","source":"imdb"}"#);
        assert!(matches!(
            load_reviews(f.path()),
            Err(CorpusError::MalformedRecord { line_no: 1, .. })
        ));
        let f = file(
            r#"{"id":"a1","text":"x","label":"positive","source":"imdb"}
{"id":"a1","text":"y","label":"negative","source":"imdb"}"#,
        );
        assert!(matches!(
            load_reviews(f.path()),
            Err(CorpusError::DuplicateId { .. })
        ));
        let f = file(r#"{"id":"a1","text":"   ","label":"positive","source":"imdb"}"#);
        assert!(load_reviews(f.path()).is_err());
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_reviews(Path::new("/nonexistent/reviews.jsonl")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/reviews.jsonl"));
    }

    #[test]
    fn select_truncates_by_score() {
        let pos = [
            entry("one", Polarity::Positive, 1.0),
            entry("three", Polarity::Positive, 3.0),
            entry("two", Polarity::Positive, 2.0),
        ];
        let neg = [entry("bad", Polarity::Negative, -2.0)];
        let neu = [entry("zeta", Polarity::Neutral, 0.0), entry("alpha", Polarity::Neutral, 0.0)];
        let sel = select_words(&pos, &neg, &neu, 2).unwrap();
        let words: Vec<_> = sel.positive_words.iter().map(|e| e.word.as_str()).collect();
        assert_eq!(words, ["three", "two"]);

        let whole = select_words(&pos, &neg, &neu, 100).unwrap();
        assert_eq!(whole.positive_words.len(), 3);
        let neutral: Vec<_> = whole.neutral_words.iter().map(|e| e.word.as_str()).collect();
        assert_eq!(neutral, ["alpha", "zeta"]);
    }

    #[test]
    fn select_collision_goes_to_strongest() {
        let pos = [entry("plain", Polarity::Positive, 1.2), entry("nice", Polarity::Positive, 2.0)];
        let neg = [entry("nice", Polarity::Negative, -2.0), entry("bad", Polarity::Negative, -2.0)];
        let neu = [entry("plain", Polarity::Neutral, 0.0), entry("box", Polarity::Neutral, 0.0)];
        let sel = select_words(&pos, &neg, &neu, 10).unwrap();
        let words = |l: &[LexiconEntry]| l.iter().map(|e| e.word.clone()).collect::<Vec<_>>();
        assert_eq!(words(&sel.positive_words), ["plain"]);
        assert_eq!(words(&sel.negative_words), ["bad"]);
        assert_eq!(words(&sel.neutral_words), ["box"]);
        assert_eq!(sel.excluded_ties, ["nice"]);
    }

    #[test]
    fn select_requires_each_class() {
        let pos = [entry("a", Polarity::Positive, 1.0)];
        let neu = [entry("b", Polarity::Neutral, 0.0)];
        assert!(matches!(
            select_words(&pos, &[], &neu, 3),
            Err(CorpusError::InsufficientWords(Polarity::Negative))
        ));
    }

    #[test]
    fn selection_json_roundtrip() {
        let pos = [entry("good", Polarity::Positive, 1.9)];
        let neg = [entry("bad", Polarity::Negative, -2.5)];
        let neu = [entry("box", Polarity::Neutral, 0.0)];
        let sel = select_words(&pos, &neg, &neu, 10).unwrap();
        let json = sel.to_json();
        assert!(json.contains("\"positive\""));
        let back = WordSelection::from_json(&json).unwrap();
        assert_eq!(back.to_json(), json);
    }

    fn arb_entries(polarity: Polarity) -> impl Strategy<Value = Vec<LexiconEntry>> {
        let sign = match polarity {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
            Polarity::Neutral => 0.0,
        };
        proptest::collection::vec(("[a-f]{1,2}", 1u8..8), 1..20).prop_map(move |v| {
            v.into_iter()
                .map(|(w, s)| entry(&w, polarity, sign * s as f64 * 0.5))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn selection_classes_disjoint(
            pos in arb_entries(Polarity::Positive),
            neg in arb_entries(Polarity::Negative),
            neu in arb_entries(Polarity::Neutral),
            n in 1usize..10,
        ) {
            if let Ok(sel) = select_words(&pos, &neg, &neu, n) {
                let mut all = HashSet::new();
                for e in sel.positive_words.iter().chain(&sel.negative_words).chain(&sel.neutral_words) {
                    prop_assert!(all.insert(e.word.clone()), "{} appears twice", e.word);
                    prop_assert!(e.is_valid());
                }
                prop_assert!(sel.positive_words.len() <= n);
                prop_assert!(sel.negative_words.windows(2).all(|w| w[0].source_score <= w[1].source_score));
                // deterministic
                let again = select_words(&pos, &neg, &neu, n).unwrap();
                prop_assert_eq!(again.to_json(), sel.to_json());
            }
        }
    }
}
