//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use sentiprobe_cli::RunConfig;
use sentiprobe_core::scorer::{MaskResult, ScorerBackend, ScorerError};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/toy")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Copies the bundled toy corpus into `dir` and loads its config with
/// output going to `dir/out`.
pub fn toy_config(dir: &Path) -> RunConfig {
    for entry in std::fs::read_dir(fixture_dir()).unwrap() {
        let entry = entry.unwrap();
        if entry.file_type().unwrap().is_file() {
            std::fs::copy(entry.path(), dir.join(entry.file_name())).unwrap();
        }
    }
    let mut cfg = RunConfig::from_file(&dir.join("config.toml")).unwrap();
    cfg.out_dir = dir.join("out");
    cfg
}

/// Every report file in `dir`, by name.
pub fn report_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        out.insert(
            entry.file_name().to_string_lossy().into_owned(),
            std::fs::read(entry.path()).unwrap(),
        );
    }
    out
}

/// Wraps a backend and fails every call after the first `ok_calls`.
pub struct FailingAfter<B> {
    pub inner: B,
    pub ok_calls: usize,
    pub calls: AtomicUsize,
}

impl<B> FailingAfter<B> {
    pub fn new(inner: B, ok_calls: usize) -> Self {
        Self { inner, ok_calls, calls: AtomicUsize::new(0) }
    }
}

impl<B: ScorerBackend> ScorerBackend for FailingAfter<B> {
    fn model_id(&self) -> &str {
        self.inner.model_id()
    }

    fn score(&self, texts: &[String], candidates: &[String]) -> Result<Vec<MaskResult>, ScorerError> {
        if self.calls.fetch_add(1, Ordering::SeqCst) >= self.ok_calls {
            return Err(ScorerError::BackendUnavailable("simulated outage".into()));
        }
        self.inner.score(texts, candidates)
    }
}

/// Brute-force shift-test recomputation for the toy model, written from the
/// definitions without touching the library's scorer or shift-test code.
pub mod oracle {
    use std::collections::BTreeMap;

    pub struct Case {
        pub cues: BTreeMap<String, f64>,
        pub clamp: f64,
        pub positive: Vec<String>,
        pub negative: Vec<String>,
        pub words: Vec<String>,
        pub ks: Vec<usize>,
    }

    pub struct Row {
        pub word: String,
        pub k: usize,
        pub acc_pos_base: f64,
        pub acc_pos_after: f64,
        pub acc_neg_base: f64,
        pub acc_neg_after: f64,
        pub pos_diff: f64,
        pub neg_diff: f64,
    }

    fn cue(c: &Case, token: &str) -> f64 {
        let t = token.trim_matches(|ch: char| !ch.is_alphanumeric());
        c.cues.get(t).copied().unwrap_or(0.0)
    }

    /// true when the model says "positive" for `text` followed by `word` x `k`.
    fn says_positive(c: &Case, text: &str, appended: Option<(&str, usize)>) -> bool {
        let mut raw = 0.0;
        for t in text.split_whitespace() {
            raw += cue(c, t);
        }
        if let Some((w, k)) = appended {
            for _ in 0..k {
                raw += cue(c, w);
            }
        }
        let v = raw.max(-c.clamp).min(c.clamp);
        // softmax over {great, terrible} is monotone in the logits
        cue(c, "great") * v > cue(c, "terrible") * v
    }

    fn pct(correct: usize, total: usize) -> f64 {
        100.0 * correct as f64 / total as f64
    }

    fn accuracy(c: &Case, appended: Option<(&str, usize)>) -> (f64, f64) {
        let pos = c.positive.iter().filter(|t| says_positive(c, t, appended)).count();
        let neg = c.negative.iter().filter(|t| !says_positive(c, t, appended)).count();
        (pct(pos, c.positive.len()), pct(neg, c.negative.len()))
    }

    pub fn rows(c: &Case) -> Vec<Row> {
        let (pos_base, neg_base) = accuracy(c, None);
        let mut out = Vec::new();
        for w in &c.words {
            for &k in &c.ks {
                let (pos_after, neg_after) = accuracy(c, Some((w, k)));
                out.push(Row {
                    word: w.clone(),
                    k,
                    acc_pos_base: pos_base,
                    acc_pos_after: pos_after,
                    acc_neg_base: neg_base,
                    acc_neg_after: neg_after,
                    pos_diff: pos_base - pos_after,
                    neg_diff: neg_base - neg_after,
                });
            }
        }
        out
    }

    /// q for one word's rows, ascending k.
    pub fn q(rows: &[&Row]) -> f64 {
        let mut sorted: Vec<&&Row> = rows.iter().collect();
        sorted.sort_by_key(|r| r.k);
        let mut total = 0.0;
        for r in &sorted {
            total += (r.neg_diff - r.pos_diff) / ((r.k * r.k) as f64);
        }
        total / sorted.len() as f64
    }
}
