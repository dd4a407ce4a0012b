//! Report rendering and the run manifest.
//!
//! Every renderer is a pure function of its inputs so that identical runs
//! produce byte-identical files. Floats in CSV files use the shortest
//! round-trip representation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{CrossResults, PmfDifference, RunInfo, SstResults};
use crate::sat::SatSweep;
use crate::sst::{per_k_summary, sst_rank, ScoreUnit, ShiftLabel, ShiftRecord, ShiftScore, SstError};
use crate::Direction;

pub const SELECTION_JSON: &str = "selection.json";
pub const CORPUS_SUMMARY_JSON: &str = "corpus_summary.json";
pub const SAT_STATS_CSV: &str = "sat_stats.csv";
pub const SAT_SUMMARY_JSON: &str = "sat_summary.json";
pub const SAT_TABLE_TXT: &str = "sat_table.txt";
pub const PMF_DIFF_CSV: &str = "pmf_diff.csv";
pub const PMF_PLOT_CSV: &str = "pmf_plot.csv";
pub const PMF_SUMMARY_JSON: &str = "pmf_summary.json";
pub const SST_RECORDS_CSV: &str = "sst_records.csv";
pub const SST_SCORES_CSV: &str = "sst_scores.csv";
pub const SST_SUMMARY_JSON: &str = "sst_summary.json";
pub const SST_TABLE_TXT: &str = "sst_table.txt";
pub const SST_TOP_TXT: &str = "sst_top.txt";
pub const OVERLAP_JSON: &str = "overlap.json";
pub const AGREEMENT_JSON: &str = "agreement.json";
pub const MANIFEST_JSON: &str = "manifest.json";

pub const PMF_X_ORDER: &str = "gold_label (positive, negative), then review id";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid manifest: {detail}")]
    BadManifest { path: PathBuf, detail: String },
    #[error("missing prerequisite report {0}")]
    MissingPrerequisite(String),
    #[error("report {0} changed since it was recorded in the manifest")]
    Stale(String),
    #[error("rendering failed: {0}")]
    Render(String),
}

impl ReportError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ReportError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StageEntry {
    pub settings: BTreeMap<String, Value>,
    pub files: Vec<String>,
}

/// `manifest.json`: what was run, on what, and the digest of every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub tool_version: String,
    pub run: Option<RunInfo>,
    pub normalized: Option<bool>,
    pub pmf_x_order: String,
    pub stages: BTreeMap<String, StageEntry>,
    pub files: BTreeMap<String, FileDigest>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            tool: "sentiprobe".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            run: None,
            normalized: None,
            pmf_x_order: PMF_X_ORDER.into(),
            stages: BTreeMap::new(),
            files: BTreeMap::new(),
        }
    }
}

impl Manifest {
    pub fn load(out_dir: &Path) -> Result<Option<Self>, ReportError> {
        let path = out_dir.join(MANIFEST_JSON);
        match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| ReportError::BadManifest {
                    path,
                    detail: e.to_string(),
                }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(ReportError::io(&path, e)),
        }
    }

    pub fn load_or_default(out_dir: &Path) -> Result<Self, ReportError> {
        Ok(Self::load(out_dir)?.unwrap_or_default())
    }

    pub fn save(&self, out_dir: &Path) -> Result<(), ReportError> {
        let path = out_dir.join(MANIFEST_JSON);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| ReportError::io(&path, e))
    }

    pub fn record_file(&mut self, name: &str, contents: &[u8]) {
        self.files.insert(
            name.to_string(),
            FileDigest {
                sha256: sha256_hex(contents),
                bytes: contents.len(),
            },
        );
    }

    pub fn record_run(&mut self, run: &RunInfo) {
        self.normalized = Some(run.normalization.is_normalized());
        self.run = Some(run.clone());
    }

    pub fn record_stage(&mut self, stage: &str, settings: BTreeMap<String, Value>, files: Vec<String>) {
        self.stages.insert(stage.to_string(), StageEntry { settings, files });
    }

    /// Reads a report listed in the manifest, checking its digest.
    pub fn read_verified(&self, out_dir: &Path, name: &str) -> Result<String, ReportError> {
        let digest = self
            .files
            .get(name)
            .ok_or_else(|| ReportError::MissingPrerequisite(name.to_string()))?;
        let path = out_dir.join(name);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ReportError::MissingPrerequisite(name.to_string()))
            }
            Err(e) => return Err(ReportError::io(&path, e)),
        };
        if sha256_hex(&bytes) != digest.sha256 {
            return Err(ReportError::Stale(name.to_string()));
        }
        String::from_utf8(bytes).map_err(|e| ReportError::BadManifest {
            path,
            detail: e.to_string(),
        })
    }
}

pub fn pretty_json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s
}

/// Shortest round-trip float text.
fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Two decimals with trailing zeros trimmed, keeping one: `17.0`, `0.75`.
pub fn fmt_pct(x: f64) -> String {
    let s = format!("{x:.2}");
    let trimmed = s.trim_end_matches('0');
    if trimmed.ends_with('.') {
        format!("{trimmed}0")
    } else {
        trimmed.to_string()
    }
}

/// Threshold label such as `0.5*Standard Deviation`.
pub fn threshold_label(m: f64) -> String {
    format!("{m}*Standard Deviation")
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).map_err(|e| ReportError::Render(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| ReportError::Render(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ReportError::Render(e.to_string()))
}

/// Left-aligned text table, columns separated by two spaces.
pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let mut s = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            s.push_str(cell);
            let pad = widths[i] - cell.chars().count();
            s.extend(std::iter::repeat_n(' ', pad));
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(headers.to_vec(), &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(rule.iter().map(String::as_str).collect(), &mut out);
    for row in rows {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

fn word_list<'a>(words: impl Iterator<Item = &'a str>) -> String {
    let v: Vec<&str> = words.collect();
    if v.is_empty() {
        "-".into()
    } else {
        v.join(", ")
    }
}

pub fn sat_csv(sweep: &SatSweep) -> Result<String, ReportError> {
    csv_string(|w| {
        let mut header = vec![
            "word".to_string(),
            "mean_pos".into(),
            "mean_neg".into(),
            "std_pos".into(),
            "std_neg".into(),
        ];
        header.extend(sweep.thresholds.iter().map(|m| format!("verdict@{m}")));
        w.write_record(&header)?;
        for row in &sweep.rows {
            let s = &row.stats;
            let mut rec = vec![s.word.clone(), num(s.mean_pos), num(s.mean_neg), num(s.std_pos), num(s.std_neg)];
            rec.extend(row.labels.iter().map(|l| l.as_str().to_string()));
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

pub fn sat_summary_json(sweep: &SatSweep, dropped: &[String], run: &RunInfo) -> String {
    let thresholds: serde_json::Map<String, Value> = sweep
        .summary
        .iter()
        .map(|t| {
            (
                format!("{}", t.m),
                json!({
                    "positive_biased_count": t.positive_biased_count,
                    "negative_biased_count": t.negative_biased_count,
                    "percent_of_words": t.percent_of_words,
                    "percent_of_scored": t.percent_of_scored,
                }),
            )
        })
        .collect();
    pretty_json(&json!({
        "model_id": run.model_id,
        "normalized": run.normalization.is_normalized(),
        "words_requested": sweep.words_requested,
        "words_scored": sweep.words_scored,
        "dropped": dropped,
        "thresholds": thresholds,
    }))
}

/// Threshold rows with the strongest biased words per direction and the
/// percentage of audited words flagged.
pub fn sat_table(sweep: &SatSweep, model: &str, top_n: usize) -> String {
    let rows: Vec<Vec<String>> = sweep
        .summary
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let top = |d| word_list(sweep.ranked(i, d).into_iter().take(top_n).map(|r| r.stats.word.as_str()));
            vec![
                model.to_string(),
                threshold_label(t.m),
                top(Direction::PositiveBiased),
                fmt_pct(t.percent_of_words.positive),
                top(Direction::NegativeBiased),
                fmt_pct(t.percent_of_words.negative),
            ]
        })
        .collect();
    let mut out = format!(
        "# association test, top {top_n} biased words; % of {} audited words\n",
        sweep.words_requested
    );
    out.push_str(&render_table(
        &["Model", "Threshold", "Positive Words", "%", "Negative Words", "%"],
        &rows,
    ));
    out
}

pub fn pmf_csv(pmf: &PmfDifference) -> Result<String, ReportError> {
    csv_string(|w| {
        w.write_record(["review_id", "gold_label", "diff"])?;
        for p in &pmf.points {
            w.write_record([p.review_id.as_str(), p.gold_label.as_str(), &num(p.diff)])?;
        }
        Ok(())
    })
}

pub fn pmf_plot_csv(pmf: &PmfDifference) -> Result<String, ReportError> {
    csv_string(|w| {
        w.write_record(["x", "gold_label", "y"])?;
        for (i, p) in pmf.points.iter().enumerate() {
            w.write_record([i.to_string().as_str(), p.gold_label.as_str(), &num(p.diff)])?;
        }
        Ok(())
    })
}

pub fn pmf_summary_json(pmf: &PmfDifference, run: &RunInfo) -> String {
    pretty_json(&json!({
        "model_id": run.model_id,
        "normalized": run.normalization.is_normalized(),
        "mean_positive_reviews": pmf.mean_positive_reviews,
        "mean_negative_reviews": pmf.mean_negative_reviews,
        "positive_words_used": pmf.positive_words_used,
        "negative_words_used": pmf.negative_words_used,
        "x_order": PMF_X_ORDER,
    }))
}

pub fn sst_records_csv(records: &[ShiftRecord]) -> Result<String, ReportError> {
    csv_string(|w| {
        w.write_record([
            "word",
            "k",
            "acc_pos_base",
            "acc_pos_after",
            "acc_neg_base",
            "acc_neg_after",
            "pos_diff",
            "neg_diff",
        ])?;
        for r in records {
            w.write_record([
                r.word.clone(),
                r.k.to_string(),
                num(r.acc_pos_base),
                num(r.acc_pos_after),
                num(r.acc_neg_base),
                num(r.acc_neg_after),
                num(r.pos_diff),
                num(r.neg_diff),
            ])?;
        }
        Ok(())
    })
}

pub fn sst_scores_csv(scores: &[ShiftScore]) -> Result<String, ReportError> {
    csv_string(|w| {
        w.write_record(["word", "q", "label", "ks"])?;
        for s in scores {
            let ks: Vec<String> = s.ks.iter().map(usize::to_string).collect();
            w.write_record([s.word.clone(), num(s.q), s.label.as_str().to_string(), ks.join(";")])?;
        }
        Ok(())
    })
}

pub fn sst_summary_json(sst: &SstResults, run: &RunInfo) -> String {
    let count = |label: ShiftLabel| sst.scores.iter().filter(|s| s.label == label).count();
    pretty_json(&json!({
        "model_id": run.model_id,
        "accuracy_unit": run.score_unit.as_str(),
        "ks": sst.ks,
        "q_eps": sst.q_eps,
        "baseline": {
            "acc_pos": sst.baseline.acc_pos(),
            "acc_neg": sst.baseline.acc_neg(),
            "pos_correct": sst.baseline.pos_correct,
            "pos_total": sst.baseline.pos_total,
            "neg_correct": sst.baseline.neg_correct,
            "neg_total": sst.baseline.neg_total,
        },
        "words_scored": sst.scores.len(),
        "labels": {
            "positive_biased": count(ShiftLabel::PositiveBiased),
            "negative_biased": count(ShiftLabel::NegativeBiased),
            "truly_neutral": count(ShiftLabel::TrulyNeutral),
            "indeterminate": count(ShiftLabel::Indeterminate),
        },
    }))
}

/// One row per `K`: strongest words by single-`K` score and the share of
/// scored words biased at that `K`.
pub fn sst_k_table(
    records: &[ShiftRecord],
    q_eps: f64,
    model: &str,
    top_n: usize,
    unit: ScoreUnit,
) -> Result<String, SstError> {
    let rows: Vec<Vec<String>> = per_k_summary(records, q_eps)?
        .iter()
        .map(|s| {
            let top = |v: &[ShiftScore]| word_list(v.iter().take(top_n).map(|x| x.word.as_str()));
            vec![
                model.to_string(),
                s.k.to_string(),
                top(&s.ranking.positive),
                fmt_pct(s.positive_pct),
                top(&s.ranking.negative),
                fmt_pct(s.negative_pct),
            ]
        })
        .collect();
    let mut out = format!(
        "# shift test, top {top_n} biased words per K; accuracy unit: {}\n",
        unit.as_str()
    );
    out.push_str(&render_table(
        &["Model", "K", "Positive Words", "%", "Negative Words", "%"],
        &rows,
    ));
    Ok(out)
}

/// Word/Score tables for the most positive, most negative and truly neutral words.
pub fn sst_top_tables(scores: &[ShiftScore], model: &str, top_n: usize, unit: ScoreUnit) -> String {
    let ranking = sst_rank(scores);
    let mut out = String::new();
    let sections = [
        ("most positive-biased words", &ranking.positive),
        ("most negative-biased words", &ranking.negative),
        ("truly neutral words", &ranking.truly_neutral),
    ];
    for (i, (title, list)) in sections.into_iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "# Top {top_n} {title} ({model}, accuracy unit: {})",
            unit.as_str()
        );
        let rows: Vec<Vec<String>> = list
            .iter()
            .take(top_n)
            .map(|s| vec![s.word.clone(), format!("{:.2}", s.q)])
            .collect();
        out.push_str(&render_table(&["Word", "Score"], &rows));
    }
    out
}

pub fn overlap_json(cross: &CrossResults) -> String {
    pretty_json(&json!({
        "runs": cross.runs,
        "sat_threshold": cross.sat_threshold,
        "overlap": cross.overlap,
    }))
}

pub fn agreement_json(cross: &CrossResults) -> String {
    pretty_json(&json!({
        "runs": cross.runs,
        "sat_threshold": cross.sat_threshold,
        "agreement": cross.agreement,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pct_format() {
        assert_eq!(fmt_pct(17.0), "17.0");
        assert_eq!(fmt_pct(0.75), "0.75");
        assert_eq!(fmt_pct(3.75), "3.75");
        assert_eq!(fmt_pct(59.2), "59.2");
        assert_eq!(fmt_pct(100.0 / 3.0), "33.33");
        assert_eq!(threshold_label(1.0), "1*Standard Deviation");
        assert_eq!(threshold_label(0.5), "0.5*Standard Deviation");
    }

    #[test]
    fn top_tables_shape() {
        let s = |w: &str, q: f64, label| ShiftScore { word: w.into(), ks: vec![5], q, n: 1, label };
        let text = sst_top_tables(
            &[
                s("shone", 20.62, ShiftLabel::PositiveBiased),
                s("deadly", -24.48, ShiftLabel::NegativeBiased),
                s("quarter", -0.01, ShiftLabel::TrulyNeutral),
            ],
            "m",
            10,
            ScoreUnit::Percent,
        );
        assert!(text.contains("Word   Score\n-----  -----\nshone  20.62\n"), "{text}");
        assert!(text.contains("deadly  -24.48"));
        assert!(text.contains("quarter  -0.01"));
    }

    #[test]
    fn table_alignment() {
        let t = render_table(&["A", "Long"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(t, "A    Long\n---  ----\nxyz  1\n");
    }

    #[test]
    fn manifest_verification() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::default();
        std::fs::write(dir.path().join("a.csv"), "x\n").unwrap();
        m.record_file("a.csv", b"x\n");
        assert_eq!(m.read_verified(dir.path(), "a.csv").unwrap(), "x\n");
        assert!(matches!(
            m.read_verified(dir.path(), "b.csv"),
            Err(ReportError::MissingPrerequisite(_))
        ));
        std::fs::write(dir.path().join("a.csv"), "y\n").unwrap();
        assert!(matches!(m.read_verified(dir.path(), "a.csv"), Err(ReportError::Stale(_))));
        m.save(dir.path()).unwrap();
        assert_eq!(Manifest::load(dir.path()).unwrap().unwrap(), m);
    }
}
