//! Cross-test analytics and report emission.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{GoldLabel, Review, WordSelection};
use crate::report::{self, Manifest, ReportError};
use crate::sat::SatSweep;
use crate::scorer::MaskDistribution;
use crate::sst::{Baseline, ShiftRecord, ShiftScore};
use crate::summation;
use crate::Direction;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{0}")]
    MissingWords(String),
    #[error("ranked list has {len} words, need at least {} for k = {k}", 2 * .k)]
    ListTooShort { len: usize, k: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{reviews} reviews but {distributions} distributions")]
    LengthMismatch { reviews: usize, distributions: usize },
}

/// Mean positive-word probability minus mean negative-word probability for one review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfDiffPoint {
    pub review_id: String,
    pub gold_label: GoldLabel,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmfDifference {
    /// Sorted by gold label (positive first), then review id.
    pub points: Vec<PmfDiffPoint>,
    pub mean_positive_reviews: Option<f64>,
    pub mean_negative_reviews: Option<f64>,
    pub positive_words_used: usize,
    pub negative_words_used: usize,
}

/// Per-review PMF difference between the selection's positive and negative words.
///
/// `distributions[i]` must belong to `reviews[i]`. Lexicon words the backend
/// excluded in any probe are left out of every mean.
pub fn pmf_difference(
    reviews: &[Review],
    distributions: &[MaskDistribution],
    selection: &WordSelection,
) -> Result<PmfDifference, AnalysisError> {
    if reviews.len() != distributions.len() {
        return Err(AnalysisError::LengthMismatch {
            reviews: reviews.len(),
            distributions: distributions.len(),
        });
    }
    let usable = |words: &[crate::corpus::LexiconEntry], class: &str| -> Result<Vec<String>, AnalysisError> {
        let mut kept = Vec::new();
        for e in words {
            let mut excluded = false;
            for d in distributions {
                if d.get(&e.word).is_none() {
                    if d.excluded.contains(&e.word) {
                        excluded = true;
                    } else {
                        return Err(AnalysisError::MissingWords(format!(
                            "{class} word {:?} absent from probe {}",
                            e.word, d.probe_id
                        )));
                    }
                }
            }
            if !excluded {
                kept.push(e.word.clone());
            }
        }
        if kept.is_empty() && !distributions.is_empty() {
            return Err(AnalysisError::MissingWords(format!("no scorable {class} words")));
        }
        Ok(kept)
    };
    let pos_words = usable(&selection.positive_words, "positive")?;
    let neg_words = usable(&selection.negative_words, "negative")?;

    let mean_of = |d: &MaskDistribution, words: &[String]| {
        let vals: Vec<f64> = words.iter().map(|w| d.get(w).expect("checked above")).collect();
        summation::mean(&vals).expect("nonempty")
    };
    let mut points: Vec<PmfDiffPoint> = reviews
        .iter()
        .zip(distributions)
        .map(|(r, d)| PmfDiffPoint {
            review_id: r.id.clone(),
            gold_label: r.gold_label,
            diff: mean_of(d, &pos_words) - mean_of(d, &neg_words),
        })
        .collect();
    points.sort_by(|a, b| a.gold_label.cmp(&b.gold_label).then_with(|| a.review_id.cmp(&b.review_id)));

    let class_mean = |label| {
        let v: Vec<f64> = points.iter().filter(|p| p.gold_label == label).map(|p| p.diff).collect();
        summation::mean(&v)
    };
    Ok(PmfDifference {
        mean_positive_reviews: class_mean(GoldLabel::Positive),
        mean_negative_reviews: class_mean(GoldLabel::Negative),
        positive_words_used: pos_words.len(),
        negative_words_used: neg_words.len(),
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub method_a: String,
    pub method_b: String,
    pub direction: Direction,
    pub shared: usize,
    pub set_sizes: (usize, usize),
    /// `None` when both sets are empty.
    pub jaccard: Option<f64>,
    pub shared_over_union_pct: Option<f64>,
    /// `None` when either set is empty.
    pub shared_over_min_pct: Option<f64>,
}

pub fn overlap(
    method_a: &str,
    set_a: &BTreeSet<String>,
    method_b: &str,
    set_b: &BTreeSet<String>,
    direction: Direction,
) -> OverlapSummary {
    let shared = set_a.intersection(set_b).count();
    let union = set_a.union(set_b).count();
    let min = set_a.len().min(set_b.len());
    let jaccard = (union > 0).then(|| shared as f64 / union as f64);
    OverlapSummary {
        method_a: method_a.to_string(),
        method_b: method_b.to_string(),
        direction,
        shared,
        set_sizes: (set_a.len(), set_b.len()),
        jaccard,
        shared_over_union_pct: (union > 0).then(|| 100.0 * shared as f64 / union as f64),
        shared_over_min_pct: (min > 0).then(|| 100.0 * shared as f64 / min as f64),
    }
}

/// Percentage of the first `k` and last `k` ranked words found in `reference`.
pub fn topk_agreement(
    ranked: &[String],
    reference: &HashSet<String>,
    k: usize,
) -> Result<(f64, f64), AnalysisError> {
    if k == 0 {
        return Err(AnalysisError::ZeroK);
    }
    if ranked.len() < 2 * k {
        return Err(AnalysisError::ListTooShort { len: ranked.len(), k });
    }
    let pct = |words: &[String]| {
        100.0 * words.iter().filter(|w| reference.contains(*w)).count() as f64 / k as f64
    };
    Ok((pct(&ranked[..k]), pct(&ranked[ranked.len() - k..])))
}

/// Agreement result for one bias direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementEntry {
    pub direction: Direction,
    pub k: usize,
    pub ranked_len: usize,
    pub reference_len: usize,
    /// `None` when the ranked list is shorter than `2k`.
    pub top_pct: Option<f64>,
    pub bottom_pct: Option<f64>,
    pub status: String,
}

pub fn agreement_entry(
    direction: Direction,
    ranked: &[String],
    reference: &HashSet<String>,
    k: usize,
) -> Result<AgreementEntry, AnalysisError> {
    let (top, bottom, status) = match topk_agreement(ranked, reference, k) {
        Ok((t, b)) => (Some(t), Some(b), "ok".to_string()),
        Err(AnalysisError::ListTooShort { .. }) => (None, None, "list_too_short".to_string()),
        Err(e) => return Err(e),
    };
    Ok(AgreementEntry {
        direction,
        k,
        ranked_len: ranked.len(),
        reference_len: reference.len(),
        top_pct: top,
        bottom_pct: bottom,
        status,
    })
}

/// Run-level metadata recorded next to every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub model_id: String,
    pub template: String,
    pub normalization: crate::scorer::Normalization,
    pub score_unit: crate::sst::ScoreUnit,
}

#[derive(Debug, Clone)]
pub struct SatResults {
    pub sweep: SatSweep,
    pub dropped: Vec<String>,
    pub pmf: PmfDifference,
}

#[derive(Debug, Clone)]
pub struct SstResults {
    pub baseline: Baseline,
    pub records: Vec<ShiftRecord>,
    pub scores: Vec<ShiftScore>,
    pub ks: Vec<usize>,
    pub q_eps: f64,
}

#[derive(Debug, Clone)]
pub struct CrossResults {
    pub overlap: Vec<OverlapSummary>,
    pub agreement: Vec<AgreementEntry>,
    pub sat_threshold: f64,
    /// Run directories whose biased-word sets were unioned.
    pub runs: Vec<String>,
}

/// Whatever a stage produced; absent parts are left untouched on disk.
#[derive(Debug, Clone, Default)]
pub struct AuditResults {
    pub stage: String,
    pub run: Option<RunInfo>,
    pub selection: Option<WordSelection>,
    pub corpus_summary: Option<serde_json::Value>,
    pub sat: Option<SatResults>,
    pub sst: Option<SstResults>,
    pub cross: Option<CrossResults>,
    /// Stage-specific settings and input digests recorded in the manifest.
    pub stage_info: BTreeMap<String, serde_json::Value>,
    pub top_n: usize,
}

/// Writes every report present in `results` and merges their digests into
/// `manifest.json`.
pub fn emit_reports(results: &AuditResults, out_dir: &Path) -> Result<Manifest, ReportError> {
    let mut manifest = Manifest::load_or_default(out_dir)?;
    let mut files: Vec<(&str, String)> = Vec::new();

    if let Some(sel) = &results.selection {
        files.push((report::SELECTION_JSON, sel.to_json()));
    }
    if let Some(summary) = &results.corpus_summary {
        files.push((report::CORPUS_SUMMARY_JSON, report::pretty_json(summary)));
    }
    let model = results.run.as_ref().map(|r| r.model_id.as_str()).unwrap_or("-");
    if let (Some(sat), Some(run)) = (&results.sat, &results.run) {
        files.push((report::SAT_STATS_CSV, report::sat_csv(&sat.sweep)?));
        files.push((report::SAT_SUMMARY_JSON, report::sat_summary_json(&sat.sweep, &sat.dropped, run)));
        files.push((report::SAT_TABLE_TXT, report::sat_table(&sat.sweep, model, results.top_n)));
        files.push((report::PMF_DIFF_CSV, report::pmf_csv(&sat.pmf)?));
        files.push((report::PMF_PLOT_CSV, report::pmf_plot_csv(&sat.pmf)?));
        files.push((report::PMF_SUMMARY_JSON, report::pmf_summary_json(&sat.pmf, run)));
    }
    if let (Some(sst), Some(run)) = (&results.sst, &results.run) {
        files.push((report::SST_RECORDS_CSV, report::sst_records_csv(&sst.records)?));
        files.push((report::SST_SCORES_CSV, report::sst_scores_csv(&sst.scores)?));
        files.push((report::SST_SUMMARY_JSON, report::sst_summary_json(sst, run)));
        files.push((
            report::SST_TABLE_TXT,
            report::sst_k_table(&sst.records, sst.q_eps, model, results.top_n, run.score_unit)
                .map_err(|e| ReportError::Render(e.to_string()))?,
        ));
        files.push((report::SST_TOP_TXT, report::sst_top_tables(&sst.scores, model, results.top_n, run.score_unit)));
    }
    if let Some(cross) = &results.cross {
        files.push((report::OVERLAP_JSON, report::overlap_json(cross)));
        files.push((report::AGREEMENT_JSON, report::agreement_json(cross)));
    }

    std::fs::create_dir_all(out_dir).map_err(|e| ReportError::io(out_dir, e))?;
    let mut written = Vec::new();
    for (name, contents) in files {
        let path = out_dir.join(name);
        std::fs::write(&path, contents.as_bytes()).map_err(|e| ReportError::io(&path, e))?;
        manifest.record_file(name, contents.as_bytes());
        written.push(name.to_string());
    }
    if let Some(run) = &results.run {
        manifest.record_run(run);
    }
    if !results.stage.is_empty() {
        manifest.record_stage(&results.stage, results.stage_info.clone(), written);
    }
    manifest.save(out_dir)?;
    Ok(manifest)
}
