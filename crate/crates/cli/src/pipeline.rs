//! Stage orchestration: ingest, sat, sst, analyze.
//!
//! Every stage reads its prerequisites from the output directory through the
//! manifest, so a report edited or regenerated behind a later stage's back is
//! reported as stale rather than silently reused.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use sentiprobe_core::analysis::{
    agreement_entry, emit_reports, overlap, pmf_difference, AuditResults, CrossResults, RunInfo, SatResults,
    SstResults,
};
use sentiprobe_core::corpus::{load_mpqa_neutral, load_reviews, load_vader_lexicon, select_words};
use sentiprobe_core::report::{self, sha256_hex, Manifest, ReportError};
use sentiprobe_core::sat::{accumulate_association, sat_sweep};
use sentiprobe_core::scorer::{
    build_probe, load_cue_table, mask_probabilities_with, MaskDistribution, Probe, RemoteBackend, ToyBackend,
};
use sentiprobe_core::sst::{baseline_accuracy, correct_count, score_all, split_by_label, sst_rank};
use sentiprobe_core::{
    Direction, GoldLabel, Polarity, Review, SatLabel, ScorerBackend, ShiftLabel, ShiftRecord, ShiftScore,
    WordSelection,
};
use serde_json::{json, Value};

use crate::checkpoint::Checkpoint;
use crate::config::{BackendKind, RunConfig};
use crate::error::CliError;

pub const SAT_CHECKPOINT: &str = ".sat-checkpoint.jsonl";
pub const SST_CHECKPOINT: &str = ".sst-checkpoint.jsonl";

pub fn build_backend(cfg: &RunConfig) -> Result<Box<dyn ScorerBackend>, CliError> {
    match cfg.backend.kind {
        BackendKind::Toy => {
            let path = required(&cfg.backend.cue_table, "backend.cue_table")?;
            let cues = load_cue_table(path)?;
            Ok(Box::new(ToyBackend::with_template(cues, cfg.backend.clamp, cfg.probe_template()?)?))
        }
        BackendKind::Remote => Ok(Box::new(RemoteBackend::connect(cfg.backend.remote()?)?)),
    }
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Usage(format!("{key} is not set")))
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| ReportError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {workers} workers: {e}")))
}

fn run_info(cfg: &RunConfig, backend: &dyn ScorerBackend) -> RunInfo {
    RunInfo {
        model_id: backend.model_id().to_string(),
        template: cfg.template.clone(),
        normalization: cfg.normalization,
        score_unit: cfg.score_unit,
    }
}

pub fn run_ingest(cfg: &RunConfig) -> Result<WordSelection, CliError> {
    let vader_path = required(&cfg.lexicon.vader, "lexicon.vader")?;
    let mpqa_path = required(&cfg.lexicon.mpqa, "lexicon.mpqa")?;
    let reviews_path = required(&cfg.reviews.path, "reviews.path")?;

    let vader = load_vader_lexicon(vader_path, cfg.lexicon.min_abs_score)?;
    let mpqa = load_mpqa_neutral(mpqa_path)?;
    let (_, summary) = load_reviews(reviews_path)?;

    let (pos, neg): (Vec<_>, Vec<_>) = vader
        .entries
        .iter()
        .filter(|e| e.polarity != Polarity::Neutral)
        .cloned()
        .partition(|e| e.polarity == Polarity::Positive);
    let selection = select_words(&pos, &neg, &mpqa.entries, cfg.per_class_count)?;
    for (name, got) in [
        ("positive", selection.positive_words.len()),
        ("negative", selection.negative_words.len()),
        ("neutral", selection.neutral_words.len()),
    ] {
        if got < cfg.per_class_count {
            warn!("only {got} {name} words available, wanted {}", cfg.per_class_count);
        }
    }

    let inputs = json!({
        "vader": {"file": file_name(vader_path), "sha256": file_digest(vader_path)?},
        "mpqa": {"file": file_name(mpqa_path), "sha256": file_digest(mpqa_path)?},
        "reviews": {"file": file_name(reviews_path), "sha256": file_digest(reviews_path)?},
    });
    let corpus_summary = json!({
        "reviews": {
            "positive": summary.positive,
            "negative": summary.negative,
            "by_source": summary.by_source,
        },
        "lexicon": {
            "min_abs_score": cfg.lexicon.min_abs_score,
            "strong_positive": pos.len(),
            "strong_negative": neg.len(),
            "neutral": mpqa.entries.len(),
            "duplicates_skipped": vader.duplicates + mpqa.duplicates,
        },
        "selected": {
            "per_class_count": cfg.per_class_count,
            "positive": selection.positive_words.len(),
            "negative": selection.negative_words.len(),
            "neutral": selection.neutral_words.len(),
            "excluded_ties": selection.excluded_ties,
        },
        "inputs": inputs,
    });

    let mut stage_info = BTreeMap::new();
    stage_info.insert("inputs".to_string(), inputs);
    stage_info.insert("per_class_count".to_string(), json!(cfg.per_class_count));
    stage_info.insert("seedless".to_string(), json!(true));
    emit_reports(
        &AuditResults {
            stage: "ingest".into(),
            selection: Some(selection.clone()),
            corpus_summary: Some(corpus_summary),
            stage_info,
            top_n: cfg.top_n,
            ..Default::default()
        },
        &cfg.out_dir,
    )?;
    info!("ingest: selection written to {}", cfg.out_dir.display());
    Ok(selection)
}

/// Selection and reviews shared by the backend stages.
struct StageInputs {
    selection: WordSelection,
    selection_sha: String,
    reviews: Vec<Review>,
    reviews_sha: String,
}

fn stage_inputs(cfg: &RunConfig) -> Result<StageInputs, CliError> {
    let manifest = Manifest::load_or_default(&cfg.out_dir)?;
    let text = manifest.read_verified(&cfg.out_dir, report::SELECTION_JSON)?;
    let selection = WordSelection::from_json(&text).map_err(|e| CliError::Data {
        path: cfg.out_dir.join(report::SELECTION_JSON).display().to_string(),
        detail: e.to_string(),
    })?;
    let reviews_path = required(&cfg.reviews.path, "reviews.path")?;
    let (reviews, _) = load_reviews(reviews_path)?;
    let reviews_sha = file_digest(reviews_path)?;
    if let Some(recorded) = manifest
        .stages
        .get("ingest")
        .and_then(|s| s.settings.get("inputs"))
        .and_then(|i| i["reviews"]["sha256"].as_str())
    {
        if recorded != reviews_sha {
            warn!("reviews changed since ingest; selection may be stale");
        }
    }
    Ok(StageInputs {
        selection_sha: sha256_hex(text.as_bytes()),
        selection,
        reviews,
        reviews_sha,
    })
}

fn fingerprint(value: &Value) -> String {
    sha256_hex(value.to_string().as_bytes())
}

pub fn run_sat(cfg: &RunConfig, backend: &dyn ScorerBackend) -> Result<SatResults, CliError> {
    let inputs = stage_inputs(cfg)?;
    let template = cfg.probe_template()?;
    let run = run_info(cfg, backend);
    let candidates = inputs.selection.all_words();
    let neutral: Vec<String> = inputs.selection.neutral_words.iter().map(|e| e.word.clone()).collect();
    let probes: Vec<Probe> = inputs
        .reviews
        .iter()
        .map(|r| Probe::new(r.id.clone(), build_probe(&r.text, None, &template)))
        .collect();
    let chunks: Vec<&[Probe]> = probes.chunks(cfg.chunk_size).collect();

    let ck: Checkpoint<Vec<MaskDistribution>> = Checkpoint::open(
        &cfg.out_dir.join(SAT_CHECKPOINT),
        &fingerprint(&json!({
            "stage": "sat",
            "run": run,
            "candidates": candidates,
            "reviews": inputs.reviews_sha,
            "chunk_size": cfg.chunk_size,
        })),
    )?;
    let chunk_results: Vec<Vec<MaskDistribution>> = pool(cfg.workers)?.install(|| {
        chunks
            .par_iter()
            .enumerate()
            .map(|(i, chunk)| {
                if let Some(done) = ck.get(i) {
                    return Ok(done.clone());
                }
                let dists = mask_probabilities_with(backend, chunk, &candidates, cfg.normalization)?;
                ck.record(i, &dists)?;
                Ok(dists)
            })
            .collect::<Result<_, CliError>>()
    })?;
    ck.finish()?;
    let dists: Vec<MaskDistribution> = chunk_results.into_iter().flatten().collect();

    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (review, d) in inputs.reviews.iter().zip(&dists) {
        match review.gold_label {
            GoldLabel::Positive => pos.push(d.clone()),
            GoldLabel::Negative => neg.push(d.clone()),
        }
    }
    let association = accumulate_association(&pos, &neg, &neutral)?;
    let sweep = sat_sweep(&association.stats, &cfg.sat_thresholds, neutral.len())?;
    let pmf = pmf_difference(&inputs.reviews, &dists, &inputs.selection)?;
    let results = SatResults { sweep, dropped: association.dropped, pmf };

    let mut stage_info = BTreeMap::new();
    stage_info.insert("reviews_sha256".to_string(), json!(inputs.reviews_sha));
    stage_info.insert("selection_sha256".to_string(), json!(inputs.selection_sha));
    stage_info.insert("thresholds".to_string(), json!(cfg.sat_thresholds));
    stage_info.insert("candidates".to_string(), json!(candidates.len()));
    stage_info.insert("chunk_size".to_string(), json!(cfg.chunk_size));
    emit_reports(
        &AuditResults {
            stage: "sat".into(),
            run: Some(run),
            sat: Some(results.clone()),
            stage_info,
            top_n: cfg.top_n,
            ..Default::default()
        },
        &cfg.out_dir,
    )?;
    info!("sat: {} words scored", results.sweep.words_scored);
    Ok(results)
}

pub fn run_sst(cfg: &RunConfig, backend: &dyn ScorerBackend) -> Result<SstResults, CliError> {
    let inputs = stage_inputs(cfg)?;
    let template = cfg.probe_template()?;
    let run = run_info(cfg, backend);
    let words: Vec<String> = inputs.selection.neutral_words.iter().map(|e| e.word.clone()).collect();
    let baseline = baseline_accuracy(backend, &inputs.reviews, &template, cfg.score_unit)?;
    let (pos, neg) = split_by_label(&inputs.reviews);

    // per word: (k, positive reviews correct, negative reviews correct)
    let ck: Checkpoint<Vec<(usize, usize, usize)>> = Checkpoint::open(
        &cfg.out_dir.join(SST_CHECKPOINT),
        &fingerprint(&json!({
            "stage": "sst",
            "run": run,
            "words": words,
            "ks": cfg.sst_ks,
            "reviews": inputs.reviews_sha,
        })),
    )?;
    let counts: Vec<Vec<(usize, usize, usize)>> = pool(cfg.workers)?.install(|| {
        words
            .par_iter()
            .enumerate()
            .map(|(i, word)| {
                if let Some(done) = ck.get(i) {
                    return Ok(done.clone());
                }
                let mut out = Vec::with_capacity(cfg.sst_ks.len());
                for &k in &cfg.sst_ks {
                    let p = correct_count(backend, &pos, Some((word, k)), &template)?;
                    let n = correct_count(backend, &neg, Some((word, k)), &template)?;
                    out.push((k, p, n));
                }
                ck.record(i, &out)?;
                Ok(out)
            })
            .collect::<Result<_, CliError>>()
    })?;
    ck.finish()?;

    let records: Vec<ShiftRecord> = words
        .iter()
        .zip(&counts)
        .flat_map(|(w, per_k)| {
            per_k
                .iter()
                .map(|&(k, p, n)| ShiftRecord::from_counts(w, k, &baseline, p, n))
        })
        .collect();
    let scores = score_all(&records, cfg.q_eps)?;
    let results = SstResults {
        baseline,
        records,
        scores,
        ks: cfg.sst_ks.clone(),
        q_eps: cfg.q_eps,
    };

    let mut stage_info = BTreeMap::new();
    stage_info.insert("reviews_sha256".to_string(), json!(inputs.reviews_sha));
    stage_info.insert("selection_sha256".to_string(), json!(inputs.selection_sha));
    stage_info.insert("ks".to_string(), json!(cfg.sst_ks));
    stage_info.insert("q_eps".to_string(), json!(cfg.q_eps));
    emit_reports(
        &AuditResults {
            stage: "sst".into(),
            run: Some(run),
            sst: Some(results.clone()),
            stage_info,
            top_n: cfg.top_n,
            ..Default::default()
        },
        &cfg.out_dir,
    )?;
    info!("sst: {} words scored", results.scores.len());
    Ok(results)
}

/// Biased-word sets and SST scores read back from one run directory.
struct RunReports {
    model_id: String,
    sat: BTreeMap<Direction, BTreeSet<String>>,
    sst_scores: Vec<ShiftScore>,
    digests: Value,
}

fn bad_csv(dir: &Path, name: &str, detail: impl ToString) -> CliError {
    CliError::Data {
        path: dir.join(name).display().to_string(),
        detail: detail.to_string(),
    }
}

fn read_run(dir: &Path, threshold: f64) -> Result<RunReports, CliError> {
    let manifest = Manifest::load_or_default(dir)?;
    let sat_text = manifest.read_verified(dir, report::SAT_STATS_CSV)?;
    let sst_text = manifest.read_verified(dir, report::SST_SCORES_CSV)?;
    let model_id = manifest
        .run
        .as_ref()
        .map(|r| r.model_id.clone())
        .unwrap_or_default();

    let mut sat: BTreeMap<Direction, BTreeSet<String>> = BTreeMap::new();
    let mut rdr = csv::Reader::from_reader(sat_text.as_bytes());
    let column = format!("verdict@{threshold}");
    let headers = rdr.headers().map_err(|e| bad_csv(dir, report::SAT_STATS_CSV, e))?.clone();
    let col = headers.iter().position(|h| h == column).ok_or_else(|| {
        CliError::Usage(format!(
            "overlap_threshold {threshold} has no column in {}",
            dir.join(report::SAT_STATS_CSV).display()
        ))
    })?;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad_csv(dir, report::SAT_STATS_CSV, e))?;
        let label = SatLabel::parse(&rec[col])
            .ok_or_else(|| bad_csv(dir, report::SAT_STATS_CSV, format!("bad label {:?}", &rec[col])))?;
        if let Some(d) = label.direction() {
            sat.entry(d).or_default().insert(rec[0].to_string());
        }
    }

    let mut sst_scores = Vec::new();
    let mut rdr = csv::Reader::from_reader(sst_text.as_bytes());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad_csv(dir, report::SST_SCORES_CSV, e))?;
        let bad = |what: &str| bad_csv(dir, report::SST_SCORES_CSV, format!("bad {what} in {:?}", rec.as_slice()));
        let q: f64 = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("q"))?;
        let label = rec.get(2).and_then(ShiftLabel::parse).ok_or_else(|| bad("label"))?;
        let ks = rec
            .get(3)
            .ok_or_else(|| bad("ks"))?
            .split(';')
            .map(|k| k.parse::<usize>().map_err(|_| bad("ks")))
            .collect::<Result<Vec<_>, _>>()?;
        sst_scores.push(ShiftScore { word: rec[0].to_string(), n: ks.len(), ks, q, label });
    }

    let digests = json!({
        "model_id": model_id,
        "sat_stats_sha256": sha256_hex(sat_text.as_bytes()),
        "sst_scores_sha256": sha256_hex(sst_text.as_bytes()),
    });
    Ok(RunReports { model_id, sat, sst_scores, digests })
}

/// Overlap and top/bottom-k agreement between the two tests.
///
/// Biased sets are unioned over the output directory and every directory in
/// `analyze_runs`; the SST ranking comes from the output directory alone.
pub fn run_analyze(cfg: &RunConfig) -> Result<CrossResults, CliError> {
    let mut dirs = vec![cfg.out_dir.clone()];
    dirs.extend(cfg.analyze_runs.iter().cloned());
    let runs: Vec<RunReports> = dirs
        .iter()
        .map(|d| read_run(d, cfg.overlap_threshold))
        .collect::<Result<_, _>>()?;

    let mut sat_sets: BTreeMap<Direction, BTreeSet<String>> = BTreeMap::new();
    let mut sst_sets: BTreeMap<Direction, BTreeSet<String>> = BTreeMap::new();
    for run in &runs {
        for (d, words) in &run.sat {
            sat_sets.entry(*d).or_default().extend(words.iter().cloned());
        }
        for s in &run.sst_scores {
            if let Some(d) = s.label.direction() {
                sst_sets.entry(d).or_default().insert(s.word.clone());
            }
        }
    }

    let ranking = sst_rank(&runs[0].sst_scores);
    let empty = BTreeSet::new();
    let mut overlaps = Vec::new();
    let mut agreement = Vec::new();
    for d in Direction::ALL {
        let sat = sat_sets.get(&d).unwrap_or(&empty);
        let sst = sst_sets.get(&d).unwrap_or(&empty);
        overlaps.push(overlap("sat", sat, "sst", sst, d));
        let ranked: Vec<String> = ranking.direction(d).iter().map(|s| s.word.clone()).collect();
        let reference: HashSet<String> = sat.iter().cloned().collect();
        agreement.push(agreement_entry(d, &ranked, &reference, cfg.agreement_k)?);
    }
    let cross = CrossResults {
        overlap: overlaps,
        agreement,
        sat_threshold: cfg.overlap_threshold,
        runs: runs.iter().map(|r| r.model_id.clone()).collect(),
    };

    let mut stage_info = BTreeMap::new();
    stage_info.insert("inputs".to_string(), Value::Array(runs.iter().map(|r| r.digests.clone()).collect()));
    stage_info.insert("overlap_threshold".to_string(), json!(cfg.overlap_threshold));
    stage_info.insert("agreement_k".to_string(), json!(cfg.agreement_k));
    emit_reports(
        &AuditResults {
            stage: "analyze".into(),
            cross: Some(cross.clone()),
            stage_info,
            top_n: cfg.top_n,
            ..Default::default()
        },
        &cfg.out_dir,
    )?;
    Ok(cross)
}

pub fn run_all(cfg: &RunConfig, backend: &dyn ScorerBackend) -> Result<(), CliError> {
    run_ingest(cfg)?;
    run_sat(cfg, backend)?;
    run_sst(cfg, backend)?;
    run_analyze(cfg)?;
    Ok(())
}
