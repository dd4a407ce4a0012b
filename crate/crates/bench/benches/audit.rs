use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sentiprobe_bench::{distributions, reviews, toy_backend, words};
use sentiprobe_core::sat::{accumulate_association, sat_sweep, DEFAULT_THRESHOLDS};
use sentiprobe_core::scorer::{build_probe, mask_probabilities, Probe, ProbeTemplate};
use sentiprobe_core::sst::{baseline_accuracy, shift_once, split_by_label, ScoreUnit};
use std::hint::black_box;

fn sat_accumulation(c: &mut Criterion) {
    let mut group = c.benchmark_group("sat_accumulate");
    for n_words in [100, 400] {
        let ws = words(n_words);
        let pos = distributions(200, &ws, 1);
        let neg = distributions(200, &ws, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n_words), &n_words, |b, _| {
            b.iter(|| {
                let assoc = accumulate_association(&pos, &neg, &ws).unwrap();
                black_box(sat_sweep(&assoc.stats, &DEFAULT_THRESHOLDS, ws.len()).unwrap())
            })
        });
    }
    group.finish();
}

fn toy_scoring(c: &mut Criterion) {
    let vocab = words(500);
    let backend = toy_backend(&vocab, 3);
    let template = ProbeTemplate::default();
    let probes: Vec<Probe> = reviews(64, 40, &vocab, 4)
        .iter()
        .map(|r| Probe::new(r.id.clone(), build_probe(&r.text, None, &template)))
        .collect();
    let candidates = words(300);
    c.bench_function("toy_mask_probabilities_64x300", |b| {
        b.iter(|| black_box(mask_probabilities(&backend, &probes, &candidates).unwrap()))
    });
}

fn shift_test(c: &mut Criterion) {
    let vocab = words(500);
    let backend = toy_backend(&vocab, 5);
    let template = ProbeTemplate::default();
    let corpus = reviews(200, 40, &vocab, 6);
    let baseline = baseline_accuracy(&backend, &corpus, &template, ScoreUnit::Percent).unwrap();
    let (pos, neg) = split_by_label(&corpus);
    c.bench_function("shift_once_200_reviews_k15", |b| {
        b.iter(|| black_box(shift_once(&backend, &pos, &neg, "w0007", 15, &template, &baseline).unwrap()))
    });
}

criterion_group!(benches, sat_accumulation, toy_scoring, shift_test);
criterion_main!(benches);
