use std::collections::BTreeSet;

use wackymeter_core::ablation::{run_ablation, significance_band, AblationConfig, RemovalPool};
use wackymeter_core::curve::{build_curve, compare_models, w_auc, BinDomain, DEFAULT_BINS};
use wackymeter_core::metrics::{evaluate, Measure};
use wackymeter_core::synth::{generate_synthetic_model, ExpansionProfile, SyntheticConfig, SyntheticModel};
use wackymeter_core::wackiness::{importance_samples, wackiness_scores, SampleSet};
use wackymeter_core::*;

fn synth(profile: ExpansionProfile, seed: u64) -> SyntheticModel {
    generate_synthetic_model(&SyntheticConfig {
        vocab_size: 1000,
        corpus_size: 200,
        query_count: 100,
        profile,
        seed,
    })
    .unwrap()
}

fn config() -> WackinessConfig {
    WackinessConfig {
        k: 10,
        special_tokens: [0, 1].into_iter().collect(),
        exclude_self: false,
    }
}

fn query_samples(m: &SyntheticModel) -> SampleSet {
    let lex = LexicalIndex::build(&m.corpus).unwrap();
    let imp = ImpactIndex::build(&m.doc_vectors).unwrap();
    importance_samples(&m.queries, &m.query_vectors, &imp, &lex, &config()).unwrap()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn random_injections_are_wackier_than_lexical_ones() {
    let m = synth(ExpansionProfile::Mixed(0.5), 7);
    let lex = LexicalIndex::build(&m.corpus).unwrap();
    let imp = ImpactIndex::build(&m.doc_vectors).unwrap();
    let table = wackiness_scores(&m.corpus, &m.doc_vectors, &imp, &lex, &config()).unwrap();
    let mut lexical = BTreeSet::new();
    let mut random = BTreeSet::new();
    for inj in m.injections.values() {
        lexical.extend(inj.lexical.iter().copied());
        random.extend(inj.random.iter().copied());
    }
    let only_random: Vec<f64> = random.difference(&lexical).filter_map(|t| table.get(*t)).map(|s| s.wackiness).collect();
    let only_lexical: Vec<f64> = lexical.difference(&random).filter_map(|t| table.get(*t)).map(|s| s.wackiness).collect();
    assert!(!only_random.is_empty() && !only_lexical.is_empty());
    let (r, l) = (mean(only_random.into_iter()), mean(only_lexical.into_iter()));
    assert!(r > l, "random {r} lexical {l}");
}

#[test]
fn lexical_expander_has_lower_w_auc() {
    let lexical = build_curve(&query_samples(&synth(ExpansionProfile::LexicalOverlap, 7)).table(), DEFAULT_BINS, BinDomain::Scored).unwrap();
    let random = build_curve(&query_samples(&synth(ExpansionProfile::RandomToken, 7)).table(), DEFAULT_BINS, BinDomain::Scored).unwrap();
    assert!(w_auc(&random) - w_auc(&lexical) > 0.05);
}

#[test]
fn comparison_separates_lexical_and_random() {
    let models = vec![
        ("lexical".to_string(), query_samples(&synth(ExpansionProfile::LexicalOverlap, 7))),
        ("random".to_string(), query_samples(&synth(ExpansionProfile::RandomToken, 7))),
    ];
    let report = compare_models(&models, DEFAULT_BINS, BinDomain::Scored, 10, 3).unwrap();
    assert_eq!(report.models[0].name, "lexical");
    assert_eq!(report.models[1].name, "random");
    let (a, b) = (&report.models[0].group, &report.models[1].group);
    assert!(a.chars().all(|c| !b.contains(c)), "{a} vs {b}");
    assert!(report.adjusted_p[0].1 < 0.05);
}

fn ablation_setup(m: &SyntheticModel) -> (ImpactIndex, TokenWackinessTable) {
    let lex = LexicalIndex::build(&m.corpus).unwrap();
    let imp = ImpactIndex::build(&m.doc_vectors).unwrap();
    let table = wackiness_scores(&m.queries, &m.query_vectors, &imp, &lex, &config()).unwrap();
    (imp, table)
}

fn ablation_config(thresholds: Vec<usize>) -> AblationConfig {
    AblationConfig {
        thresholds,
        repeats: 5,
        seed: 11,
        measures: vec![Measure::Mrr(10), Measure::Recall(10), Measure::Recall(100), Measure::Ndcg(10)],
        removal_pool: RemovalPool::ExpansionObserved,
        special_tokens: [0, 1].into_iter().collect(),
        ..AblationConfig::default()
    }
}

#[test]
fn ablation_endpoints_are_exact() {
    let m = synth(ExpansionProfile::Mixed(0.5), 5);
    let (imp, table) = ablation_setup(&m);
    let cfg = ablation_config(vec![0, table.len()]);
    let report = run_ablation(&m.queries, &m.query_vectors, &imp, &m.qrels, &table, &cfg).unwrap();

    let fresh: Vec<Ranking> = m.query_vectors.iter().map(|q| imp.search(q, 100).unwrap()).collect();
    let originals: Vec<Ranking> = m
        .queries
        .iter()
        .zip(&m.query_vectors)
        .map(|(q, v)| {
            let keep = q.distinct_tokens();
            imp.search(&v.filtered(|t| keep.contains(&t) || t < 2), 100).unwrap()
        })
        .collect();
    for &measure in &cfg.measures {
        let full = evaluate(&fresh, &m.qrels, measure, 1).unwrap().mean;
        let orig = evaluate(&originals, &m.qrels, measure, 1).unwrap().mean;
        assert_eq!(report.full[&measure].to_bits(), full.to_bits());
        assert_eq!(report.thresholds[0].wacky[&measure].to_bits(), full.to_bits());
        assert_eq!(report.thresholds[0].random_mean[&measure].to_bits(), full.to_bits());
        assert_eq!(report.thresholds[0].random_std[&measure], 0.0);
        assert_eq!(report.no_expansion[&measure].to_bits(), orig.to_bits());
        assert_eq!(report.thresholds[1].wacky[&measure].to_bits(), orig.to_bits());
    }
}

#[test]
fn removing_wacky_tokens_costs_little() {
    let m = synth(ExpansionProfile::Mixed(0.5), 7);
    let (imp, table) = ablation_setup(&m);
    let cfg = ablation_config(vec![10, 100]);
    let report = run_ablation(&m.queries, &m.query_vectors, &imp, &m.qrels, &table, &cfg).unwrap();
    for band in significance_band(&report) {
        assert!(band.wacky >= band.lower, "{band:?}");
    }
    for t in &report.thresholds {
        let mrr = Measure::Mrr(10);
        assert!(t.wacky[&mrr] >= t.random_mean[&mrr] - 2.0 * t.random_std[&mrr], "{t:?}");
    }
}

#[test]
fn full_vocabulary_pool_leaves_original_tokens_alone() {
    let m = synth(ExpansionProfile::RandomToken, 2);
    let (imp, table) = ablation_setup(&m);
    let mut cfg = ablation_config(vec![m.vocabulary.len()]);
    cfg.removal_pool = RemovalPool::FullVocabulary(m.vocabulary.len());
    cfg.repeats = 2;
    let report = run_ablation(&m.queries, &m.query_vectors, &imp, &m.qrels, &table, &cfg).unwrap();
    for (measure, v) in &report.thresholds[0].random_mean {
        assert_eq!(v.to_bits(), report.no_expansion[measure].to_bits());
    }
}

#[test]
fn scoring_queries_leaves_document_index_untouched() {
    let m = synth(ExpansionProfile::Mixed(0.5), 1);
    let imp = ImpactIndex::build(&m.doc_vectors).unwrap();
    let lex = LexicalIndex::build(&m.corpus).unwrap();
    let mut before = Vec::new();
    imp.save(&mut before).unwrap();
    wackiness_scores(&m.queries, &m.query_vectors, &imp, &lex, &config()).unwrap();
    let mut after = Vec::new();
    imp.save(&mut after).unwrap();
    assert_eq!(before, after);
}

#[test]
fn sample_files_round_trip_and_are_deterministic() {
    let a = query_samples(&synth(ExpansionProfile::Mixed(0.3), 9));
    let b = query_samples(&synth(ExpansionProfile::Mixed(0.3), 9));
    let (mut ja, mut jb) = (Vec::new(), Vec::new());
    a.write_jsonl(&mut ja).unwrap();
    b.write_jsonl(&mut jb).unwrap();
    assert_eq!(ja, jb);
    let back = SampleSet::read_jsonl(ja.as_slice()).unwrap();
    assert_eq!(back.table(), a.table());

    let vocab = synth(ExpansionProfile::Mixed(0.3), 9).vocabulary;
    let mut csv = Vec::new();
    a.table().write_csv(&mut csv, &vocab).unwrap();
    let reread = TokenWackinessTable::read_csv(csv.as_slice()).unwrap();
    for (t, s) in a.table().rows() {
        assert_eq!(reread.get(*t).unwrap().wackiness, s.wackiness);
    }
}
