//! Brute-force reference implementations used as test oracles.
//!
//! Everything here works on plain collections (token lists, dense or ordered
//! maps) and recomputes quantities from scratch without touching the crate's
//! indices or scoring code. The crate types only enter through accessors.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

pub type Weights = BTreeMap<u32, f64>;

/// Inner product in ascending token order over the shared support.
pub fn dot(q: &Weights, d: &Weights) -> f64 {
    let mut s = 0.0;
    for (t, qw) in q {
        if let Some(dw) = d.get(t) {
            s += qw * dw;
        }
    }
    s
}

/// Scores every document, drops zeros, sorts by (score desc, id asc), keeps k.
pub fn brute_rank(q: &Weights, docs: &[(String, Weights)], k: usize) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = docs
        .iter()
        .map(|(id, d)| (id.clone(), dot(q, d)))
        .filter(|(_, s)| *s > 0.0)
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

pub fn count(t: u32, tokens: &[u32]) -> usize {
    tokens.iter().filter(|&&x| x == t).count()
}

pub fn df(t: u32, corpus: &[(String, Vec<u32>)]) -> usize {
    corpus.iter().filter(|(_, toks)| toks.contains(&t)).count()
}

/// TF over the retrieved set times ln(N / df), 0 when the token is absent.
pub fn tfidf(t: u32, retrieved: &[&str], corpus: &[(String, Vec<u32>)]) -> f64 {
    let mut c = 0usize;
    let mut l = 0usize;
    for id in retrieved {
        let toks = &corpus.iter().find(|(d, _)| d == id).unwrap().1;
        c += count(t, toks);
        l += toks.len();
    }
    if c == 0 || l == 0 {
        return 0.0;
    }
    let n = corpus.len() as f64;
    (c as f64 / l as f64) * (n / df(t, corpus) as f64).ln()
}

/// Per-token (occurrences, mean importance, wackiness) recomputed naively.
pub fn brute_wackiness(
    inputs: &[(String, Vec<u32>)],
    input_vectors: &[(String, Weights)],
    corpus: &[(String, Vec<u32>)],
    doc_vectors: &[(String, Weights)],
    k: usize,
    special: &BTreeSet<u32>,
) -> BTreeMap<u32, (usize, f64, f64)> {
    let mut samples: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (id, toks) in inputs {
        let v = &input_vectors.iter().find(|(vid, _)| vid == id).unwrap().1;
        let retrieved = brute_rank(v, doc_vectors, k);
        if retrieved.is_empty() {
            continue;
        }
        let ids: Vec<&str> = retrieved.iter().map(|(d, _)| d.as_str()).collect();
        for &t in v.keys() {
            if toks.contains(&t) || special.contains(&t) {
                continue;
            }
            samples.entry(t).or_default().push(tfidf(t, &ids, corpus));
        }
    }
    let means: BTreeMap<u32, (usize, f64)> = samples
        .into_iter()
        .map(|(t, s)| (t, (s.len(), s.iter().sum::<f64>() / s.len() as f64)))
        .collect();
    let lo = means.values().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let hi = means.values().map(|m| m.1).fold(f64::NEG_INFINITY, f64::max);
    means
        .into_iter()
        .map(|(t, (n, m))| {
            let w = if hi > lo { 1.0 - (m - lo) / (hi - lo) } else { 0.0 };
            (t, (n, m, w))
        })
        .collect()
}

pub fn dense(v: &Weights, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (&t, &w) in v {
        out[t as usize] = w;
    }
    out
}

pub fn dense_flops(batch: &[Vec<f64>]) -> f64 {
    let n = batch.len() as f64;
    let dim = batch[0].len();
    (0..dim)
        .map(|j| {
            let m = batch.iter().map(|v| v[j]).sum::<f64>() / n;
            m * m
        })
        .sum()
}

pub fn dense_l1(batch: &[Vec<f64>]) -> f64 {
    batch.iter().map(|v| v.iter().map(|x| x.abs()).sum::<f64>()).sum::<f64>() / batch.len() as f64
}

/// Bin means computed by assigning each rank to its bin.
pub fn bin_means(scores: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let m = sorted.len();
    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for (r, s) in sorted.iter().enumerate() {
        let bin = (0..bins)
            .find(|&i| i * m / bins <= r && r < (i + 1) * m / bins)
            .unwrap();
        sums[bin] += s;
        counts[bin] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
        .collect()
}

pub fn bm25_brute(
    query: &[u32],
    corpus: &[(String, Vec<u32>)],
    k1: f64,
    b: f64,
) -> Vec<(String, f64)> {
    let n = corpus.len() as f64;
    let avg = corpus.iter().map(|(_, t)| t.len()).sum::<usize>() as f64 / n;
    let mut qcounts: BTreeMap<u32, f64> = BTreeMap::new();
    for &t in query {
        *qcounts.entry(t).or_insert(0.0) += 1.0;
    }
    let mut scored: Vec<(String, f64)> = corpus
        .iter()
        .filter_map(|(id, toks)| {
            let mut s = 0.0;
            let mut hit = false;
            for (&t, &qw) in &qcounts {
                let tf = count(t, toks) as f64;
                if tf == 0.0 {
                    continue;
                }
                hit = true;
                let dfv = df(t, corpus) as f64;
                let idf = (1.0 + (n - dfv + 0.5) / (dfv + 0.5)).ln();
                let norm = 1.0 - b + b * toks.len() as f64 / avg;
                s += qw * idf * (tf * (k1 + 1.0) / (tf + k1 * norm));
            }
            hit.then(|| (id.clone(), s))
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    scored
}

/// Relevance-model weight of each token over score-weighted feedback docs
/// (scores shifted so the minimum is 0, uniform if all equal).
pub fn relevance_model(feedback: &[(String, f64)], corpus: &[(String, Vec<u32>)]) -> BTreeMap<u32, f64> {
    let min = feedback.iter().map(|f| f.1).fold(f64::INFINITY, f64::min);
    let total: f64 = feedback.iter().map(|f| f.1 - min).sum();
    let mut model = BTreeMap::new();
    for (id, s) in feedback {
        let w = if total > 0.0 { (s - min) / total } else { 1.0 / feedback.len() as f64 };
        let toks = &corpus.iter().find(|(d, _)| d == id).unwrap().1;
        let distinct: BTreeSet<u32> = toks.iter().copied().collect();
        for t in distinct {
            *model.entry(t).or_insert(0.0) += w * count(t, toks) as f64 / toks.len() as f64;
        }
    }
    model
}

// --- reference evaluator ---------------------------------------------------

pub fn ref_rr(ranked: &[&str], relevant: &BTreeSet<&str>, k: usize) -> f64 {
    for (i, d) in ranked.iter().enumerate() {
        if i >= k {
            break;
        }
        if relevant.contains(d) {
            return 1.0 / (i as f64 + 1.0);
        }
    }
    0.0
}

pub fn ref_recall(ranked: &[&str], relevant: &BTreeSet<&str>, k: usize) -> f64 {
    let hits = ranked.iter().take(k).filter(|d| relevant.contains(*d)).count();
    hits as f64 / relevant.len() as f64
}

pub fn ref_ndcg(ranked: &[&str], grades: &BTreeMap<&str, u32>, k: usize) -> f64 {
    let g = |d: &str| grades.get(d).copied().unwrap_or(0);
    let mut dcg = 0.0;
    for (i, d) in ranked.iter().take(k).enumerate() {
        dcg += (2f64.powi(g(d) as i32) - 1.0) / (i as f64 + 2.0).log2();
    }
    let mut ideal: Vec<u32> = grades.values().copied().filter(|&x| x > 0).collect();
    ideal.sort_by(|a, b| b.cmp(a));
    let mut idcg = 0.0;
    for (i, &x) in ideal.iter().take(k).enumerate() {
        idcg += (2f64.powi(x as i32) - 1.0) / (i as f64 + 2.0).log2();
    }
    dcg / idcg
}
