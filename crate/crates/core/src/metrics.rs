//! Ranking effectiveness measures: MRR@k, Recall@k and NDCG@k.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Qrels, Ranking};

/// Binary measures count a document as relevant from this grade upwards.
pub const DEFAULT_RELEVANCE_THRESHOLD: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    Mrr(usize),
    Recall(usize),
    Ndcg(usize),
}

impl Measure {
    pub fn depth(self) -> usize {
        match self {
            Measure::Mrr(k) | Measure::Recall(k) | Measure::Ndcg(k) => k,
        }
    }

    /// MRR@10, Recall@{10,100,1000}.
    pub fn in_domain_suite() -> Vec<Measure> {
        vec![
            Measure::Mrr(10),
            Measure::Recall(10),
            Measure::Recall(100),
            Measure::Recall(1000),
        ]
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Mrr(k) => write!(f, "MRR@{k}"),
            Measure::Recall(k) => write!(f, "Recall@{k}"),
            Measure::Ndcg(k) => write!(f, "NDCG@{k}"),
        }
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown measure `{s}` (expected e.g. MRR@10)"));
        let (name, k) = s.split_once('@').ok_or_else(bad)?;
        let k: usize = k.parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(Error::InvalidArgument(format!("measure `{s}`: depth must be >= 1")));
        }
        match name.to_ascii_lowercase().as_str() {
            "mrr" | "rr" => Ok(Measure::Mrr(k)),
            "recall" | "r" => Ok(Measure::Recall(k)),
            "ndcg" => Ok(Measure::Ndcg(k)),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub measure: Measure,
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
}

/// Evaluates every run query that has at least one relevant judgment
/// (positive grade for NDCG, grade >= `threshold` otherwise). Other run
/// queries are skipped and logged; judged queries absent from the run are not
/// evaluated. The mean over zero queries is 0.
pub fn evaluate(run: &[Ranking], qrels: &Qrels, measure: Measure, threshold: u32) -> Result<EvalResult> {
    if measure.depth() == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let mut seen = HashSet::new();
    let mut per_query = BTreeMap::new();
    for ranking in run {
        if !seen.insert(ranking.query_id.as_str()) {
            return Err(Error::validation(format!(
                "run contains query `{}` more than once",
                ranking.query_id
            )));
        }
        let value = match qrels.for_query(&ranking.query_id) {
            Some(judged) => match measure {
                Measure::Mrr(k) => reciprocal_rank(ranking, judged, k, threshold),
                Measure::Recall(k) => recall(ranking, judged, k, threshold),
                Measure::Ndcg(k) => ndcg(ranking, judged, k),
            },
            None => None,
        };
        match value {
            Some(v) => {
                per_query.insert(ranking.query_id.clone(), v);
            }
            None => log::debug!(
                "{measure}: query `{}` has no relevant judgments; excluded",
                ranking.query_id
            ),
        }
    }
    let mean = if per_query.is_empty() {
        0.0
    } else {
        per_query.values().sum::<f64>() / per_query.len() as f64
    };
    Ok(EvalResult {
        measure,
        per_query,
        mean,
    })
}

pub fn mrr_at_k(run: &[Ranking], qrels: &Qrels, k: usize) -> Result<EvalResult> {
    evaluate(run, qrels, Measure::Mrr(k), DEFAULT_RELEVANCE_THRESHOLD)
}

pub fn recall_at_k(run: &[Ranking], qrels: &Qrels, k: usize) -> Result<EvalResult> {
    evaluate(run, qrels, Measure::Recall(k), DEFAULT_RELEVANCE_THRESHOLD)
}

pub fn ndcg_at_k(run: &[Ranking], qrels: &Qrels, k: usize) -> Result<EvalResult> {
    evaluate(run, qrels, Measure::Ndcg(k), DEFAULT_RELEVANCE_THRESHOLD)
}

fn relevant_count(judged: &BTreeMap<String, u32>, threshold: u32) -> usize {
    judged.values().filter(|&&g| g >= threshold).count()
}

fn grade(judged: &BTreeMap<String, u32>, doc: &str) -> u32 {
    judged.get(doc).copied().unwrap_or(0)
}

fn reciprocal_rank(ranking: &Ranking, judged: &BTreeMap<String, u32>, k: usize, threshold: u32) -> Option<f64> {
    if relevant_count(judged, threshold) == 0 {
        return None;
    }
    Some(
        ranking
            .doc_ids()
            .take(k)
            .position(|d| grade(judged, d) >= threshold)
            .map_or(0.0, |i| 1.0 / (i + 1) as f64),
    )
}

fn recall(ranking: &Ranking, judged: &BTreeMap<String, u32>, k: usize, threshold: u32) -> Option<f64> {
    let relevant = relevant_count(judged, threshold);
    if relevant == 0 {
        return None;
    }
    let hits = ranking
        .doc_ids()
        .take(k)
        .filter(|d| grade(judged, d) >= threshold)
        .count();
    Some(hits as f64 / relevant as f64)
}

fn gain(grade: u32) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

fn discounted(grade: u32, rank0: usize) -> f64 {
    gain(grade) / ((rank0 + 2) as f64).log2()
}

fn ndcg(ranking: &Ranking, judged: &BTreeMap<String, u32>, k: usize) -> Option<f64> {
    let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
    if ideal.is_empty() {
        return None;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| discounted(g, i))
        .sum();
    let dcg: f64 = ranking
        .doc_ids()
        .take(k)
        .enumerate()
        .map(|(i, d)| discounted(grade(judged, d), i))
        .sum();
    Some(dcg / idcg)
}

/// CSV `measure,query_id,value`, one summary row per measure with query id `all`.
pub fn write_eval_csv<W: Write>(mut out: W, results: &[EvalResult]) -> std::io::Result<()> {
    writeln!(out, "measure,query_id,value")?;
    for r in results {
        for (q, v) in &r.per_query {
            writeln!(out, "{},{q},{v}", r.measure)?;
        }
    }
    for r in results {
        writeln!(out, "{},all,{}", r.measure, r.mean)?;
    }
    Ok(())
}
