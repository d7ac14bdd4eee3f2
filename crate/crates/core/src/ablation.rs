//! Query-side token removal: strip the top-N wackiest expansion tokens from
//! every query vector and compare the effectiveness against removing N random
//! expansion tokens, repeated with seeded draws.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::curve::mean_and_sample_std;
use crate::error::{Error, Result};
use crate::impact::Retriever;
use crate::metrics::{evaluate, Measure, DEFAULT_RELEVANCE_THRESHOLD};
use crate::model::{Qrels, Ranking, SparseVector, TokenId, TokenizedInput};
use crate::wackiness::{expansion_set, ExpansionRecord, TokenWackinessTable};

/// Tokens the random baseline draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemovalPool {
    /// Tokens that are an expansion of at least one evaluated query.
    ExpansionObserved,
    /// Every token id below the given vocabulary size.
    FullVocabulary(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationConfig {
    /// Ascending numbers of tokens to remove.
    pub thresholds: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub measures: Vec<Measure>,
    pub removal_pool: RemovalPool,
    pub relevance_threshold: u32,
    pub special_tokens: BTreeSet<TokenId>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            thresholds: vec![100, 1000, 10000],
            repeats: 10,
            seed: 0,
            measures: Measure::in_domain_suite(),
            removal_pool: RemovalPool::ExpansionObserved,
            relevance_threshold: DEFAULT_RELEVANCE_THRESHOLD,
            special_tokens: BTreeSet::new(),
        }
    }
}

/// 100, 1000, 10000, then further powers of ten up to `scored_tokens`.
pub fn default_thresholds(scored_tokens: usize) -> Vec<usize> {
    let mut out = vec![100, 1000, 10000];
    let mut next = 100_000usize;
    while next <= scored_tokens {
        out.push(next);
        next = next.saturating_mul(10);
    }
    out
}

/// Zeroes the expansion tokens of `v` that are in `removal`; original tokens
/// are always kept.
pub fn remove_tokens(
    v: &SparseVector,
    record: &ExpansionRecord,
    removal: &BTreeSet<TokenId>,
) -> Result<SparseVector> {
    if record.input_id != v.id {
        return Err(Error::IdMismatch {
            expected: record.input_id.clone(),
            found: v.id.clone(),
        });
    }
    Ok(v.filtered(|t| !(removal.contains(&t) && record.t_exp.contains(&t))))
}

pub type Scores = BTreeMap<Measure, f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdResult {
    /// Requested N.
    pub threshold: usize,
    /// N actually removed in the wacky arm (clamped to the scored tokens).
    pub wacky_removed: usize,
    /// N actually removed per random draw (clamped to the pool).
    pub random_removed: usize,
    pub clamped: bool,
    pub wacky: Scores,
    pub random_mean: Scores,
    pub random_std: Scores,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub thresholds: Vec<ThresholdResult>,
    /// All expansion tokens kept.
    pub full: Scores,
    /// Only original tokens kept.
    pub no_expansion: Scores,
}

pub fn run_ablation(
    queries: &[TokenizedInput],
    query_vectors: &[SparseVector],
    doc_index: &dyn Retriever,
    qrels: &Qrels,
    table: &TokenWackinessTable,
    cfg: &AblationConfig,
) -> Result<AblationReport> {
    if cfg.repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    if cfg.measures.is_empty() {
        return Err(Error::InvalidArgument("at least one measure is required".into()));
    }
    if cfg.thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("thresholds must be ascending".into()));
    }
    let by_id: HashMap<&str, &SparseVector> =
        query_vectors.iter().map(|v| (v.id.as_str(), v)).collect();
    let pairs: Vec<(&SparseVector, ExpansionRecord)> = queries
        .iter()
        .map(|q| {
            let v = by_id
                .get(q.id.as_str())
                .ok_or_else(|| Error::validation(format!("no vector for query `{}`", q.id)))?;
            Ok((*v, expansion_set(q, v, &cfg.special_tokens)?))
        })
        .collect::<Result<_>>()?;

    let depth = cfg.measures.iter().map(|m| m.depth()).max().expect("non-empty");
    let score = |removal: &BTreeSet<TokenId>, only_original: bool| -> Result<Scores> {
        let run: Vec<Ranking> = pairs
            .par_iter()
            .map(|(v, rec)| {
                let q = if only_original {
                    v.filtered(|t| !rec.t_exp.contains(&t))
                } else {
                    remove_tokens(v, rec, removal)?
                };
                doc_index.retrieve(&q, depth)
            })
            .collect::<Result<_>>()?;
        cfg.measures
            .iter()
            .map(|&m| Ok((m, evaluate(&run, qrels, m, cfg.relevance_threshold)?.mean)))
            .collect()
    };

    let empty = BTreeSet::new();
    let full = score(&empty, false)?;
    let no_expansion = score(&empty, true)?;

    let ranked: Vec<TokenId> = table.ranked().into_iter().map(|(t, _)| t).collect();
    let pool: Vec<TokenId> = match cfg.removal_pool {
        RemovalPool::ExpansionObserved => pairs
            .iter()
            .flat_map(|(_, r)| r.t_exp.iter().copied())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
        RemovalPool::FullVocabulary(v) => (0..v as TokenId).collect(),
    };

    let mut thresholds = Vec::with_capacity(cfg.thresholds.len());
    for (ti, &n) in cfg.thresholds.iter().enumerate() {
        let wacky_n = n.min(ranked.len());
        let random_n = n.min(pool.len());
        let clamped = wacky_n < n || random_n < n;
        if clamped {
            log::warn!(
                "threshold {n} exceeds available tokens (scored {}, pool {}); clamped",
                ranked.len(),
                pool.len()
            );
        }
        let wacky_set: BTreeSet<TokenId> = ranked[..wacky_n].iter().copied().collect();
        let wacky = score(&wacky_set, false)?;

        let mut draws: Vec<Scores> = Vec::with_capacity(cfg.repeats);
        for r in 0..cfg.repeats {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(((ti as u64) << 32) | r as u64);
            let set: BTreeSet<TokenId> = rand::seq::index::sample(&mut rng, pool.len(), random_n)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            draws.push(score(&set, false)?);
        }
        let mut random_mean = Scores::new();
        let mut random_std = Scores::new();
        for &m in &cfg.measures {
            let values: Vec<f64> = draws.iter().map(|d| d[&m]).collect();
            let (mean, sd) = mean_and_sample_std(&values);
            random_mean.insert(m, mean);
            random_std.insert(m, sd);
        }
        thresholds.push(ThresholdResult {
            threshold: n,
            wacky_removed: wacky_n,
            random_removed: random_n,
            clamped,
            wacky,
            random_mean,
            random_std,
        });
    }

    Ok(AblationReport {
        thresholds,
        full,
        no_expansion,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub threshold: usize,
    pub measure: Measure,
    pub lower: f64,
    pub upper: f64,
    pub wacky: f64,
    /// Wacky-removal score lies outside `[mean - 2 sd, mean + 2 sd]`.
    pub outside: bool,
}

/// Random-baseline interval `mean +/- 2 sd` per threshold and measure.
pub fn significance_band(report: &AblationReport) -> Vec<Band> {
    report
        .thresholds
        .iter()
        .flat_map(|t| {
            t.random_mean.iter().map(move |(&m, &mean)| {
                let sd = t.random_std[&m];
                let (lower, upper) = (mean - 2.0 * sd, mean + 2.0 * sd);
                let wacky = t.wacky[&m];
                Band {
                    threshold: t.threshold,
                    measure: m,
                    lower,
                    upper,
                    wacky,
                    outside: wacky < lower || wacky > upper,
                }
            })
        })
        .collect()
}

impl AblationReport {
    /// CSV `threshold,measure,wacky_score,random_mean,random_std,outside_band`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "threshold,measure,wacky_score,random_mean,random_std,outside_band")?;
        let bands = significance_band(self);
        for t in &self.thresholds {
            for (m, mean) in &t.random_mean {
                let outside = bands
                    .iter()
                    .find(|b| b.threshold == t.threshold && b.measure == *m)
                    .is_some_and(|b| b.outside);
                writeln!(
                    out,
                    "{},{m},{},{mean},{},{outside}",
                    t.threshold, t.wacky[m], t.random_std[m]
                )?;
            }
        }
        Ok(())
    }

    /// CSV `condition,measure,value` for the full and no-expansion runs.
    pub fn write_endpoints_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "condition,measure,value")?;
        for (name, scores) in [("full", &self.full), ("no_expansion", &self.no_expansion)] {
            for (m, v) in scores {
                writeln!(out, "{name},{m},{v}")?;
            }
        }
        Ok(())
    }
}
