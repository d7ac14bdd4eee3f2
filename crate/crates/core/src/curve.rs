//! Normalized Wackiness Curve, W-AUC, and bootstrap comparison of models.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::wackiness::{SampleSet, TokenWackinessTable};

pub const DEFAULT_BINS: usize = 100;

/// Which tokens the bins partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BinDomain {
    /// Only tokens that received a score.
    #[default]
    Scored,
    /// The whole vocabulary; unscored tokens count as wackiness 1.0.
    PadToVocabulary(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WackinessCurve {
    pub bin_means: Vec<f64>,
    pub scored_token_count: usize,
}

impl WackinessCurve {
    pub fn bin_count(&self) -> usize {
        self.bin_means.len()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin_index,bin_mean")?;
        for (i, m) in self.bin_means.iter().enumerate() {
            writeln!(out, "{i},{m}")?;
        }
        Ok(())
    }
}

/// Bins scores sorted in descending order; bin `i` covers ranks
/// `floor(i*M/B) .. floor((i+1)*M/B)`. Empty bins have mean 0.
pub fn curve_from_scores(mut scores: Vec<f64>, bins: usize) -> Result<WackinessCurve> {
    if bins == 0 {
        return Err(Error::InvalidArgument("bin count must be >= 1".into()));
    }
    if scores.is_empty() {
        return Err(Error::validation("no scored tokens to build a curve from"));
    }
    scores.sort_by(|a, b| b.total_cmp(a));
    let m = scores.len();
    let bin_means = (0..bins)
        .map(|i| {
            let (lo, hi) = (i * m / bins, (i + 1) * m / bins);
            if hi > lo {
                scores[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
            } else {
                0.0
            }
        })
        .collect();
    Ok(WackinessCurve {
        bin_means,
        scored_token_count: m,
    })
}

pub fn build_curve(table: &TokenWackinessTable, bins: usize, domain: BinDomain) -> Result<WackinessCurve> {
    let mut scores: Vec<f64> = table.ranked().into_iter().map(|(_, s)| s.wackiness).collect();
    let scored = scores.len();
    if scored == 0 {
        return Err(Error::validation("no scored tokens to build a curve from"));
    }
    if let BinDomain::PadToVocabulary(v) = domain {
        if v < scored {
            return Err(Error::InvalidArgument(format!(
                "vocabulary size {v} is smaller than the {scored} scored tokens"
            )));
        }
        scores.resize(v, 1.0);
    }
    let mut curve = curve_from_scores(scores, bins)?;
    curve.scored_token_count = scored;
    Ok(curve)
}

/// Mean of the bin means: the area under the step curve on a unit x-axis.
pub fn w_auc(curve: &WackinessCurve) -> f64 {
    curve.bin_means.iter().sum::<f64>() / curve.bin_means.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelComparison {
    pub name: String,
    /// W-AUC of each bootstrap run.
    pub runs: Vec<f64>,
    pub w_auc: f64,
    pub two_sigma: f64,
    /// Significance letters; models sharing a letter are not distinguishable.
    pub group: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Sorted by ascending W-AUC, ties by name.
    pub models: Vec<ModelComparison>,
    /// Bonferroni-adjusted two-sided p-values, keyed by sorted-model positions `(i, j)`, `i < j`.
    pub adjusted_p: Vec<((usize, usize), f64)>,
}

impl ComparisonReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "model,w_auc,two_sigma,group")?;
        for m in &self.models {
            writeln!(out, "{},{},{},{}", m.name, m.w_auc, m.two_sigma, m.group)?;
        }
        Ok(())
    }
}

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Bootstraps W-AUC for each model over a shared input set and groups models
/// with a paired t-test (Bonferroni corrected) across the bootstrap runs.
///
/// Run `r` resamples the inputs with a generator seeded by `seed` on stream
/// `r`, and every model sees the same resample.
pub fn compare_models(
    models: &[(String, SampleSet)],
    bins: usize,
    domain: BinDomain,
    repeats: usize,
    seed: u64,
) -> Result<ComparisonReport> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be >= 1".into()));
    }
    let Some((_, first)) = models.first() else {
        return Err(Error::InvalidArgument("no models to compare".into()));
    };
    let ids: Vec<&str> = {
        let set: BTreeSet<&str> = first.input_ids().collect();
        set.into_iter().collect()
    };
    if ids.len() != first.inputs.len() {
        return Err(Error::validation("duplicate input ids in sample set"));
    }
    let mut positions: Vec<Vec<usize>> = Vec::with_capacity(models.len());
    for (name, samples) in models {
        let lookup: HashMap<&str, usize> = samples
            .input_ids()
            .enumerate()
            .map(|(i, id)| (id, i))
            .collect();
        if lookup.len() != ids.len() || samples.inputs.len() != ids.len() {
            return Err(Error::validation(format!(
                "model `{name}` was run on a different input set"
            )));
        }
        positions.push(
            ids.iter()
                .map(|id| {
                    lookup.get(id).copied().ok_or_else(|| {
                        Error::validation(format!("model `{name}` lacks input `{id}`"))
                    })
                })
                .collect::<Result<_>>()?,
        );
    }

    let n = ids.len();
    let runs: Vec<Vec<f64>> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut draws = vec![0usize; n];
            for _ in 0..n {
                draws[rng.random_range(0..n)] += 1;
            }
            models
                .iter()
                .zip(&positions)
                .map(|((_, samples), pos)| {
                    let mut multiplicity = vec![0usize; n];
                    for (canonical, &count) in draws.iter().enumerate() {
                        multiplicity[pos[canonical]] = count;
                    }
                    let table = samples.table_with_multiplicity(&multiplicity);
                    Ok(w_auc(&build_curve(&table, bins, domain)?))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut out: Vec<ModelComparison> = models
        .iter()
        .enumerate()
        .map(|(m, (name, _))| {
            let values: Vec<f64> = runs.iter().map(|r| r[m]).collect();
            let (mean, sd) = mean_and_sample_std(&values);
            ModelComparison {
                name: name.clone(),
                runs: values,
                w_auc: mean,
                two_sigma: 2.0 * sd,
                group: String::new(),
            }
        })
        .collect();
    out.sort_by(|a, b| a.w_auc.total_cmp(&b.w_auc).then_with(|| a.name.cmp(&b.name)));

    let pairs = out.len() * out.len().saturating_sub(1) / 2;
    let mut adjusted_p = Vec::with_capacity(pairs);
    for i in 0..out.len() {
        for j in i + 1..out.len() {
            let p = paired_t_test(&out[i].runs, &out[j].runs);
            adjusted_p.push(((i, j), (p * pairs as f64).min(1.0)));
        }
    }
    let significant = |i: usize, j: usize| {
        let key = (i.min(j), i.max(j));
        adjusted_p
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, p)| *p < SIGNIFICANCE_LEVEL)
            .unwrap_or(false)
    };
    for (letter, members) in letter_groups(out.len(), significant).into_iter().enumerate() {
        let c = group_letter(letter);
        for m in members {
            out[m].group.push_str(&c);
        }
    }
    Ok(ComparisonReport {
        models: out,
        adjusted_p,
    })
}

fn group_letter(i: usize) -> String {
    let mut s = String::new();
    let mut i = i;
    loop {
        s.insert(0, (b'a' + (i % 26) as u8) as char);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    s
}

/// Maximal runs of consecutive (sorted) models that are pairwise
/// indistinguishable; each run not contained in an earlier one gets a letter.
fn letter_groups(n: usize, significant: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for start in 0..n {
        let mut end = start;
        while end + 1 < n && (start..=end).all(|k| !significant(k, end + 1)) {
            end += 1;
        }
        if !groups.iter().any(|&(s, e)| s <= start && end <= e) {
            groups.push((start, end));
        }
    }
    groups.into_iter().map(|(s, e)| (s..=e).collect()).collect()
}

/// Mean and sample standard deviation (n - 1 denominator; 0 for one value).
/// Sums are taken relative to the first value, so identical inputs give that
/// value back exactly with zero spread.
pub fn mean_and_sample_std(values: &[f64]) -> (f64, f64) {
    let Some(&pivot) = values.first() else {
        return (0.0, 0.0);
    };
    let n = values.len() as f64;
    let mean = pivot + values.iter().map(|v| v - pivot).sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Two-sided p-value of a paired t-test. Fewer than two pairs, or identical
/// samples, give p = 1; a constant non-zero difference gives p = 0.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.len() < 2 {
        return 1.0;
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, sd) = mean_and_sample_std(&diffs);
    if sd == 0.0 {
        return if mean == 0.0 { 1.0 } else { 0.0 };
    }
    let t = mean / (sd / (diffs.len() as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (diffs.len() - 1) as f64).expect("df >= 1");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}
