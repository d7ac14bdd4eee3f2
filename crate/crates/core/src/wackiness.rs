//! Per-token Wackiness Scores.
//!
//! For every input the expansion tokens (activated tokens absent from the
//! input's own tokenization) are scored by their TF-IDF importance inside the
//! documents the input's vector retrieves. A token's importance is averaged
//! over every input that expands to it, min-max normalized across tokens, and
//! flipped so that 1 marks the least lexically grounded expansion.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impact::Retriever;
use crate::lexical::{idf, LexicalIndex};
use crate::model::{Ranking, SparseVector, TokenId, TokenizedInput, Vocabulary};

/// Original, activated and expansion token sets of one input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionRecord {
    pub input_id: String,
    pub t_orig: BTreeSet<TokenId>,
    pub t_model: BTreeSet<TokenId>,
    pub t_exp: BTreeSet<TokenId>,
}

/// Splits a vector's support into original and expansion tokens.
///
/// Special tokens are counted as original so tokenizer artifacts never
/// surface as expansions.
pub fn expansion_set(
    input: &TokenizedInput,
    vector: &SparseVector,
    special_tokens: &BTreeSet<TokenId>,
) -> Result<ExpansionRecord> {
    if input.id != vector.id {
        return Err(Error::IdMismatch {
            expected: input.id.clone(),
            found: vector.id.clone(),
        });
    }
    let mut t_orig = input.distinct_tokens();
    t_orig.extend(special_tokens.iter().copied());
    let t_model = vector.support();
    let t_exp = t_model.difference(&t_orig).copied().collect();
    Ok(ExpansionRecord {
        input_id: input.id.clone(),
        t_orig,
        t_model,
        t_exp,
    })
}

/// TF-IDF importance of `token` inside the retrieved documents:
/// `(sum count(t,d) / sum len(d)) * ln(N / df(t))`.
///
/// Zero when the token does not occur in the retrieved set (the IDF is then
/// never evaluated) or when the retrieved documents are all empty.
pub fn lexical_importance(token: TokenId, ranked: &Ranking, index: &LexicalIndex) -> Result<f64> {
    let mut count: u64 = 0;
    let mut len: u64 = 0;
    for doc_id in ranked.doc_ids() {
        let d = index.doc_number(doc_id).ok_or_else(|| {
            Error::validation(format!("retrieved document `{doc_id}` is missing from the corpus"))
        })?;
        count += index.count(token, d) as u64;
        len += index.stats().doc_len_by_number(d) as u64;
    }
    if count == 0 || len == 0 {
        return Ok(0.0);
    }
    let idf = idf(token, index.stats()).expect("token occurs in a retrieved document");
    Ok(count as f64 / len as f64 * idf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WackinessConfig {
    /// Retrieval depth for the neighbourhood of each input.
    pub k: usize,
    pub special_tokens: BTreeSet<TokenId>,
    /// Drop the input itself from its own neighbourhood (document-side runs).
    pub exclude_self: bool,
}

impl Default for WackinessConfig {
    fn default() -> Self {
        Self {
            k: 10,
            special_tokens: BTreeSet::new(),
            exclude_self: false,
        }
    }
}

/// `S(t, x)` for every expansion token of one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSamples {
    pub input_id: String,
    /// False when retrieval returned nothing; such inputs carry no samples.
    pub retrieved: bool,
    pub samples: BTreeMap<TokenId, f64>,
}

/// Importance samples of a whole input set, in input order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    pub inputs: Vec<InputSamples>,
}

impl SampleSet {
    pub fn input_ids(&self) -> impl Iterator<Item = &str> {
        self.inputs.iter().map(|i| i.input_id.as_str())
    }

    /// Table over all inputs.
    pub fn table(&self) -> TokenWackinessTable {
        self.table_with_multiplicity(&vec![1; self.inputs.len()])
    }

    /// Table where input `i` is counted `multiplicity[i]` times (bootstrap resamples).
    pub fn table_with_multiplicity(&self, multiplicity: &[usize]) -> TokenWackinessTable {
        assert_eq!(multiplicity.len(), self.inputs.len());
        let mut acc: BTreeMap<TokenId, (usize, f64)> = BTreeMap::new();
        for (input, &m) in self.inputs.iter().zip(multiplicity) {
            for _ in 0..m {
                for (&t, &s) in &input.samples {
                    let e = acc.entry(t).or_insert((0, 0.0));
                    e.0 += 1;
                    e.1 += s;
                }
            }
        }
        TokenWackinessTable::from_means(
            acc.into_iter()
                .map(|(t, (n, sum))| (t, n, sum / n as f64)),
        )
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for input in &self.inputs {
            serde_json::to_writer(&mut out, input)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut inputs = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::parse(i + 1, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: InputSamples =
                serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            if let Some((t, s)) = rec.samples.iter().find(|(_, s)| !s.is_finite() || **s < 0.0) {
                return Err(Error::validation(format!(
                    "input `{}`: invalid importance {s} for token {t}",
                    rec.input_id
                )));
            }
            inputs.push(rec);
        }
        Ok(Self { inputs })
    }
}

/// Collects `S(t, x)` for every input, retrieving each input's neighbourhood
/// with `retriever`. Documents used as inputs go through the same path.
pub fn importance_samples(
    inputs: &[TokenizedInput],
    vectors: &[SparseVector],
    retriever: &dyn Retriever,
    lexical: &LexicalIndex,
    cfg: &WackinessConfig,
) -> Result<SampleSet> {
    if cfg.k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let by_id: HashMap<&str, &SparseVector> = vectors.iter().map(|v| (v.id.as_str(), v)).collect();
    if by_id.len() != vectors.len() {
        return Err(Error::validation("vector file contains duplicate ids"));
    }

    let per_input: Vec<InputSamples> = inputs
        .par_iter()
        .map(|input| {
            let vector = by_id.get(input.id.as_str()).ok_or_else(|| {
                Error::validation(format!("no vector for input `{}`", input.id))
            })?;
            let record = expansion_set(input, vector, &cfg.special_tokens)?;
            let ranked = neighbourhood(input, vector, retriever, cfg)?;
            if ranked.is_empty() {
                log::info!("input `{}` retrieved no documents; no samples", input.id);
                return Ok(InputSamples {
                    input_id: input.id.clone(),
                    retrieved: false,
                    samples: BTreeMap::new(),
                });
            }
            let samples = record
                .t_exp
                .iter()
                .map(|&t| Ok((t, lexical_importance(t, &ranked, lexical)?)))
                .collect::<Result<_>>()?;
            Ok(InputSamples {
                input_id: input.id.clone(),
                retrieved: true,
                samples,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SampleSet { inputs: per_input })
}

fn neighbourhood(
    input: &TokenizedInput,
    vector: &SparseVector,
    retriever: &dyn Retriever,
    cfg: &WackinessConfig,
) -> Result<Ranking> {
    if !cfg.exclude_self {
        return retriever.retrieve(vector, cfg.k);
    }
    let ranked = retriever.retrieve(vector, cfg.k + 1)?;
    let kept = ranked
        .entries()
        .iter()
        .filter(|(d, _)| *d != input.id)
        .cloned()
        .collect();
    Ranking::from_candidates(ranked.query_id, kept, cfg.k)
}

/// Full pipeline: expansion, retrieval, lexical importance, averaging.
pub fn wackiness_scores(
    inputs: &[TokenizedInput],
    vectors: &[SparseVector],
    retriever: &dyn Retriever,
    lexical: &LexicalIndex,
    cfg: &WackinessConfig,
) -> Result<TokenWackinessTable> {
    Ok(importance_samples(inputs, vectors, retriever, lexical, cfg)?.table())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TokenScore {
    /// `|X_t|`: inputs in which the token was an expansion.
    pub occurrences: usize,
    pub mean_importance: f64,
    pub wackiness: f64,
}

/// Scored tokens; tokens that never appeared as an expansion are absent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TokenWackinessTable {
    rows: BTreeMap<TokenId, TokenScore>,
    normalization: Option<(f64, f64)>,
}

impl TokenWackinessTable {
    /// Normalizes `(token, occurrences, mean)` triples. When every mean is
    /// equal all tokens get wackiness 0.
    pub fn from_means(means: impl IntoIterator<Item = (TokenId, usize, f64)>) -> Self {
        let means: Vec<(TokenId, usize, f64)> = means.into_iter().filter(|m| m.1 > 0).collect();
        if means.is_empty() {
            return Self::default();
        }
        let min = means.iter().map(|m| m.2).fold(f64::INFINITY, f64::min);
        let max = means.iter().map(|m| m.2).fold(f64::NEG_INFINITY, f64::max);
        let rows = means
            .into_iter()
            .map(|(t, n, mean)| {
                let wackiness = if max > min {
                    1.0 - (mean - min) / (max - min)
                } else {
                    0.0
                };
                (
                    t,
                    TokenScore {
                        occurrences: n,
                        mean_importance: mean,
                        wackiness,
                    },
                )
            })
            .collect();
        Self {
            rows,
            normalization: Some((min, max)),
        }
    }

    pub fn get(&self, token: TokenId) -> Option<&TokenScore> {
        self.rows.get(&token)
    }

    pub fn rows(&self) -> &BTreeMap<TokenId, TokenScore> {
        &self.rows
    }

    pub fn normalization(&self) -> Option<(f64, f64)> {
        self.normalization
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Tokens by wackiness descending, ties by ascending token id.
    pub fn ranked(&self) -> Vec<(TokenId, TokenScore)> {
        let mut out: Vec<(TokenId, TokenScore)> = self.rows.iter().map(|(&t, &s)| (t, s)).collect();
        out.sort_by(|a, b| b.1.wackiness.total_cmp(&a.1.wackiness).then(a.0.cmp(&b.0)));
        out
    }

    /// CSV `token_id,token_string,occurrences,mean_importance,wackiness`, ranked.
    pub fn write_csv<W: Write>(&self, out: W, vocab: &Vocabulary) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::validation(format!("csv write failed: {e}"));
        w.write_record(["token_id", "token_string", "occurrences", "mean_importance", "wackiness"])
            .map_err(csv_err)?;
        for (t, s) in self.ranked() {
            w.write_record([
                t.to_string(),
                vocab.token(t).unwrap_or_default().to_string(),
                s.occurrences.to_string(),
                s.mean_importance.to_string(),
                s.wackiness.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::validation(format!("csv write failed: {e}")))
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut rows = BTreeMap::new();
        for (i, rec) in r.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::parse(line, e.to_string()))?;
            let field = |j: usize| rec.get(j).ok_or_else(|| Error::parse(line, "missing column"));
            let num = |j: usize| -> Result<f64> {
                field(j)?
                    .parse()
                    .map_err(|_| Error::parse(line, format!("invalid number in column {}", j + 1)))
            };
            let token: TokenId = field(0)?
                .parse()
                .map_err(|_| Error::parse(line, "invalid token id"))?;
            let occurrences: usize = field(2)?
                .parse()
                .map_err(|_| Error::parse(line, "invalid occurrence count"))?;
            let score = TokenScore {
                occurrences,
                mean_importance: num(3)?,
                wackiness: num(4)?,
            };
            if occurrences == 0 || !(0.0..=1.0).contains(&score.wackiness) {
                return Err(Error::validation(format!(
                    "line {line}: occurrences must be >= 1 and wackiness in [0, 1]"
                )));
            }
            if rows.insert(token, score).is_some() {
                return Err(Error::validation(format!("line {line}: duplicate token {token}")));
            }
        }
        let normalization = (!rows.is_empty()).then(|| {
            let means = rows.values().map(|s: &TokenScore| s.mean_importance);
            (
                means.clone().fold(f64::INFINITY, f64::min),
                means.fold(f64::NEG_INFINITY, f64::max),
            )
        });
        Ok(Self {
            rows,
            normalization,
        })
    }
}

/// The `n` wackiest tokens with their strings.
pub fn top_wacky_report(table: &TokenWackinessTable, vocab: &Vocabulary, n: usize) -> Vec<(TokenId, String, f64)> {
    table
        .ranked()
        .into_iter()
        .take(n)
        .map(|(t, s)| (t, vocab.token(t).unwrap_or_default().to_string(), s.wackiness))
        .collect()
}
