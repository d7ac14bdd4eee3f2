//! Domain types shared by every analysis stage.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into the model vocabulary.
pub type TokenId = u32;

/// Dense model vocabulary; the token id is the position in `tokens`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::validation("vocabulary must contain at least one token"));
        }
        Ok(Self { tokens })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, id: TokenId) -> bool {
        (id as usize) < self.tokens.len()
    }

    /// Ids of all tokens whose string equals one of `names`.
    pub fn ids_of<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> BTreeSet<TokenId> {
        let wanted: BTreeSet<&str> = names.into_iter().collect();
        self.iter()
            .filter(|(_, s)| wanted.contains(s))
            .map(|(id, _)| id)
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, &str)> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, s)| (i as TokenId, s.as_str()))
    }
}

/// A query or document as produced by the model tokenizer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedInput {
    pub id: String,
    pub tokens: Vec<TokenId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl TokenizedInput {
    pub fn new(id: impl Into<String>, tokens: Vec<TokenId>) -> Self {
        Self {
            id: id.into(),
            tokens,
            text: None,
        }
    }

    /// Empty token sequences are accepted but carry no lexical evidence.
    pub fn is_degenerate(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn distinct_tokens(&self) -> BTreeSet<TokenId> {
        self.tokens.iter().copied().collect()
    }

    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        match self.tokens.iter().find(|&&t| t as usize >= vocab_size) {
            Some(t) => Err(Error::validation(format!(
                "record `{}`: token {t} out of range (|V| = {vocab_size})",
                self.id
            ))),
            None => Ok(()),
        }
    }
}

/// Sparse vocabulary-space representation with strictly positive stored weights.
///
/// Weights live in a `BTreeMap` so every reduction over a vector runs in
/// ascending token order, which keeps floating point sums reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub id: String,
    weights: BTreeMap<TokenId, f64>,
}

impl SparseVector {
    pub fn empty(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            weights: BTreeMap::new(),
        }
    }

    /// Builds a vector from non-negative weights, dropping zeros.
    pub fn from_weights(
        id: impl Into<String>,
        weights: impl IntoIterator<Item = (TokenId, f64)>,
    ) -> Result<Self> {
        let id = id.into();
        let mut out = BTreeMap::new();
        for (t, w) in weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::validation(format!(
                    "vector `{id}`: weight {w} for token {t} is not a finite non-negative number"
                )));
            }
            if w > 0.0 {
                out.insert(t, w);
            }
        }
        Ok(Self { id, weights: out })
    }

    pub fn weights(&self) -> &BTreeMap<TokenId, f64> {
        &self.weights
    }

    pub fn get(&self, token: TokenId) -> f64 {
        self.weights.get(&token).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Activated tokens: `{t : v[t] > 0}`.
    pub fn support(&self) -> BTreeSet<TokenId> {
        self.weights.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, f64)> + '_ {
        self.weights.iter().map(|(&t, &w)| (t, w))
    }

    /// Copy keeping only the tokens for which `keep` returns true.
    pub fn filtered(&self, mut keep: impl FnMut(TokenId) -> bool) -> Self {
        Self {
            id: self.id.clone(),
            weights: self
                .weights
                .iter()
                .filter(|(&t, _)| keep(t))
                .map(|(&t, &w)| (t, w))
                .collect(),
        }
    }

    /// Inner product, summed in ascending token order over the shared support.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let mut score = 0.0;
        for (t, w) in self.iter() {
            if let Some(&d) = other.weights.get(&t) {
                score += w * d;
            }
        }
        score
    }

    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        match self.weights.keys().find(|&&t| t as usize >= vocab_size) {
            Some(t) => Err(Error::validation(format!(
                "vector `{}`: token {t} out of range (|V| = {vocab_size})",
                self.id
            ))),
            None => Ok(()),
        }
    }
}

/// One position of a per-token output matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenRow {
    pub position: usize,
    pub weights: BTreeMap<TokenId, f64>,
}

/// Per-position vocabulary outputs before pooling; either activated or raw logits.
#[derive(Debug, Clone, PartialEq)]
pub struct PerTokenMatrix {
    pub id: String,
    rows: Vec<TokenRow>,
    cls_position: Option<usize>,
}

impl PerTokenMatrix {
    pub fn new(id: impl Into<String>, rows: Vec<TokenRow>, cls_position: Option<usize>) -> Result<Self> {
        let id = id.into();
        if rows.windows(2).any(|w| w[0].position >= w[1].position) {
            return Err(Error::validation(format!(
                "matrix `{id}`: row positions must be strictly increasing"
            )));
        }
        if let Some(cls) = cls_position {
            if !rows.iter().any(|r| r.position == cls) {
                return Err(Error::validation(format!(
                    "matrix `{id}`: cls_pos {cls} does not refer to an existing row"
                )));
            }
        }
        if let Some((t, w)) = rows
            .iter()
            .flat_map(|r| r.weights.iter())
            .find(|(_, w)| !w.is_finite())
        {
            return Err(Error::validation(format!(
                "matrix `{id}`: non-finite weight {w} for token {t}"
            )));
        }
        Ok(Self {
            id,
            rows,
            cls_position,
        })
    }

    pub fn rows(&self) -> &[TokenRow] {
        &self.rows
    }

    pub fn cls_position(&self) -> Option<usize> {
        self.cls_position
    }

    pub fn cls_row(&self) -> Option<&TokenRow> {
        let cls = self.cls_position?;
        self.rows.iter().find(|r| r.position == cls)
    }

    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        for row in &self.rows {
            if let Some(t) = row.weights.keys().find(|&&t| t as usize >= vocab_size) {
                return Err(Error::validation(format!(
                    "matrix `{}`: token {t} out of range (|V| = {vocab_size})",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Graded relevance judgments, keyed by query then document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, query_id: impl Into<String>, doc_id: impl Into<String>, grade: u32) {
        self.judgments
            .entry(query_id.into())
            .or_default()
            .insert(doc_id.into(), grade);
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.judgments
            .get(query_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn for_query(&self, query_id: &str) -> Option<&BTreeMap<String, u32>> {
        self.judgments.get(query_id)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, u32)> {
        self.judgments.iter().flat_map(|(q, docs)| {
            docs.iter()
                .map(move |(d, &g)| (q.as_str(), d.as_str(), g))
        })
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.judgments.is_empty()
    }
}

/// Orders `(doc_id, score)` by score descending, then doc id ascending.
pub fn rank_order(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

/// Ranked retrieval result for a single query.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub query_id: String,
    entries: Vec<(String, f64)>,
}

impl Ranking {
    pub fn empty(query_id: impl Into<String>) -> Self {
        Self {
            query_id: query_id.into(),
            entries: Vec::new(),
        }
    }

    /// Sorts candidates into rank order and keeps the first `k`.
    pub fn from_candidates(
        query_id: impl Into<String>,
        mut candidates: Vec<(String, f64)>,
        k: usize,
    ) -> Result<Self> {
        let query_id = query_id.into();
        candidates.sort_by(rank_order);
        if let Some(w) = candidates.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::validation(format!(
                "ranking `{query_id}`: duplicate document `{}`",
                w[0].0
            )));
        }
        candidates.truncate(k);
        Ok(Self {
            query_id,
            entries: candidates,
        })
    }

    pub fn entries(&self) -> &[(String, f64)] {
        &self.entries
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(d, _)| d.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_vector_drops_zero_and_rejects_negative() {
        let v = SparseVector::from_weights("q1", [(2, 1.5), (7, 0.0)]).unwrap();
        assert_eq!(v.support().into_iter().collect::<Vec<_>>(), vec![2]);
        assert!(SparseVector::from_weights("q1", [(2, -0.1)]).is_err());
        assert!(SparseVector::from_weights("q1", [(2, f64::NAN)]).is_err());
    }

    #[test]
    fn ranking_breaks_ties_by_doc_id() {
        let r = Ranking::from_candidates(
            "q",
            vec![("b".into(), 1.0), ("a".into(), 1.0), ("c".into(), 2.0)],
            10,
        )
        .unwrap();
        let ids: Vec<_> = r.doc_ids().collect();
        assert_eq!(ids, ["c", "a", "b"]);
    }

    #[test]
    fn ranking_rejects_duplicates() {
        let err = Ranking::from_candidates("q", vec![("a".into(), 1.0), ("a".into(), 0.5)], 10);
        assert!(err.is_err());
    }

    #[test]
    fn per_token_matrix_checks_positions_and_cls() {
        let row = |p| TokenRow {
            position: p,
            weights: BTreeMap::new(),
        };
        assert!(PerTokenMatrix::new("m", vec![row(1), row(1)], None).is_err());
        assert!(PerTokenMatrix::new("m", vec![row(0), row(2)], Some(1)).is_err());
        let m = PerTokenMatrix::new("m", vec![row(0), row(2)], Some(2)).unwrap();
        assert_eq!(m.cls_row().unwrap().position, 2);
    }

    #[test]
    fn tokenized_input_range_check() {
        let input = TokenizedInput::new("d3", vec![99]);
        let err = input.validate(3).unwrap_err().to_string();
        assert!(err.contains("token 99 out of range"), "{err}");
        assert!(TokenizedInput::new("d2", vec![]).is_degenerate());
    }
}
