//! Inverted impact index with exact term-at-a-time top-k inner-product search.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Ranking, SparseVector, TokenId};

const FORMAT_VERSION: u32 = 1;

/// A ranking function usable as the retrieval step of the wackiness pipeline.
pub trait Retriever: Sync {
    fn retrieve(&self, query: &SparseVector, k: usize) -> Result<Ranking>;
}

/// Postings of `(doc number, impact)`; doc numbers follow ascending doc id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactIndex {
    doc_ids: Vec<String>,
    postings: BTreeMap<TokenId, Vec<(u32, f64)>>,
}

impl ImpactIndex {
    pub fn build(vectors: &[SparseVector]) -> Result<Self> {
        let mut order: Vec<&SparseVector> = vectors.iter().collect();
        order.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = order.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateId(w[0].id.clone()));
        }
        let mut postings: BTreeMap<TokenId, Vec<(u32, f64)>> = BTreeMap::new();
        for (n, v) in order.iter().enumerate() {
            for (t, w) in v.iter() {
                postings.entry(t).or_default().push((n as u32, w));
            }
        }
        Ok(Self {
            doc_ids: order.iter().map(|v| v.id.clone()).collect(),
            postings,
        })
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn postings(&self, token: TokenId) -> &[(u32, f64)] {
        self.postings.get(&token).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `(token, posting length)` for every non-empty posting list.
    pub fn posting_lengths(&self) -> impl Iterator<Item = (TokenId, usize)> + '_ {
        self.postings.iter().map(|(&t, p)| (t, p.len()))
    }

    /// Top-k documents by inner product; zero-score documents are never returned.
    pub fn search(&self, query: &SparseVector, k: usize) -> Result<Ranking> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        let mut acc = vec![0.0f64; self.doc_ids.len()];
        let mut touched: Vec<u32> = Vec::new();
        // Ascending token order fixes the summation order for each document.
        for (t, qw) in query.iter() {
            for &(d, w) in self.postings(t) {
                if acc[d as usize] == 0.0 {
                    touched.push(d);
                }
                acc[d as usize] += qw * w;
            }
        }
        touched.sort_unstable();
        touched.dedup();
        let candidates = touched
            .into_iter()
            .filter(|&d| acc[d as usize] > 0.0)
            .map(|d| (self.doc_ids[d as usize].clone(), acc[d as usize]))
            .collect();
        Ranking::from_candidates(query.id.clone(), candidates, k)
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Envelope<'a> {
            kind: &'static str,
            version: u32,
            index: &'a ImpactIndex,
        }
        serde_json::to_writer(
            out,
            &Envelope {
                kind: "impact",
                version: FORMAT_VERSION,
                index: self,
            },
        )
        .map_err(|e| Error::validation(format!("cannot serialize impact index: {e}")))
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Envelope {
            kind: String,
            version: u32,
            index: ImpactIndex,
        }
        let env: Envelope =
            serde_json::from_reader(input).map_err(|e| Error::parse(1, e.to_string()))?;
        if env.kind != "impact" || env.version != FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported index `{}` version {}",
                env.kind, env.version
            )));
        }
        Ok(env.index)
    }
}

impl Retriever for ImpactIndex {
    fn retrieve(&self, query: &SparseVector, k: usize) -> Result<Ranking> {
        self.search(query, k)
    }
}

/// Reference scorer: inner product of the query with every document.
pub fn exhaustive_search(query: &SparseVector, docs: &[SparseVector], k: usize) -> Result<Ranking> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let candidates = docs
        .iter()
        .map(|d| (d.id.clone(), query.dot(d)))
        .filter(|(_, s)| *s > 0.0)
        .collect();
    Ranking::from_candidates(query.id.clone(), candidates, k)
}
