//! Collection statistics over the model-vocabulary tokenization, TF-IDF
//! support and the BM25 + RM3 modular expansion baseline.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::impact::Retriever;
use crate::model::{Ranking, SparseVector, TokenId, TokenizedInput};

const FORMAT_VERSION: u32 = 1;

/// Document frequencies and lengths. Documents are numbered by ascending id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionStats {
    doc_count: usize,
    doc_freq: BTreeMap<TokenId, u32>,
    doc_len: Vec<u32>,
    total_len: u64,
}

impl CollectionStats {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn doc_freq(&self, token: TokenId) -> u32 {
        self.doc_freq.get(&token).copied().unwrap_or(0)
    }

    pub fn doc_len_by_number(&self, doc: u32) -> u32 {
        self.doc_len[doc as usize]
    }

    pub fn total_len(&self) -> u64 {
        self.total_len
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.total_len as f64 / self.doc_count as f64
    }
}

/// `ln(N / df(t))`, or `None` when the token never occurs in the collection.
pub fn idf(token: TokenId, stats: &CollectionStats) -> Option<f64> {
    match stats.doc_freq(token) {
        0 => None,
        df => Some((stats.doc_count as f64 / df as f64).ln()),
    }
}

/// Inverted and forward term-frequency index over tokenized documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalIndex {
    doc_ids: Vec<String>,
    stats: CollectionStats,
    postings: BTreeMap<TokenId, Vec<(u32, u32)>>,
    forward: Vec<Vec<(TokenId, u32)>>,
    #[serde(skip)]
    lookup: HashMap<String, u32>,
}

impl LexicalIndex {
    pub fn build(corpus: &[TokenizedInput]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::InvalidArgument("cannot index an empty corpus".into()));
        }
        let mut order: Vec<&TokenizedInput> = corpus.iter().collect();
        order.sort_by(|a, b| a.id.cmp(&b.id));
        if let Some(w) = order.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::DuplicateId(w[0].id.clone()));
        }

        let mut postings: BTreeMap<TokenId, Vec<(u32, u32)>> = BTreeMap::new();
        let mut forward = Vec::with_capacity(order.len());
        let mut doc_len = Vec::with_capacity(order.len());
        for (n, doc) in order.iter().enumerate() {
            let mut counts: BTreeMap<TokenId, u32> = BTreeMap::new();
            for &t in &doc.tokens {
                *counts.entry(t).or_insert(0) += 1;
            }
            for (&t, &tf) in &counts {
                postings.entry(t).or_default().push((n as u32, tf));
            }
            forward.push(counts.into_iter().collect());
            doc_len.push(doc.tokens.len() as u32);
        }
        let doc_freq = postings
            .iter()
            .map(|(&t, p)| (t, p.len() as u32))
            .collect();
        let stats = CollectionStats {
            doc_count: order.len(),
            doc_freq,
            total_len: doc_len.iter().map(|&l| l as u64).sum(),
            doc_len,
        };
        let mut index = Self {
            doc_ids: order.iter().map(|d| d.id.clone()).collect(),
            stats,
            postings,
            forward,
            lookup: HashMap::new(),
        };
        index.rebuild_lookup();
        Ok(index)
    }

    fn rebuild_lookup(&mut self) {
        self.lookup = self
            .doc_ids
            .iter()
            .enumerate()
            .map(|(i, d)| (d.clone(), i as u32))
            .collect();
    }

    pub fn stats(&self) -> &CollectionStats {
        &self.stats
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_number(&self, doc_id: &str) -> Option<u32> {
        self.lookup.get(doc_id).copied()
    }

    pub fn doc_len(&self, doc_id: &str) -> Option<u32> {
        self.doc_number(doc_id)
            .map(|n| self.stats.doc_len_by_number(n))
    }

    /// `(doc number, term frequency)` pairs in ascending doc number.
    pub fn postings(&self, token: TokenId) -> &[(u32, u32)] {
        self.postings.get(&token).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn posting_tokens(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.postings.keys().copied()
    }

    /// `count(t, d)` for a document number.
    pub fn count(&self, token: TokenId, doc: u32) -> u32 {
        let list = self.postings(token);
        match list.binary_search_by_key(&doc, |&(d, _)| d) {
            Ok(i) => list[i].1,
            Err(_) => 0,
        }
    }

    /// Distinct tokens of a document with their frequencies.
    pub fn doc_terms(&self, doc: u32) -> &[(TokenId, u32)] {
        &self.forward[doc as usize]
    }

    pub fn save<W: Write>(&self, out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Envelope<'a> {
            kind: &'static str,
            version: u32,
            index: &'a LexicalIndex,
        }
        serde_json::to_writer(
            out,
            &Envelope {
                kind: "lexical",
                version: FORMAT_VERSION,
                index: self,
            },
        )
        .map_err(|e| Error::validation(format!("cannot serialize lexical index: {e}")))
    }

    pub fn load<R: Read>(input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Envelope {
            kind: String,
            version: u32,
            index: LexicalIndex,
        }
        let env: Envelope =
            serde_json::from_reader(input).map_err(|e| Error::parse(1, e.to_string()))?;
        if env.kind != "lexical" || env.version != FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported index `{}` version {}",
                env.kind, env.version
            )));
        }
        let mut index = env.index;
        index.rebuild_lookup();
        Ok(index)
    }
}

/// Okapi BM25 parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4 }
    }
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`, always positive for df <= N.
pub fn bm25_idf(df: u32, doc_count: usize) -> f64 {
    let (df, n) = (df as f64, doc_count as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Saturated term-frequency component.
pub fn bm25_tf(tf: u32, doc_len: u32, avg_doc_len: f64, params: Bm25Params) -> f64 {
    let tf = tf as f64;
    let norm = 1.0 - params.b + params.b * doc_len as f64 / avg_doc_len;
    tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
}

/// BM25 with real-valued query term weights, accumulated term-at-a-time in
/// ascending token order.
pub fn bm25_search_weighted(
    query: &SparseVector,
    index: &LexicalIndex,
    k: usize,
    params: Bm25Params,
) -> Result<Ranking> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let stats = index.stats();
    let avg = stats.avg_doc_len();
    let mut acc = vec![0.0f64; stats.doc_count()];
    let mut touched = vec![false; stats.doc_count()];
    for (t, qw) in query.iter() {
        let postings = index.postings(t);
        if postings.is_empty() {
            continue;
        }
        let idf = bm25_idf(postings.len() as u32, stats.doc_count());
        for &(d, tf) in postings {
            acc[d as usize] += qw * idf * bm25_tf(tf, stats.doc_len_by_number(d), avg, params);
            touched[d as usize] = true;
        }
    }
    let candidates = touched
        .iter()
        .enumerate()
        .filter(|&(d, &hit)| hit && acc[d] > 0.0)
        .map(|(d, _)| (index.doc_ids[d].clone(), acc[d]))
        .collect();
    Ranking::from_candidates(query.id.clone(), candidates, k)
}

/// Query term counts as a weight vector.
pub fn count_vector(query: &TokenizedInput) -> SparseVector {
    let mut counts: BTreeMap<TokenId, f64> = BTreeMap::new();
    for &t in &query.tokens {
        *counts.entry(t).or_insert(0.0) += 1.0;
    }
    SparseVector::from_weights(query.id.clone(), counts).expect("counts are positive")
}

/// BM25 over a tokenized query; repeated query tokens weigh proportionally.
pub fn bm25_search(
    query: &TokenizedInput,
    index: &LexicalIndex,
    k: usize,
    params: Bm25Params,
) -> Result<Ranking> {
    bm25_search_weighted(&count_vector(query), index, k, params)
}

/// BM25 as a pluggable ranking function for the wackiness pipeline.
pub struct Bm25Retriever<'a> {
    pub index: &'a LexicalIndex,
    pub params: Bm25Params,
}

impl Retriever for Bm25Retriever<'_> {
    fn retrieve(&self, query: &SparseVector, k: usize) -> Result<Ranking> {
        bm25_search_weighted(query, self.index, k, self.params)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rm3Params {
    pub fb_docs: usize,
    pub fb_terms: usize,
    pub orig_weight: f64,
}

impl Default for Rm3Params {
    fn default() -> Self {
        Self {
            fb_docs: 10,
            fb_terms: 10,
            orig_weight: 0.5,
        }
    }
}

/// RM3 pseudo-relevance feedback.
///
/// The relevance model is `P(t|R) = sum_d w(d) * count(t,d) / len(d)` over
/// the top `fb_docs` BM25 results, where `w(d)` is the document score shifted
/// so the lowest feedback score is 0, divided by the shifted total (uniform
/// if every shifted score is 0). The model is truncated to its `fb_terms`
/// heaviest tokens (ties by ascending id), renormalized, and interpolated
/// with the normalized query term counts. The result sums to 1.
pub fn rm3_expand(
    query: &TokenizedInput,
    index: &LexicalIndex,
    params: Rm3Params,
    bm25: Bm25Params,
) -> Result<SparseVector> {
    if params.fb_docs == 0 || params.fb_terms == 0 {
        return Err(Error::InvalidArgument("fb_docs and fb_terms must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&params.orig_weight) {
        return Err(Error::InvalidArgument(format!(
            "orig_weight {} outside [0, 1]",
            params.orig_weight
        )));
    }
    let counts = count_vector(query);
    if counts.is_empty() {
        return Ok(SparseVector::empty(query.id.clone()));
    }
    let qlen = query.tokens.len() as f64;
    let original: BTreeMap<TokenId, f64> = counts.iter().map(|(t, c)| (t, c / qlen)).collect();

    let feedback = bm25_search_weighted(&counts, index, params.fb_docs, bm25)?;
    if feedback.is_empty() {
        return SparseVector::from_weights(query.id.clone(), original);
    }

    let min = feedback
        .entries()
        .iter()
        .map(|(_, s)| *s)
        .fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = feedback.entries().iter().map(|(_, s)| s - min).collect();
    let total: f64 = shifted.iter().sum();
    let doc_weights: Vec<f64> = if total > 0.0 {
        shifted.iter().map(|s| s / total).collect()
    } else {
        vec![1.0 / shifted.len() as f64; shifted.len()]
    };

    let mut model: BTreeMap<TokenId, f64> = BTreeMap::new();
    for ((doc_id, _), w) in feedback.entries().iter().zip(&doc_weights) {
        let d = index.doc_number(doc_id).expect("ranked doc is indexed");
        let len = index.stats().doc_len_by_number(d) as f64;
        for &(t, tf) in index.doc_terms(d) {
            *model.entry(t).or_insert(0.0) += w * tf as f64 / len;
        }
    }
    let mut terms: Vec<(TokenId, f64)> = model.into_iter().filter(|&(_, p)| p > 0.0).collect();
    terms.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    terms.truncate(params.fb_terms);
    let mass: f64 = terms.iter().map(|(_, p)| p).sum();
    if mass <= 0.0 {
        return SparseVector::from_weights(query.id.clone(), original);
    }

    let mut mixed: BTreeMap<TokenId, f64> = original
        .iter()
        .map(|(&t, &p)| (t, params.orig_weight * p))
        .collect();
    for (t, p) in terms {
        *mixed.entry(t).or_insert(0.0) += (1.0 - params.orig_weight) * p / mass;
    }
    SparseVector::from_weights(query.id.clone(), mixed)
}
