//! Synthetic sparse "models" for desk-scale end-to-end runs.
//!
//! Documents are drawn from per-topic token distributions, so nearest
//! neighbours share vocabulary. Every input (document or query) then gets a
//! sparse vector made of its own tokens plus a handful of expansion tokens.
//! An expansion slot is filled either from a same-topic document's token
//! multiset (grounded expansion) or uniformly from the vocabulary (noise).
//! Both candidates are always drawn so the random stream does not depend on
//! the profile; `mixed(0.0)` therefore reproduces `lexical-overlap` exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Qrels, SparseVector, TokenId, TokenizedInput, Vocabulary};

/// How expansion tokens are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExpansionProfile {
    /// Expansions come from same-topic documents.
    LexicalOverlap,
    /// Expansions are uniform vocabulary samples.
    RandomToken,
    /// Each slot is a uniform sample with probability `p`, grounded otherwise.
    Mixed(f64),
}

impl ExpansionProfile {
    fn random_probability(self) -> f64 {
        match self {
            ExpansionProfile::LexicalOverlap => 0.0,
            ExpansionProfile::RandomToken => 1.0,
            ExpansionProfile::Mixed(p) => p,
        }
    }
}

impl fmt::Display for ExpansionProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExpansionProfile::LexicalOverlap => f.write_str("lexical-overlap"),
            ExpansionProfile::RandomToken => f.write_str("random-token"),
            ExpansionProfile::Mixed(p) => write!(f, "mixed:{p}"),
        }
    }
}

impl FromStr for ExpansionProfile {
    type Err = Error;

    /// Accepts `lexical-overlap`, `random-token`, `mixed:P` and `mixed(P)`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lexical-overlap" => return Ok(Self::LexicalOverlap),
            "random-token" => return Ok(Self::RandomToken),
            _ => {}
        }
        let p = s
            .strip_prefix("mixed:")
            .or_else(|| s.strip_prefix("mixed(").and_then(|r| r.strip_suffix(')')))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown expansion profile `{s}`")))?;
        let p: f64 = p
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("invalid mixture probability `{p}`")))?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "mixture probability {p} outside [0, 1]"
            )));
        }
        Ok(Self::Mixed(p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub vocab_size: usize,
    pub corpus_size: usize,
    pub query_count: usize,
    pub profile: ExpansionProfile,
    pub seed: u64,
}

/// Which expansion tokens of one input came from which source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Injection {
    pub lexical: BTreeSet<TokenId>,
    pub random: BTreeSet<TokenId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticModel {
    pub vocabulary: Vocabulary,
    pub corpus: Vec<TokenizedInput>,
    pub queries: Vec<TokenizedInput>,
    pub doc_vectors: Vec<SparseVector>,
    pub query_vectors: Vec<SparseVector>,
    /// Each query's source document is judged relevant with grade 1.
    pub qrels: Qrels,
    /// Topic of every document, in corpus order.
    pub doc_topics: Vec<usize>,
    /// Expansion provenance keyed by input id (documents and queries).
    pub injections: BTreeMap<String, Injection>,
}

const SPECIAL_TOKENS: [&str; 2] = ["[CLS]", "[SEP]"];
const DOC_LEN: (usize, usize) = (10, 30);
const QUERY_LEN: (usize, usize) = (2, 4);
const DOC_EXPANSIONS: usize = 8;
const QUERY_EXPANSIONS: usize = 6;
const TOPIC_TOKEN_SHARE: f64 = 0.8;

pub fn generate_synthetic_model(cfg: &SyntheticConfig) -> Result<SyntheticModel> {
    if cfg.vocab_size == 0 || cfg.corpus_size == 0 || cfg.query_count == 0 {
        return Err(Error::InvalidArgument(
            "vocab_size, corpus_size and query_count must all be >= 1".into(),
        ));
    }
    let p_random = cfg.profile.random_probability();
    if !(0.0..=1.0).contains(&p_random) {
        return Err(Error::InvalidArgument(format!(
            "mixture probability {p_random} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let n_special = if cfg.vocab_size >= 4 { SPECIAL_TOKENS.len() } else { 0 };
    let vocabulary = Vocabulary::new(
        (0..cfg.vocab_size)
            .map(|i| match i {
                i if i < n_special => SPECIAL_TOKENS[i].to_string(),
                i => format!("w{i}"),
            })
            .collect(),
    )?;
    let content: Vec<TokenId> = (n_special as TokenId..cfg.vocab_size as TokenId).collect();

    // Partition content tokens into a shared background pool and topic pools.
    let n_topics = (cfg.corpus_size / 25).clamp(1, 40);
    let mut shuffled = content.clone();
    rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
    let n_background = (shuffled.len() / 5).max(1).min(shuffled.len());
    let (background, topical) = shuffled.split_at(n_background);
    let topics: Vec<Vec<TokenId>> = (0..n_topics)
        .map(|k| topical.iter().skip(k).step_by(n_topics).copied().collect())
        .collect();

    let mut corpus = Vec::with_capacity(cfg.corpus_size);
    let mut doc_topics = Vec::with_capacity(cfg.corpus_size);
    let width = cfg.corpus_size.to_string().len();
    for i in 0..cfg.corpus_size {
        let topic = rng.random_range(0..n_topics);
        let len = rng.random_range(DOC_LEN.0..=DOC_LEN.1);
        let tokens = (0..len)
            .map(|_| {
                let pool = &topics[topic];
                if !pool.is_empty() && rng.random::<f64>() < TOPIC_TOKEN_SHARE {
                    zipf_pick(pool, &mut rng)
                } else {
                    *background.choose(&mut rng).expect("background non-empty")
                }
            })
            .collect();
        corpus.push(TokenizedInput::new(format!("d{i:0width$}"), tokens));
        doc_topics.push(topic);
    }

    let mut docs_by_topic: Vec<Vec<usize>> = vec![Vec::new(); n_topics];
    for (i, &t) in doc_topics.iter().enumerate() {
        docs_by_topic[t].push(i);
    }

    let mut queries = Vec::with_capacity(cfg.query_count);
    let mut query_topics = Vec::with_capacity(cfg.query_count);
    let mut qrels = Qrels::new();
    let width = cfg.query_count.to_string().len();
    for i in 0..cfg.query_count {
        let target = rng.random_range(0..cfg.corpus_size);
        let distinct: Vec<TokenId> = corpus[target].distinct_tokens().into_iter().collect();
        let len = rng.random_range(QUERY_LEN.0..=QUERY_LEN.1).min(distinct.len());
        let tokens: Vec<TokenId> = distinct.choose_multiple(&mut rng, len).copied().collect();
        let id = format!("q{i:0width$}");
        qrels.insert(id.clone(), corpus[target].id.clone(), 1);
        queries.push(TokenizedInput::new(id, tokens));
        query_topics.push((doc_topics[target], target));
    }

    let mut injections = BTreeMap::new();
    let mut expand = |input: &TokenizedInput,
                      topic: usize,
                      own_doc: Option<usize>,
                      slots: usize,
                      rng: &mut ChaCha8Rng|
     -> Result<SparseVector> {
        let original = input.distinct_tokens();
        let mut weights: BTreeMap<TokenId, f64> = BTreeMap::new();
        for &t in &input.tokens {
            *weights.entry(t).or_insert(0.0) += 1.0;
        }
        for w in weights.values_mut() {
            *w = 1.0 + 0.5 * w.ln() + 0.5 * rng.random::<f64>();
        }

        let neighbours: Vec<usize> = docs_by_topic[topic]
            .iter()
            .copied()
            .filter(|&d| Some(d) != own_doc)
            .collect();
        let mut injection = Injection::default();
        for _ in 0..slots {
            let take_random = rng.random::<f64>() < p_random;
            let grounded = neighbours
                .choose(rng)
                .and_then(|&d| corpus[d].tokens.choose(rng).copied());
            let noise = *content.choose(rng).expect("content non-empty");
            let weight = 0.3 + 0.4 * rng.random::<f64>();
            let candidate = if take_random { Some(noise) } else { grounded };
            let Some(t) = candidate else { continue };
            if original.contains(&t) || weights.contains_key(&t) {
                continue;
            }
            weights.insert(t, weight);
            if take_random {
                injection.random.insert(t);
            } else {
                injection.lexical.insert(t);
            }
        }
        injections.insert(input.id.clone(), injection);
        SparseVector::from_weights(input.id.clone(), weights)
    };

    let mut doc_vectors = Vec::with_capacity(corpus.len());
    for (i, doc) in corpus.iter().enumerate() {
        doc_vectors.push(expand(doc, doc_topics[i], Some(i), DOC_EXPANSIONS, &mut rng)?);
    }
    let mut query_vectors = Vec::with_capacity(queries.len());
    for (q, &(topic, _)) in queries.iter().zip(&query_topics) {
        query_vectors.push(expand(q, topic, None, QUERY_EXPANSIONS, &mut rng)?);
    }

    Ok(SyntheticModel {
        vocabulary,
        corpus,
        queries,
        doc_vectors,
        query_vectors,
        qrels,
        doc_topics,
        injections,
    })
}

/// Picks from `pool` with probability proportional to 1 / (rank + 1).
fn zipf_pick(pool: &[TokenId], rng: &mut ChaCha8Rng) -> TokenId {
    let norm: f64 = (1..=pool.len()).map(|r| 1.0 / r as f64).sum();
    let mut u = rng.random::<f64>() * norm;
    for (r, &t) in pool.iter().enumerate() {
        u -= 1.0 / (r + 1) as f64;
        if u <= 0.0 {
            return t;
        }
    }
    *pool.last().expect("non-empty pool")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(profile: ExpansionProfile, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            vocab_size: 100,
            corpus_size: 50,
            query_count: 10,
            profile,
            seed,
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = generate_synthetic_model(&cfg(ExpansionProfile::RandomToken, 7)).unwrap();
        let b = generate_synthetic_model(&cfg(ExpansionProfile::RandomToken, 7)).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_model(&cfg(ExpansionProfile::RandomToken, 8)).unwrap();
        assert_ne!(a.corpus, c.corpus);
    }

    #[test]
    fn mixed_zero_equals_lexical_overlap() {
        let a = generate_synthetic_model(&cfg(ExpansionProfile::LexicalOverlap, 3)).unwrap();
        let b = generate_synthetic_model(&cfg(ExpansionProfile::Mixed(0.0), 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lexical_expansions_occur_in_same_topic_documents() {
        let m = generate_synthetic_model(&cfg(ExpansionProfile::LexicalOverlap, 11)).unwrap();
        let topic_of = |doc_id: &str| {
            let i = m.corpus.iter().position(|d| d.id == doc_id).unwrap();
            m.doc_topics[i]
        };
        let mut checked = 0;
        for (input_id, injection) in &m.injections {
            assert!(injection.random.is_empty());
            let topic = if input_id.starts_with('q') {
                let (_, doc, _) = m.qrels.iter().find(|(q, _, _)| q == input_id).unwrap();
                topic_of(doc)
            } else {
                topic_of(input_id)
            };
            for &t in &injection.lexical {
                let found = m
                    .corpus
                    .iter()
                    .zip(&m.doc_topics)
                    .any(|(d, &dt)| dt == topic && d.id != *input_id && d.tokens.contains(&t));
                assert!(found, "token {t} of {input_id} not in a same-topic doc");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn queries_are_drawn_from_their_target_document() {
        let m = generate_synthetic_model(&cfg(ExpansionProfile::Mixed(0.5), 5)).unwrap();
        for q in &m.queries {
            let (_, doc, grade) = m.qrels.iter().find(|(qid, _, _)| *qid == q.id).unwrap();
            assert_eq!(grade, 1);
            let d = m.corpus.iter().find(|d| d.id == doc).unwrap();
            assert!(q.tokens.iter().all(|t| d.tokens.contains(t)));
        }
    }

    #[test]
    fn tiny_sizes_are_supported() {
        let m = generate_synthetic_model(&SyntheticConfig {
            vocab_size: 1,
            corpus_size: 1,
            query_count: 1,
            profile: ExpansionProfile::Mixed(0.5),
            seed: 0,
        })
        .unwrap();
        assert_eq!(m.vocabulary.len(), 1);
        assert_eq!(m.corpus.len(), 1);
    }

    #[test]
    fn profile_parsing() {
        assert_eq!("mixed(0.25)".parse::<ExpansionProfile>().unwrap(), ExpansionProfile::Mixed(0.25));
        assert_eq!("mixed:1".parse::<ExpansionProfile>().unwrap(), ExpansionProfile::Mixed(1.0));
        assert!("mixed:1.5".parse::<ExpansionProfile>().is_err());
        assert!("wacky".parse::<ExpansionProfile>().is_err());
    }
}
