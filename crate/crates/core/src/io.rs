//! Interchange file formats: vocabulary TSV, tokenized JSONL, vector JSONL,
//! TREC qrels and TREC run files.
//!
//! Every loader validates the whole file before returning anything, so a
//! malformed input never produces a partial load. Writers emit canonical
//! output (ascending token ids, shortest round-trip float formatting) so that
//! `write(load(x))` is byte-stable.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    rank_order, PerTokenMatrix, Qrels, Ranking, SparseVector, TokenId, TokenRow, TokenizedInput,
    Vocabulary,
};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn lines<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)).map_err(|e| Error::parse(i + 1, e.to_string())))
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Vocabulary> {
    read_vocabulary(open(path.as_ref())?)
}

/// Reads `token_id<TAB>token_string` lines. Ids must be exactly `0..|V|`.
pub fn read_vocabulary<R: BufRead>(reader: R) -> Result<Vocabulary> {
    let mut entries: BTreeMap<u32, String> = BTreeMap::new();
    for line in lines(reader) {
        let (no, line) = line?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        let (id, token) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(no, "expected `token_id<TAB>token_string`"))?;
        let id: u32 = id
            .parse()
            .map_err(|_| Error::parse(no, format!("invalid token id `{id}`")))?;
        if entries.insert(id, token.to_string()).is_some() {
            return Err(Error::parse(no, format!("duplicate token id {id}")));
        }
    }
    if let Some((pos, id)) = entries
        .keys()
        .enumerate()
        .find(|&(pos, &id)| pos as u32 != id)
    {
        return Err(Error::validation(format!(
            "vocabulary ids are not dense: expected {pos}, found {id}"
        )));
    }
    Vocabulary::new(entries.into_values().collect())
}

pub fn write_vocabulary<W: Write>(mut out: W, vocab: &Vocabulary) -> std::io::Result<()> {
    for (id, token) in vocab.iter() {
        writeln!(out, "{id}\t{token}")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Tokenized corpus / queries
// ---------------------------------------------------------------------------

pub fn load_corpus(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Vec<TokenizedInput>> {
    read_corpus(open(path.as_ref())?, vocab.len())
}

pub fn read_corpus<R: BufRead>(reader: R, vocab_size: usize) -> Result<Vec<TokenizedInput>> {
    let mut out = Vec::new();
    for line in lines(reader) {
        let (no, line) = line?;
        if line.trim().is_empty() {
            continue;
        }
        let input: TokenizedInput =
            serde_json::from_str(&line).map_err(|e| Error::parse(no, e.to_string()))?;
        input.validate(vocab_size)?;
        if input.is_degenerate() {
            log::warn!("input `{}` has an empty token sequence", input.id);
        }
        out.push(input);
    }
    Ok(out)
}

pub fn write_corpus<W: Write>(mut out: W, inputs: &[TokenizedInput]) -> std::io::Result<()> {
    for input in inputs {
        serde_json::to_writer(&mut out, input)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Vectors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VectorFormat {
    Pooled,
    PerToken,
}

/// First line of every vector file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VectorHeader {
    pub format: VectorFormat,
    pub activated: bool,
    /// Pooling mode used to produce a pooled file, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aggregation: Option<String>,
    /// Whether the per-token source of a pooled file was already activated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_activated: Option<bool>,
}

impl VectorHeader {
    pub fn pooled() -> Self {
        Self {
            format: VectorFormat::Pooled,
            activated: true,
            aggregation: None,
            source_activated: None,
        }
    }

    pub fn per_token(activated: bool) -> Self {
        Self {
            format: VectorFormat::PerToken,
            activated,
            aggregation: None,
            source_activated: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PooledRecord {
    id: String,
    weights: BTreeMap<TokenId, f64>,
}

#[derive(Serialize, Deserialize)]
struct RowRecord {
    pos: usize,
    weights: BTreeMap<TokenId, f64>,
}

#[derive(Serialize, Deserialize)]
struct PerTokenRecord {
    id: String,
    rows: Vec<RowRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cls_pos: Option<usize>,
}

/// Contents of a vector file.
#[derive(Debug, Clone, PartialEq)]
pub enum VectorFile {
    Pooled {
        header: VectorHeader,
        vectors: Vec<SparseVector>,
    },
    PerToken {
        header: VectorHeader,
        matrices: Vec<PerTokenMatrix>,
    },
}

impl VectorFile {
    pub fn header(&self) -> &VectorHeader {
        match self {
            VectorFile::Pooled { header, .. } | VectorFile::PerToken { header, .. } => header,
        }
    }

    pub fn into_pooled(self) -> Result<Vec<SparseVector>> {
        match self {
            VectorFile::Pooled { vectors, .. } => Ok(vectors),
            VectorFile::PerToken { .. } => Err(Error::validation(
                "expected a pooled vector file, found per_token (run `pool` first)",
            )),
        }
    }
}

pub fn load_vectors(path: impl AsRef<Path>, vocab_size: usize) -> Result<VectorFile> {
    read_vectors(open(path.as_ref())?, vocab_size)
}

pub fn load_pooled(path: impl AsRef<Path>, vocab_size: usize) -> Result<Vec<SparseVector>> {
    load_vectors(path, vocab_size)?.into_pooled()
}

pub fn read_vectors<R: BufRead>(reader: R, vocab_size: usize) -> Result<VectorFile> {
    let mut it = lines(reader).filter(|l| !matches!(l, Ok((_, s)) if s.trim().is_empty()));
    let header: VectorHeader = match it.next() {
        Some(line) => {
            let (no, line) = line?;
            serde_json::from_str(&line).map_err(|e| Error::parse(no, format!("bad header: {e}")))?
        }
        None => return Err(Error::validation("vector file is empty (missing header)")),
    };

    match header.format {
        VectorFormat::Pooled => {
            if !header.activated {
                return Err(Error::validation(
                    "pooled vectors must be activated (non-negative); pool raw outputs with `pool`",
                ));
            }
            let mut vectors = Vec::new();
            for line in it {
                let (no, line) = line?;
                let rec: PooledRecord =
                    serde_json::from_str(&line).map_err(|e| Error::parse(no, e.to_string()))?;
                let v = SparseVector::from_weights(rec.id, rec.weights)?;
                v.validate(vocab_size)?;
                vectors.push(v);
            }
            Ok(VectorFile::Pooled { header, vectors })
        }
        VectorFormat::PerToken => {
            let mut matrices = Vec::new();
            for line in it {
                let (no, line) = line?;
                let rec: PerTokenRecord =
                    serde_json::from_str(&line).map_err(|e| Error::parse(no, e.to_string()))?;
                let mut rows = Vec::with_capacity(rec.rows.len());
                for r in rec.rows {
                    let weights = if header.activated {
                        if let Some((t, w)) = r.weights.iter().find(|(_, &w)| w < 0.0) {
                            return Err(Error::validation(format!(
                                "matrix `{}`: negative weight {w} for token {t} in an activated file",
                                rec.id
                            )));
                        }
                        r.weights.into_iter().filter(|&(_, w)| w > 0.0).collect()
                    } else {
                        r.weights
                    };
                    rows.push(TokenRow {
                        position: r.pos,
                        weights,
                    });
                }
                let m = PerTokenMatrix::new(rec.id, rows, rec.cls_pos)?;
                m.validate(vocab_size)?;
                matrices.push(m);
            }
            Ok(VectorFile::PerToken { header, matrices })
        }
    }
}

fn write_header<W: Write>(out: &mut W, header: &VectorHeader) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, header)?;
    out.write_all(b"\n")
}

pub fn write_pooled<W: Write>(
    mut out: W,
    header: &VectorHeader,
    vectors: &[SparseVector],
) -> std::io::Result<()> {
    write_header(&mut out, header)?;
    for v in vectors {
        let rec = PooledRecord {
            id: v.id.clone(),
            weights: v.weights().clone(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_per_token<W: Write>(
    mut out: W,
    header: &VectorHeader,
    matrices: &[PerTokenMatrix],
) -> std::io::Result<()> {
    write_header(&mut out, header)?;
    for m in matrices {
        let rec = PerTokenRecord {
            id: m.id.clone(),
            rows: m
                .rows()
                .iter()
                .map(|r| RowRecord {
                    pos: r.position,
                    weights: r.weights.clone(),
                })
                .collect(),
            cls_pos: m.cls_position(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// TREC qrels and runs
// ---------------------------------------------------------------------------

pub fn load_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    read_qrels(open(path.as_ref())?)
}

/// Parses `qid 0 docid grade`; negative grades are rejected.
pub fn read_qrels<R: BufRead>(reader: R) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for line in lines(reader) {
        let (no, line) = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [qid, _, docid, grade] = fields[..] else {
            return Err(Error::parse(no, "expected `qid 0 docid grade`"));
        };
        let grade: i64 = grade
            .parse()
            .map_err(|_| Error::parse(no, format!("invalid grade `{grade}`")))?;
        if grade < 0 {
            return Err(Error::validation(format!(
                "line {no}: negative relevance grade {grade}"
            )));
        }
        qrels.insert(qid, docid, grade as u32);
    }
    Ok(qrels)
}

pub fn write_qrels<W: Write>(mut out: W, qrels: &Qrels) -> std::io::Result<()> {
    for (q, d, g) in qrels.iter() {
        writeln!(out, "{q} 0 {d} {g}")?;
    }
    Ok(())
}

pub fn load_run(path: impl AsRef<Path>) -> Result<Vec<Ranking>> {
    read_run(open(path.as_ref())?)
}

/// Parses `qid Q0 docid rank score tag`. Entries are re-sorted by score
/// (ties by ascending doc id); the rank column is ignored.
pub fn read_run<R: BufRead>(reader: R) -> Result<Vec<Ranking>> {
    let mut per_query: Vec<(String, Vec<(String, f64)>)> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for line in lines(reader) {
        let (no, line) = line?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [qid, _, docid, _, score, _] = fields[..] else {
            return Err(Error::parse(no, "expected `qid Q0 docid rank score tag`"));
        };
        let score: f64 = score
            .parse()
            .map_err(|_| Error::parse(no, format!("invalid score `{score}`")))?;
        let slot = *index.entry(qid.to_string()).or_insert_with(|| {
            per_query.push((qid.to_string(), Vec::new()));
            per_query.len() - 1
        });
        per_query[slot].1.push((docid.to_string(), score));
    }
    per_query
        .into_iter()
        .map(|(q, entries)| {
            let n = entries.len();
            Ranking::from_candidates(q, entries, n)
        })
        .collect()
}

pub fn write_run<W: Write>(mut out: W, run: &[Ranking], tag: &str) -> std::io::Result<()> {
    for ranking in run {
        debug_assert!(ranking
            .entries()
            .windows(2)
            .all(|w| rank_order(&w[0], &w[1]).is_le()));
        for (rank, (doc, score)) in ranking.entries().iter().enumerate() {
            writeln!(out, "{} Q0 {doc} {} {score} {tag}", ranking.query_id, rank + 1)?;
        }
    }
    Ok(())
}

/// Reads an entire file into memory; used for content digests.
pub fn read_bytes(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    Ok(buf)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab3() -> Vocabulary {
        read_vocabulary("0\t[CLS]\n1\tthe\n2\tliver\n".as_bytes()).unwrap()
    }

    #[test]
    fn vocabulary_three_lines() {
        let v = vocab3();
        assert_eq!(v.len(), 3);
        assert_eq!(v.token(2), Some("liver"));
    }

    #[test]
    fn vocabulary_non_dense_rejected() {
        let err = read_vocabulary("0\ta\n2\tb\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn vocabulary_empty_rejected() {
        assert!(matches!(
            read_vocabulary("".as_bytes()).unwrap_err(),
            Error::Validation(_)
        ));
    }

    #[test]
    fn vocabulary_malformed_line_reports_line_number() {
        let err = read_vocabulary("0\ta\nnot-a-line\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn vocabulary_allows_duplicate_strings() {
        let v = read_vocabulary("0\t##s\n1\t##s\n".as_bytes()).unwrap();
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn corpus_records() {
        let text = "{\"id\":\"d1\",\"tokens\":[1,2]}\n{\"id\":\"d2\",\"tokens\":[]}\n";
        let corpus = read_corpus(text.as_bytes(), 3).unwrap();
        assert_eq!(corpus[0], TokenizedInput::new("d1", vec![1, 2]));
        assert!(corpus[1].is_degenerate());
    }

    #[test]
    fn corpus_out_of_range_names_record() {
        let err = read_corpus("{\"id\":\"d3\",\"tokens\":[99]}\n".as_bytes(), 3).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("d3") && msg.contains("token 99 out of range"), "{msg}");
    }

    #[test]
    fn pooled_zero_weight_dropped() {
        let text = "{\"format\":\"pooled\",\"activated\":true}\n{\"id\":\"q1\",\"weights\":{\"2\":1.5,\"7\":0.0}}\n";
        let v = read_vectors(text.as_bytes(), 10).unwrap().into_pooled().unwrap();
        assert_eq!(v[0].weights().iter().collect::<Vec<_>>(), vec![(&2, &1.5)]);
    }

    #[test]
    fn activated_negative_rejected() {
        let text = "{\"format\":\"pooled\",\"activated\":true}\n{\"id\":\"q1\",\"weights\":{\"2\":-0.1}}\n";
        assert!(matches!(
            read_vectors(text.as_bytes(), 10).unwrap_err(),
            Error::Validation(_)
        ));
        let text = "{\"format\":\"per_token\",\"activated\":true}\n{\"id\":\"q1\",\"rows\":[{\"pos\":0,\"weights\":{\"2\":-0.1}}]}\n";
        assert!(matches!(
            read_vectors(text.as_bytes(), 10).unwrap_err(),
            Error::Validation(_)
        ));
    }

    #[test]
    fn raw_per_token_allows_negatives() {
        let text = "{\"format\":\"per_token\",\"activated\":false}\n{\"id\":\"d1\",\"rows\":[{\"pos\":0,\"weights\":{\"1\":-2.5,\"3\":0.5}},{\"pos\":1,\"weights\":{}}],\"cls_pos\":0}\n";
        match read_vectors(text.as_bytes(), 10).unwrap() {
            VectorFile::PerToken { header, matrices } => {
                assert!(!header.activated);
                assert_eq!(matrices[0].rows()[0].weights[&1], -2.5);
                assert_eq!(matrices[0].cls_position(), Some(0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vectors_out_of_range_rejected() {
        let text = "{\"format\":\"pooled\",\"activated\":true}\n{\"id\":\"q1\",\"weights\":{\"12\":1.0}}\n";
        assert!(read_vectors(text.as_bytes(), 10).is_err());
    }

    #[test]
    fn canonical_pooled_round_trip_is_byte_stable() {
        let text = "{\"format\":\"pooled\",\"activated\":true}\n{\"id\":\"q1\",\"weights\":{\"2\":1.5,\"10\":0.1,\"11\":3.0}}\n{\"id\":\"q2\",\"weights\":{}}\n";
        let file = read_vectors(text.as_bytes(), 20).unwrap();
        let mut out = Vec::new();
        write_pooled(&mut out, file.header(), &file.clone().into_pooled().unwrap()).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn canonical_per_token_round_trip_is_byte_stable() {
        let text = "{\"format\":\"per_token\",\"activated\":false}\n{\"id\":\"d1\",\"rows\":[{\"pos\":0,\"weights\":{\"1\":-2.5,\"3\":0.5}}],\"cls_pos\":0}\n";
        let VectorFile::PerToken { header, matrices } = read_vectors(text.as_bytes(), 10).unwrap()
        else {
            panic!()
        };
        let mut out = Vec::new();
        write_per_token(&mut out, &header, &matrices).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn qrels_parse_and_negative_grade() {
        let q = read_qrels("q1 0 d1 1\nq1 0 d2 0\nq2 0 d3 2\n".as_bytes()).unwrap();
        assert_eq!(q.grade("q2", "d3"), 2);
        assert_eq!(q.len(), 3);
        assert!(read_qrels("q1 0 d1 -1\n".as_bytes()).is_err());
        assert!(matches!(
            read_qrels("q1 d1 1\n".as_bytes()).unwrap_err(),
            Error::Parse { line: 1, .. }
        ));
    }

    #[test]
    fn run_round_trip() {
        let text = "q1 Q0 d2 1 2.5 t\nq1 Q0 d1 2 1 t\nq2 Q0 d9 1 0.5 t\n";
        let run = read_run(text.as_bytes()).unwrap();
        assert_eq!(run.len(), 2);
        let mut out = Vec::new();
        write_run(&mut out, &run, "t").unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }
}
