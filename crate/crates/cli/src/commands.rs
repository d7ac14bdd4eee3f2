use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use wackymeter_core::ablation::{run_ablation, AblationConfig, RemovalPool};
use wackymeter_core::curve::{build_curve, compare_models, w_auc, BinDomain, DEFAULT_BINS};
use wackymeter_core::io::{self, VectorFile, VectorHeader};
use wackymeter_core::lexical::{bm25_search_weighted, count_vector, rm3_expand, Bm25Params, Rm3Params};
use wackymeter_core::metrics::{evaluate, write_eval_csv, Measure, DEFAULT_RELEVANCE_THRESHOLD};
use wackymeter_core::representation::{activate_matrix, aggregate, Aggregation};
use wackymeter_core::synth::{generate_synthetic_model, ExpansionProfile, SyntheticConfig};
use wackymeter_core::wackiness::{importance_samples, top_wacky_report, SampleSet};
use wackymeter_core::{
    ImpactIndex, LexicalIndex, Ranking, SparseVector, TokenId, TokenWackinessTable, Vocabulary, WackinessConfig,
};

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::manifest::{dir_files, read_input, RunManifest};
use crate::Common;

const IMPACT_FILE: &str = "impact.json";
const LEXICAL_FILE: &str = "lexical.json";
const DEFAULT_SPECIAL_TOKENS: [&str; 5] = ["[CLS]", "[SEP]", "[PAD]", "[UNK]", "[MASK]"];

struct Ctx {
    cfg: Config,
    manifest: RunManifest,
    out: PathBuf,
    seed: u64,
}

impl Ctx {
    fn new(common: &Common, command: &str) -> Result<Self> {
        let cfg = match &common.config {
            Some(p) => Config::load(p, command)?,
            None => Config::empty(command),
        };
        let seed = cfg.pick_or(common.seed, "seed", 0)?;
        let mut manifest = RunManifest::new(command, seed);
        if let Some(p) = cfg.path() {
            manifest.input(p)?;
        }
        Ok(Self {
            cfg,
            manifest,
            out: common.out.clone(),
            seed,
        })
    }

    fn path(&self, flag: Option<PathBuf>, key: &str) -> Result<Option<PathBuf>> {
        self.cfg.pick_path(flag, key)
    }

    fn required(&self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf> {
        self.path(flag, key)?
            .ok_or_else(|| CliError::Usage(format!("missing required --{}", key.replace('_', "-"))))
    }

    /// Hashes an input file into the manifest; missing files fail here.
    fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest.input(path)
    }

    fn input_dir(&mut self, dir: &Path) -> Result<()> {
        for f in dir_files(dir)? {
            if f.file_name().is_some_and(|n| n == crate::manifest::MANIFEST_FILE) {
                continue;
            }
            self.manifest.input(&f)?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: impl Serialize) {
        self.manifest.set(key, value);
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::write(&self.out, e))?;
        let path = self.out.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| CliError::write(path, e))
    }

    fn write(&self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
        let mut w = self.create(name)?;
        f(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::write(self.out.join(name), e))
    }

    fn finish(self) -> Result<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::write(&self.out, e))?;
        self.manifest.write(&self.out)
    }
}

fn positive(name: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(CliError::Argument(format!("--{name} must be >= 1")));
    }
    Ok(v)
}

fn parse_measures(names: Option<Vec<String>>, default: Vec<Measure>) -> Result<Vec<Measure>> {
    let Some(names) = names else {
        return Ok(default);
    };
    let mut out: Vec<Measure> = names
        .iter()
        .map(|s| s.parse::<Measure>().map_err(|e| CliError::Argument(e.to_string())))
        .collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(CliError::Argument("--measures is empty".into()));
    }
    Ok(out)
}

/// Explicit names must all exist; by default the usual BERT-style markers
/// present in the vocabulary are used.
fn special_tokens(vocab: &Vocabulary, names: &Option<Vec<String>>) -> Result<BTreeSet<TokenId>> {
    match names {
        None => Ok(vocab.ids_of(DEFAULT_SPECIAL_TOKENS)),
        Some(names) => {
            let ids = vocab.ids_of(names.iter().map(String::as_str));
            if ids.len() != names.iter().collect::<BTreeSet<_>>().len() {
                let missing: Vec<&str> = names
                    .iter()
                    .map(String::as_str)
                    .filter(|n| vocab.ids_of([*n]).is_empty())
                    .collect();
                return Err(CliError::Argument(format!(
                    "special tokens not in vocabulary: {}",
                    missing.join(", ")
                )));
            }
            Ok(ids)
        }
    }
}

fn load_index_dir(dir: &Path) -> Result<(ImpactIndex, LexicalIndex)> {
    let open = |name: &str| -> Result<BufReader<File>> {
        let p = dir.join(name);
        File::open(&p)
            .map(BufReader::new)
            .map_err(|_| CliError::MissingFile(p))
    };
    let impact = ImpactIndex::load(open(IMPACT_FILE)?)?;
    let lexical = LexicalIndex::load(open(LEXICAL_FILE)?)?;
    Ok((impact, lexical))
}

// --- synth ------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub corpus_size: Option<usize>,
    #[arg(long)]
    pub query_count: Option<usize>,
    /// lexical-overlap, random-token or mixed:P
    #[arg(long)]
    pub profile: Option<String>,
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let mut ctx = Ctx::new(&a.common, "synth")?;
    let vocab_size = positive("vocab-size", ctx.cfg.pick_or(a.vocab_size, "vocab_size", 2000)?)?;
    let corpus_size = positive("corpus-size", ctx.cfg.pick_or(a.corpus_size, "corpus_size", 1000)?)?;
    let query_count = ctx.cfg.pick_or(a.query_count, "query_count", 100)?;
    let profile: ExpansionProfile = ctx
        .cfg
        .pick_or(a.profile, "profile", "mixed:0.5".to_string())?
        .parse()
        .map_err(|e: wackymeter_core::Error| CliError::Argument(e.to_string()))?;
    ctx.set("vocab_size", vocab_size);
    ctx.set("corpus_size", corpus_size);
    ctx.set("query_count", query_count);
    ctx.set("profile", profile.to_string());

    let model = generate_synthetic_model(&SyntheticConfig {
        vocab_size,
        corpus_size,
        query_count,
        profile,
        seed: ctx.seed,
    })?;
    ctx.write("vocab.tsv", |w| io::write_vocabulary(w, &model.vocabulary))?;
    ctx.write("corpus.jsonl", |w| io::write_corpus(w, &model.corpus))?;
    ctx.write("queries.jsonl", |w| io::write_corpus(w, &model.queries))?;
    ctx.write("doc_vectors.jsonl", |w| {
        io::write_pooled(w, &VectorHeader::pooled(), &model.doc_vectors)
    })?;
    ctx.write("query_vectors.jsonl", |w| {
        io::write_pooled(w, &VectorHeader::pooled(), &model.query_vectors)
    })?;
    ctx.write("qrels.txt", |w| io::write_qrels(w, &model.qrels))?;
    ctx.write("injections.jsonl", |w| {
        for (id, inj) in &model.injections {
            let rec = serde_json::json!({ "id": id, "lexical": inj.lexical, "random": inj.random });
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    ctx.finish()
}

// --- index ------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct IndexArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Pooled document vectors.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
}

pub fn index(a: IndexArgs) -> Result<()> {
    let mut ctx = Ctx::new(&a.common, "index")?;
    let vocab_path = ctx.required(a.vocab, "vocab")?;
    let corpus_path = ctx.required(a.corpus, "corpus")?;
    let vectors_path = ctx.required(a.vectors, "vectors")?;
    for p in [&vocab_path, &corpus_path, &vectors_path] {
        ctx.input(p)?;
    }
    let vocab = io::load_vocabulary(&vocab_path)?;
    let corpus = io::load_corpus(&corpus_path, &vocab)?;
    let vectors = io::load_pooled(&vectors_path, vocab.len())?;

    let corpus_ids: BTreeSet<&str> = corpus.iter().map(|d| d.id.as_str()).collect();
    if let Some(v) = vectors.iter().find(|v| !corpus_ids.contains(v.id.as_str())) {
        return Err(wackymeter_core::Error::Validation(format!(
            "vector `{}` has no corpus record",
            v.id
        ))
        .into());
    }
    let lexical = LexicalIndex::build(&corpus)?;
    let impact = ImpactIndex::build(&vectors)?;
    log::info!("indexed {} documents, {} vectors", corpus.len(), vectors.len());

    let mut w = ctx.create(LEXICAL_FILE)?;
    lexical.save(&mut w)?;
    w.flush().map_err(|e| CliError::write(ctx.out.join(LEXICAL_FILE), e))?;
    let mut w = ctx.create(IMPACT_FILE)?;
    impact.save(&mut w)?;
    w.flush().map_err(|e| CliError::write(ctx.out.join(IMPACT_FILE), e))?;
    ctx.write("posting_lengths.csv", |w| {
        writeln!(w, "token_id,posting_length")?;
        for (t, n) in impact.posting_lengths() {
            writeln!(w, "{t},{n}")?;
        }
        Ok(())
    })?;
    ctx.finish()
}

// --- pool -------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct PoolArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Per-token vector file (raw or activated).
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// max, sum or cls
    #[arg(long)]
    pub aggregation: Option<String>,
}

pub fn pool(a: PoolArgs) -> Result<()> {
    let mut ctx = Ctx::new(&a.common, "pool")?;
    let mode: Aggregation = ctx
        .cfg
        .pick_or(a.aggregation, "aggregation", "max".to_string())?
        .parse()
        .map_err(|e: wackymeter_core::Error| CliError::Argument(e.to_string()))?;
    ctx.set("aggregation", mode.to_string());
    let vocab_path = ctx.required(a.vocab, "vocab")?;
    let vectors_path = ctx.required(a.vectors, "vectors")?;
    ctx.input(&vocab_path)?;
    ctx.input(&vectors_path)?;
    let vocab = io::load_vocabulary(&vocab_path)?;
    let VectorFile::PerToken { header, matrices } = io::load_vectors(&vectors_path, vocab.len())? else {
        return Err(wackymeter_core::Error::Validation("pool expects a per_token vector file".into()).into());
    };
    let pooled = matrices
        .iter()
        .map(|m| {
            if header.activated {
                aggregate(m, mode)
            } else {
                aggregate(&activate_matrix(m)?, mode)
            }
        })
        .collect::<wackymeter_core::Result<Vec<SparseVector>>>()?;
    let out_header = VectorHeader {
        aggregation: Some(mode.to_string()),
        source_activated: Some(header.activated),
        ..VectorHeader::pooled()
    };
    ctx.write("vectors.jsonl", |w| io::write_pooled(w, &out_header, &pooled))?;
    ctx.finish()
}

// --- search -----------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Directory written by `index`.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Tokenized queries (bm25, rm3).
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Pooled query vectors (impact).
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// impact, bm25 or rm3
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub fb_docs: Option<usize>,
    #[arg(long)]
    pub fb_terms: Option<usize>,
    #[arg(long)]
    pub orig_weight: Option<f64>,
}

pub fn search(a: SearchArgs) -> Result<()> {
    let mut ctx = Ctx::new(&a.common, "search")?;
    let method = ctx.cfg.pick_or(a.method, "method", "impact".to_string())?;
    if !["impact", "bm25", "rm3"].contains(&method.as_str()) {
        return Err(CliError::Argument(format!("unknown --method `{method}` (impact, bm25, rm3)")));
    }
    let k = positive("k", ctx.cfg.pick_or(a.k, "k", 1000)?)?;
    let defaults = Bm25Params::default();
    let bm25 = Bm25Params {
        k1: ctx.cfg.pick_or(a.k1, "k1", defaults.k1)?,
        b: ctx.cfg.pick_or(a.b, "b", defaults.b)?,
    };
    if !(bm25.k1 >= 0.0 && (0.0..=1.0).contains(&bm25.b)) {
        return Err(CliError::Argument("need k1 >= 0 and b in [0, 1]".into()));
    }
    let rd = Rm3Params::default();
    let rm3 = Rm3Params {
        fb_docs: positive("fb-docs", ctx.cfg.pick_or(a.fb_docs, "fb_docs", rd.fb_docs)?)?,
        fb_terms: positive("fb-terms", ctx.cfg.pick_or(a.fb_terms, "fb_terms", rd.fb_terms)?)?,
        orig_weight: ctx.cfg.pick_or(a.orig_weight, "orig_weight", rd.orig_weight)?,
    };
    if !(0.0..=1.0).contains(&rm3.orig_weight) {
        return Err(CliError::Argument("--orig-weight must be in [0, 1]".into()));
    }
    ctx.set("method", &method);
    ctx.set("k", k);
    if method != "impact" {
        ctx.set("bm25", bm25);
    }
    if method == "rm3" {
        ctx.set("rm3", rm3);
    }

    let vocab_path = ctx.required(a.vocab, "vocab")?;
    let index_dir = ctx.required(a.index, "index")?;
    let (queries_path, vectors_path) = if method == "impact" {
        (None, Some(ctx.required(a.vectors, "vectors")?))
    } else {
        (Some(ctx.required(a.queries, "queries")?), None)
    };
    ctx.input(&vocab_path)?;
    ctx.input_dir(&index_dir)?;
    for p in queries_path.iter().chain(&vectors_path) {
        ctx.input(p)?;
    }
    let vocab = io::load_vocabulary(&vocab_path)?;
    let (impact, lexical) = load_index_dir(&index_dir)?;

    let run: Vec<Ranking> = match method.as_str() {
        "impact" => {
            let vectors = io::load_pooled(vectors_path.as_ref().expect("set above"), vocab.len())?;
            use rayon::prelude::*;
            vectors
                .par_iter()
                .map(|q| impact.search(q, k))
                .collect::<wackymeter_core::Result<_>>()?
        }
        _ => {
            let queries = io::load_corpus(queries_path.as_ref().expect("set above"), &vocab)?;
            use rayon::prelude::*;
            queries
                .par_iter()
                .map(|q| {
                    let weights = if method == "rm3" {
                        rm3_expand(q, &lexical, rm3, bm25)?
                    } else {
                        count_vector(q)
                    };
                    bm25_search_weighted(&weights, &lexical, k, bm25)
                })
                .collect::<wackymeter_core::Result<_>>()?
        }
    };
    ctx.write("run.trec", |w| io::write_run(w, &run, &method))?;
    ctx.finish()
}

// --- wackiness --------------------------------------------------------------

#[derive(Debug, Args)]
pub struct WackinessArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Directory written by `index`.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Tokenized inputs to score (queries, or the corpus itself).
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Pooled vectors of those inputs.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Neighbourhood size.
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated token strings never counted as expansions.
    #[arg(long, value_delimiter = ',')]
    pub special_tokens: Vec<String>,
    /// Leave each input out of its own neighbourhood (document-side runs).
    #[arg(long)]
    pub exclude_self: bool,
    /// Rows in top_wacky.csv.
    #[arg(long)]
    pub top: Option<usize>,
}

pub fn wackiness(a: WackinessArgs) -> Result<()> {
    let mut ctx = Ctx::new(&a.common, "wackiness")?;
    let k = positive("k", ctx.cfg.pick_or(a.k, "k", 10)?)?;
    let top = ctx.cfg.pick_or(a.top, "top", 100)?;
    let exclude_self = a.exclude_self || ctx.cfg.pick_or(None, "exclude_self", false)?;
    let special_names = ctx.cfg.pick_list(a.special_tokens, "special_tokens")?;
    let vocab_path = ctx.required(a.vocab, "vocab")?;
    let index_dir = ctx.required(a.index, "index")?;
    let queries_path = ctx.required(a.queries, "queries")?;
    let vectors_path = ctx.required(a.vectors, "vectors")?;
    ctx.input(&vocab_path)?;
    ctx.input_dir(&index_dir)?;
    ctx.input(&queries_path)?;
    ctx.input(&vectors_path)?;

    let vocab = io::load_vocabulary(&vocab_path)?;
    let special = special_tokens(&vocab, &special_names)?;
    ctx.set("k", k);
    ctx.set("top", top);
    ctx.set("exclude_self", exclude_self);
    ctx.set("special_tokens", &special);

    let (impact, lexical) = load_index_dir(&index_dir)?;
    let inputs = io::load_corpus(&queries_path, &vocab)?;
    let vectors = io::load_pooled(&vectors_path, vocab.len())?;
    let cfg = WackinessConfig {
        k,
        special_tokens: special,
        exclude_self,
    };
    let samples = importance_samples(&inputs, &vectors, &impact, &lexical, &cfg)?;
    let table = samples.table();
    log::info!("scored {} expansion tokens", table.len());

    let mut w = ctx.create("wackiness.csv")?;
    table.write_csv(&mut w, &vocab)?;
    w.flush().map_err(|e| CliError::write(ctx.out.join("wackiness.csv"), e))?;
    ctx.write("top_wacky.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["rank", "token_id", "token_string", "wackiness"])?;
        for (i, (t, s, wk)) in top_wacky_report(&table, &vocab, top).into_iter().enumerate() {
            c.write_record([(i + 1).to_string(), t.to_string(), s, wk.to_string()])?;
        }
        c.flush()
    })?;
    ctx.write("samples.jsonl", |w| samples.write_jsonl(w))?;
    ctx.finish()
}

// --- curve ------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub common: Common,
    /// samples.jsonl from `wackiness`.
    #[arg(long, conflicts_with = "table")]
    pub samples: Option<PathBuf>,
    /// wackiness.csv from `wackiness`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// NAME=samples.jsonl; repeat for each model to compare.
    #[arg(long)]
    pub compare: Vec<String>,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Bootstrap runs for --compare.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Bin over the whole vocabulary, counting unscored tokens as wackiness 1.
    #[arg(long)]
    pub pad_to_vocab: bool,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

#[derive(Serialize)]
struct CurveSummary {
    bins: usize,
    scored_tokens: usize,
    w_auc: f64,
}

pub fn curve(a: CurveArgs) -> Result<()> {
    let mut ctx = Ctx::new(&a.common, "curve")?;
    let bins = positive("bins", ctx.cfg.pick_or(a.bins, "bins", DEFAULT_BINS)?)?;
    let repeats = positive("repeats", ctx.cfg.pick_or(a.repeats, "repeats", 10)?)?;
    let pad = a.pad_to_vocab || ctx.cfg.pick_or(None, "pad_to_vocab", false)?;
    let compare = ctx.cfg.pick_list(a.compare, "compare")?.unwrap_or_default();
    let models: Vec<(String, PathBuf)> = compare
        .iter()
        .map(|s| {
            s.split_once('=')
                .filter(|(n, p)| !n.is_empty() && !p.is_empty())
                .map(|(n, p)| (n.to_string(), PathBuf::from(p)))
                .ok_or_else(|| CliError::Argument(format!("--compare expects NAME=PATH, got `{s}`")))
        })
        .collect::<Result<_>>()?;
    if models.iter().map(|m| &m.0).collect::<BTreeSet<_>>().len() != models.len() {
        return Err(CliError::Argument("--compare model names must be unique".into()));
    }
    let samples_path = ctx.path(a.samples, "samples")?;
    let table_path = ctx.path(a.table, "table")?;
    let sources = usize::from(samples_path.is_some()) + usize::from(table_path.is_some());
    if models.is_empty() && sources != 1 {
        return Err(CliError::Usage("give exactly one of --samples, --table or --compare".into()));
    }
    if !models.is_empty() && sources != 0 {
        return Err(CliError::Usage("--compare cannot be combined with --samples or --table".into()));
    }
    let domain = if pad {
        let vocab_path = ctx.required(a.vocab, "vocab")?;
        ctx.input(&vocab_path)?;
        BinDomain::PadToVocabulary(io::load_vocabulary(&vocab_path)?.len())
    } else {
        BinDomain::Scored
    };
    ctx.set("bins", bins);
    ctx.set("pad_to_vocab", pad);

    if !models.is_empty() {
        ctx.set("repeats", repeats);
        ctx.set("models", models.iter().map(|m| &m.0).collect::<Vec<_>>());
        let mut loaded = Vec::with_capacity(models.len());
        for (name, path) in &models {
            ctx.input(path)?;
            let set = SampleSet::read_jsonl(BufReader::new(read_input(path)?.as_slice()))?;
            loaded.push((name.clone(), set));
        }
        let report = compare_models(&loaded, bins, domain, repeats, ctx.seed)?;
        ctx.write("comparison.csv", |w| report.write_csv(w))?;
        for (name, set) in &loaded {
            let c = build_curve(&set.table(), bins, domain)?;
            ctx.write(&format!("curve_{name}.csv"), |w| c.write_csv(w))?;
        }
        return ctx.finish();
    }

    let table = if let Some(p) = samples_path {
        ctx.input(&p)?;
        SampleSet::read_jsonl(BufReader::new(read_input(&p)?.as_slice()))?.table()
    } else {
        let p = table_path.expect("one source");
        ctx.input(&p)?;
        TokenWackinessTable::read_csv(read_input(&p)?.as_slice())?
    };
    let c = build_curve(&table, bins, domain)?;
    let summary = CurveSummary {
        bins,
        scored_tokens: c.scored_token_count,
        w_auc: w_auc(&c),
    };
    ctx.write("curve.csv", |w| c.write_csv(w))?;
    ctx.write("summary.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        w.write_all(b"\n")
    })?;
    println!("W-AUC {:.4} over {} scored tokens", summary.w_auc, summary.scored_tokens);
    ctx.finish()
}

// --- ablate -----------------------------------------------------------------

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Directory written by `index`.
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Pooled query vectors.
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    /// wackiness.csv ranking the tokens to remove.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Comma-separated removal counts, ascending.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Comma-separated, e.g. MRR@10,Recall@1000
    #[arg(long, value_delimiter = ',')]
    pub measures: Vec<String>,
    /// observed (expansion tokens seen in the queries) or vocab
    #[arg(long)]
    pub pool: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub special_tokens: Vec<String>,
    #[arg(long)]
    pub relevance_threshold: Option<u32>,
}

pub fn ablate(a: AblateArgs) -> Result<()> {
    let mut ctx = Ctx::new(&a.common, "ablate")?;
    let repeats = positive("repeats", ctx.cfg.pick_or(a.repeats, "repeats", 10)?)?;
    let measures = parse_measures(ctx.cfg.pick_list(a.measures, "measures")?, Measure::in_domain_suite())?;
    let pool = ctx.cfg.pick_or(a.pool, "pool", "observed".to_string())?;
    if !["observed", "vocab"].contains(&pool.as_str()) {
        return Err(CliError::Argument(format!("unknown --pool `{pool}` (observed, vocab)")));
    }
    let relevance_threshold = ctx
        .cfg
        .pick_or(a.relevance_threshold, "relevance_threshold", DEFAULT_RELEVANCE_THRESHOLD)?;
    let thresholds = ctx.cfg.pick_list(a.thresholds, "thresholds")?;
    if let Some(t) = &thresholds {
        if t.windows(2).any(|w| w[0] > w[1]) {
            return Err(CliError::Argument("--thresholds must be ascending".into()));
        }
    }
    let special_names = ctx.cfg.pick_list(a.special_tokens, "special_tokens")?;
    let vocab_path = ctx.required(a.vocab, "vocab")?;
    let index_dir = ctx.required(a.index, "index")?;
    let queries_path = ctx.required(a.queries, "queries")?;
    let vectors_path = ctx.required(a.vectors, "vectors")?;
    let qrels_path = ctx.required(a.qrels, "qrels")?;
    let table_path = ctx.required(a.table, "table")?;
    ctx.input(&vocab_path)?;
    ctx.input_dir(&index_dir)?;
    for p in [&queries_path, &vectors_path, &qrels_path, &table_path] {
        ctx.input(p)?;
    }

    let vocab = io::load_vocabulary(&vocab_path)?;
    let special = special_tokens(&vocab, &special_names)?;
    let (impact, _) = load_index_dir(&index_dir)?;
    let queries = io::load_corpus(&queries_path, &vocab)?;
    let vectors = io::load_pooled(&vectors_path, vocab.len())?;
    let qrels = io::load_qrels(&qrels_path)?;
    let table = TokenWackinessTable::read_csv(read_input(&table_path)?.as_slice())?;
    let thresholds = thresholds.unwrap_or_else(|| wackymeter_core::ablation::default_thresholds(table.len()));

    ctx.set("thresholds", &thresholds);
    ctx.set("repeats", repeats);
    ctx.set("measures", measures.iter().map(ToString::to_string).collect::<Vec<_>>());
    ctx.set("pool", &pool);
    ctx.set("relevance_threshold", relevance_threshold);
    ctx.set("special_tokens", &special);

    let cfg = AblationConfig {
        thresholds,
        repeats,
        seed: ctx.seed,
        measures,
        removal_pool: if pool == "vocab" {
            RemovalPool::FullVocabulary(vocab.len())
        } else {
            RemovalPool::ExpansionObserved
        },
        relevance_threshold,
        special_tokens: special,
    };
    let report = run_ablation(&queries, &vectors, &impact, &qrels, &table, &cfg)?;
    ctx.write("ablation.csv", |w| report.write_csv(w))?;
    ctx.write("endpoints.csv", |w| report.write_endpoints_csv(w))?;
    ctx.finish()
}

// --- eval -------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// TREC run file.
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub measures: Vec<String>,
    #[arg(long)]
    pub relevance_threshold: Option<u32>,
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let mut ctx = Ctx::new(&a.common, "eval")?;
    let mut default = Measure::in_domain_suite();
    default.push(Measure::Ndcg(10));
    let measures = parse_measures(ctx.cfg.pick_list(a.measures, "measures")?, default)?;
    let threshold = ctx
        .cfg
        .pick_or(a.relevance_threshold, "relevance_threshold", DEFAULT_RELEVANCE_THRESHOLD)?;
    ctx.set("measures", measures.iter().map(ToString::to_string).collect::<Vec<_>>());
    ctx.set("relevance_threshold", threshold);
    let run_path = ctx.required(a.run, "run")?;
    let qrels_path = ctx.required(a.qrels, "qrels")?;
    ctx.input(&run_path)?;
    ctx.input(&qrels_path)?;
    let run = io::load_run(&run_path)?;
    let qrels = io::load_qrels(&qrels_path)?;
    let results = measures
        .iter()
        .map(|&m| evaluate(&run, &qrels, m, threshold))
        .collect::<wackymeter_core::Result<Vec<_>>>()?;
    for r in &results {
        println!("{}\t{:.4}\t({} queries)", r.measure, r.mean, r.per_query.len());
    }
    ctx.write("eval.csv", |w| write_eval_csv(w, &results))?;
    ctx.finish()
}
