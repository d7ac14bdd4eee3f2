#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_wackymeter");

pub fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(cwd)
        .env_remove("WACKYMETER_LOG")
        .output()
        .expect("binary runs")
}

#[track_caller]
pub fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = run(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// File name → bytes for every file in `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

/// Commands of a small end-to-end pipeline, writing into `{prefix}_*`
/// directories below the working directory. Inputs come from `synth` in `s/`.
pub fn pipeline(prefix: &str, threads: &str) -> Vec<(String, Vec<String>)> {
    let d = |name: &str| format!("{prefix}_{name}");
    let t = |mut v: Vec<String>| {
        v.extend(["--threads".to_string(), threads.to_string()]);
        v
    };
    let s = |x: &[&str]| x.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    vec![
        (d("synth"), t(s(&["synth", "--out", &d("synth"), "--vocab-size", "600", "--corpus-size", "150", "--query-count", "40", "--profile", "mixed:0.5", "--seed", "3"]))),
        (d("index"), t(s(&["index", "--out", &d("index"), "--vocab", "s/vocab.tsv", "--corpus", "s/corpus.jsonl", "--vectors", "s/doc_vectors.jsonl"]))),
        (d("pool"), t(s(&["pool", "--out", &d("pool"), "--vocab", "s/vocab.tsv", "--vectors", "s/per_token.jsonl", "--aggregation", "max"]))),
        (d("search"), t(s(&["search", "--out", &d("search"), "--vocab", "s/vocab.tsv", "--index", "s_index", "--vectors", "s/query_vectors.jsonl", "--k", "100"]))),
        (d("rm3"), t(s(&["search", "--out", &d("rm3"), "--vocab", "s/vocab.tsv", "--index", "s_index", "--queries", "s/queries.jsonl", "--method", "rm3", "--k", "100"]))),
        (d("wackiness"), t(s(&["wackiness", "--out", &d("wackiness"), "--vocab", "s/vocab.tsv", "--index", "s_index", "--queries", "s/queries.jsonl", "--vectors", "s/query_vectors.jsonl"]))),
        (d("curve"), t(s(&["curve", "--out", &d("curve"), "--samples", "s_wk/samples.jsonl", "--bins", "20"]))),
        (d("compare"), t(s(&["curve", "--out", &d("compare"), "--compare", "a=s_wk/samples.jsonl", "--compare", "b=s_wk2/samples.jsonl", "--repeats", "4", "--seed", "5"]))),
        (d("ablate"), t(s(&["ablate", "--out", &d("ablate"), "--vocab", "s/vocab.tsv", "--index", "s_index", "--queries", "s/queries.jsonl", "--vectors", "s/query_vectors.jsonl", "--qrels", "s/qrels.txt", "--table", "s_wk/wackiness.csv", "--thresholds", "0,5,20", "--repeats", "3", "--measures", "MRR@10,Recall@100,NDCG@10"]))),
        (d("eval"), t(s(&["eval", "--out", &d("eval"), "--run", "s_index_run/run.trec", "--qrels", "s/qrels.txt"]))),
    ]
}

/// Fixed inputs the pipeline reads: a synthetic model in `s/`, its index in
/// `s_index/`, a run in `s_index_run/`, two sample sets and a per-token file.
pub fn prepare(root: &Path) {
    ok(&["synth", "--out", "s", "--vocab-size", "600", "--corpus-size", "150", "--query-count", "40", "--profile", "mixed:0.5", "--seed", "3"], root);
    ok(&["synth", "--out", "s2", "--vocab-size", "600", "--corpus-size", "150", "--query-count", "40", "--profile", "random-token", "--seed", "3"], root);
    ok(&["index", "--out", "s_index", "--vocab", "s/vocab.tsv", "--corpus", "s/corpus.jsonl", "--vectors", "s/doc_vectors.jsonl"], root);
    ok(&["index", "--out", "s2_index", "--vocab", "s2/vocab.tsv", "--corpus", "s2/corpus.jsonl", "--vectors", "s2/doc_vectors.jsonl"], root);
    ok(&["search", "--out", "s_index_run", "--vocab", "s/vocab.tsv", "--index", "s_index", "--vectors", "s/query_vectors.jsonl", "--k", "100"], root);
    ok(&["wackiness", "--out", "s_wk", "--vocab", "s/vocab.tsv", "--index", "s_index", "--queries", "s/queries.jsonl", "--vectors", "s/query_vectors.jsonl"], root);
    ok(&["wackiness", "--out", "s_wk2", "--vocab", "s2/vocab.tsv", "--index", "s2_index", "--queries", "s2/queries.jsonl", "--vectors", "s2/query_vectors.jsonl"], root);
    std::fs::write(root.join("s/per_token.jsonl"), PER_TOKEN).unwrap();
}

pub const PER_TOKEN: &str = r#"{"format":"per_token","activated":false}
{"id":"x1","cls_pos":0,"rows":[{"pos":0,"weights":{"2":1.5,"3":-0.5}},{"pos":1,"weights":{"3":2.0,"7":0.25}}]}
{"id":"x2","cls_pos":0,"rows":[{"pos":0,"weights":{"9":-1.0}},{"pos":1,"weights":{"9":0.5,"10":3.0}}]}
"#;

pub fn tempdir() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

pub fn path(root: &Path, rel: &str) -> PathBuf {
    root.join(rel)
}
