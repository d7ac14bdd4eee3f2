//! Sparse representation math: `log(1 + ReLU(x))` activation, MAX/SUM/CLS
//! pooling over token positions, and the FLOPs / L1 sparsity regularizers.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PerTokenMatrix, SparseVector, TokenId, TokenRow};

/// `x -> ln(1 + max(0, x))`; entries that map to zero are dropped.
pub fn activate(raw: &BTreeMap<TokenId, f64>) -> Result<BTreeMap<TokenId, f64>> {
    let mut out = BTreeMap::new();
    for (&t, &x) in raw {
        if !x.is_finite() {
            return Err(Error::validation(format!("non-finite logit {x} for token {t}")));
        }
        let y = x.max(0.0).ln_1p();
        if y > 0.0 {
            out.insert(t, y);
        }
    }
    Ok(out)
}

/// Applies [`activate`] to every row of a raw matrix.
pub fn activate_matrix(m: &PerTokenMatrix) -> Result<PerTokenMatrix> {
    let rows = m
        .rows()
        .iter()
        .map(|r| {
            Ok(TokenRow {
                position: r.position,
                weights: activate(&r.weights)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PerTokenMatrix::new(m.id.clone(), rows, m.cls_position())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Max,
    Sum,
    Cls,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Max => "max",
            Aggregation::Sum => "sum",
            Aggregation::Cls => "cls",
        })
    }
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "max" => Ok(Aggregation::Max),
            "sum" => Ok(Aggregation::Sum),
            "cls" => Ok(Aggregation::Cls),
            _ => Err(Error::InvalidArgument(format!("unknown aggregation `{s}`"))),
        }
    }
}

/// Pools an activated per-token matrix into a single vector.
pub fn aggregate(m: &PerTokenMatrix, mode: Aggregation) -> Result<SparseVector> {
    if let Some((t, w)) = m
        .rows()
        .iter()
        .flat_map(|r| r.weights.iter())
        .find(|(_, w)| **w < 0.0)
    {
        return Err(Error::validation(format!(
            "matrix `{}`: negative weight {w} for token {t}; activate raw outputs first",
            m.id
        )));
    }
    let pooled: BTreeMap<TokenId, f64> = match mode {
        Aggregation::Max => {
            let mut acc = BTreeMap::new();
            for row in m.rows() {
                for (&t, &w) in &row.weights {
                    let e = acc.entry(t).or_insert(w);
                    if w > *e {
                        *e = w;
                    }
                }
            }
            acc
        }
        Aggregation::Sum => {
            let mut acc = BTreeMap::new();
            for row in m.rows() {
                for (&t, &w) in &row.weights {
                    *acc.entry(t).or_insert(0.0) += w;
                }
            }
            acc
        }
        Aggregation::Cls => {
            let row = m.cls_row().ok_or_else(|| {
                Error::validation(format!("matrix `{}`: CLS pooling requires cls_pos", m.id))
            })?;
            row.weights.clone()
        }
    };
    SparseVector::from_weights(m.id.clone(), pooled)
}

/// Non-empty set of vectors sharing one vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    vectors: Vec<SparseVector>,
}

impl Batch {
    pub fn new(vectors: Vec<SparseVector>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::InvalidArgument("a batch needs at least one vector".into()));
        }
        Ok(Self { vectors })
    }

    pub fn vectors(&self) -> &[SparseVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// `sum_j ((1/N) sum_i v_i[j])^2`, reduced in ascending token order.
pub fn flops_loss(batch: &Batch) -> f64 {
    let n = batch.len() as f64;
    let mut column_sums: BTreeMap<TokenId, f64> = BTreeMap::new();
    for v in batch.vectors() {
        for (t, w) in v.iter() {
            *column_sums.entry(t).or_insert(0.0) += w;
        }
    }
    column_sums
        .values()
        .map(|s| {
            let mean = s / n;
            mean * mean
        })
        .sum()
}

/// `(1/N) sum_i sum_j |v_i[j]|`.
pub fn l1_loss(batch: &Batch) -> f64 {
    let total: f64 = batch
        .vectors()
        .iter()
        .map(|v| v.iter().map(|(_, w)| w.abs()).sum::<f64>())
        .sum();
    total / batch.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RegularizerKind {
    Flops,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizerConfig {
    pub lambda_q: f64,
    pub lambda_d: f64,
    pub kind: RegularizerKind,
}

impl RegularizerConfig {
    pub fn new(lambda_q: f64, lambda_d: f64, kind: RegularizerKind) -> Result<Self> {
        for l in [lambda_q, lambda_d] {
            if !l.is_finite() || l < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "regularization weight {l} must be finite and >= 0"
                )));
            }
        }
        Ok(Self {
            lambda_q,
            lambda_d,
            kind,
        })
    }
}

/// `lambda_q * L(queries) + lambda_d * L(docs)`; the ranking loss is not included.
pub fn combined_regularizer(queries: &Batch, docs: &Batch, cfg: &RegularizerConfig) -> f64 {
    let loss = match cfg.kind {
        RegularizerKind::Flops => flops_loss,
        RegularizerKind::L1 => l1_loss,
    };
    cfg.lambda_q * loss(queries) + cfg.lambda_d * loss(docs)
}
