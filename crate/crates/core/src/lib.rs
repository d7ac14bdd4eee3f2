//! Measuring "wacky" expansion weights in learned sparse retrieval.
//!
//! The crate ingests sparse query/document representations, retrieves with
//! an exact inverted impact index, scores every expansion token by its
//! lexical importance among the retrieved documents, summarizes a model with
//! a normalized wackiness curve and its area (W-AUC), and measures how much
//! retrieval effectiveness depends on the wackiest expansion tokens.

pub mod ablation;
pub mod curve;
pub mod error;
pub mod impact;
pub mod io;
pub mod lexical;
pub mod metrics;
pub mod model;
pub mod representation;
pub mod synth;
pub mod wackiness;

pub use error::{Error, Result};
pub use impact::{exhaustive_search, ImpactIndex, Retriever};
pub use lexical::LexicalIndex;
pub use model::{PerTokenMatrix, Qrels, Ranking, SparseVector, TokenId, TokenizedInput, Vocabulary};
pub use wackiness::{TokenWackinessTable, WackinessConfig};
