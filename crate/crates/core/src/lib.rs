//! Gender bias measurement over per-domain word embeddings.
//!
//! The pipeline is: ingest a tabular corpus per domain ([`corpus`]), tokenize
//! it ([`tokenize`]), obtain embeddings either from a word2vec/GloVe text file
//! ([`embed`]) or by training skip-gram with negative sampling ([`sgns`]),
//! resolve word sets against the vocabulary ([`lexicon`]) and then measure
//! bias with WEAT ([`weat`]) and TGBI ([`tgbi`]). [`analysis`] ties the
//! per-domain results together into comparison reports.

pub mod analysis;
pub mod corpus;
pub mod embed;
mod error;
pub mod lexicon;
pub mod numeric;
pub mod rng;
pub mod sgns;
pub mod tgbi;
pub mod tokenize;
pub mod weat;

pub use error::{Error, Result};

/// Version string embedded in emitted reports.
pub const TOOL_VERSION: &str = concat!("biasprobe ", env!("CARGO_PKG_VERSION"));
