//! Near-duplicate detection for manuscript corpora.
//!
//! Titles and abstracts are reduced to hashed word k-shingles, sketched with
//! MinHash and bucketed with banded LSH. Candidate pairs are verified against
//! the exact shingle Jaccard (default threshold 0.8), closed into clusters,
//! and analysed for resubmissions, simultaneous submissions, duplicate
//! publications and journal revisits along manuscript journeys.

pub mod config;
pub mod corpus;
pub mod dedup;
pub mod error;
pub mod journeys;
pub mod lsh;
pub mod minhash;
pub mod pipeline;
pub mod shingling;
pub mod snapshot;
pub mod synth;

pub use config::PipelineConfig;
pub use corpus::{ingest, Corpus, Decision, IngestOptions, IngestReport, ManuscriptRecord};
pub use dedup::{
    classify_clusters, classify_pair, cluster, find_published_duplicates, find_simultaneous,
    stats, ClassificationPolicy, DuplicateCluster, PairClassification, PairKind, StatsReport,
};
pub use error::{Error, Result};
pub use journeys::{build_journeys, export_journey, export_journeys, recommend_transfers, Journey};
pub use lsh::{CandidatePair, LshIndex, VerifiedPair};
pub use minhash::{estimate_jaccard, HashFamily, MinHashSignature};
pub use pipeline::{analyze, IndexedCorpus};
pub use shingling::{exact_jaccard, normalize, shingle, ShingleSet, ShingleStore};
pub use synth::{generate_synthetic, GroundTruth, SynthSpec};
