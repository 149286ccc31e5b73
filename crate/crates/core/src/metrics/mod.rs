//! Scores reported by the benchmark.

mod aggregate;
pub mod bleu;
pub mod embed;
mod labeling;
mod prf;

use thiserror::Error;

pub use aggregate::{
    aggregate, aggregate_reports, BleuSummary, EmbedSummary, ItemMetrics, MetricReport,
    PrfSummary, Summary,
};
pub use bleu::{bleu, bleu_tokens, corpus_bleu, BleuScores, MAX_ORDER as MAX_BLEU_ORDER};
pub use embed::{
    cosine, embed_score, embed_score_vectors, EmbedScore, EmbeddingProvider,
    MockEmbeddingProvider, ProviderError,
};
pub use labeling::{
    prf_entities, prf_entities_with, prf_pos, prf_pos_with, prf_punct, prf_punct_with,
    EntityMatching, PosMatching, PunctOptions, PunctScore,
};
pub use prf::{Counts, Prf, PrfBreakdown};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("input is empty after tokenization")]
    EmptyInput,
    #[error("nothing to aggregate")]
    EmptyList,
    #[error("cannot aggregate scores of different kinds")]
    MixedKinds,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}
