//! Embedding-based P/R/F1: greedy maximum cosine matching over token vectors,
//! without IDF weighting or baseline rescaling.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::bleu::bleu_tokens;
use super::MetricsError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("embedding request failed: {0}")]
    Network(String),
    #[error("embedding provider rejected credentials: {0}")]
    Auth(String),
    #[error("embedding provider returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed embedding response: {0}")]
    Shape(String),
    #[error("{0}")]
    Config(String),
}

/// Source of per-token vectors. Tokenization belongs to the provider.
pub trait EmbeddingProvider: Send + Sync {
    /// One matrix (tokens × dims) per input text, in input order.
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<Vec<f64>>>, ProviderError>;

    fn name(&self) -> &str;
}

/// Precision, recall and F1 as fractions; multiply by 100 for tables.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbedScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl EmbedScore {
    pub fn percent(&self) -> EmbedScore {
        EmbedScore {
            precision: self.precision * 100.0,
            recall: self.recall * 100.0,
            f1: self.f1 * 100.0,
        }
    }
}

/// Cosine similarity; 0 when either vector is all zeros.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb).sqrt()
    }
}

fn greedy(from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|u| {
            to.iter()
                .map(|v| cosine(u, v))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    total / from.len() as f64
}

/// Scores token matrices directly.
pub fn embed_score_vectors(candidate: &[Vec<f64>], reference: &[Vec<f64>]) -> EmbedScore {
    if candidate.is_empty() || reference.is_empty() {
        return EmbedScore::default();
    }
    let precision = greedy(candidate, reference);
    let recall = greedy(reference, candidate);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    EmbedScore {
        precision,
        recall,
        f1,
    }
}

pub fn embed_score(
    candidate: &str,
    reference: &str,
    provider: &dyn EmbeddingProvider,
) -> Result<EmbedScore, MetricsError> {
    if candidate.trim().is_empty() || reference.trim().is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut mats = provider.embed(&[candidate, reference])?;
    if mats.len() != 2 {
        return Err(ProviderError::Shape(format!("expected 2 matrices, got {}", mats.len())).into());
    }
    let reference_vecs = mats.pop().unwrap();
    let candidate_vecs = mats.pop().unwrap();
    check_shape(&candidate_vecs, &reference_vecs)?;
    Ok(embed_score_vectors(&candidate_vecs, &reference_vecs))
}

fn check_shape(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(), ProviderError> {
    if a.is_empty() || b.is_empty() {
        return Err(ProviderError::Shape("no token vectors".into()));
    }
    let dim = a[0].len();
    if dim == 0 || a.iter().chain(b).any(|v| v.len() != dim) {
        return Err(ProviderError::Shape("inconsistent vector dimensions".into()));
    }
    Ok(())
}

/// Deterministic offline provider. Tokens are split like BLEU tokens; tokens
/// listed in the table get their listed vector, others a vector derived
/// from a hash of the token.
#[derive(Debug, Clone)]
pub struct MockEmbeddingProvider {
    table: HashMap<String, Vec<f64>>,
    dims: usize,
}

impl MockEmbeddingProvider {
    pub const DEFAULT_DIMS: usize = 16;

    pub fn new(dims: usize) -> Self {
        Self {
            table: HashMap::new(),
            dims: dims.max(1),
        }
    }

    /// All vectors must share one dimension.
    pub fn from_table(table: HashMap<String, Vec<f64>>) -> Result<Self, ProviderError> {
        let mut dims = None;
        for v in table.values() {
            match dims {
                None => dims = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(ProviderError::Config("mixed vector dimensions".into()))
                }
                _ => {}
            }
        }
        let dims = dims.unwrap_or(Self::DEFAULT_DIMS);
        if dims == 0 {
            return Err(ProviderError::Config("zero-length vectors".into()));
        }
        Ok(Self { table, dims })
    }

    /// Lines of `token<TAB>x1 x2 ...`; blank and `#` lines are skipped.
    pub fn parse_table(text: &str) -> Result<Self, ProviderError> {
        let mut table = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (tok, nums) = line
                .split_once('\t')
                .ok_or_else(|| ProviderError::Config(format!("line {}: missing tab", n + 1)))?;
            let v = nums
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ProviderError::Config(format!("line {}: {e}", n + 1)))?;
            table.insert(tok.to_owned(), v);
        }
        Self::from_table(table)
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        Self::parse_table(&text)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn vector(&self, token: &str) -> Vec<f64> {
        if let Some(v) = self.table.get(token) {
            return v.clone();
        }
        let seed: [u8; 32] = Sha256::digest(token.as_bytes()).into();
        let mut rng = ChaCha8Rng::from_seed(seed);
        (0..self.dims).map(|_| rng.random_range(-1.0..1.0)).collect()
    }
}

impl EmbeddingProvider for MockEmbeddingProvider {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<Vec<f64>>>, ProviderError> {
        Ok(texts
            .iter()
            .map(|t| bleu_tokens(t).iter().map(|tok| self.vector(tok)).collect())
            .collect())
    }

    fn name(&self) -> &str {
        "mock"
    }
}
