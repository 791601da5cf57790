//! Fixed-length user representations: averaged word embeddings, lexicon
//! category rates and n-gram relative frequencies.

mod embedding;
mod lexicon;
mod ngram;
mod standardize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::preprocess::TokenStream;

pub use embedding::{
    embed_average, embed_average_with, load_embeddings, read_embeddings, EmbeddingTable, OovPolicy,
};
pub use lexicon::{lexicon_features, load_lexicon, read_lexicon, Lexicon, Pattern};
pub use ngram::{build_ngram_vocab, ngram_features, NgramOptions, NgramVocab};
pub use standardize::Standardizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub covered_tokens: usize,
    pub total_tokens: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Embedding,
    Lexicon,
    Ngram,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 3] = [FeatureKind::Lexicon, FeatureKind::Ngram, FeatureKind::Embedding];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Embedding => "embedding",
            FeatureKind::Lexicon => "lexicon",
            FeatureKind::Ngram => "ngram",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "embedding" => Ok(FeatureKind::Embedding),
            "lexicon" => Ok(FeatureKind::Lexicon),
            "ngram" => Ok(FeatureKind::Ngram),
            _ => Err(Error::invalid(format!("unknown feature set {s:?}"))),
        }
    }
}

/// Everything needed to rebuild a featurizer; persisted with trained models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureConfig {
    Embedding {
        dim: usize,
        table_digest: String,
        oov: OovPolicy,
    },
    Lexicon {
        categories: usize,
        lexicon_digest: String,
    },
    Ngram {
        vocab: NgramVocab,
    },
}

impl FeatureConfig {
    pub fn kind(&self) -> FeatureKind {
        match self {
            FeatureConfig::Embedding { .. } => FeatureKind::Embedding,
            FeatureConfig::Lexicon { .. } => FeatureKind::Lexicon,
            FeatureConfig::Ngram { .. } => FeatureKind::Ngram,
        }
    }

    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("feature config serializes"));
        hex::encode(h.finalize())
    }
}

/// A ready-to-use extractor. N-gram featurizers own their fitted vocabulary.
#[derive(Debug, Clone)]
pub enum Featurizer<'a> {
    Embedding(&'a EmbeddingTable, OovPolicy),
    Lexicon(&'a Lexicon),
    Ngram(NgramVocab),
}

impl Featurizer<'_> {
    pub fn kind(&self) -> FeatureKind {
        match self {
            Featurizer::Embedding(..) => FeatureKind::Embedding,
            Featurizer::Lexicon(_) => FeatureKind::Lexicon,
            Featurizer::Ngram(_) => FeatureKind::Ngram,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Featurizer::Embedding(t, _) => t.dim(),
            Featurizer::Lexicon(l) => l.categories().len(),
            Featurizer::Ngram(v) => v.dimension(),
        }
    }

    pub fn extract(&self, tokens: &TokenStream) -> Result<FeatureVector> {
        match self {
            Featurizer::Embedding(t, p) => embed_average_with(tokens, t, *p),
            Featurizer::Lexicon(l) => Ok(lexicon_features(tokens, l)),
            Featurizer::Ngram(v) => Ok(ngram_features(tokens, v)),
        }
    }

    pub fn config(&self) -> FeatureConfig {
        match self {
            Featurizer::Embedding(t, p) => FeatureConfig::Embedding {
                dim: t.dim(),
                table_digest: t.digest().to_owned(),
                oov: *p,
            },
            Featurizer::Lexicon(l) => FeatureConfig::Lexicon {
                categories: l.categories().len(),
                lexicon_digest: l.digest(),
            },
            Featurizer::Ngram(v) => FeatureConfig::Ngram { vocab: v.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub kind: FeatureKind,
    /// One entry for embeddings and lexicons; one per n-gram order otherwise.
    pub fractions: Vec<f64>,
    pub matched: Vec<usize>,
    pub total: Vec<usize>,
}

/// Extractor whose vocabulary coverage is measured.
#[derive(Debug, Clone, Copy)]
pub enum CoverageSource<'a> {
    Embedding(&'a EmbeddingTable),
    Lexicon(&'a Lexicon),
    Ngram(&'a NgramVocab),
}

pub fn coverage_report(streams: &[TokenStream], source: CoverageSource<'_>) -> Result<CoverageReport> {
    if streams.is_empty() {
        return Err(Error::invalid("coverage needs at least one token stream"));
    }
    let token_counts = |hit: &dyn Fn(&str) -> bool| {
        let mut matched = 0;
        let mut total = 0;
        for t in streams.iter().flat_map(|s| &s.tokens) {
            total += 1;
            matched += usize::from(hit(t));
        }
        (matched, total)
    };
    let (kind, counts) = match source {
        CoverageSource::Embedding(t) => (FeatureKind::Embedding, vec![token_counts(&|w| t.contains(w))]),
        CoverageSource::Lexicon(l) => (
            FeatureKind::Lexicon,
            vec![token_counts(&|w| l.categories_of(w).next().is_some())],
        ),
        CoverageSource::Ngram(v) => (FeatureKind::Ngram, ngram::ngram_coverage_counts(streams, v)),
    };
    Ok(CoverageReport {
        kind,
        fractions: counts
            .iter()
            .map(|&(m, t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
            .collect(),
        matched: counts.iter().map(|c| c.0).collect(),
        total: counts.iter().map(|c| c.1).collect(),
    })
}
