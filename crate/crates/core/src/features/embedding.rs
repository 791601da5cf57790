use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::FeatureVector;
use crate::error::{Error, Result};
use crate::preprocess::TokenStream;

/// Word vectors in GloVe text format, stored as `f32`.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    digest: String,
}

/// What to do with a user whose tokens are all out of vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OovPolicy {
    #[default]
    Error,
    ZeroVector,
}

impl EmbeddingTable {
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (String, Vec<f32>)>) -> Result<Self> {
        let mut b = TableBuilder::new(Some(dim));
        for (i, (w, v)) in entries.into_iter().enumerate() {
            b.push(i + 1, w, v)?;
        }
        b.finish()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.index
            .get(word)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// SHA-256 over words and vector bits, in file order.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn write_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (i, word) in self.words.iter().enumerate() {
            w.write_all(word.as_bytes())?;
            for v in &self.data[i * self.dim..(i + 1) * self.dim] {
                write!(w, " {v}")?;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

struct TableBuilder {
    dim: Option<usize>,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    hasher: Sha256,
}

impl TableBuilder {
    fn new(dim: Option<usize>) -> Self {
        TableBuilder {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            hasher: Sha256::new(),
        }
    }

    fn push(&mut self, line: usize, word: String, vec: Vec<f32>) -> Result<()> {
        let err = |message: String| Error::Parse {
            what: "embeddings",
            line,
            message,
        };
        if word.is_empty() {
            return Err(err("empty word".into()));
        }
        let dim = *self.dim.get_or_insert(vec.len());
        if vec.len() != dim || dim == 0 {
            return Err(err(format!("expected {dim} components, found {}", vec.len())));
        }
        if let Some(bad) = vec.iter().find(|v| !v.is_finite()) {
            return Err(err(format!("non-finite component {bad}")));
        }
        if self.index.insert(word.clone(), self.words.len()).is_some() {
            return Err(err(format!("duplicate word {word:?}")));
        }
        self.hasher.update((word.len() as u64).to_le_bytes());
        self.hasher.update(word.as_bytes());
        for v in &vec {
            self.hasher.update(v.to_le_bytes());
        }
        self.words.push(word);
        self.data.extend(vec);
        Ok(())
    }

    fn finish(self) -> Result<EmbeddingTable> {
        Ok(EmbeddingTable {
            dim: self.dim.unwrap_or(0),
            words: self.words,
            index: self.index,
            data: self.data,
            digest: hex::encode(self.hasher.finalize()),
        })
    }
}

pub fn load_embeddings(path: impl AsRef<Path>, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_embeddings(BufReader::new(file), expected_dim)
}

/// Parses `word v1 … vD` lines. A leading `N D` header line is skipped.
pub fn read_embeddings<R: BufRead>(reader: R, expected_dim: Option<usize>) -> Result<EmbeddingTable> {
    let mut b = TableBuilder::new(expected_dim);
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            what: "embeddings",
            line: lineno,
            message: e.to_string(),
        })?;
        let line = line.trim_end_matches(['\r', '\n', ' ']);
        if line.is_empty() {
            continue;
        }
        // GloVe separates fields with a single ASCII space; some vocabulary
        // entries contain other whitespace characters.
        let mut fields = line.split(' ');
        let word = fields.next().unwrap_or_default();
        let rest: Vec<&str> = fields.collect();
        if lineno == 1 && rest.len() == 1 {
            if let (Ok(_), Ok(d)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                match expected_dim {
                    Some(e) if e != d => {
                        return Err(Error::DimensionMismatch {
                            expected: e,
                            got: d,
                        })
                    }
                    _ => b.dim = Some(d),
                }
                continue;
            }
        }
        let vec = rest
            .iter()
            .map(|s| {
                s.parse::<f32>().map_err(|_| Error::Parse {
                    what: "embeddings",
                    line: lineno,
                    message: format!("non-numeric component {s:?}"),
                })
            })
            .collect::<Result<Vec<f32>>>()?;
        if let (Some(e), None) = (expected_dim, b.words.first()) {
            if vec.len() != e {
                return Err(Error::DimensionMismatch {
                    expected: e,
                    got: vec.len(),
                });
            }
        }
        b.push(lineno, word.to_owned(), vec)?;
    }
    b.finish()
}

/// Mean of the vectors of in-vocabulary token occurrences.
pub fn embed_average(tokens: &TokenStream, table: &EmbeddingTable) -> Result<FeatureVector> {
    if table.is_empty() {
        return Err(Error::invalid("empty embedding table"));
    }
    let mut sum = vec![0.0f64; table.dim()];
    let mut covered = 0usize;
    for tok in &tokens.tokens {
        if let Some(v) = table.get(tok) {
            covered += 1;
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += f64::from(x);
            }
        }
    }
    if covered == 0 {
        return Err(Error::NoCoveredTokens);
    }
    let n = covered as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(FeatureVector {
        values: sum,
        covered_tokens: covered,
        total_tokens: tokens.len(),
    })
}

pub fn embed_average_with(
    tokens: &TokenStream,
    table: &EmbeddingTable,
    policy: OovPolicy,
) -> Result<FeatureVector> {
    match (embed_average(tokens, table), policy) {
        (Err(Error::NoCoveredTokens), OovPolicy::ZeroVector) => Ok(FeatureVector {
            values: vec![0.0; table.dim()],
            covered_tokens: 0,
            total_tokens: tokens.len(),
        }),
        (r, _) => r,
    }
}
