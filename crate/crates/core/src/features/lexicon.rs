use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::FeatureVector;
use crate::error::{Error, Result};
use crate::preprocess::TokenStream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pattern {
    Word(String),
    /// `lov*` matches every token starting with `lov`.
    Prefix(String),
}

impl Pattern {
    pub fn parse(s: &str) -> std::result::Result<Pattern, String> {
        match s.find('*') {
            None if s.is_empty() => Err("empty pattern".into()),
            None => Ok(Pattern::Word(s.to_owned())),
            Some(i) if i + 1 != s.len() => Err(format!("'*' must be the final character in {s:?}")),
            Some(0) => Err("empty pattern".into()),
            Some(i) => Ok(Pattern::Prefix(s[..i].to_owned())),
        }
    }

    pub fn matches(&self, token: &str) -> bool {
        match self {
            Pattern::Word(w) => w == token,
            Pattern::Prefix(p) => token.starts_with(p.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LexiconRepr {
    categories: Vec<String>,
    patterns: Vec<Vec<Pattern>>,
}

/// Word-category dictionary in the style of LIWC.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "LexiconRepr", into = "LexiconRepr")]
pub struct Lexicon {
    repr: LexiconRepr,
    /// exact word → categories
    words: HashMap<String, Vec<usize>>,
    prefixes: Vec<(String, usize)>,
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.repr == other.repr
    }
}

impl From<LexiconRepr> for Lexicon {
    fn from(repr: LexiconRepr) -> Self {
        let mut lex = Lexicon::new();
        for (cat, ps) in repr.categories.iter().zip(repr.patterns) {
            lex.ensure_category(cat);
            for p in ps {
                lex.add(cat, p);
            }
        }
        lex
    }
}

impl From<Lexicon> for LexiconRepr {
    fn from(l: Lexicon) -> Self {
        l.repr
    }
}

impl Lexicon {
    pub fn new() -> Self {
        Lexicon {
            repr: LexiconRepr {
                categories: Vec::new(),
                patterns: Vec::new(),
            },
            words: HashMap::new(),
            prefixes: Vec::new(),
        }
    }

    fn ensure_category(&mut self, category: &str) -> usize {
        match self.repr.categories.iter().position(|c| c == category) {
            Some(i) => i,
            None => {
                self.repr.categories.push(category.to_owned());
                self.repr.patterns.push(Vec::new());
                self.repr.categories.len() - 1
            }
        }
    }

    pub fn add(&mut self, category: &str, pattern: Pattern) {
        let idx = self.ensure_category(category);
        if self.repr.patterns[idx].contains(&pattern) {
            return;
        }
        match &pattern {
            Pattern::Word(w) => {
                let cats = self.words.entry(w.clone()).or_default();
                if !cats.contains(&idx) {
                    cats.push(idx);
                    cats.sort_unstable();
                }
            }
            Pattern::Prefix(p) => self.prefixes.push((p.clone(), idx)),
        }
        self.repr.patterns[idx].push(pattern);
    }

    pub fn categories(&self) -> &[String] {
        &self.repr.categories
    }

    pub fn patterns(&self, category: usize) -> &[Pattern] {
        &self.repr.patterns[category]
    }

    pub fn pattern_count(&self) -> usize {
        self.repr.patterns.iter().map(Vec::len).sum()
    }

    /// Indices of every category with a pattern matching `token`, ascending.
    pub fn categories_of(&self, token: &str) -> impl Iterator<Item = usize> {
        let mut cats: Vec<usize> = self.words.get(token).cloned().unwrap_or_default();
        for (p, c) in &self.prefixes {
            if token.starts_with(p.as_str()) {
                cats.push(*c);
            }
        }
        cats.sort_unstable();
        cats.dedup();
        cats.into_iter()
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("lexicon serializes"));
        hex::encode(h.finalize())
    }

    /// Writes the `category<TAB>pattern` form read by [`read_lexicon`].
    pub fn write_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        for (cat, ps) in self.repr.categories.iter().zip(&self.repr.patterns) {
            for p in ps {
                match p {
                    Pattern::Word(x) => writeln!(w, "{cat}\t{x}")?,
                    Pattern::Prefix(x) => writeln!(w, "{cat}\t{x}*")?,
                }
            }
        }
        Ok(())
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::new()
    }
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_lexicon(BufReader::new(file))
}

/// Parses `category<TAB>pattern` lines; `#` starts a comment line.
pub fn read_lexicon<R: BufRead>(reader: R) -> Result<Lexicon> {
    let mut lex = Lexicon::new();
    for (i, line) in reader.lines().enumerate() {
        let err = |message: String| Error::Parse {
            what: "lexicon",
            line: i + 1,
            message,
        };
        let line = line.map_err(|e| err(e.to_string()))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (cat, pat) = line
            .split_once('\t')
            .ok_or_else(|| err("expected category<TAB>pattern".into()))?;
        if cat.is_empty() {
            return Err(err("empty category".into()));
        }
        lex.add(cat, Pattern::parse(pat.trim()).map_err(err)?);
    }
    Ok(lex)
}

/// Per category, the share of tokens matching any of its patterns.
pub fn lexicon_features(tokens: &TokenStream, lex: &Lexicon) -> FeatureVector {
    let mut counts = vec![0usize; lex.categories().len()];
    let mut cache: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut covered = 0;
    for tok in &tokens.tokens {
        let cats = cache
            .entry(tok.as_str())
            .or_insert_with(|| lex.categories_of(tok).collect());
        if !cats.is_empty() {
            covered += 1;
        }
        for &c in cats.iter() {
            counts[c] += 1;
        }
    }
    let total = tokens.len();
    let values = counts
        .into_iter()
        .map(|c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
        .collect();
    FeatureVector {
        values,
        covered_tokens: covered,
        total_tokens: total,
    }
}
