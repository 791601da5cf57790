use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::FeatureVector;
use crate::error::{Error, Result};
use crate::preprocess::TokenStream;

const PAD: u32 = u32::MAX;

type GramKey = [u32; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramOptions {
    pub max_n: usize,
    pub cap_per_order: usize,
    /// Keep windows inside single tweets instead of the concatenated stream.
    pub per_tweet: bool,
}

impl Default for NgramOptions {
    fn default() -> Self {
        NgramOptions {
            max_n: 3,
            cap_per_order: 2000,
            per_tweet: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VocabRepr {
    options: NgramOptions,
    /// `orders[n - 1]` lists `(n-gram, corpus count)`, most frequent first.
    orders: Vec<Vec<(String, u64)>>,
}

/// Most frequent n-grams per order, fitted on training users.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct NgramVocab {
    repr: VocabRepr,
    words: HashMap<String, u32>,
    /// key → global feature index
    index: HashMap<GramKey, usize>,
}

impl PartialEq for NgramVocab {
    fn eq(&self, other: &Self) -> bool {
        self.repr.options == other.repr.options && self.repr.orders == other.repr.orders
    }
}

impl From<VocabRepr> for NgramVocab {
    fn from(repr: VocabRepr) -> Self {
        let mut words = HashMap::new();
        let mut index = HashMap::new();
        let mut next = 0;
        for grams in &repr.orders {
            for (g, _) in grams {
                let mut key = [PAD; 3];
                for (slot, w) in key.iter_mut().zip(g.split(' ')) {
                    let id = words.len() as u32;
                    *slot = *words.entry(w.to_owned()).or_insert(id);
                }
                index.insert(key, next);
                next += 1;
            }
        }
        NgramVocab {
            repr,
            words,
            index,
        }
    }
}

impl From<NgramVocab> for VocabRepr {
    fn from(v: NgramVocab) -> Self {
        v.repr
    }
}

impl NgramVocab {
    pub fn options(&self) -> &NgramOptions {
        &self.repr.options
    }

    pub fn order(&self, n: usize) -> &[(String, u64)] {
        &self.repr.orders[n - 1]
    }

    pub fn max_n(&self) -> usize {
        self.repr.orders.len()
    }

    pub fn dimension(&self) -> usize {
        self.repr.orders.iter().map(Vec::len).sum()
    }

    fn ids(&self, tokens: &[String]) -> Vec<u32> {
        tokens
            .iter()
            .map(|t| self.words.get(t).copied().unwrap_or(PAD))
            .collect()
    }

    /// Global feature index of each window of order `n`, or `None` when
    /// the n-gram is outside the vocabulary.
    fn lookup_windows(&self, stream: &TokenStream, n: usize, mut f: impl FnMut(Option<usize>)) {
        for_each_segment(stream, self.repr.options.per_tweet, |seg| {
            let ids = self.ids(seg);
            for w in ids.windows(n) {
                if w.contains(&PAD) {
                    f(None);
                    continue;
                }
                let mut key = [PAD; 3];
                key[..n].copy_from_slice(w);
                f(self.index.get(&key).copied());
            }
        });
    }
}

fn for_each_segment<'a>(stream: &'a TokenStream, per_tweet: bool, mut f: impl FnMut(&'a [String])) {
    if per_tweet {
        stream.tweets().for_each(f);
    } else {
        f(&stream.tokens);
    }
}

pub(crate) fn window_count(stream: &TokenStream, n: usize, per_tweet: bool) -> usize {
    let mut total = 0;
    for_each_segment(stream, per_tweet, |seg| total += (seg.len() + 1).saturating_sub(n));
    total
}

pub fn build_ngram_vocab(streams: &[TokenStream], opts: &NgramOptions) -> Result<NgramVocab> {
    if opts.cap_per_order < 1 {
        return Err(Error::invalid("cap_per_order must be at least 1"));
    }
    if !(1..=3).contains(&opts.max_n) {
        return Err(Error::invalid(format!("max_n must be 1, 2 or 3, got {}", opts.max_n)));
    }
    let mut interner: HashMap<&str, u32> = HashMap::new();
    let mut names: Vec<&str> = Vec::new();
    let mut counts: Vec<HashMap<GramKey, u64>> = vec![HashMap::new(); opts.max_n];
    for s in streams {
        for_each_segment(s, opts.per_tweet, |seg| {
            let ids: Vec<u32> = seg
                .iter()
                .map(|t| {
                    *interner.entry(t.as_str()).or_insert_with(|| {
                        names.push(t.as_str());
                        names.len() as u32 - 1
                    })
                })
                .collect();
            for (n, table) in (1..=opts.max_n).zip(counts.iter_mut()) {
                for w in ids.windows(n) {
                    let mut key = [PAD; 3];
                    key[..n].copy_from_slice(w);
                    *table.entry(key).or_default() += 1;
                }
            }
        });
    }
    let orders = counts
        .into_iter()
        .map(|table| {
            let mut grams: Vec<(String, u64)> = table
                .into_iter()
                .map(|(key, c)| {
                    let text = key
                        .iter()
                        .take_while(|&&id| id != PAD)
                        .map(|&id| names[id as usize])
                        .collect::<Vec<_>>()
                        .join(" ");
                    (text, c)
                })
                .collect();
            grams.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            grams.truncate(opts.cap_per_order);
            grams
        })
        .collect();
    Ok(NgramVocab::from(VocabRepr {
        options: *opts,
        orders,
    }))
}

/// Relative frequency of every vocabulary n-gram among the windows of its order.
pub fn ngram_features(tokens: &TokenStream, vocab: &NgramVocab) -> FeatureVector {
    let mut values = vec![0.0; vocab.dimension()];
    let per_tweet = vocab.options().per_tweet;
    let mut covered = 0;
    for n in 1..=vocab.max_n() {
        let mut counts: HashMap<usize, usize> = HashMap::new();
        vocab.lookup_windows(tokens, n, |idx| {
            if let Some(i) = idx {
                *counts.entry(i).or_default() += 1;
            }
        });
        if n == 1 {
            covered = counts.values().sum();
        }
        let windows = window_count(tokens, n, per_tweet);
        if windows > 0 {
            for (i, c) in counts {
                values[i] = c as f64 / windows as f64;
            }
        }
    }
    FeatureVector {
        values,
        covered_tokens: covered,
        total_tokens: tokens.len(),
    }
}

/// Per order, `(matched windows, total windows)`.
pub(crate) fn ngram_coverage_counts(streams: &[TokenStream], vocab: &NgramVocab) -> Vec<(usize, usize)> {
    (1..=vocab.max_n())
        .map(|n| {
            let mut hit = 0;
            let mut total = 0;
            for s in streams {
                vocab.lookup_windows(s, n, |idx| {
                    total += 1;
                    hit += usize::from(idx.is_some());
                });
            }
            (hit, total)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::preprocess_user;
    use proptest::prelude::*;

    fn stream(words: &[&str]) -> TokenStream {
        TokenStream::from_tokens(words.iter().map(|s| s.to_string()).collect())
    }

    fn opts(cap: usize) -> NgramOptions {
        NgramOptions {
            cap_per_order: cap,
            ..Default::default()
        }
    }

    fn owned(v: &[(&str, u64)]) -> Vec<(String, u64)> {
        v.iter().map(|(s, c)| (s.to_string(), *c)).collect()
    }

    #[test]
    fn hand_enumeration() {
        let v = build_ngram_vocab(&[stream(&["a", "b", "a"])], &opts(10)).unwrap();
        assert_eq!(v.order(1), owned(&[("a", 2), ("b", 1)]));
        assert_eq!(v.order(2), owned(&[("a b", 1), ("b a", 1)]));
        assert_eq!(v.order(3), owned(&[("a b a", 1)]));
        assert_eq!(v.dimension(), 5);
    }

    #[test]
    fn cap_and_tie_break() {
        let v = build_ngram_vocab(&[stream(&["b", "a", "c"])], &opts(1)).unwrap();
        assert_eq!(v.order(1), owned(&[("a", 1)]));
        assert_eq!(v.order(2), owned(&[("a c", 1)]));
        assert_eq!(v.order(3).len(), 1);
        assert!(build_ngram_vocab(&[], &opts(0)).is_err());
    }

    #[test]
    fn feature_examples() {
        let v = build_ngram_vocab(
            &[stream(&["a", "b"])],
            &NgramOptions {
                max_n: 1,
                ..opts(10)
            },
        )
        .unwrap();
        assert_eq!(ngram_features(&stream(&["a", "b"]), &v).values, vec![0.5, 0.5]);
        assert_eq!(ngram_features(&stream(&[]), &v).values, vec![0.0, 0.0]);
        let f = ngram_features(&stream(&["c"]), &v);
        assert_eq!(f.values, vec![0.0, 0.0]);
        assert_eq!((f.covered_tokens, f.total_tokens), (0, 1));
    }

    #[test]
    fn higher_order_frequencies() {
        let v = build_ngram_vocab(&[stream(&["a", "b", "a"])], &opts(10)).unwrap();
        let f = ngram_features(&stream(&["a", "b", "a", "b"]), &v);
        // a, b | a b, b a | a b a
        assert_eq!(f.values, vec![0.5, 0.5, 2.0 / 3.0, 1.0 / 3.0, 0.5]);
        assert_eq!(f.covered_tokens, 4);
    }

    #[test]
    fn per_tweet_windows() {
        let s = preprocess_user(&["a b", "c d"]);
        let joined = build_ngram_vocab(std::slice::from_ref(&s), &opts(10)).unwrap();
        assert!(joined.order(2).iter().any(|(g, _)| g == "b c"));
        let split = build_ngram_vocab(
            &[s],
            &NgramOptions {
                per_tweet: true,
                ..opts(10)
            },
        )
        .unwrap();
        assert!(!split.order(2).iter().any(|(g, _)| g == "b c"));
        assert!(split.order(3).is_empty());
    }

    #[test]
    fn serde_round_trip_rebuilds_index() {
        let v = build_ngram_vocab(&[stream(&["x", "y", "x", "z"])], &opts(10)).unwrap();
        let back: NgramVocab = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
        let probe = stream(&["x", "y", "z", "x"]);
        assert_eq!(ngram_features(&probe, &back).values, ngram_features(&probe, &v).values);
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["a", "b", "c", "d"]).prop_map(str::to_owned)
    }

    proptest! {
        #[test]
        fn order_independent(streams in prop::collection::vec(prop::collection::vec(word(), 0..12), 1..5)) {
            let streams: Vec<TokenStream> = streams.into_iter().map(TokenStream::from_tokens).collect();
            let mut rev = streams.clone();
            rev.reverse();
            prop_assert_eq!(build_ngram_vocab(&streams, &opts(3)).unwrap(), build_ngram_vocab(&rev, &opts(3)).unwrap());
        }

        #[test]
        fn unigram_permutation_invariant_and_bounded(
            fit in prop::collection::vec(word(), 1..20),
            probe in prop::collection::vec(word(), 0..20),
        ) {
            let v = build_ngram_vocab(&[TokenStream::from_tokens(fit)], &opts(5)).unwrap();
            let f = ngram_features(&TokenStream::from_tokens(probe.clone()), &v);
            let mut rev = probe;
            rev.reverse();
            let g = ngram_features(&TokenStream::from_tokens(rev), &v);
            let uni = v.order(1).len();
            prop_assert_eq!(&f.values[..uni], &g.values[..uni]);
            prop_assert!(f.values.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}
