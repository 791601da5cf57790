//! Tweet cleaning and tokenization.
//!
//! Cleaning runs these steps in order: drop URL tokens, drop hashtag tokens,
//! lowercase, delete number characters, delete punctuation and symbol
//! characters (Unicode `P*` and `S*`), then collapse whitespace.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

static URL_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\p{P}*(?:[a-z][a-z0-9+.\-]*://|www\.)").unwrap());

static STRIPPED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[\p{N}\p{P}\p{S}]+").unwrap());

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HashtagMode {
    /// Remove the whole `#tag` token.
    #[default]
    DropToken,
    /// Keep the tag word; only the marker goes (with the rest of the punctuation).
    StripMarker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CleanOptions {
    pub hashtags: HashtagMode,
    /// Remove `@user` tokens instead of keeping the bare user name.
    pub drop_mentions: bool,
}

pub fn clean_tweet(text: &str) -> String {
    clean_tweet_with(text, &CleanOptions::default())
}

pub fn clean_tweet_with(text: &str, opts: &CleanOptions) -> String {
    let kept: Vec<&str> = text
        .split_whitespace()
        .filter(|tok| !URL_TOKEN.is_match(tok))
        .filter(|tok| opts.hashtags == HashtagMode::StripMarker || !tok.starts_with('#'))
        .filter(|tok| !(opts.drop_mentions && tok.starts_with('@')))
        .collect();
    let lowered = kept.join(" ").to_lowercase();
    let stripped = STRIPPED.replace_all(&lowered, "");
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Words of one user's text, concatenated across tweets in order.
///
/// `tweet_starts[i]` is the index of the first token of the i-th tweet, so
/// n-gram windows can optionally be kept inside tweet boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenStream {
    pub tokens: Vec<String>,
    pub raw_token_count: usize,
    tweet_starts: Vec<usize>,
}

impl TokenStream {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        TokenStream {
            raw_token_count: tokens.len(),
            tweet_starts: vec![0],
            tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tweet_count(&self) -> usize {
        self.tweet_starts.len()
    }

    /// Token slices per tweet.
    pub fn tweets(&self) -> impl Iterator<Item = &[String]> + '_ {
        (0..self.tweet_starts.len()).map(move |i| {
            let end = self
                .tweet_starts
                .get(i + 1)
                .copied()
                .unwrap_or(self.tokens.len());
            &self.tokens[self.tweet_starts[i]..end]
        })
    }

    pub fn concat(parts: impl IntoIterator<Item = TokenStream>) -> TokenStream {
        let mut out = TokenStream::default();
        for p in parts {
            let offset = out.tokens.len();
            out.tweet_starts
                .extend(p.tweet_starts.iter().map(|s| s + offset));
            out.tokens.extend(p.tokens);
        }
        out.raw_token_count = out.tokens.len();
        out
    }

    /// Stream made of the selected tweets, in the given order.
    pub fn select_tweets(&self, indices: &[usize]) -> TokenStream {
        let tweets: Vec<&[String]> = self.tweets().collect();
        TokenStream::concat(
            indices
                .iter()
                .map(|&i| TokenStream::from_tokens(tweets[i].to_vec())),
        )
    }
}

pub fn tokenize(cleaned: &str) -> TokenStream {
    TokenStream::from_tokens(cleaned.split_whitespace().map(str::to_owned).collect())
}

pub fn preprocess_user<S: AsRef<str>>(tweets: &[S]) -> TokenStream {
    preprocess_user_with(tweets, &CleanOptions::default())
}

pub fn preprocess_user_with<S: AsRef<str>>(tweets: &[S], opts: &CleanOptions) -> TokenStream {
    TokenStream::concat(
        tweets
            .iter()
            .map(|t| tokenize(&clean_tweet_with(t.as_ref(), opts))),
    )
}

/// True when `c` may appear in a cleaned token.
pub fn is_clean_char(c: char) -> bool {
    let mut buf = [0u8; 4];
    !c.is_whitespace() && !STRIPPED.is_match(c.encode_utf8(&mut buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(
            clean_tweet("Check THIS out http://t.co/x #cool 2017!!"),
            "check this out"
        );
        assert_eq!(clean_tweet(""), "");
        assert_eq!(clean_tweet("HELLO"), "hello");
    }

    #[test]
    fn tokenize_examples() {
        let t = tokenize("check this out");
        assert_eq!(t.tokens, vec!["check", "this", "out"]);
        assert_eq!(t.raw_token_count, 3);
        assert_eq!(tokenize("").raw_token_count, 0);
        assert_eq!(tokenize("a  b").tokens, vec!["a", "b"]);
    }

    #[test]
    fn preprocess_user_examples() {
        assert_eq!(preprocess_user(&["Hi!", "Hi?"]).tokens, vec!["hi", "hi"]);
        assert!(preprocess_user::<&str>(&[]).is_empty());
        assert!(preprocess_user(&["#only #tags"]).is_empty());
    }

    #[test]
    fn mention_and_hashtag_options() {
        assert_eq!(clean_tweet("@Bob hi"), "bob hi");
        let opts = CleanOptions {
            drop_mentions: true,
            ..Default::default()
        };
        assert_eq!(clean_tweet_with("@Bob hi", &opts), "hi");
        let opts = CleanOptions {
            hashtags: HashtagMode::StripMarker,
            ..Default::default()
        };
        assert_eq!(clean_tweet_with("so #Blessed", &opts), "so blessed");
    }

    #[test]
    fn select_tweets_respects_boundaries() {
        let s = preprocess_user(&["a b", "c", "d e f"]);
        assert_eq!(s.tweet_count(), 3);
        let sub = s.select_tweets(&[0, 2]);
        assert_eq!(sub.tokens, vec!["a", "b", "d", "e", "f"]);
        assert_eq!(sub.tweets().map(|t| t.len()).collect::<Vec<_>>(), vec![2, 3]);
    }

    proptest! {
        #[test]
        fn idempotent(s in "\\PC{0,60}") {
            let once = clean_tweet(&s);
            prop_assert_eq!(clean_tweet(&once), once.clone());
        }

        #[test]
        fn output_alphabet(s in "\\PC{0,60}") {
            let out = clean_tweet(&s);
            for tok in out.split(' ') {
                if out.is_empty() { break; }
                prop_assert!(!tok.is_empty());
                for c in tok.chars() {
                    prop_assert!(is_clean_char(c), "{:?} in {:?}", c, out);
                    prop_assert!(!c.is_numeric());
                    prop_assert_eq!(c.to_lowercase().collect::<String>(), c.to_string());
                }
            }
        }

        #[test]
        fn concatenation(a in prop::collection::vec("\\PC{0,20}", 0..4),
                         b in prop::collection::vec("\\PC{0,20}", 0..4)) {
            let mut ab = a.clone();
            ab.extend(b.clone());
            let mut expect = preprocess_user(&a).tokens;
            expect.extend(preprocess_user(&b).tokens);
            prop_assert_eq!(preprocess_user(&ab).tokens, expect);
        }
    }
}
