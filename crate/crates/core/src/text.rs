//! Text analysis shared by the retriever, the built-in LM and the engine.
//!
//! Two tokenizers live here. The retrieval [`Analyzer`] keeps only
//! case-folded alphanumeric runs. The [`LmTokenizer`] additionally keeps each
//! punctuation mark as its own token and turns every whitespace run that
//! contains a line break into a single `"\n"` token, so prompts and stop
//! sequences survive tokenization.

use serde::{Deserialize, Serialize};

/// Token emitted by [`LmTokenizer`] for a whitespace run containing a newline.
pub const NEWLINE_TOKEN: &str = "\n";

/// Whitespace-delimited words of raw text.
pub fn whitespace_words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Joins tokens with single spaces.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_ref());
    }
    out
}

fn alnum_runs(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
}

const ENGLISH_STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it",
    "no", "not", "of", "on", "or", "such", "that", "the", "their", "then", "there", "these",
    "they", "this", "to", "was", "will", "with",
];

/// Options of the retrieval analyzer. Both switches are off by default.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyzerOptions {
    pub remove_stopwords: bool,
    pub stem: bool,
}

impl AnalyzerOptions {
    pub fn to_flags(self) -> u8 {
        (self.remove_stopwords as u8) | ((self.stem as u8) << 1)
    }

    pub fn from_flags(flags: u8) -> Option<Self> {
        if flags & !0b11 != 0 {
            return None;
        }
        Some(AnalyzerOptions {
            remove_stopwords: flags & 1 != 0,
            stem: flags & 2 != 0,
        })
    }
}

/// Retrieval analyzer: case-folded maximal alphanumeric runs, order preserved.
pub struct Analyzer {
    options: AnalyzerOptions,
    stemmer: Option<rust_stemmers::Stemmer>,
}

impl Analyzer {
    pub fn new(options: AnalyzerOptions) -> Self {
        let stemmer = options
            .stem
            .then(|| rust_stemmers::Stemmer::create(rust_stemmers::Algorithm::English));
        Analyzer { options, stemmer }
    }

    pub fn options(&self) -> AnalyzerOptions {
        self.options
    }

    pub fn analyze(&self, text: &str) -> Vec<String> {
        alnum_runs(text)
            .map(str::to_lowercase)
            .filter(|t| !(self.options.remove_stopwords && ENGLISH_STOPWORDS.contains(&t.as_str())))
            .map(|t| match &self.stemmer {
                Some(s) => s.stem(&t).into_owned(),
                None => t,
            })
            .collect()
    }
}

impl Default for Analyzer {
    fn default() -> Self {
        Analyzer::new(AnalyzerOptions::default())
    }
}

/// `analyze` with default options.
pub fn analyze(text: &str) -> Vec<String> {
    alnum_runs(text).map(str::to_lowercase).collect()
}

/// Tokenizer of the built-in LM, also used by the engine for stride
/// partitioning and window accounting.
#[derive(Debug, Clone, Copy, Default)]
pub struct LmTokenizer;

impl LmTokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut tokens = Vec::new();
        let mut word = String::new();
        let mut in_space = false;
        let mut space_has_newline = false;

        let flush_word = |word: &mut String, tokens: &mut Vec<String>| {
            if !word.is_empty() {
                tokens.push(std::mem::take(word));
            }
        };

        for c in text.chars() {
            if c.is_whitespace() {
                flush_word(&mut word, &mut tokens);
                in_space = true;
                space_has_newline |= c == '\n';
                continue;
            }
            if in_space {
                if space_has_newline {
                    tokens.push(NEWLINE_TOKEN.to_string());
                }
                in_space = false;
                space_has_newline = false;
            }
            if c.is_alphanumeric() {
                word.extend(c.to_lowercase());
            } else {
                flush_word(&mut word, &mut tokens);
                tokens.push(c.to_string());
            }
        }
        flush_word(&mut word, &mut tokens);
        if in_space && space_has_newline {
            tokens.push(NEWLINE_TOKEN.to_string());
        }
        tokens
    }

    pub fn count(&self, text: &str) -> usize {
        self.tokenize(text).len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn analyze_rules() {
        assert_eq!(analyze("The cat, the CAT!"), ["the", "cat", "the", "cat"]);
        assert!(analyze("").is_empty());
        assert_eq!(analyze("x2 y-3"), ["x2", "y", "3"]);
    }

    #[test]
    fn analyzer_flags() {
        let a = Analyzer::new(AnalyzerOptions {
            remove_stopwords: true,
            stem: true,
        });
        assert_eq!(a.analyze("The cats are running"), ["cat", "run"]);
        for flags in 0..4u8 {
            assert_eq!(
                AnalyzerOptions::from_flags(flags).unwrap().to_flags(),
                flags
            );
        }
        assert!(AnalyzerOptions::from_flags(4).is_none());
    }

    #[test]
    fn lm_tokenizer_rules() {
        let t = LmTokenizer;
        assert_eq!(
            t.tokenize("Q: Who won?\nA:"),
            ["q", ":", "who", "won", "?", "\n", "a", ":"]
        );
        assert_eq!(
            t.tokenize("para one.\n\n  para two"),
            ["para", "one", ".", "\n", "para", "two"]
        );
        assert_eq!(t.tokenize("end\n"), ["end", "\n"]);
        assert!(t.tokenize("   ").is_empty());
        assert_eq!(t.count("\n\n"), 1);
    }

    #[test]
    fn whitespace_word_count() {
        assert_eq!(whitespace_words(" a  b\tc\n").len(), 3);
    }

    proptest! {
        #[test]
        fn detokenize_round_trips(text in "[a-zA-Z0-9 ,.!?\n\t-]{0,80}") {
            let t = LmTokenizer;
            let tokens = t.tokenize(&text);
            prop_assert_eq!(t.tokenize(&detokenize(&tokens)), tokens);
        }
    }
}
