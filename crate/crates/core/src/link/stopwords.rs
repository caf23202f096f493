use std::collections::BTreeSet;
use std::path::Path;

use crate::model::Normalizer;

const DEFAULT_STOPWORDS: &str = include_str!("stopwords.txt");

/// Tokens that may not carry a sub-sequence match on their own.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stopwords {
    words: BTreeSet<String>,
}

impl Stopwords {
    /// Parses the one-token-per-line format; `#` starts a comment.
    pub fn parse(text: &str, normalizer: &Normalizer) -> Self {
        let mut words = BTreeSet::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let lower = line.to_lowercase();
            words.extend(normalizer.tokens(&lower));
            words.insert(lower);
        }
        Self { words }
    }

    pub fn load(path: impl AsRef<Path>, normalizer: &Normalizer) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?, normalizer))
    }

    pub fn default_for(normalizer: &Normalizer) -> Self {
        Self::parse(DEFAULT_STOPWORDS, normalizer)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_and_blank_lines() {
        let s = Stopwords::parse(
            "# header\nthe\n\n  Of  # trailing\n",
            &Normalizer::default(),
        );
        assert!(s.contains("the"));
        assert!(s.contains("of"));
        assert!(!s.contains("header"));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn shipped_list_loads() {
        let s = Stopwords::default_for(&Normalizer::default());
        assert!(s.contains("of"));
        assert!(s.contains("what"));
        assert!(!s.contains("name"));
    }
}
