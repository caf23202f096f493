//! Schema linking: which tokens of an utterance name which tables and
//! columns of its paired query.
//!
//! Only tables and columns that the query references are candidates, so
//! the search space per utterance is small. N-grams are tried longest
//! first; once a span is accepted, every overlapping n-gram is dropped.

mod stopwords;

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use stopwords::Stopwords;

use crate::model::{DatabaseSchema, ElementId, Normalizer};
use crate::sql::SqlReferenceSet;
use crate::transform::RawEr;

/// Default longest n-gram tried.
pub const DEFAULT_MAX_NGRAM: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub norm: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Table,
    Column,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ElementKind {
    Entity,
    Attribute,
}

impl ElementKind {
    pub fn label(self) -> Label {
        match self {
            ElementKind::Entity => Label::Table,
            ElementKind::Attribute => Label::Column,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatchKind {
    Exact,
    Subsequence,
}

/// Tokens `start..end` refer to `element`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub element: ElementId,
    pub kind: ElementKind,
    pub match_kind: MatchKind,
}

/// A table or column an utterance may mention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub element: ElementId,
    pub kind: ElementKind,
    /// Normalized name variants (original name, then readable alias).
    pub names: Vec<Vec<String>>,
}

/// Token labels, spans, and the ER elements one utterance mentions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedUtterance {
    pub tokens: Vec<Token>,
    pub labels: Vec<Label>,
    pub spans: Vec<Span>,
    pub entities: BTreeSet<ElementId>,
    pub attributes: BTreeSet<ElementId>,
    pub relationships: BTreeSet<ElementId>,
}

impl AnnotatedUtterance {
    /// Checks the label/span invariants. Returns a description of the first
    /// violation found.
    pub fn check(&self) -> Result<(), String> {
        if self.labels.len() != self.tokens.len() {
            return Err(format!(
                "{} labels for {} tokens",
                self.labels.len(),
                self.tokens.len()
            ));
        }
        let mut expected = vec![Label::Other; self.tokens.len()];
        let mut owner: Vec<Option<usize>> = vec![None; self.tokens.len()];
        for (i, span) in self.spans.iter().enumerate() {
            if span.start >= span.end || span.end > self.tokens.len() {
                return Err(format!(
                    "span {i} has bad bounds {}..{}",
                    span.start, span.end
                ));
            }
            for p in span.start..span.end {
                if let Some(j) = owner[p] {
                    return Err(format!("spans {j} and {i} overlap at token {p}"));
                }
                owner[p] = Some(i);
                expected[p] = span.kind.label();
            }
        }
        if let Some(p) = (0..expected.len()).find(|&p| expected[p] != self.labels[p]) {
            return Err(format!(
                "token {p} labelled {:?}, spans imply {:?}",
                self.labels[p], expected[p]
            ));
        }
        let span_entities: BTreeSet<_> = self
            .spans
            .iter()
            .filter(|s| s.kind == ElementKind::Entity)
            .map(|s| s.element)
            .collect();
        let span_attributes: BTreeSet<_> = self
            .spans
            .iter()
            .filter(|s| s.kind == ElementKind::Attribute)
            .map(|s| s.element)
            .collect();
        if span_entities != self.entities {
            return Err("entity set differs from entity spans".into());
        }
        if span_attributes != self.attributes {
            return Err("attribute set differs from attribute spans".into());
        }
        Ok(())
    }

    /// Surface text of the detokenized utterance (tokens joined by spaces).
    pub fn text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// How a candidate matched one n-gram.
#[derive(Debug, Clone, Copy)]
struct MatchScore {
    kind: MatchKind,
    /// n-gram length over candidate name length.
    covered: usize,
    of: usize,
}

impl MatchScore {
    fn cmp_quality(&self, other: &Self) -> Ordering {
        let rank = |k: MatchKind| match k {
            MatchKind::Exact => 1,
            MatchKind::Subsequence => 0,
        };
        rank(self.kind)
            .cmp(&rank(other.kind))
            .then_with(|| (self.covered * other.of).cmp(&(other.covered * self.of)))
    }
}

#[derive(Debug, Clone)]
pub struct Linker {
    normalizer: Normalizer,
    stopwords: Stopwords,
    max_ngram: usize,
}

impl Default for Linker {
    fn default() -> Self {
        let normalizer = Normalizer::default();
        let stopwords = Stopwords::default_for(&normalizer);
        Self::new(normalizer, stopwords, DEFAULT_MAX_NGRAM)
    }
}

impl Linker {
    pub fn new(normalizer: Normalizer, stopwords: Stopwords, max_ngram: usize) -> Self {
        Self {
            normalizer,
            stopwords,
            max_ngram: max_ngram.max(1),
        }
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn max_ngram(&self) -> usize {
        self.max_ngram
    }

    /// Uses `provided` verbatim when given. Otherwise splits on whitespace
    /// and peels leading and trailing punctuation into one-character tokens.
    pub fn tokenize(&self, utterance: &str, provided: Option<&[String]>) -> Vec<Token> {
        let surfaces: Vec<String> = match provided {
            Some(tokens) => tokens.to_vec(),
            None => split_utterance(utterance),
        };
        surfaces
            .into_iter()
            .map(|text| Token {
                norm: self.normalizer.tokens(&text),
                text,
            })
            .collect()
    }

    /// One candidate per referenced non-relation table and per referenced
    /// column of a non-relation table.
    pub fn candidate_pool(
        &self,
        refs: &SqlReferenceSet,
        raw: &RawEr,
        schema: &DatabaseSchema,
    ) -> Vec<Candidate> {
        let variants = |name: &crate::model::NameForm, alias: Option<&crate::model::NameForm>| {
            let mut names = vec![self.normalizer.tokens(&name.original)];
            if let Some(alias) = alias {
                let a = self.normalizer.tokens(&alias.original);
                if !names.contains(&a) {
                    names.push(a);
                }
            }
            names.retain(|n| !n.is_empty());
            names
        };
        let mut pool = Vec::new();
        for &t in &refs.tables {
            if raw.mapping.relation_tables.contains(&t) {
                continue;
            }
            let (Some(element), Some(table)) = (raw.mapping.entity_of(t), schema.table(t)) else {
                continue;
            };
            pool.push(Candidate {
                element,
                kind: ElementKind::Entity,
                names: variants(&table.name, table.alias.as_ref()),
            });
        }
        for &c in &refs.columns {
            if raw.mapping.relation_tables.contains(&c.table) {
                continue;
            }
            let (Some(element), Some(column)) = (raw.mapping.attribute_of(c), schema.column(c))
            else {
                continue;
            };
            pool.push(Candidate {
                element,
                kind: ElementKind::Attribute,
                names: variants(&column.name, column.alias.as_ref()),
            });
        }
        pool
    }

    fn score(
        &self,
        candidate: &Candidate,
        gram: &[&str],
        gram_tokens: usize,
    ) -> Option<MatchScore> {
        let mut best: Option<MatchScore> = None;
        for name in &candidate.names {
            let score = if name.len() == gram.len() && name.iter().zip(gram).all(|(a, b)| a == b) {
                MatchScore {
                    kind: MatchKind::Exact,
                    covered: gram.len(),
                    of: name.len(),
                }
            } else if gram.len() < name.len()
                && name
                    .windows(gram.len())
                    .any(|w| w.iter().zip(gram).all(|(a, b)| a == b))
                && self.subsequence_allowed(gram, gram_tokens)
            {
                MatchScore {
                    kind: MatchKind::Subsequence,
                    covered: gram.len(),
                    of: name.len(),
                }
            } else {
                continue;
            };
            if best.is_none_or(|b| score.cmp_quality(&b) == Ordering::Greater) {
                best = Some(score);
            }
        }
        best
    }

    fn subsequence_allowed(&self, gram: &[&str], gram_tokens: usize) -> bool {
        let has_content = gram.iter().any(|t| !self.stopwords.contains(t));
        if gram_tokens == 1 {
            return has_content && !gram.iter().all(|t| self.stopwords.contains(t));
        }
        has_content
    }

    /// Labels tokens by matching n-grams against the pool.
    pub fn link(&self, tokens: &[Token], pool: &[Candidate]) -> (Vec<Label>, Vec<Span>) {
        let n = tokens.len();
        let mut labels = vec![Label::Other; n];
        let mut covered = vec![false; n];
        let mut spans = Vec::new();
        for len in (1..=self.max_ngram.min(n)).rev() {
            for start in 0..=(n - len) {
                let window = &tokens[start..start + len];
                if covered[start..start + len].iter().any(|&c| c)
                    || window.iter().any(|t| t.norm.is_empty())
                {
                    continue;
                }
                let gram: Vec<&str> = window
                    .iter()
                    .flat_map(|t| t.norm.iter().map(String::as_str))
                    .collect();
                let best = pool
                    .iter()
                    .filter_map(|c| self.score(c, &gram, len).map(|s| (c, s)))
                    .max_by(|(ca, sa), (cb, sb)| {
                        sa.cmp_quality(sb)
                            .then_with(|| cb.kind.cmp(&ca.kind))
                            .then_with(|| cb.element.cmp(&ca.element))
                    });
                let Some((candidate, score)) = best else {
                    continue;
                };
                for p in start..start + len {
                    covered[p] = true;
                    labels[p] = candidate.kind.label();
                }
                spans.push(Span {
                    start,
                    end: start + len,
                    element: candidate.element,
                    kind: candidate.kind,
                    match_kind: score.kind,
                });
            }
        }
        spans.sort_by_key(|s| s.start);
        (labels, spans)
    }

    /// Tokenize, build the pool, link, and derive the element sets.
    pub fn annotate(
        &self,
        utterance: &str,
        provided_tokens: Option<&[String]>,
        refs: &SqlReferenceSet,
        raw: &RawEr,
        schema: &DatabaseSchema,
    ) -> AnnotatedUtterance {
        let tokens = self.tokenize(utterance, provided_tokens);
        let pool = self.candidate_pool(refs, raw, schema);
        let (labels, spans) = self.link(&tokens, &pool);
        let (entities, attributes, relationships) = per_utterance_sets(&spans, refs, raw);
        AnnotatedUtterance {
            tokens,
            labels,
            spans,
            entities,
            attributes,
            relationships,
        }
    }
}

fn split_utterance(utterance: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in utterance.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let lead = chars.iter().take_while(|c| !c.is_alphanumeric()).count();
        if lead == chars.len() {
            out.extend(chars.iter().map(|c| c.to_string()));
            continue;
        }
        let trail = chars
            .iter()
            .rev()
            .take_while(|c| !c.is_alphanumeric())
            .count();
        out.extend(chars[..lead].iter().map(|c| c.to_string()));
        out.push(chars[lead..chars.len() - trail].iter().collect());
        out.extend(chars[chars.len() - trail..].iter().map(|c| c.to_string()));
    }
    out
}

/// Entities, attributes, and the relationships among them that the query
/// witnesses.
///
/// A containment edge is kept when both the attribute and its owner were
/// matched. A foreign-key edge needs both entities matched and the query to
/// join their tables; a relation-table edge needs both entities matched and
/// the relation table to appear in the query.
pub fn per_utterance_sets(
    spans: &[Span],
    refs: &SqlReferenceSet,
    raw: &RawEr,
) -> (
    BTreeSet<ElementId>,
    BTreeSet<ElementId>,
    BTreeSet<ElementId>,
) {
    let entities: BTreeSet<_> = spans
        .iter()
        .filter(|s| s.kind == ElementKind::Entity)
        .map(|s| s.element)
        .collect();
    let attributes: BTreeSet<_> = spans
        .iter()
        .filter(|s| s.kind == ElementKind::Attribute)
        .map(|s| s.element)
        .collect();
    let mut relationships = BTreeSet::new();
    for &a in &attributes {
        let Some(attr) = raw.model.attribute(a) else {
            continue;
        };
        if entities.contains(&attr.owner) {
            if let Some(&r) = raw.mapping.attribute_containment.get(&a) {
                relationships.insert(r);
            }
        }
    }
    let matched = |t: usize| {
        raw.mapping
            .entity_of(t)
            .is_some_and(|e| entities.contains(&e))
    };
    for &(id, a, b) in &raw.mapping.foreign_key_relationships {
        if matched(a) && matched(b) && refs.has_join(a, b) {
            relationships.insert(id);
        }
    }
    for &(id, relation, (a, b)) in &raw.mapping.relation_table_relationships {
        if matched(a) && matched(b) && refs.tables.contains(&relation) {
            relationships.insert(id);
        }
    }
    (entities, attributes, relationships)
}
