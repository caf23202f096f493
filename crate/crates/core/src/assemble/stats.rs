use serde::{Deserialize, Serialize};

use crate::model::{ErModel, RelKind};

use super::AnnotationRecord;

/// Corpus aggregates. `utterance_*` counts sum the per-utterance sets;
/// `model_*` counts sum the final models.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub models: usize,
    pub utterances: usize,
    /// Mean tokens per utterance, rounded to one decimal.
    pub mean_tokens: f64,
    pub utterance_entities: usize,
    pub utterance_attributes: usize,
    pub utterance_relationships: usize,
    pub utterance_containments: usize,
    pub utterance_entity_entity: usize,
    pub model_entities: usize,
    pub model_attributes: usize,
    pub model_relationships: usize,
    pub model_containments: usize,
    pub model_entity_entity: usize,
    pub model_inferred: usize,
}

/// Aggregates over databases, each given as its records and final model.
pub fn stats<'a>(
    databases: impl IntoIterator<Item = (&'a [AnnotationRecord], &'a ErModel)>,
) -> CorpusStats {
    let mut s = CorpusStats::default();
    let mut tokens = 0usize;
    for (records, model) in databases {
        s.models += 1;
        for r in records {
            let ann = &r.annotation;
            s.utterances += 1;
            tokens += ann.tokens.len();
            s.utterance_entities += ann.entities.len();
            s.utterance_attributes += ann.attributes.len();
            s.utterance_relationships += ann.relationships.len();
            for id in &ann.relationships {
                match model.relationship(*id).map(|rel| rel.kind) {
                    Some(RelKind::EntityAttribute) => s.utterance_containments += 1,
                    Some(RelKind::EntityEntity) => s.utterance_entity_entity += 1,
                    None => {}
                }
            }
        }
        s.model_entities += model.entities().count();
        s.model_attributes += model.attributes().count();
        for r in model.relationships() {
            s.model_relationships += 1;
            match r.kind {
                RelKind::EntityAttribute => s.model_containments += 1,
                RelKind::EntityEntity => s.model_entity_entity += 1,
            }
        }
        s.model_inferred += model.entities().filter(|e| e.inferred).count()
            + model.attributes().filter(|a| a.inferred).count()
            + model.relationships().filter(|r| r.inferred).count();
    }
    if s.utterances > 0 {
        s.mean_tokens = round1(tokens as f64 / s.utterances as f64);
    }
    s
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}
