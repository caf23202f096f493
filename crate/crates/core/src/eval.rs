//! Set-based precision, recall and F1 between a gold and a predicted ER
//! model. Elements are matched by normalized name, never by id.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assemble::{load_model, OutputError};
use crate::model::{ErModel, RelKind};

/// How attributes are identified across models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributeKey {
    /// Owner name and attribute name.
    #[default]
    OwnerAndName,
    /// Attribute name alone.
    Name,
}

impl FromStr for AttributeKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "owner-and-name" => Ok(AttributeKey::OwnerAndName),
            "name" => Ok(AttributeKey::Name),
            other => Err(format!(
                "unknown attribute key {other:?} (expected owner-and-name or name)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub include_inferred: bool,
    pub attribute_key: AttributeKey,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            include_inferred: true,
            attribute_key: AttributeKey::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: Vec<String>,
    /// In gold, not predicted.
    pub missing: Vec<String>,
    /// Predicted, not in gold.
    pub spurious: Vec<String>,
}

impl CategoryScore {
    /// Both empty scores 1; exactly one empty scores 0.
    pub fn from_sets(gold: &BTreeSet<String>, pred: &BTreeSet<String>) -> Self {
        let matched: Vec<String> = gold.intersection(pred).cloned().collect();
        let (precision, recall) = match (gold.is_empty(), pred.is_empty()) {
            (true, true) => (1.0, 1.0),
            (true, false) | (false, true) => (0.0, 0.0),
            (false, false) => (
                matched.len() as f64 / pred.len() as f64,
                matched.len() as f64 / gold.len() as f64,
            ),
        };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            matched,
            missing: gold.difference(pred).cloned().collect(),
            spurious: pred.difference(gold).cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub entity: CategoryScore,
    pub attribute: CategoryScore,
    pub relationship: CategoryScore,
}

impl EvalReport {
    pub fn categories(&self) -> [(&'static str, &CategoryScore); 3] {
        [
            ("entity", &self.entity),
            ("attribute", &self.attribute),
            ("relationship", &self.relationship),
        ]
    }

    /// Aligned plain-text table, two decimals.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<12}  {:>9}  {:>6}  {:>6}\n",
            "category", "precision", "recall", "f1"
        );
        for (name, s) in self.categories() {
            let _ = writeln!(
                out,
                "{:<12}  {:>9.2}  {:>6.2}  {:>6.2}",
                name, s.precision, s.recall, s.f1
            );
        }
        out
    }
}

/// Matching keys of each category.
pub fn element_keys(
    model: &ErModel,
    options: &EvalOptions,
) -> (BTreeSet<String>, BTreeSet<String>, BTreeSet<String>) {
    let keep = |inferred: bool| options.include_inferred || !inferred;
    let name = |id| model.name_of(id).map(|n| n.key()).unwrap_or_default();
    let entities = model
        .entities()
        .filter(|e| keep(e.inferred))
        .map(|e| e.name.key())
        .collect();
    let attributes = model
        .attributes()
        .filter(|a| keep(a.inferred))
        .map(|a| match options.attribute_key {
            AttributeKey::OwnerAndName => format!("{}.{}", name(a.owner), a.name.key()),
            AttributeKey::Name => a.name.key(),
        })
        .collect();
    let relationships = model
        .relationships()
        .filter(|r| keep(r.inferred))
        .map(|r| {
            let (a, b) = (name(r.endpoints.0), name(r.endpoints.1));
            match r.kind {
                RelKind::EntityEntity => {
                    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                    format!("{lo} -- {hi}")
                }
                RelKind::EntityAttribute => format!("{a} -> {b}"),
            }
        })
        .collect();
    (entities, attributes, relationships)
}

pub fn score(gold: &ErModel, pred: &ErModel, options: &EvalOptions) -> EvalReport {
    let (ge, ga, gr) = element_keys(gold, options);
    let (pe, pa, pr) = element_keys(pred, options);
    EvalReport {
        entity: CategoryScore::from_sets(&ge, &pe),
        attribute: CategoryScore::from_sets(&ga, &pa),
        relationship: CategoryScore::from_sets(&gr, &pr),
    }
}

/// Loads a gold model; errors name the offending field.
pub fn load_gold(path: impl AsRef<Path>) -> Result<ErModel, OutputError> {
    load_model(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ElementId, ErAttribute, ErEntity, ErRelationship, Provenance};

    fn entities(names: &[&str]) -> ErModel {
        ErModel::new(
            names
                .iter()
                .enumerate()
                .map(|(i, n)| ErEntity {
                    id: ElementId(i as u32),
                    name: (*n).into(),
                    inferred: false,
                })
                .collect(),
            vec![],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn two_thirds() {
        let r = score(
            &entities(&["a", "b", "c"]),
            &entities(&["a", "b", "d"]),
            &EvalOptions::default(),
        );
        for v in [r.entity.precision, r.entity.recall, r.entity.f1] {
            assert!((v - 2.0 / 3.0).abs() < 1e-9);
        }
        assert_eq!(r.entity.missing, ["c"]);
        assert_eq!(r.entity.spurious, ["d"]);
        assert!(r
            .to_table()
            .contains("entity             0.67    0.67    0.67"));
    }

    #[test]
    fn empty_conventions() {
        let empty = ErModel::empty();
        let r = score(&empty, &empty, &EvalOptions::default());
        assert_eq!(
            (r.entity.precision, r.entity.recall, r.entity.f1),
            (1.0, 1.0, 1.0)
        );
        let r = score(&entities(&["a"]), &empty, &EvalOptions::default());
        assert_eq!(
            (r.entity.precision, r.entity.recall, r.entity.f1),
            (0.0, 0.0, 0.0)
        );
        let r = score(&empty, &entities(&["a"]), &EvalOptions::default());
        assert_eq!(
            (r.entity.precision, r.entity.recall, r.entity.f1),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn names_are_normalized() {
        let r = score(
            &entities(&["Singers"]),
            &entities(&["singer"]),
            &EvalOptions::default(),
        );
        assert_eq!(r.entity.f1, 1.0);
    }

    fn owned(owner: &str, attr: &str, inferred: bool) -> ErModel {
        ErModel::new(
            vec![ErEntity {
                id: ElementId(7),
                name: owner.into(),
                inferred,
            }],
            vec![ErAttribute {
                id: ElementId(8),
                name: attr.into(),
                owner: ElementId(7),
                inferred: false,
            }],
            vec![ErRelationship {
                id: ElementId(9),
                kind: RelKind::EntityAttribute,
                endpoints: (ElementId(7), ElementId(8)),
                name: attr.into(),
                provenance: Provenance::Containment,
                inferred,
            }],
        )
        .unwrap()
    }

    #[test]
    fn attribute_key_modes() {
        let gold = owned("actor", "name", false);
        let pred = owned("musical", "name", false);
        let strict = score(&gold, &pred, &EvalOptions::default());
        assert_eq!(strict.attribute.f1, 0.0);
        let loose = score(
            &gold,
            &pred,
            &EvalOptions {
                attribute_key: AttributeKey::Name,
                ..EvalOptions::default()
            },
        );
        assert_eq!(loose.attribute.f1, 1.0);
    }

    #[test]
    fn inferred_can_be_excluded() {
        let gold = owned("actor", "name", false);
        let pred = owned("actor", "name", true);
        assert_eq!(score(&gold, &pred, &EvalOptions::default()).entity.f1, 1.0);
        let strict = EvalOptions {
            include_inferred: false,
            ..EvalOptions::default()
        };
        let r = score(&gold, &pred, &strict);
        assert_eq!(r.entity.f1, 0.0);
        assert_eq!(r.relationship.f1, 0.0);
        assert_eq!(r.attribute.f1, 1.0);
    }

    #[test]
    fn entity_pairs_are_unordered() {
        let rel = |a: u32, b: u32| {
            ErModel::new(
                vec![
                    ErEntity {
                        id: ElementId(0),
                        name: "teacher".into(),
                        inferred: false,
                    },
                    ErEntity {
                        id: ElementId(1),
                        name: "student".into(),
                        inferred: false,
                    },
                ],
                vec![],
                vec![ErRelationship {
                    id: ElementId(2),
                    kind: RelKind::EntityEntity,
                    endpoints: (ElementId(a), ElementId(b)),
                    name: "teach".into(),
                    provenance: Provenance::RelationTable,
                    inferred: false,
                }],
            )
            .unwrap()
        };
        assert_eq!(
            score(&rel(0, 1), &rel(1, 0), &EvalOptions::default())
                .relationship
                .f1,
            1.0
        );
    }
}
