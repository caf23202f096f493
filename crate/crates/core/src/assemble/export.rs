use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::link::ElementKind;
use crate::model::{ElementId, ErModel, RelKind};

use super::AnnotationRecord;

/// A typed mention. Offsets count characters of the space-joined tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IeMention {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub kind: String,
    pub text: String,
    pub element: ElementId,
}

/// A relation between two mentions, by position in the mention list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IeRelation {
    #[serde(rename = "type")]
    pub kind: String,
    pub head: usize,
    pub tail: usize,
    pub name: String,
    pub relationship: ElementId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IeRecord {
    pub index: usize,
    pub db_id: String,
    pub text: String,
    pub mentions: Vec<IeMention>,
    pub relations: Vec<IeRelation>,
}

/// Re-encodes annotations as entity/relation extraction records.
/// Relationships whose endpoints have no mention in the utterance are
/// left out.
pub fn export_ie_format(records: &[AnnotationRecord], model: &ErModel) -> Vec<IeRecord> {
    records.iter().map(|r| ie_record(r, model)).collect()
}

fn ie_record(record: &AnnotationRecord, model: &ErModel) -> IeRecord {
    let ann = &record.annotation;
    let mut offsets = Vec::with_capacity(ann.tokens.len());
    let mut pos = 0;
    for (i, token) in ann.tokens.iter().enumerate() {
        if i > 0 {
            pos += 1;
        }
        let len = token.text.chars().count();
        offsets.push((pos, pos + len));
        pos += len;
    }
    let text = ann.text();

    let mentions: Vec<IeMention> = ann
        .spans
        .iter()
        .map(|s| {
            let start = offsets[s.start].0;
            let end = offsets[s.end - 1].1;
            IeMention {
                start,
                end,
                kind: match s.kind {
                    ElementKind::Entity => "Entity",
                    ElementKind::Attribute => "Attribute",
                }
                .to_string(),
                text: text.chars().skip(start).take(end - start).collect(),
                element: s.element,
            }
        })
        .collect();
    let first = |id: ElementId| mentions.iter().position(|m| m.element == id);

    let mut relations = Vec::new();
    for &rid in &ann.relationships {
        let Some(rel) = model.relationship(rid) else {
            continue;
        };
        let (Some(head), Some(tail)) = (first(rel.endpoints.0), first(rel.endpoints.1)) else {
            continue;
        };
        relations.push(IeRelation {
            kind: match rel.kind {
                RelKind::EntityEntity => "entity-entity",
                RelKind::EntityAttribute => "entity-attribute",
            }
            .to_string(),
            head,
            tail,
            name: rel.name.original.clone(),
            relationship: rid,
        });
    }

    IeRecord {
        index: record.index,
        db_id: record.db_id.clone(),
        text,
        mentions,
        relations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiagramFormat {
    #[default]
    Dot,
    Mermaid,
}

impl DiagramFormat {
    pub fn extension(self) -> &'static str {
        match self {
            DiagramFormat::Dot => "dot",
            DiagramFormat::Mermaid => "mmd",
        }
    }
}

impl FromStr for DiagramFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dot" => Ok(DiagramFormat::Dot),
            "mermaid" | "mmd" => Ok(DiagramFormat::Mermaid),
            other => Err(format!(
                "unknown diagram format {other:?} (expected dot or mermaid)"
            )),
        }
    }
}

/// Renders a model as a graph. Entities are boxes, attributes are ellipses
/// hanging off their owner, entity-entity relationships are labelled
/// edges. Inferred elements are dashed.
pub fn export_diagram(model: &ErModel, format: DiagramFormat) -> String {
    match format {
        DiagramFormat::Dot => dot(model),
        DiagramFormat::Mermaid => mermaid(model),
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn dot(model: &ErModel) -> String {
    let mut out = String::from("graph er {\n");
    let dashed = |inferred: bool| if inferred { ", style=dashed" } else { "" };
    for e in model.entities() {
        let _ = writeln!(
            out,
            "  n{} [shape=box, label=\"{}\"{}];",
            e.id.0,
            dot_escape(&e.name.original),
            dashed(e.inferred)
        );
    }
    for a in model.attributes() {
        let _ = writeln!(
            out,
            "  n{} [shape=ellipse, label=\"{}\"{}];",
            a.id.0,
            dot_escape(&a.name.original),
            dashed(a.inferred)
        );
    }
    for r in model.relationships() {
        let (a, b) = r.endpoints;
        match r.kind {
            RelKind::EntityAttribute => {
                let _ = writeln!(
                    out,
                    "  n{} -- n{}{};",
                    a.0,
                    b.0,
                    edge_attrs(None, r.inferred)
                );
            }
            RelKind::EntityEntity => {
                let _ = writeln!(
                    out,
                    "  n{} -- n{}{};",
                    a.0,
                    b.0,
                    edge_attrs(Some(&r.name.original), r.inferred)
                );
            }
        }
    }
    out.push_str("}\n");
    out
}

fn edge_attrs(label: Option<&str>, inferred: bool) -> String {
    let mut parts = Vec::new();
    if let Some(l) = label {
        parts.push(format!("label=\"{}\"", dot_escape(l)));
    }
    if inferred {
        parts.push("style=dashed".to_string());
    }
    if parts.is_empty() {
        String::new()
    } else {
        format!(" [{}]", parts.join(", "))
    }
}

fn mermaid_escape(s: &str) -> String {
    s.replace('"', "#quot;")
}

fn mermaid(model: &ErModel) -> String {
    let mut out = String::from("flowchart LR\n");
    let mut dashed_nodes = Vec::new();
    for e in model.entities() {
        let _ = writeln!(
            out,
            "  n{}[\"{}\"]",
            e.id.0,
            mermaid_escape(&e.name.original)
        );
        if e.inferred {
            dashed_nodes.push(e.id);
        }
    }
    for a in model.attributes() {
        let _ = writeln!(
            out,
            "  n{}([\"{}\"])",
            a.id.0,
            mermaid_escape(&a.name.original)
        );
        if a.inferred {
            dashed_nodes.push(a.id);
        }
    }
    for r in model.relationships() {
        let (a, b) = r.endpoints;
        let link = if r.inferred { "-.-" } else { "---" };
        match r.kind {
            RelKind::EntityAttribute => {
                let _ = writeln!(out, "  n{} {link} n{}", a.0, b.0);
            }
            RelKind::EntityEntity => {
                let _ = writeln!(
                    out,
                    "  n{} {link}|\"{}\"| n{}",
                    a.0,
                    mermaid_escape(&r.name.original),
                    b.0
                );
            }
        }
    }
    if !dashed_nodes.is_empty() {
        out.push_str("  classDef inferred stroke-dasharray: 4 4\n");
        let ids: Vec<String> = dashed_nodes.iter().map(|id| format!("n{}", id.0)).collect();
        let _ = writeln!(out, "  class {} inferred", ids.join(","));
    }
    out
}
