use std::fmt::Write;

use super::{Direction, Megamodel, Origin, RelationKind, ResourceKind};
use crate::dot::quote;

fn node_style(kind: ResourceKind) -> &'static str {
    match kind {
        ResourceKind::Metamodel => "shape=ellipse, style=filled, fillcolor=\"#d9c8f0\"",
        ResourceKind::Model => "shape=box, style=\"rounded,filled\", fillcolor=\"#fbe3c4\"",
        ResourceKind::TransformationM2M | ResourceKind::TransformationM2C => {
            "shape=box, style=filled, fillcolor=\"#c8e0f0\""
        }
        ResourceKind::ProcessModel => "shape=box3d, style=filled, fillcolor=\"#e0e0e0\"",
        ResourceKind::TraceModel => "shape=note, style=filled, fillcolor=\"#d8f0c8\"",
        ResourceKind::GeneratedFile => "shape=component, style=filled, fillcolor=\"#f5f0c0\"",
    }
}

impl Megamodel {
    /// Graphviz rendering. Transformations are blue boxes, models orange
    /// rounded boxes, metamodels purple ellipses; conformance edges are
    /// dashed and data flow edges solid.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph megamodel {\n  rankdir=LR;\n  node [fontname=\"Helvetica\", fontsize=10];\n  edge [fontname=\"Helvetica\", fontsize=9];\n");
        for r in self.resources() {
            let _ = writeln!(
                out,
                "  {} [label={}, {}];",
                quote(&r.id),
                quote(&r.uri),
                node_style(r.kind)
            );
        }
        for r in self.relations() {
            let style = match (r.kind, r.direction) {
                (RelationKind::ConformsTo, _) => "style=dashed, color=\"#7a4fb0\", label=\"conformsTo\"".to_string(),
                (RelationKind::DataFlow, Some(Direction::Input)) => "color=\"#2060a0\", label=\"in\"".to_string(),
                (RelationKind::DataFlow, _) => "color=\"#2060a0\", label=\"out\"".to_string(),
                (RelationKind::TraceFor, _) => "style=dotted, color=\"#3a8a3a\", label=\"traceFor\"".to_string(),
                (RelationKind::WeaveBinding, _) => format!(
                    "style=dashed, color=\"#808080\", label={}",
                    quote(r.label.as_deref().unwrap_or("weave"))
                ),
            };
            let _ = writeln!(out, "  {} -> {} [{style}];", quote(&r.from), quote(&r.to));
        }
        out.push_str("}\n");
        out
    }

    /// Plain-text table of the resources followed by per-kind counts.
    pub fn table(&self) -> String {
        let origin = |o: Origin| match o {
            Origin::UserProvided => "user",
            Origin::Discovered => "discovered",
            Origin::Generated => "generated",
        };
        let rows: Vec<[String; 4]> = self
            .resources()
            .map(|r| {
                [
                    r.kind.to_string(),
                    origin(r.origin).to_string(),
                    r.uri.clone(),
                    r.produced_by.clone().unwrap_or_else(|| "-".into()),
                ]
            })
            .collect();
        let header = ["KIND", "ORIGIN", "URI", "PRODUCED BY"].map(String::from);
        let mut widths = header.clone().map(|h| h.len());
        for row in &rows {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        for row in std::iter::once(&header).chain(&rows) {
            let line = row
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join("  ");
            out.push_str(line.trim_end());
            out.push('\n');
        }
        let counts: Vec<String> = ResourceKind::ALL
            .iter()
            .map(|k| (k, self.count(*k)))
            .filter(|(_, n)| *n > 0)
            .map(|(k, n)| format!("{n} {k}"))
            .collect();
        let _ = writeln!(
            out,
            "\n{} resources ({}), {} relations",
            self.len(),
            if counts.is_empty() {
                "none".into()
            } else {
                counts.join(", ")
            },
            self.relations().count()
        );
        out
    }
}
