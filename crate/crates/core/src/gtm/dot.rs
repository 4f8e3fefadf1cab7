use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write;

use super::GlobalTraceMap;
use crate::dot::quote;
use crate::trace::TraceNode;

impl GlobalTraceMap {
    /// Nodes within `radius` edges of `anchor`, ignoring edge direction.
    pub fn neighborhood(&self, anchor: &TraceNode, radius: usize) -> BTreeSet<usize> {
        let Some(start) = self.node_index(anchor) else {
            return BTreeSet::new();
        };
        let mut dist = BTreeMap::from([(start, 0)]);
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            let d = dist[&i];
            if d == radius {
                continue;
            }
            for &j in self.succ_of(i).iter().chain(self.pred_of(i)) {
                if let Entry::Vacant(e) = dist.entry(j) {
                    e.insert(d + 1);
                    queue.push_back(j);
                }
            }
        }
        dist.into_keys().collect()
    }

    /// Graphviz rendering, whole or restricted to the subgraph induced by the
    /// nodes within `radius` of an anchor. Nodes are grouped into one cluster
    /// per model or file; model elements are rounded boxes, code spans notes,
    /// and dangling edges are drawn dashed red.
    pub fn export_dot(&self, slice: Option<(&TraceNode, usize)>) -> String {
        let keep: BTreeSet<usize> = match slice {
            Some((anchor, radius)) => self.neighborhood(anchor, radius),
            None => (0..self.nodes().len()).collect(),
        };
        let mut out = String::from(
            "digraph gtm {\n  rankdir=LR;\n  node [fontname=\"Helvetica\", fontsize=10];\n  edge [fontname=\"Helvetica\", fontsize=9];\n",
        );
        let mut clusters: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for &i in &keep {
            let owner = match &self.nodes()[i] {
                TraceNode::Model(r) => r.model.as_str(),
                TraceNode::Code(s) => s.file.as_str(),
            };
            clusters.entry(owner).or_default().push(i);
        }
        for (c, (owner, members)) in clusters.iter().enumerate() {
            let _ = writeln!(out, "  subgraph cluster_{c} {{\n    label={};", quote(owner));
            for &i in members {
                let (label, style) = match &self.nodes()[i] {
                    TraceNode::Model(r) => (
                        r.path.to_string(),
                        "shape=box, style=\"rounded,filled\", fillcolor=\"#fbe3c4\"",
                    ),
                    TraceNode::Code(s) => (
                        format!("{}:{} [{}..{})", s.line, s.col, s.start, s.end),
                        "shape=note, style=filled, fillcolor=\"#f5f0c0\"",
                    ),
                };
                let _ = writeln!(out, "    n{i} [label={}, {style}];", quote(&label));
            }
            out.push_str("  }\n");
        }
        for e in self.edges() {
            let (Some(a), Some(b)) = (self.node_index(&e.from), self.node_index(&e.to)) else {
                continue;
            };
            if !keep.contains(&a) || !keep.contains(&b) {
                continue;
            }
            let label = e.rule.as_deref().unwrap_or("");
            let extra = if e.dangling { ", style=dashed, color=red" } else { "" };
            let _ = writeln!(out, "  n{a} -> n{b} [label={}{extra}];", quote(label));
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{chain, node};
    use super::*;

    #[test]
    fn empty_map_is_header_only() {
        let dot = GlobalTraceMap::default().export_dot(None);
        assert!(dot.starts_with("digraph gtm {"));
        assert!(!dot.contains("->"));
        assert!(dot.ends_with("}\n"));
    }

    #[test]
    fn chain_has_two_edges() {
        let dot = chain().export_dot(None);
        assert_eq!(dot.matches(" -> ").count(), 2);
        assert_eq!(dot.matches("subgraph cluster_").count(), 3);
    }

    #[test]
    fn slice_by_radius() {
        let g = chain();
        let c = node("C", "z[0]");
        assert_eq!(g.neighborhood(&c, 0).len(), 1);
        assert_eq!(g.neighborhood(&c, 1).len(), 2);
        let dot = g.export_dot(Some((&c, 1)));
        assert_eq!(dot.matches(" -> ").count(), 1);
        assert!(!dot.contains("x[0]"));
        assert!(g.neighborhood(&node("Q", "q"), 3).is_empty());
    }
}
