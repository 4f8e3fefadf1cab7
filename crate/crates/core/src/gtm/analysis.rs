use std::collections::BTreeSet;
use std::fmt::Write;

use serde::Serialize;

use super::{GlobalTraceMap, GtmError};
use crate::trace::TraceNode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportKind {
    Impact,
    Origin,
}

/// Minimal-depth layers around an anchor: `layers[k]` holds the nodes first
/// reached after `k + 1` edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Report {
    pub kind: ReportKind,
    pub anchor: TraceNode,
    pub layers: Vec<Vec<TraceNode>>,
}

impl Report {
    /// All nodes of all layers.
    pub fn reached(&self) -> BTreeSet<&TraceNode> {
        self.layers.iter().flatten().collect()
    }

    /// The anchor on the first line, then one line per node prefixed with
    /// `=` repeated once per edge and `>`.
    pub fn render(&self) -> String {
        let mut out = format!("{}\n", self.anchor);
        for (k, layer) in self.layers.iter().enumerate() {
            let arrow = format!("{}>", "=".repeat(k + 1));
            for n in layer {
                let _ = writeln!(out, "{arrow} {n}");
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        crate::json::to_canonical_string(self)
    }
}

/// Breadth-first layers of node indices from `anchor`, excluding it.
pub(crate) fn layers(g: &GlobalTraceMap, anchor: &TraceNode, forward: bool) -> Vec<Vec<usize>> {
    let Some(start) = g.node_index(anchor) else {
        return Vec::new();
    };
    let mut seen = BTreeSet::from([start]);
    let mut frontier = vec![start];
    let mut out = Vec::new();
    loop {
        let mut next = BTreeSet::new();
        for &i in &frontier {
            let step = if forward { g.succ_of(i) } else { g.pred_of(i) };
            for &j in step {
                if seen.insert(j) {
                    next.insert(j);
                }
            }
        }
        if next.is_empty() {
            return out;
        }
        frontier = next.into_iter().collect();
        out.push(frontier.clone());
    }
}

fn report(g: &GlobalTraceMap, anchor: &TraceNode, kind: ReportKind) -> Result<Report, GtmError> {
    if !g.contains(anchor) {
        return Err(GtmError::AnchorNotFound(anchor.to_string()));
    }
    let layers = layers(g, anchor, kind == ReportKind::Impact)
        .into_iter()
        .map(|l| l.into_iter().map(|i| g.nodes()[i].clone()).collect())
        .collect();
    Ok(Report {
        kind,
        anchor: anchor.clone(),
        layers,
    })
}

/// Everything derived, directly or transitively, from `anchor`.
pub fn change_impact(g: &GlobalTraceMap, anchor: &TraceNode) -> Result<Report, GtmError> {
    report(g, anchor, ReportKind::Impact)
}

/// Everything `anchor` was derived from, directly or transitively.
pub fn origin_track(g: &GlobalTraceMap, anchor: &TraceNode) -> Result<Report, GtmError> {
    report(g, anchor, ReportKind::Origin)
}

/// Origin of the code at a byte offset of a generated file. The anchor is
/// the smallest traced span containing the offset.
pub fn origin_at(g: &GlobalTraceMap, file: &str, offset: usize) -> Result<Report, GtmError> {
    let anchor = g
        .nodes()
        .iter()
        .filter_map(TraceNode::as_code)
        .filter(|s| s.file == file && s.contains(offset))
        .min_by_key(|s| (s.len(), s.start))
        .ok_or_else(|| GtmError::LocationOutsideSpans {
            file: file.to_string(),
            offset,
        })?;
    origin_track(g, &TraceNode::Code(anchor.clone()))
}
