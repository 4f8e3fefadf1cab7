//! The Global Trace Map: the union of all local trace models of an enacted
//! workspace, joined at shared model elements, with change impact and origin
//! queries over it.

mod analysis;
mod dot;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::megamodel::{Megamodel, ResourceKind};
use crate::model::{resolve_path, MetamodelRegistry, Model};
use crate::trace::{load_trace, LocalTraceModel, TraceNode};
use crate::workspace::{Workspace, WorkspaceError};

pub use analysis::{change_impact, origin_at, origin_track, Report, ReportKind};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct GtmEdge {
    pub from: TraceNode,
    pub to: TraceNode,
    /// Megamodel id of the transformation whose trace holds the link.
    pub via: String,
    /// Rule or template that produced the link.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    /// Set when an endpoint no longer resolves in the workspace.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub dangling: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GtmError {
    #[error(transparent)]
    Workspace(#[from] WorkspaceError),
    #[error("trace model `{uri}`: {message}")]
    Trace { uri: String, message: String },
    #[error("`{0}` is not a node of the trace map")]
    AnchorNotFound(String),
    #[error("offset {offset} of `{file}` is not inside any traced code span")]
    LocationOutsideSpans { file: String, offset: usize },
}

/// Nodes and edges in a fixed order; node indices are stable for a given
/// edge set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GlobalTraceMap {
    nodes: Vec<TraceNode>,
    index: BTreeMap<TraceNode, usize>,
    edges: Vec<GtmEdge>,
    succ: Vec<BTreeSet<usize>>,
    pred: Vec<BTreeSet<usize>>,
    /// Dangling endpoints found while building.
    pub warnings: Vec<String>,
}

impl GlobalTraceMap {
    /// Joins the links of `traces`: every (source, target) pair of every
    /// link becomes an edge, and equal endpoints become one node.
    pub fn from_traces<'a>(traces: impl IntoIterator<Item = &'a LocalTraceModel>) -> Self {
        let mut edges = BTreeSet::new();
        for t in traces {
            for link in &t.links {
                for s in &link.sources {
                    for target in &link.targets {
                        edges.insert(GtmEdge {
                            from: TraceNode::Model(s.clone()),
                            to: target.clone(),
                            via: t.transformation.clone(),
                            rule: link.producer().map(str::to_string),
                            dangling: false,
                        });
                    }
                }
            }
        }
        Self::from_edges(edges)
    }

    fn from_edges(edges: BTreeSet<GtmEdge>) -> Self {
        let nodes: BTreeSet<TraceNode> = edges.iter().flat_map(|e| [e.from.clone(), e.to.clone()]).collect();
        let nodes: Vec<TraceNode> = nodes.into_iter().collect();
        let index: BTreeMap<TraceNode, usize> = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let mut succ = vec![BTreeSet::new(); nodes.len()];
        let mut pred = vec![BTreeSet::new(); nodes.len()];
        for e in &edges {
            let (a, b) = (index[&e.from], index[&e.to]);
            succ[a].insert(b);
            pred[b].insert(a);
        }
        GlobalTraceMap {
            nodes,
            index,
            edges: edges.into_iter().collect(),
            succ,
            pred,
            warnings: Vec::new(),
        }
    }

    pub fn nodes(&self) -> &[TraceNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[GtmEdge] {
        &self.edges
    }

    pub fn node_index(&self, n: &TraceNode) -> Option<usize> {
        self.index.get(n).copied()
    }

    pub fn contains(&self, n: &TraceNode) -> bool {
        self.index.contains_key(n)
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Direct successors of `n`.
    pub fn successors(&self, n: &TraceNode) -> impl Iterator<Item = &TraceNode> {
        self.index
            .get(n)
            .into_iter()
            .flat_map(|&i| self.succ[i].iter().map(|&j| &self.nodes[j]))
    }

    /// Direct predecessors of `n`.
    pub fn predecessors(&self, n: &TraceNode) -> impl Iterator<Item = &TraceNode> {
        self.index
            .get(n)
            .into_iter()
            .flat_map(|&i| self.pred[i].iter().map(|&j| &self.nodes[j]))
    }

    /// Every node reachable from `n` by one or more edges.
    pub fn reachable(&self, n: &TraceNode) -> BTreeSet<TraceNode> {
        analysis::layers(self, n, true)
            .into_iter()
            .flatten()
            .map(|i| self.nodes[i].clone())
            .collect()
    }

    pub(crate) fn succ_of(&self, i: usize) -> &BTreeSet<usize> {
        &self.succ[i]
    }

    pub(crate) fn pred_of(&self, i: usize) -> &BTreeSet<usize> {
        &self.pred[i]
    }
}

/// Loads every trace model registered in `mgm` and joins them. Endpoints
/// that no longer resolve (a missing model element, a span past the end of
/// its file) keep their edges, flagged as dangling, and add a warning.
pub fn build_gtm(ws: &Workspace, mgm: &Megamodel) -> Result<GlobalTraceMap, GtmError> {
    let mut traces = Vec::new();
    for r in mgm.of_kind(ResourceKind::TraceModel) {
        let t = load_trace(&ws.read(&r.uri)?).map_err(|e| GtmError::Trace {
            uri: r.uri.clone(),
            message: e.to_string(),
        })?;
        traces.push(t);
    }
    let mut g = GlobalTraceMap::from_traces(&traces);
    let metamodels = ws.metamodels(mgm).unwrap_or_else(|_| MetamodelRegistry::new());
    let mut models: BTreeMap<String, Option<Model>> = BTreeMap::new();
    let mut files: BTreeMap<String, Option<usize>> = BTreeMap::new();
    let mut dangling = BTreeSet::new();
    for n in &g.nodes {
        let ok = match n {
            TraceNode::Model(r) => {
                let m = models
                    .entry(r.model.clone())
                    .or_insert_with(|| ws.load_model(&r.model, &metamodels).ok());
                m.as_ref().is_some_and(|m| resolve_path(m, &r.path).is_ok())
            }
            TraceNode::Code(s) => {
                let len = files
                    .entry(s.file.clone())
                    .or_insert_with(|| std::fs::metadata(ws.path(&s.file)).ok().map(|m| m.len() as usize));
                len.is_some_and(|len| s.end <= len)
            }
        };
        if !ok {
            g.warnings.push(format!("dangling trace endpoint `{n}`"));
            dangling.insert(n.clone());
        }
    }
    for e in &mut g.edges {
        e.dangling = dangling.contains(&e.from) || dangling.contains(&e.to);
    }
    Ok(g)
}
