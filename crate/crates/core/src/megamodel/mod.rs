//! The megamodel: a registry of workspace resources and the relations
//! between them, persisted as `megamodel.json` at the workspace root.

mod discover;
mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use discover::{discover, kind_of_file, MEGAMODEL_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ResourceKind {
    Metamodel,
    Model,
    TransformationM2M,
    TransformationM2C,
    ProcessModel,
    TraceModel,
    GeneratedFile,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 7] = [
        ResourceKind::Metamodel,
        ResourceKind::Model,
        ResourceKind::TransformationM2M,
        ResourceKind::TransformationM2C,
        ResourceKind::ProcessModel,
        ResourceKind::TraceModel,
        ResourceKind::GeneratedFile,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ResourceKind::Metamodel => "Metamodel",
            ResourceKind::Model => "Model",
            ResourceKind::TransformationM2M => "TransformationM2M",
            ResourceKind::TransformationM2C => "TransformationM2C",
            ResourceKind::ProcessModel => "ProcessModel",
            ResourceKind::TraceModel => "TraceModel",
            ResourceKind::GeneratedFile => "GeneratedFile",
        }
    }

    pub fn is_transformation(self) -> bool {
        matches!(self, ResourceKind::TransformationM2M | ResourceKind::TransformationM2C)
    }

    /// Artifacts that flow into and out of transformations.
    pub fn is_artifact(self) -> bool {
        matches!(self, ResourceKind::Model | ResourceKind::GeneratedFile)
    }
}

impl fmt::Display for ResourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Origin {
    UserProvided,
    Discovered,
    Generated,
}

/// Stable identifier of a resource: `<Kind>:<uri>`.
pub fn resource_id(kind: ResourceKind, uri: &str) -> String {
    format!("{kind}:{uri}")
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ResourceEntry {
    pub id: String,
    pub kind: ResourceKind,
    /// Workspace-relative path with `/` separators.
    pub uri: String,
    pub origin: Origin,
    /// Execution that generated the resource, as `exec:<action>:<stamp>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub produced_by: Option<String>,
}

impl ResourceEntry {
    pub fn new(kind: ResourceKind, uri: impl Into<String>, origin: Origin) -> Self {
        let uri = uri.into();
        ResourceEntry {
            id: resource_id(kind, &uri),
            kind,
            uri,
            origin,
            produced_by: None,
        }
    }

    pub fn generated(kind: ResourceKind, uri: impl Into<String>, execution: impl Into<String>) -> Self {
        ResourceEntry {
            produced_by: Some(execution.into()),
            ..ResourceEntry::new(kind, uri, Origin::Generated)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationKind {
    ConformsTo,
    DataFlow,
    TraceFor,
    WeaveBinding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relation {
    pub from: String,
    pub to: String,
    pub kind: RelationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    /// Process action for weave bindings.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl Relation {
    fn plain(from: &str, to: &str, kind: RelationKind) -> Self {
        Relation {
            from: from.to_string(),
            to: to.to_string(),
            kind,
            direction: None,
            label: None,
        }
    }

    pub fn conforms_to(model: &str, metamodel: &str) -> Self {
        Relation::plain(model, metamodel, RelationKind::ConformsTo)
    }

    /// Artifact consumed by a transformation.
    pub fn input(artifact: &str, transformation: &str) -> Self {
        Relation {
            direction: Some(Direction::Input),
            ..Relation::plain(artifact, transformation, RelationKind::DataFlow)
        }
    }

    /// Artifact produced by a transformation.
    pub fn output(transformation: &str, artifact: &str) -> Self {
        Relation {
            direction: Some(Direction::Output),
            ..Relation::plain(transformation, artifact, RelationKind::DataFlow)
        }
    }

    pub fn trace_for(trace: &str, transformation: &str) -> Self {
        Relation::plain(trace, transformation, RelationKind::TraceFor)
    }

    pub fn weave(process: &str, transformation: &str, action: &str) -> Self {
        Relation {
            label: Some(action.to_string()),
            ..Relation::plain(process, transformation, RelationKind::WeaveBinding)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MegamodelError {
    #[error("i/o error on `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("metamodel `{0}` is defined by more than one file")]
    AmbiguousMetamodel(String),
    #[error("cannot read `{uri}`: {message}")]
    InvalidResource { uri: String, message: String },
    #[error("resource `{0}` is already registered")]
    DuplicateId(String),
    #[error("relation {from} -> {to} refers to an unknown resource")]
    DanglingRelation { from: String, to: String },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("integrity error: {0}")]
    Integrity(String),
}

impl MegamodelError {
    pub fn io(path: impl fmt::Display, e: &std::io::Error) -> Self {
        MegamodelError::Io {
            path: path.to_string(),
            message: e.to_string(),
        }
    }
}

/// Resources and relations. Values are treated as immutable snapshots:
/// [`Megamodel::register`] returns a new megamodel.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Megamodel {
    resources: BTreeMap<String, ResourceEntry>,
    relations: BTreeSet<Relation>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MegamodelDoc {
    resources: Vec<ResourceEntry>,
    relations: Vec<Relation>,
}

impl Megamodel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn resources(&self) -> impl Iterator<Item = &ResourceEntry> {
        self.resources.values()
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.iter()
    }

    pub fn get(&self, id: &str) -> Option<&ResourceEntry> {
        self.resources.get(id)
    }

    pub fn by_uri(&self, kind: ResourceKind, uri: &str) -> Option<&ResourceEntry> {
        self.resources.get(&resource_id(kind, uri))
    }

    pub fn of_kind(&self, kind: ResourceKind) -> impl Iterator<Item = &ResourceEntry> {
        self.resources.values().filter(move |r| r.kind == kind)
    }

    pub fn count(&self, kind: ResourceKind) -> usize {
        self.of_kind(kind).count()
    }

    pub fn len(&self) -> usize {
        self.resources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }

    pub fn relations_from<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Relation> {
        self.relations.iter().filter(move |r| r.from == id)
    }

    pub fn relations_to<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Relation> {
        self.relations.iter().filter(move |r| r.to == id)
    }

    /// Returns a new megamodel with `entry` and `relations` added. The receiver
    /// is left as it was.
    pub fn register(&self, entry: ResourceEntry, relations: Vec<Relation>) -> Result<Megamodel, MegamodelError> {
        let mut next = self.clone();
        next.insert(entry, relations)?;
        Ok(next)
    }

    /// In-place form of [`Megamodel::register`]; on error nothing is changed.
    pub fn insert(&mut self, entry: ResourceEntry, relations: Vec<Relation>) -> Result<(), MegamodelError> {
        if self.resources.contains_key(&entry.id) {
            return Err(MegamodelError::DuplicateId(entry.id));
        }
        let known = |id: &str| id == entry.id || self.resources.contains_key(id);
        for r in &relations {
            if !known(&r.from) || !known(&r.to) {
                return Err(MegamodelError::DanglingRelation {
                    from: r.from.clone(),
                    to: r.to.clone(),
                });
            }
        }
        let kind_of = |id: &str| {
            if id == entry.id {
                entry.kind
            } else {
                self.resources[id].kind
            }
        };
        for r in &relations {
            check_relation(r, kind_of(&r.from), kind_of(&r.to))?;
        }
        self.resources.insert(entry.id.clone(), entry);
        self.relations.extend(relations);
        Ok(())
    }

    /// Adds relations between registered resources.
    pub fn relate(&mut self, relations: Vec<Relation>) -> Result<(), MegamodelError> {
        for r in &relations {
            let (Some(a), Some(b)) = (self.resources.get(&r.from), self.resources.get(&r.to)) else {
                return Err(MegamodelError::DanglingRelation {
                    from: r.from.clone(),
                    to: r.to.clone(),
                });
            };
            check_relation(r, a.kind, b.kind)?;
        }
        self.relations.extend(relations);
        Ok(())
    }

    /// The megamodel without generated resources and without relations that
    /// touch them. Used to start a fresh enactment.
    pub fn without_generated(&self) -> Megamodel {
        let resources: BTreeMap<String, ResourceEntry> = self
            .resources
            .iter()
            .filter(|(_, r)| r.origin != Origin::Generated)
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let relations = self
            .relations
            .iter()
            .filter(|r| resources.contains_key(&r.from) && resources.contains_key(&r.to))
            .cloned()
            .collect();
        Megamodel { resources, relations }
    }

    /// Checks every invariant of a stored megamodel.
    pub fn validate(&self) -> Result<(), MegamodelError> {
        let integrity = |m: String| Err(MegamodelError::Integrity(m));
        for (id, r) in &self.resources {
            if r.uri.is_empty() {
                return integrity(format!("resource `{id}` has an empty uri"));
            }
            if *id != resource_id(r.kind, &r.uri) {
                return integrity(format!("resource id `{id}` does not match its kind and uri"));
            }
            if r.origin == Origin::Generated && r.produced_by.is_none() {
                return integrity(format!("generated resource `{id}` does not name its producer"));
            }
        }
        for r in &self.relations {
            let (Some(a), Some(b)) = (self.resources.get(&r.from), self.resources.get(&r.to)) else {
                return integrity(format!("relation {} -> {} refers to an unknown resource", r.from, r.to));
            };
            check_relation(r, a.kind, b.kind)?;
        }
        for t in self.of_kind(ResourceKind::TraceModel) {
            let n = self
                .relations_from(&t.id)
                .filter(|r| r.kind == RelationKind::TraceFor)
                .count();
            if n != 1 {
                return integrity(format!("trace model `{}` has {n} TraceFor relations", t.id));
            }
        }
        if let Some(cycle) = self.dataflow_cycle() {
            return integrity(format!("data flow cycle through {}", cycle.join(" -> ")));
        }
        Ok(())
    }

    /// A cycle in the data flow graph, if any.
    pub fn dataflow_cycle(&self) -> Option<Vec<String>> {
        let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for r in self.relations.iter().filter(|r| r.kind == RelationKind::DataFlow) {
            succ.entry(&r.from).or_default().push(&r.to);
        }
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        fn visit<'a>(
            n: &'a str,
            succ: &BTreeMap<&'a str, Vec<&'a str>>,
            state: &mut BTreeMap<&'a str, u8>,
            stack: &mut Vec<&'a str>,
        ) -> Option<Vec<String>> {
            state.insert(n, 1);
            stack.push(n);
            for &m in succ.get(n).into_iter().flatten() {
                match state.get(m).copied().unwrap_or(0) {
                    1 => {
                        let start = stack.iter().position(|x| *x == m).unwrap_or(0);
                        let mut cycle: Vec<String> = stack[start..].iter().map(|s| s.to_string()).collect();
                        cycle.push(m.to_string());
                        return Some(cycle);
                    }
                    0 => {
                        if let Some(c) = visit(m, succ, state, stack) {
                            return Some(c);
                        }
                    }
                    _ => {}
                }
            }
            stack.pop();
            state.insert(n, 2);
            None
        }
        let nodes: Vec<&str> = succ.keys().copied().collect();
        for n in nodes {
            if state.get(n).copied().unwrap_or(0) == 0 {
                if let Some(c) = visit(n, &succ, &mut state, &mut Vec::new()) {
                    return Some(c);
                }
            }
        }
        None
    }

    pub fn save(&self) -> String {
        crate::json::to_canonical_string(&MegamodelDoc {
            resources: self.resources.values().cloned().collect(),
            relations: self.relations.iter().cloned().collect(),
        })
    }

    pub fn load(text: &str) -> Result<Megamodel, MegamodelError> {
        let doc: MegamodelDoc = serde_json::from_str(text).map_err(|e| MegamodelError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut m = Megamodel::new();
        for r in doc.resources {
            if m.resources.insert(r.id.clone(), r.clone()).is_some() {
                return Err(MegamodelError::Integrity(format!("duplicate resource `{}`", r.id)));
            }
        }
        m.relations.extend(doc.relations);
        m.validate()?;
        Ok(m)
    }
}

fn check_relation(r: &Relation, from: ResourceKind, to: ResourceKind) -> Result<(), MegamodelError> {
    use ResourceKind as K;
    let ok = match (r.kind, r.direction) {
        (RelationKind::ConformsTo, None) => from == K::Model && to == K::Metamodel,
        (RelationKind::DataFlow, Some(Direction::Input)) => from.is_artifact() && to.is_transformation(),
        (RelationKind::DataFlow, Some(Direction::Output)) => from.is_transformation() && to.is_artifact(),
        (RelationKind::TraceFor, None) => from == K::TraceModel && to.is_transformation(),
        (RelationKind::WeaveBinding, None) => from == K::ProcessModel && to.is_transformation(),
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(MegamodelError::Integrity(format!(
            "{:?}{} relation cannot link {from} `{}` to {to} `{}`",
            r.kind,
            r.direction.map_or(String::new(), |d| format!("({d:?})")),
            r.from,
            r.to
        )))
    }
}
