//! Local trace models: tag-based links from source model elements to target
//! model elements or code spans, produced by one transformation execution.

mod index;
mod tree;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ElementPath;

pub use index::TraceIndex;
pub use tree::{build_identifier_tree, TraceIdentifierTree, TreeNode};

/// Tag key carrying the M2M rule name.
pub const RULE_TAG: &str = "rule";
/// Tag key carrying the M2C template name.
pub const TEMPLATE_TAG: &str = "template";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelRef {
    pub model: String,
    pub path: ElementPath,
}

impl ModelRef {
    pub fn new(model: impl Into<String>, path: ElementPath) -> Self {
        ModelRef {
            model: model.into(),
            path,
        }
    }
}

impl fmt::Display for ModelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.model, self.path)
    }
}

/// Half-open byte range `[start, end)` of a generated text file, with the
/// 1-based line and byte column of `start`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CodeSpan {
    pub file: String,
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub col: usize,
}

impl CodeSpan {
    /// Builds a span over `text`, deriving line and column from `start`.
    pub fn in_text(file: impl Into<String>, text: &str, start: usize, end: usize) -> Self {
        let (line, col) = line_col(text, start);
        CodeSpan {
            file: file.into(),
            start,
            end,
            line,
            col,
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }
}

impl fmt::Display for CodeSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.col)
    }
}

/// 1-based line and byte column of `offset` in `text`.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text.as_bytes()[..offset.min(text.len())];
    let line = 1 + before.iter().filter(|b| **b == b'\n').count();
    let line_start = before.iter().rposition(|b| *b == b'\n').map_or(0, |p| p + 1);
    (line, offset - line_start + 1)
}

/// Byte offset of a 1-based line and byte column, if it lies within `text`.
pub fn offset_of(text: &str, line: usize, col: usize) -> Option<usize> {
    if line == 0 || col == 0 {
        return None;
    }
    let mut line_start = 0;
    for _ in 1..line {
        line_start += text[line_start..].find('\n')? + 1;
    }
    let line_end = text[line_start..].find('\n').map_or(text.len(), |p| line_start + p);
    let offset = line_start + col - 1;
    (offset <= line_end).then_some(offset)
}

/// An endpoint of a trace link: a model element or a span of generated code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TraceNode {
    Model(ModelRef),
    Code(CodeSpan),
}

impl TraceNode {
    pub fn model(uri: impl Into<String>, path: ElementPath) -> Self {
        TraceNode::Model(ModelRef::new(uri, path))
    }

    pub fn as_model(&self) -> Option<&ModelRef> {
        match self {
            TraceNode::Model(r) => Some(r),
            TraceNode::Code(_) => None,
        }
    }

    pub fn as_code(&self) -> Option<&CodeSpan> {
        match self {
            TraceNode::Code(s) => Some(s),
            TraceNode::Model(_) => None,
        }
    }
}

impl fmt::Display for TraceNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceNode::Model(r) => r.fmt(f),
            TraceNode::Code(s) => s.fmt(f),
        }
    }
}

impl From<ModelRef> for TraceNode {
    fn from(r: ModelRef) -> Self {
        TraceNode::Model(r)
    }
}

impl From<CodeSpan> for TraceNode {
    fn from(s: CodeSpan) -> Self {
        TraceNode::Code(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceLink {
    pub sources: Vec<ModelRef>,
    pub targets: Vec<TraceNode>,
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

impl TraceLink {
    pub fn new(source: ModelRef, target: TraceNode) -> Self {
        TraceLink {
            sources: vec![source],
            targets: vec![target],
            tags: BTreeMap::new(),
        }
    }

    pub fn tagged(mut self, key: &str, value: impl Into<String>) -> Self {
        self.tags.insert(key.to_string(), value.into());
        self
    }

    pub fn tag(&self, key: &str) -> Option<&str> {
        self.tags.get(key).map(String::as_str)
    }

    /// The rule or template that produced the link.
    pub fn producer(&self) -> Option<&str> {
        self.tag(RULE_TAG).or_else(|| self.tag(TEMPLATE_TAG))
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let integrity = |m: &str| Err(TraceError::Integrity(m.to_string()));
        if self.sources.is_empty() {
            return integrity("trace link has no sources");
        }
        if self.targets.is_empty() {
            return integrity("trace link has no targets");
        }
        let code = self.targets.iter().filter(|t| t.as_code().is_some()).count();
        if code != 0 && code != self.targets.len() {
            return integrity("trace link mixes model and code targets");
        }
        if self.tags.keys().any(String::is_empty) {
            return integrity("trace link has an empty tag key");
        }
        for span in self.targets.iter().filter_map(TraceNode::as_code) {
            if span.start > span.end || span.line == 0 || span.col == 0 {
                return integrity(&format!("malformed code span {span}"));
            }
        }
        Ok(())
    }
}

/// Trace links of one transformation execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct LocalTraceModel {
    pub id: String,
    pub transformation: String,
    pub execution_stamp: u64,
    pub links: Vec<TraceLink>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("integrity error: {0}")]
    Integrity(String),
}

impl LocalTraceModel {
    pub fn new(
        id: impl Into<String>,
        transformation: impl Into<String>,
        execution_stamp: u64,
        links: Vec<TraceLink>,
    ) -> Self {
        LocalTraceModel {
            id: id.into(),
            transformation: transformation.into(),
            execution_stamp,
            links,
        }
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        if self.id.is_empty() {
            return Err(TraceError::Integrity("trace model has an empty id".into()));
        }
        self.links.iter().try_for_each(TraceLink::validate)
    }

    pub fn index(&self) -> TraceIndex {
        TraceIndex::new(&self.links)
    }
}

/// Serializes a trace model as canonical JSON.
pub fn save_trace(t: &LocalTraceModel) -> String {
    crate::json::to_canonical_string(t)
}

pub fn load_trace(text: &str) -> Result<LocalTraceModel, TraceError> {
    let t: LocalTraceModel = serde_json::from_str(text).map_err(|e| TraceError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    t.validate()?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link() -> TraceLink {
        TraceLink::new(
            ModelRef::new("in.model.json", "indirect[0]".parse().unwrap()),
            TraceNode::model("out.model.json", "platforms[0]".parse().unwrap()),
        )
        .tagged(RULE_TAG, "Sink2Platform")
    }

    #[test]
    fn empty_trace_round_trips() {
        let t = LocalTraceModel::new("trace:a", "TransformationM2M:a.m2m", 1, vec![]);
        assert_eq!(load_trace(&save_trace(&t)).unwrap(), t);
    }

    #[test]
    fn mixed_trace_round_trips() {
        let text = "ab\ncd";
        let code = TraceLink::new(
            ModelRef::new("m", ElementPath::root()),
            CodeSpan::in_text("Sink.c", text, 3, 5).into(),
        )
        .tagged(TEMPLATE_TAG, "sink");
        let t = LocalTraceModel::new("trace:a", "x", 7, vec![link(), code]);
        let saved = save_trace(&t);
        assert_eq!(load_trace(&saved).unwrap(), t);
        assert_eq!(save_trace(&load_trace(&saved).unwrap()), saved);
    }

    #[test]
    fn empty_sources_are_an_integrity_error() {
        let text = r#"{"id":"t","transformation":"x","executionStamp":1,
            "links":[{"sources":[],"targets":[{"kind":"model","model":"m","path":"root"}],"tags":{}}]}"#;
        assert!(matches!(load_trace(text), Err(TraceError::Integrity(_))));
    }

    #[test]
    fn mixed_targets_are_rejected() {
        let mut l = link();
        l.targets.push(CodeSpan::in_text("f", "x", 0, 1).into());
        assert!(l.validate().is_err());
    }

    #[test]
    fn malformed_json_is_a_syntax_error() {
        assert!(matches!(load_trace("{"), Err(TraceError::Syntax { .. })));
    }

    #[test]
    fn line_col_and_offset_are_inverse() {
        let text = "ab\ncde\n\nf";
        for off in 0..=text.len() {
            let (l, c) = line_col(text, off);
            assert_eq!(offset_of(text, l, c), Some(off));
        }
        assert_eq!(line_col(text, 4), (2, 2));
        assert_eq!(offset_of(text, 2, 9), None);
        assert_eq!(offset_of(text, 9, 1), None);
    }
}
