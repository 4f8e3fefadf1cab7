//! Rule-based model-to-model transformations.
//!
//! A transformation is a list of matched rules. Each rule matches source
//! elements of one class (optionally filtered by a guard) and instantiates one
//! or more target patterns. Element-valued bindings are resolved to the
//! element created by the first target pattern of the rule that matched the
//! source element.
//!
//! [`augment_m2m`] is the higher-order pass: it rewrites a transformation so
//! that every target pattern carries a trace clause, and
//! [`execute_augmented_m2m`] then emits one trace link per instantiated
//! pattern alongside the output model.

mod exec;
mod parse;
mod print;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::Value;

pub use exec::{execute_augmented_m2m, execute_m2m};
pub use parse::parse_m2m;

#[derive(Debug, Clone, PartialEq)]
pub struct TransformationM2M {
    pub name: String,
    pub output: ModelDecl,
    pub inputs: Vec<ModelDecl>,
    pub rules: Vec<Rule>,
}

/// `alias : Metamodel`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDecl {
    pub alias: String,
    pub metamodel: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub name: String,
    pub from: SourcePattern,
    pub to: Vec<TargetPattern>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourcePattern {
    pub var: String,
    pub metamodel: String,
    pub class: String,
    /// Conjunction of comparisons; empty means unguarded.
    pub guard: Vec<Condition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub left: Expr,
    pub op: CmpOp,
    pub right: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetPattern {
    pub var: String,
    pub metamodel: String,
    pub class: String,
    pub bindings: Vec<Binding>,
    pub trace: Option<TraceClause>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Binding {
    pub feature: String,
    pub expr: Expr,
}

/// Marks a target pattern as trace-emitting; the tags are copied onto every
/// link the pattern produces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceClause {
    pub tags: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Value),
    /// `var` followed by zero or more feature steps.
    Nav {
        var: String,
        steps: Vec<String>,
    },
    Concat(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum M2mError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("unknown metamodel `{0}`")]
    UnknownMetamodel(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("class `{class}` has no feature `{feature}`")]
    UnknownFeature { class: String, feature: String },
    #[error("type error in rule `{rule}`: {message}")]
    Type { rule: String, message: String },
    #[error("duplicate rule `{0}`")]
    DuplicateRule(String),
    #[error("missing input model for `{0}`")]
    MissingInput(String),
    #[error("element `{path}` matches several rules: {}", rules.join(", "))]
    MatchAmbiguity { path: String, rules: Vec<String> },
    #[error("rule `{rule}` binds `{feature}` to `{path}`, which no rule matched")]
    UnresolvedBinding {
        rule: String,
        feature: String,
        path: String,
    },
    #[error("evaluation error in rule `{rule}` at `{path}`: {message}")]
    Eval {
        rule: String,
        path: String,
        message: String,
    },
    #[error("cannot assemble output model: {0}")]
    Placement(String),
    #[error("conformance error at `{path}`: {message}")]
    Conformance { path: String, message: String },
}

impl TransformationM2M {
    pub fn rule(&self, name: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.name == name)
    }

    /// True when every target pattern carries a trace clause.
    pub fn is_augmented(&self) -> bool {
        self.rules.iter().flat_map(|r| &r.to).all(|p| p.trace.is_some())
    }

    /// The transformation with all trace clauses removed.
    pub fn strip(&self) -> TransformationM2M {
        let mut t = self.clone();
        for p in t.rules.iter_mut().flat_map(|r| r.to.iter_mut()) {
            p.trace = None;
        }
        t
    }
}

/// Adds a trace clause tagged with the rule name to every target pattern that
/// lacks one. Rule logic is left untouched, and applying it twice is the same
/// as applying it once.
pub fn augment_m2m(t: &TransformationM2M) -> TransformationM2M {
    let mut out = t.clone();
    for rule in &mut out.rules {
        for pattern in &mut rule.to {
            if pattern.trace.is_none() {
                pattern.trace = Some(TraceClause {
                    tags: BTreeMap::from([(crate::trace::RULE_TAG.to_string(), rule.name.clone())]),
                });
            }
        }
    }
    out
}
