//! Model-to-code templates.
//!
//! A template takes one model element as its parameter and emits text.
//! Augmentation wraps every traceable emission region in identifier-path
//! markers (`{{sourceModel.platforms[[i/]]}}...{{/}}`), so that rendering the
//! augmented template produces annotated text from which [`extract_trace`]
//! recovers both the clean output and the trace links.

mod extract;
mod parse;
mod print;
mod render;

use std::fmt;

use thiserror::Error;

use crate::model::Value;

pub use extract::{extract_trace, Extraction};
pub use parse::parse_template;
pub use render::{render, render_augmented, AnnotatedOutput};

pub const DEFAULT_OPEN: &str = "{{";
pub const DEFAULT_CLOSE: &str = "}}";

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub name: String,
    pub param: Param,
    /// Name of the generated file.
    pub file: String,
    pub markers: Markers,
    pub body: Vec<Node>,
}

/// `var : Metamodel!Class`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub var: String,
    pub metamodel: String,
    pub class: String,
}

/// Marker delimiters. A region opens with `open path close` and ends with
/// `open / close`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Markers {
    pub open: String,
    pub close: String,
}

impl Markers {
    pub fn end_token(&self) -> String {
        format!("{}/{}", self.open, self.close)
    }

    pub fn is_default(&self) -> bool {
        self.open == DEFAULT_OPEN && self.close == DEFAULT_CLOSE
    }
}

impl Default for Markers {
    fn default() -> Self {
        Markers {
            open: DEFAULT_OPEN.into(),
            close: DEFAULT_CLOSE.into(),
        }
    }
}

/// Source position of a node. Locations describe the template text, not the
/// template, so they never affect equality.
#[derive(Debug, Clone, Copy, Default)]
pub struct Loc {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Loc {
    fn eq(&self, _: &Loc) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Text(String),
    Emit {
        expr: Expr,
        at: Loc,
    },
    For {
        var: String,
        over: Nav,
        body: Vec<Node>,
        at: Loc,
    },
    If {
        cond: Cond,
        then: Vec<Node>,
        els: Vec<Node>,
        at: Loc,
    },
    /// A marker region.
    Mark {
        path: MarkPath,
        body: Vec<Node>,
        at: Loc,
    },
}

/// `var(.feature)*`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Nav {
    pub var: String,
    pub steps: Vec<String>,
}

impl fmt::Display for Nav {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.var)?;
        for s in &self.steps {
            write!(f, ".{s}")?;
        }
        Ok(())
    }
}

/// Payload of an opening marker: the element reached by `nav`, or with
/// `indexed` set, its `i`-th element for the innermost loop index `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkPath {
    pub nav: Nav,
    pub indexed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Literal(Value),
    Nav(Nav),
    /// `nav->size()`
    Size(Nav),
    /// The innermost loop index `i`, counted from 0.
    Index,
}

impl Expr {
    fn nav(&self) -> Option<&Nav> {
        match self {
            Expr::Nav(n) | Expr::Size(n) => Some(n),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "<>",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// A comparison, or a bare boolean operand when `rhs` is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Clause {
    pub lhs: Expr,
    pub rhs: Option<(CmpOp, Expr)>,
}

/// Conjunction of clauses.
#[derive(Debug, Clone, PartialEq)]
pub struct Cond {
    pub clauses: Vec<Clause>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("type error at line {line}, column {col}: {message}")]
    Type { line: usize, col: usize, message: String },
    #[error("template expects a `{expected}` model, got `{found}`")]
    ModelMismatch { expected: String, found: String },
    #[error("evaluation error at template line {line}, element `{path}`: {message}")]
    Eval { line: usize, path: String, message: String },
    #[error("unbalanced marker at byte {offset}: {message}")]
    UnbalancedMarker { offset: usize, message: String },
    #[error("invalid marker path at byte {offset}: {message}")]
    PathSyntax { offset: usize, message: String },
}

impl Template {
    /// True when the template contains at least one marker region.
    pub fn is_augmented(&self) -> bool {
        fn any(nodes: &[Node]) -> bool {
            nodes.iter().any(|n| match n {
                Node::Mark { .. } => true,
                Node::For { body, .. } => any(body),
                Node::If { then, els, .. } => any(then) || any(els),
                _ => false,
            })
        }
        any(&self.body)
    }

    /// The template with all marker regions dissolved into their contents.
    pub fn strip(&self) -> Template {
        fn strip(nodes: &[Node]) -> Vec<Node> {
            let mut out: Vec<Node> = Vec::new();
            for n in nodes {
                let pieces = match n {
                    Node::Mark { body, .. } => strip(body),
                    Node::For { var, over, body, at } => vec![Node::For {
                        var: var.clone(),
                        over: over.clone(),
                        body: strip(body),
                        at: *at,
                    }],
                    Node::If { cond, then, els, at } => vec![Node::If {
                        cond: cond.clone(),
                        then: strip(then),
                        els: strip(els),
                        at: *at,
                    }],
                    other => vec![other.clone()],
                };
                for p in pieces {
                    push_merged(&mut out, p);
                }
            }
            out
        }
        Template {
            body: strip(&self.body),
            ..self.clone()
        }
    }
}

/// Appends `n`, merging adjacent text nodes as the parser would.
pub(crate) fn push_merged(out: &mut Vec<Node>, n: Node) {
    if let Node::Text(t) = &n {
        if t.is_empty() {
            return;
        }
        if let Some(Node::Text(prev)) = out.last_mut() {
            prev.push_str(t);
            return;
        }
    }
    out.push(n);
}

fn model_derived(n: &Node) -> bool {
    match n {
        Node::Text(_) => false,
        Node::Emit { expr, .. } => !matches!(expr, Expr::Literal(_)),
        Node::For { .. } | Node::Mark { .. } => true,
        Node::If { then, els, .. } => then.iter().chain(els).any(model_derived),
    }
}

/// Wraps the span from the first to the last model-derived node of `body` in
/// a marker region. Text-only bodies and bodies that already carry a marker
/// are returned as they are.
fn wrap(body: Vec<Node>, path: MarkPath, at: Loc) -> Vec<Node> {
    if body.iter().any(|n| matches!(n, Node::Mark { .. })) {
        return body;
    }
    let Some(first) = body.iter().position(model_derived) else {
        return body;
    };
    let last = body.iter().rposition(model_derived).unwrap_or(first);
    let mut body = body;
    let tail = body.split_off(last + 1);
    let inner = body.split_off(first);
    body.push(Node::Mark { path, body: inner, at });
    body.extend(tail);
    body
}

/// The element a conditional is about: the first navigation in its condition,
/// without a final attribute step and then without a final collection step.
/// `ref_owner` additionally drops a final reference step.
fn governing(cond: &Cond, features: &impl Fn(&Nav) -> Vec<StepKind>, ref_owner: bool) -> Option<Nav> {
    let nav = cond
        .clauses
        .iter()
        .flat_map(|c| std::iter::once(&c.lhs).chain(c.rhs.as_ref().map(|(_, e)| e)))
        .find_map(Expr::nav)?;
    let mut nav = nav.clone();
    let mut kinds = features(&nav);
    for drop in [StepKind::Attribute, StepKind::Collection] {
        if kinds.last() == Some(&drop) {
            kinds.pop();
            nav.steps.pop();
        }
    }
    if ref_owner && kinds.last() == Some(&StepKind::Reference) {
        nav.steps.pop();
    }
    Some(nav)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum StepKind {
    Attribute,
    Collection,
    Reference,
}

/// Loop variables in scope, innermost last, with their classes.
type Scope = [(String, String)];
type KindsFn<'a> = dyn Fn(&Nav, &Scope) -> Vec<StepKind> + 'a;
type ClassFn<'a> = dyn Fn(&Nav, &Scope) -> Option<String> + 'a;

/// Inserts identifier-path markers around each loop iteration's emission
/// region and around each conditional branch that emits model-derived text.
/// Applying it to an augmented template changes nothing.
pub fn augment_template(t: &Template, metamodels: &crate::model::MetamodelRegistry) -> Template {
    let kinds = |nav: &Nav, scope: &[(String, String)]| -> Vec<StepKind> {
        parse::step_kinds(nav, scope, metamodels, &t.param.metamodel)
    };
    fn go(nodes: Vec<Node>, scope: &mut Vec<(String, String)>, kinds: &KindsFn, class_of: &ClassFn) -> Vec<Node> {
        let mut out = Vec::new();
        for n in nodes {
            let n = match n {
                Node::For { var, over, body, at } => {
                    let class = class_of(&over, scope).unwrap_or_default();
                    scope.push((var.clone(), class));
                    let body = go(body, scope, kinds, class_of);
                    scope.pop();
                    let path = MarkPath {
                        nav: over.clone(),
                        indexed: true,
                    };
                    Node::For {
                        body: wrap(body, path, at),
                        var,
                        over,
                        at,
                    }
                }
                Node::If { cond, then, els, at } => {
                    let then = go(then, scope, kinds, class_of);
                    let els = go(els, scope, kinds, class_of);
                    let f = |n: &Nav| kinds(n, scope);
                    let loop_var = |n: &Nav| n.steps.is_empty() && scope.iter().skip(1).any(|(v, _)| *v == n.var);
                    let then = match governing(&cond, &f, false) {
                        Some(g) if !loop_var(&g) => wrap(then, MarkPath { nav: g, indexed: false }, at),
                        _ => then,
                    };
                    let els = match governing(&cond, &f, true) {
                        Some(g) if !loop_var(&g) => wrap(els, MarkPath { nav: g, indexed: false }, at),
                        _ => els,
                    };
                    Node::If { cond, then, els, at }
                }
                Node::Mark { path, body, at } => Node::Mark {
                    path,
                    body: go(body, scope, kinds, class_of),
                    at,
                },
                other => other,
            };
            out.push(n);
        }
        out
    }
    let class_of = |nav: &Nav, scope: &[(String, String)]| -> Option<String> {
        parse::nav_class(nav, scope, metamodels, &t.param.metamodel)
    };
    let mut scope = vec![(t.param.var.clone(), t.param.class.clone())];
    Template {
        body: go(t.body.clone(), &mut scope, &kinds, &class_of),
        ..t.clone()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{parse_metamodel, Element, MetamodelRegistry, Model};

    pub(crate) fn registry() -> MetamodelRegistry {
        [parse_metamodel(
            r#"{"name":"MM","classes":[
                {"name":"Root","attributes":[{"name":"name","type":"string"}],
                 "collections":[{"name":"elements","class":"Elem"},{"name":"filters","class":"Filter"}],
                 "references":[{"name":"targetPlatform","target":"Elem","optional":true}]},
                {"name":"Elem","attributes":[{"name":"name","type":"string"},{"name":"period","type":"int"}]},
                {"name":"Filter","attributes":[{"name":"name","type":"string"}],
                 "collections":[{"name":"sections","class":"Section"}]},
                {"name":"Section","attributes":[{"name":"name","type":"string"},{"name":"threshold","type":"float"}]}
            ]}"#,
        )
        .unwrap()]
        .into_iter()
        .collect()
    }

    pub(crate) fn two_elements() -> Model {
        Model::new(
            "m.model.json",
            "MM",
            Element::new("Root")
                .with_child("elements", Element::new("Elem").with_attr("name", "a"))
                .with_child("elements", Element::new("Elem").with_attr("name", "b")),
        )
    }

    pub(crate) fn wrap_template(body: &str) -> String {
        format!("[template t(sourceModel : MM!Root) file('Out.java')]\n{body}[/template]\n")
    }

    pub(crate) const LOOP: &str = "[for (e : sourceModel.elements)]\npublic String [e.name /];\n[/for]\n";
    pub(crate) const CONDITIONAL: &str = "[if (sourceModel.targetPlatform->size() > 0)]
public String [sourceModel.targetPlatform.name /];
[else]
public boolean improper = TRUE;
[/if]
";

    #[test]
    fn loop_is_wrapped_around_the_emission_only() {
        let t = parse_template(&wrap_template(LOOP), &registry()).unwrap();
        let a = augment_template(&t, &registry());
        let printed = a.to_string();
        assert!(
            printed.contains("public String {{sourceModel.elements[[i/]]}}[e.name /]{{/}};"),
            "{printed}"
        );
        assert_eq!(a.strip(), t);
    }

    #[test]
    fn conditional_then_branch_is_wrapped_else_is_not() {
        let t = parse_template(&wrap_template(CONDITIONAL), &registry()).unwrap();
        let a = augment_template(&t, &registry());
        let printed = a.to_string();
        assert!(
            printed.contains("public String {{sourceModel.targetPlatform}}[sourceModel.targetPlatform.name /]{{/}};"),
            "{printed}"
        );
        assert!(printed.contains("[else]\npublic boolean improper = TRUE;\n[/if]"));
    }

    #[test]
    fn augmentation_is_idempotent_and_reparses() {
        for body in [LOOP, CONDITIONAL] {
            let t = parse_template(&wrap_template(body), &registry()).unwrap();
            let once = augment_template(&t, &registry());
            assert_eq!(augment_template(&once, &registry()), once);
            assert_eq!(parse_template(&once.to_string(), &registry()).unwrap(), once);
        }
    }

    #[test]
    fn text_only_template_is_unchanged() {
        let t = parse_template(&wrap_template("just text\n"), &registry()).unwrap();
        assert_eq!(augment_template(&t, &registry()), t);
        assert!(!t.is_augmented());
    }

    #[test]
    fn conditional_on_loop_variable_is_left_to_the_loop_marker() {
        let body = "[for (e : sourceModel.elements)]\n[if (e.period > 0)]\n[e.name /]\n[/if]\n[/for]\n";
        let t = parse_template(&wrap_template(body), &registry()).unwrap();
        let a = augment_template(&t, &registry());
        let printed = a.to_string();
        assert_eq!(printed.matches("{{/}}").count(), 1, "{printed}");
    }

    #[test]
    fn nested_loops_get_nested_markers() {
        let body = "[for (f : sourceModel.filters)]\nfilter [f.name /] {\n[for (s : f.sections)]\n  [s.name /];\n[/for]\n}\n[/for]\n";
        let t = parse_template(&wrap_template(body), &registry()).unwrap();
        let printed = augment_template(&t, &registry()).to_string();
        assert!(printed.contains("{{sourceModel.filters[[i/]]}}"), "{printed}");
        assert!(printed.contains("{{f.sections[[i/]]}}"), "{printed}");
    }

    #[test]
    fn two_element_render() {
        let t = parse_template(&wrap_template(LOOP), &registry()).unwrap();
        assert_eq!(
            render(&t, &two_elements(), &registry()).unwrap(),
            "public String a;\npublic String b;\n"
        );
    }
}
