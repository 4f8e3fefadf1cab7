use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::conformance::check_conformance;
use super::metamodel::{Metamodel, PrimitiveType};
use super::path::{ElementPath, Segment};
use super::ModelError;

/// An attribute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl Value {
    pub fn ty(&self) -> PrimitiveType {
        match self {
            Value::Bool(_) => PrimitiveType::Bool,
            Value::Int(_) => PrimitiveType::Int,
            Value::Float(_) => PrimitiveType::Float,
            Value::Str(_) => PrimitiveType::String,
        }
    }

    /// Coerces an integer into a float when a float is expected.
    pub fn coerce_to(self, ty: PrimitiveType) -> Value {
        match (self, ty) {
            (Value::Int(i), PrimitiveType::Float) => Value::Float(i as f64),
            (v, _) => v,
        }
    }

    /// Equality with int/float compared numerically.
    pub fn loose_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Int(a), Value::Float(b)) | (Value::Float(b), Value::Int(a)) => (*a as f64) == *b,
            _ => self == other,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Element {
    pub class: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub collections: BTreeMap<String, Vec<Element>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub refs: BTreeMap<String, ElementPath>,
}

impl Element {
    pub fn new(class: impl Into<String>) -> Self {
        Element {
            class: class.into(),
            attrs: BTreeMap::new(),
            collections: BTreeMap::new(),
            refs: BTreeMap::new(),
        }
    }

    pub fn with_attr(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.attrs.insert(name.to_string(), value.into());
        self
    }

    pub fn with_child(mut self, collection: &str, child: Element) -> Self {
        self.collections.entry(collection.to_string()).or_default().push(child);
        self
    }

    pub fn with_ref(mut self, name: &str, target: ElementPath) -> Self {
        self.refs.insert(name.to_string(), target);
        self
    }

    pub fn attr(&self, name: &str) -> Option<&Value> {
        self.attrs.get(name)
    }

    pub fn children(&self, collection: &str) -> &[Element] {
        self.collections.get(collection).map(Vec::as_slice).unwrap_or(&[])
    }

    fn count(&self) -> usize {
        1 + self.collections.values().flatten().map(Element::count).sum::<usize>()
    }
}

/// A model: a containment tree of elements conforming to a named metamodel.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub uri: String,
    pub metamodel: String,
    pub root: Element,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    metamodel: String,
    root: Element,
}

impl Model {
    pub fn new(uri: impl Into<String>, metamodel: impl Into<String>, root: Element) -> Self {
        Model {
            uri: uri.into(),
            metamodel: metamodel.into(),
            root,
        }
    }

    pub fn element_count(&self) -> usize {
        self.root.count()
    }

    /// All elements with their canonical paths, in pre-order (collections in
    /// key order, children in collection order).
    pub fn elements(&self) -> Vec<(ElementPath, &Element)> {
        fn walk<'a>(e: &'a Element, path: ElementPath, out: &mut Vec<(ElementPath, &'a Element)>) {
            out.push((path.clone(), e));
            for (name, children) in &e.collections {
                for (i, child) in children.iter().enumerate() {
                    walk(child, path.child(name, i), out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, ElementPath::root(), &mut out);
        out
    }

    /// Canonical JSON document for this model (the uri is not stored).
    pub fn to_json(&self) -> String {
        crate::json::to_canonical_string(&ModelDoc {
            metamodel: self.metamodel.clone(),
            root: self.root.clone(),
        })
    }
}

/// Parses a model document (`*.model.json`) against its metamodel.
///
/// Integer literals given for float attributes are widened. The result has no
/// conformance violations; the first violation found is returned as an error.
pub fn parse_model(text: &str, mm: &Metamodel, uri: &str) -> Result<Model, ModelError> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(ModelError::syntax)?;
    let mut model = Model::new(uri, doc.metamodel, doc.root);
    widen_floats(&mut model.root, mm);
    if let Some(v) = check_conformance(&model, mm).into_iter().next() {
        return Err(ModelError::Conformance {
            path: v.path.to_string(),
            message: v.message,
        });
    }
    Ok(model)
}

/// Reads only the metamodel name declared by a model document.
pub fn peek_metamodel_name(text: &str) -> Result<String, ModelError> {
    #[derive(Deserialize)]
    struct Peek {
        metamodel: String,
    }
    serde_json::from_str::<Peek>(text)
        .map(|p| p.metamodel)
        .map_err(ModelError::syntax)
}

fn widen_floats(e: &mut Element, mm: &Metamodel) {
    if let Some(class) = mm.class(&e.class) {
        for (name, value) in e.attrs.iter_mut() {
            if let Some(ty) = class.attribute(name) {
                *value = value.clone().coerce_to(ty);
            }
        }
    }
    for child in e.collections.values_mut().flatten() {
        widen_floats(child, mm);
    }
}

/// Walks collection steps from the root. A leading bare segment designates
/// the root; any other bare segment fails.
pub fn resolve_path<'m>(m: &'m Model, p: &ElementPath) -> Result<&'m Element, ModelError> {
    let mut current = &m.root;
    let steps = p.steps();
    let mut walked: Vec<Segment> = Vec::new();
    for seg in steps {
        walked.push(seg.clone());
        let next = seg
            .index
            .and_then(|i| current.collections.get(&seg.name).and_then(|children| children.get(i)));
        match next {
            Some(e) => current = e,
            None => {
                return Err(ModelError::PathNotFound {
                    path: ElementPath::from_segments(walked).to_string(),
                })
            }
        }
    }
    Ok(current)
}

/// Canonical containment path of an element of `m`, found by identity.
pub fn path_of(m: &Model, e: &Element) -> Result<ElementPath, ModelError> {
    fn find(cur: &Element, target: &Element, path: &ElementPath) -> Option<ElementPath> {
        if std::ptr::eq(cur, target) {
            return Some(path.clone());
        }
        for (name, children) in &cur.collections {
            for (i, child) in children.iter().enumerate() {
                if let Some(p) = find(child, target, &path.child(name, i)) {
                    return Some(p);
                }
            }
        }
        None
    }
    find(&m.root, e, &ElementPath::root()).ok_or(ModelError::NotInModel)
}
