use std::fmt;

use super::element::{resolve_path, Element, Model};
use super::metamodel::Metamodel;
use super::path::ElementPath;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub path: ElementPath,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Lists every way `m` fails to conform to `mm`, sorted by path.
///
/// Elements of unknown class and unknown collections are reported once and
/// not descended into. Dangling or mistyped references are violations too.
pub fn check_conformance(m: &Model, mm: &Metamodel) -> Vec<Violation> {
    let mut out = Vec::new();
    if m.metamodel != mm.name {
        out.push(Violation {
            path: ElementPath::root(),
            message: format!(
                "model declares metamodel `{}` but is checked against `{}`",
                m.metamodel, mm.name
            ),
        });
    }
    check_element(m, mm, &m.root, ElementPath::root(), None, &mut out);
    out.sort();
    out
}

fn check_element(
    m: &Model,
    mm: &Metamodel,
    e: &Element,
    path: ElementPath,
    expected: Option<&str>,
    out: &mut Vec<Violation>,
) {
    let mut report = |message: String| {
        out.push(Violation {
            path: path.clone(),
            message,
        })
    };
    let Some(class) = mm.class(&e.class) else {
        report(format!("unknown class `{}`", e.class));
        return;
    };
    if let Some(expected) = expected {
        if expected != e.class {
            report(format!("expected class `{expected}`, found `{}`", e.class));
            return;
        }
    }
    for (name, value) in &e.attrs {
        match class.attribute(name) {
            None => report(format!("unknown attribute `{name}` on class `{}`", class.name)),
            Some(ty) if ty != value.ty() => report(format!("attribute `{name}` expects {ty}, found {}", value.ty())),
            Some(_) => {}
        }
    }
    for (name, target) in &e.refs {
        match class.reference(name) {
            None => report(format!("unknown reference `{name}` on class `{}`", class.name)),
            Some(def) => match resolve_path(m, target) {
                Err(_) => report(format!("reference `{name}` dangles: `{target}`")),
                Ok(t) if t.class != def.target => report(format!(
                    "reference `{name}` expects `{}`, `{target}` is `{}`",
                    def.target, t.class
                )),
                Ok(_) => {}
            },
        }
    }
    for r in &class.references {
        if !r.optional && !e.refs.contains_key(&r.name) {
            report(format!("missing required reference `{}`", r.name));
        }
    }
    let mut descend = Vec::new();
    for (name, children) in &e.collections {
        match class.collection(name) {
            None => report(format!("unknown collection `{name}` on class `{}`", class.name)),
            Some(elem_class) => descend.push((name, elem_class, children)),
        }
    }
    for (name, elem_class, children) in descend {
        for (i, child) in children.iter().enumerate() {
            check_element(m, mm, child, path.child(name, i), Some(elem_class), out);
        }
    }
}
