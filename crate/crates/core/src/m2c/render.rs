use std::cmp::Ordering;

use super::{Clause, CmpOp, Cond, Expr, Loc, Markers, Nav, Node, Template, TemplateError};
use crate::model::{resolve_path, ElementPath, Feature, Metamodel, MetamodelRegistry, Model, Value};

/// Rendered text of an augmented template, still carrying its markers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedOutput {
    pub text: String,
    pub markers: Markers,
    /// Name of the template that produced the text.
    pub template: String,
    /// Name of the generated file.
    pub file: String,
}

/// Renders `t` over `m`. Marker regions contribute their contents only.
pub fn render(t: &Template, m: &Model, metamodels: &MetamodelRegistry) -> Result<String, TemplateError> {
    Renderer::new(t, m, metamodels, false)?.run()
}

/// Renders `t` over `m`, writing an opening marker with the canonical
/// identifier path of each marked element and a closing marker after its
/// region. Paths are prefixed with the template parameter name.
pub fn render_augmented(
    t: &Template,
    m: &Model,
    metamodels: &MetamodelRegistry,
) -> Result<AnnotatedOutput, TemplateError> {
    let text = Renderer::new(t, m, metamodels, true)?.run()?;
    Ok(AnnotatedOutput {
        text,
        markers: t.markers.clone(),
        template: t.name.clone(),
        file: t.file.clone(),
    })
}

enum NavVal {
    Attr(Option<Value>),
    Elems(Vec<ElementPath>),
}

struct Renderer<'a> {
    t: &'a Template,
    m: &'a Model,
    mm: &'a Metamodel,
    annotate: bool,
    env: Vec<(String, ElementPath)>,
    indices: Vec<usize>,
    out: String,
}

impl<'a> Renderer<'a> {
    fn new(
        t: &'a Template,
        m: &'a Model,
        metamodels: &'a MetamodelRegistry,
        annotate: bool,
    ) -> Result<Self, TemplateError> {
        let mismatch = || TemplateError::ModelMismatch {
            expected: format!("{}!{}", t.param.metamodel, t.param.class),
            found: format!("{}!{}", m.metamodel, m.root.class),
        };
        if m.metamodel != t.param.metamodel || m.root.class != t.param.class {
            return Err(mismatch());
        }
        let mm = metamodels.get(&t.param.metamodel).ok_or_else(mismatch)?;
        Ok(Renderer {
            t,
            m,
            mm,
            annotate,
            env: vec![(t.param.var.clone(), ElementPath::root())],
            indices: Vec::new(),
            out: String::new(),
        })
    }

    fn run(mut self) -> Result<String, TemplateError> {
        self.nodes(&self.t.body)?;
        Ok(self.out)
    }

    fn error(&self, at: Loc, nav: Option<&Nav>, message: impl Into<String>) -> TemplateError {
        let var = nav.map_or(self.t.param.var.as_str(), |n| n.var.as_str());
        let path = self
            .env
            .iter()
            .rev()
            .find(|(v, _)| v == var)
            .map_or_else(ElementPath::root, |(_, p)| p.clone());
        TemplateError::Eval {
            line: at.line,
            path: path.to_string(),
            message: message.into(),
        }
    }

    fn nodes(&mut self, nodes: &'a [Node]) -> Result<(), TemplateError> {
        for n in nodes {
            match n {
                Node::Text(s) => self.out.push_str(s),
                Node::Emit { expr, at } => {
                    let v = self.value(expr, *at)?;
                    self.out.push_str(&v.to_string());
                }
                Node::For { var, over, body, at } => {
                    let NavVal::Elems(items) = self.nav(over, *at)? else {
                        return Err(self.error(*at, Some(over), "loop over an attribute"));
                    };
                    for (i, p) in items.into_iter().enumerate() {
                        self.env.push((var.clone(), p));
                        self.indices.push(i);
                        let r = self.nodes(body);
                        self.indices.pop();
                        self.env.pop();
                        r?;
                    }
                }
                Node::If { cond, then, els, at } => {
                    if self.cond(cond, *at)? {
                        self.nodes(then)?;
                    } else {
                        self.nodes(els)?;
                    }
                }
                Node::Mark { path, body, at } => {
                    let target = if self.annotate {
                        let NavVal::Elems(items) = self.nav(&path.nav, *at)? else {
                            return Err(self.error(*at, Some(&path.nav), "marker on an attribute"));
                        };
                        if path.indexed {
                            let i = *self
                                .indices
                                .last()
                                .ok_or_else(|| self.error(*at, None, "`[i/]` outside a loop"))?;
                            items.into_iter().nth(i)
                        } else if items.len() == 1 {
                            items.into_iter().next()
                        } else {
                            None
                        }
                    } else {
                        None
                    };
                    match target {
                        Some(p) => {
                            let markers = &self.t.markers;
                            self.out.push_str(&markers.open);
                            self.out.push_str(&p.with_alias(&self.t.param.var).to_string());
                            self.out.push_str(&markers.close);
                            self.nodes(body)?;
                            self.out.push_str(&self.t.markers.end_token());
                        }
                        None => self.nodes(body)?,
                    }
                }
            }
        }
        Ok(())
    }

    fn nav(&self, nav: &Nav, at: Loc) -> Result<NavVal, TemplateError> {
        let start = self
            .env
            .iter()
            .rev()
            .find(|(v, _)| *v == nav.var)
            .map(|(_, p)| p.clone())
            .ok_or_else(|| self.error(at, None, format!("unbound variable `{}`", nav.var)))?;
        let mut current = vec![start];
        for step in &nav.steps {
            let mut next = Vec::new();
            for path in &current {
                let e = resolve_path(self.m, path).map_err(|err| self.error(at, Some(nav), err.to_string()))?;
                let class = self
                    .mm
                    .class(&e.class)
                    .ok_or_else(|| self.error(at, Some(nav), format!("unknown class `{}`", e.class)))?;
                match class.feature(step) {
                    Some(Feature::Attribute(_)) => {
                        if current.len() != 1 {
                            return Err(self.error(
                                at,
                                Some(nav),
                                format!("`{step}` read from {} elements", current.len()),
                            ));
                        }
                        return Ok(NavVal::Attr(e.attr(step).cloned()));
                    }
                    Some(Feature::Collection(_)) => {
                        next.extend((0..e.children(step).len()).map(|i| path.child(step, i)));
                    }
                    Some(Feature::Reference { .. }) => {
                        if let Some(target) = e.refs.get(step) {
                            next.push(target.normalized());
                        }
                    }
                    None => return Err(self.error(at, Some(nav), format!("`{}` has no feature `{step}`", e.class))),
                }
            }
            current = next;
        }
        Ok(NavVal::Elems(current))
    }

    fn value(&self, e: &Expr, at: Loc) -> Result<Value, TemplateError> {
        match e {
            Expr::Literal(v) => Ok(v.clone()),
            Expr::Index => self
                .indices
                .last()
                .map(|i| Value::Int(*i as i64))
                .ok_or_else(|| self.error(at, None, "`i` outside a loop")),
            Expr::Size(n) => match self.nav(n, at)? {
                NavVal::Elems(items) => Ok(Value::Int(items.len() as i64)),
                NavVal::Attr(_) => Err(self.error(at, Some(n), "size() of an attribute")),
            },
            Expr::Nav(n) => match self.nav(n, at)? {
                NavVal::Attr(Some(v)) => Ok(v),
                NavVal::Attr(None) => Err(self.error(at, Some(n), format!("`{n}` has no value"))),
                NavVal::Elems(_) => Err(self.error(at, Some(n), format!("`{n}` is not an attribute"))),
            },
        }
    }

    fn cond(&self, c: &Cond, at: Loc) -> Result<bool, TemplateError> {
        for Clause { lhs, rhs } in &c.clauses {
            let l = self.value(lhs, at)?;
            let holds = match rhs {
                None => l == Value::Bool(true),
                Some((op, rhs)) => {
                    let r = self.value(rhs, at)?;
                    compare(*op, &l, &r)
                }
            };
            if !holds {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn compare(op: CmpOp, l: &Value, r: &Value) -> bool {
    let ord = match (l.as_f64(), r.as_f64(), l, r) {
        (Some(a), Some(b), _, _) => a.partial_cmp(&b),
        (_, _, Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
        _ => None,
    };
    match op {
        CmpOp::Eq => l.loose_eq(r),
        CmpOp::Ne => !l.loose_eq(r),
        CmpOp::Lt => ord == Some(Ordering::Less),
        CmpOp::Le => matches!(ord, Some(Ordering::Less | Ordering::Equal)),
        CmpOp::Gt => ord == Some(Ordering::Greater),
        CmpOp::Ge => matches!(ord, Some(Ordering::Greater | Ordering::Equal)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::m2c::tests::{registry, two_elements, wrap_template, CONDITIONAL, LOOP};
    use crate::m2c::{augment_template, parse_template};
    use crate::model::Element;

    #[test]
    fn empty_collection_renders_nothing() {
        let t = parse_template(&wrap_template(LOOP), &registry()).unwrap();
        let m = Model::new("m", "MM", Element::new("Root"));
        assert_eq!(render(&t, &m, &registry()).unwrap(), "");
        let a = render_augmented(&augment_template(&t, &registry()), &m, &registry()).unwrap();
        assert_eq!(a.text, "");
    }

    #[test]
    fn annotated_loop() {
        let t = augment_template(&parse_template(&wrap_template(LOOP), &registry()).unwrap(), &registry());
        let a = render_augmented(&t, &two_elements(), &registry()).unwrap();
        assert_eq!(
            a.text,
            "public String {{sourceModel.elements[0]}}a{{/}};\npublic String {{sourceModel.elements[1]}}b{{/}};\n"
        );
        assert_eq!(
            render(&t, &two_elements(), &registry()).unwrap(),
            "public String a;\npublic String b;\n"
        );
    }

    #[test]
    fn conditional_else_branch() {
        let t = parse_template(&wrap_template(CONDITIONAL), &registry()).unwrap();
        assert_eq!(
            render(&t, &two_elements(), &registry()).unwrap(),
            "public boolean improper = TRUE;\n"
        );
        let mut m = two_elements();
        m.root
            .refs
            .insert("targetPlatform".into(), "elements[1]".parse().unwrap());
        assert_eq!(render(&t, &m, &registry()).unwrap(), "public String b;\n");
        let a = render_augmented(&augment_template(&t, &registry()), &m, &registry()).unwrap();
        assert_eq!(a.text, "public String {{sourceModel.elements[1]}}b{{/}};\n");
    }

    #[test]
    fn missing_attribute_is_an_eval_error() {
        let t = parse_template(&wrap_template(LOOP), &registry()).unwrap();
        let m = Model::new(
            "m",
            "MM",
            Element::new("Root").with_child("elements", Element::new("Elem")),
        );
        let err = render(&t, &m, &registry()).unwrap_err();
        assert!(
            matches!(&err, TemplateError::Eval { line: 3, path, .. } if path == "elements[0]"),
            "{err:?}"
        );
    }

    #[test]
    fn wrong_model_is_rejected() {
        let t = parse_template(&wrap_template(LOOP), &registry()).unwrap();
        let m = Model::new("m", "MM", Element::new("Elem"));
        assert!(matches!(
            render(&t, &m, &registry()),
            Err(TemplateError::ModelMismatch { .. })
        ));
    }

    #[test]
    fn comparisons() {
        assert!(compare(CmpOp::Gt, &Value::Int(2), &Value::Float(1.5)));
        assert!(compare(CmpOp::Le, &Value::from("a"), &Value::from("b")));
        assert!(compare(CmpOp::Eq, &Value::Int(1), &Value::Float(1.0)));
        assert!(!compare(CmpOp::Lt, &Value::from("a"), &Value::Int(1)));
    }
}
