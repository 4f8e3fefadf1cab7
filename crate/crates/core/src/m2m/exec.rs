use std::collections::{BTreeMap, VecDeque};

use super::{CmpOp, Condition, Expr, M2mError, Rule, TransformationM2M};
use crate::model::{
    check_conformance, resolve_path, Element, ElementPath, Feature, Metamodel, MetamodelRegistry, Model, Value,
};
use crate::trace::{ModelRef, TraceLink, TraceNode};

/// Runs `t` over the input models, keyed by the aliases declared in the
/// transformation header, and returns the output model.
pub fn execute_m2m(
    t: &TransformationM2M,
    inputs: &BTreeMap<String, Model>,
    metamodels: &MetamodelRegistry,
    output_uri: &str,
) -> Result<Model, M2mError> {
    Execution::run(t, inputs, metamodels, output_uri).map(|(m, _)| m)
}

/// Like [`execute_m2m`], also returning one trace link per instantiated target
/// pattern that carries a trace clause. Links are ordered by source element.
pub fn execute_augmented_m2m(
    t: &TransformationM2M,
    inputs: &BTreeMap<String, Model>,
    metamodels: &MetamodelRegistry,
    output_uri: &str,
) -> Result<(Model, Vec<TraceLink>), M2mError> {
    Execution::run(t, inputs, metamodels, output_uri)
}

/// A source element: input model index and canonical path.
type SrcKey = (usize, ElementPath);

#[derive(Debug, Clone, PartialEq)]
enum ElemRef {
    Source(SrcKey),
    Target(usize),
}

enum Val {
    Prim(Option<Value>),
    Elems(Vec<ElemRef>),
}

struct Match<'r> {
    rule: &'r Rule,
    source: SrcKey,
    /// Slot index of each target pattern.
    slots: Vec<usize>,
}

struct Slot {
    element: Element,
    children: BTreeMap<String, Vec<usize>>,
    refs: BTreeMap<String, usize>,
    container: Option<usize>,
}

struct Execution<'a> {
    models: Vec<&'a Model>,
    metamodels: &'a MetamodelRegistry,
    out_mm: &'a Metamodel,
    slots: Vec<Slot>,
    resolved: BTreeMap<SrcKey, usize>,
}

impl<'a> Execution<'a> {
    fn run(
        t: &'a TransformationM2M,
        inputs: &'a BTreeMap<String, Model>,
        metamodels: &'a MetamodelRegistry,
        output_uri: &str,
    ) -> Result<(Model, Vec<TraceLink>), M2mError> {
        let mut models = Vec::new();
        for decl in &t.inputs {
            let m = inputs
                .get(&decl.alias)
                .ok_or_else(|| M2mError::MissingInput(decl.alias.clone()))?;
            if m.metamodel != decl.metamodel {
                return Err(M2mError::MissingInput(format!(
                    "{} (model `{}` conforms to `{}`, expected `{}`)",
                    decl.alias, m.uri, m.metamodel, decl.metamodel
                )));
            }
            models.push(m);
        }
        let out_mm = metamodels
            .get(&t.output.metamodel)
            .ok_or_else(|| M2mError::UnknownMetamodel(t.output.metamodel.clone()))?;
        let mut ex = Execution {
            models,
            metamodels,
            out_mm,
            slots: Vec::new(),
            resolved: BTreeMap::new(),
        };
        let matches = ex.match_phase(t)?;
        for m in &matches {
            ex.apply_bindings(m)?;
        }
        let (model, slot_paths) = ex.assemble(&t.output.metamodel, output_uri)?;

        let mut links: Vec<(SrcKey, usize, TraceLink)> = Vec::new();
        for m in &matches {
            for (pi, pattern) in m.rule.to.iter().enumerate() {
                let Some(clause) = &pattern.trace else { continue };
                let (mi, path) = &m.source;
                let link = TraceLink {
                    sources: vec![ModelRef::new(&ex.models[*mi].uri, path.clone())],
                    targets: vec![TraceNode::model(output_uri, slot_paths[m.slots[pi]].clone())],
                    tags: clause.tags.clone(),
                };
                links.push(((*mi, path.clone()), pi, link));
            }
        }
        links.sort_by(|a, b| {
            let ka = (&a.0 .1, &ex.models[a.0 .0].uri, a.1);
            let kb = (&b.0 .1, &ex.models[b.0 .0].uri, b.1);
            ka.cmp(&kb)
        });
        Ok((model, links.into_iter().map(|(_, _, l)| l).collect()))
    }

    fn element(&self, key: &SrcKey) -> &'a Element {
        resolve_path(self.models[key.0], &key.1).expect("source paths come from the model itself")
    }

    fn match_phase<'r>(&mut self, t: &'r TransformationM2M) -> Result<Vec<Match<'r>>, M2mError> {
        let mut matches = Vec::new();
        for mi in 0..self.models.len() {
            let model = self.models[mi];
            for (path, e) in model.elements() {
                let key = (mi, path);
                let mut hits = Vec::new();
                for rule in &t.rules {
                    if rule.from.metamodel != model.metamodel || rule.from.class != e.class {
                        continue;
                    }
                    if self.guard_holds(rule, &key)? {
                        hits.push(rule);
                    }
                }
                match hits.as_slice() {
                    [] => {}
                    [rule] => {
                        let slots: Vec<usize> = rule
                            .to
                            .iter()
                            .map(|p| {
                                self.slots.push(Slot {
                                    element: Element::new(&p.class),
                                    children: BTreeMap::new(),
                                    refs: BTreeMap::new(),
                                    container: None,
                                });
                                self.slots.len() - 1
                            })
                            .collect();
                        self.resolved.insert(key.clone(), slots[0]);
                        matches.push(Match {
                            rule,
                            source: key,
                            slots,
                        });
                    }
                    many => {
                        return Err(M2mError::MatchAmbiguity {
                            path: format!("{}:{}", model.uri, key.1),
                            rules: many.iter().map(|r| r.name.clone()).collect(),
                        })
                    }
                }
            }
        }
        Ok(matches)
    }

    fn guard_holds(&self, rule: &Rule, key: &SrcKey) -> Result<bool, M2mError> {
        for Condition { left, op, right } in &rule.from.guard {
            let l = self.eval_prim(rule, key, &[], left)?;
            let r = self.eval_prim(rule, key, &[], right)?;
            let eq = match (&l, &r) {
                (Some(a), Some(b)) => a.loose_eq(b),
                _ => false,
            };
            let holds = match op {
                CmpOp::Eq => eq,
                CmpOp::Ne => !eq,
            };
            if !holds {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn eval_prim(&self, rule: &Rule, key: &SrcKey, slots: &[usize], e: &Expr) -> Result<Option<Value>, M2mError> {
        match self.eval(rule, key, slots, e)? {
            Val::Prim(v) => Ok(v),
            Val::Elems(_) => Err(self.eval_error(rule, key, "expected a primitive value")),
        }
    }

    fn eval_error(&self, rule: &Rule, key: &SrcKey, message: &str) -> M2mError {
        M2mError::Eval {
            rule: rule.name.clone(),
            path: format!("{}:{}", self.models[key.0].uri, key.1),
            message: message.to_string(),
        }
    }

    fn eval(&self, rule: &Rule, key: &SrcKey, slots: &[usize], e: &Expr) -> Result<Val, M2mError> {
        match e {
            Expr::Literal(v) => Ok(Val::Prim(Some(v.clone()))),
            Expr::Concat(a, b) => {
                let a = self.eval_prim(rule, key, slots, a)?;
                let b = self.eval_prim(rule, key, slots, b)?;
                Ok(Val::Prim(a.zip(b).map(|(a, b)| Value::Str(format!("{a}{b}")))))
            }
            Expr::Nav { var, steps } => {
                if let Some(pi) = rule.to.iter().position(|p| &p.var == var) {
                    return Ok(Val::Elems(vec![ElemRef::Target(slots[pi])]));
                }
                let mm = self
                    .metamodels
                    .get(&rule.from.metamodel)
                    .ok_or_else(|| M2mError::UnknownMetamodel(rule.from.metamodel.clone()))?;
                let model = self.models[key.0];
                let mut current: Vec<ElementPath> = vec![key.1.clone()];
                for step in steps {
                    let mut next = Vec::new();
                    for path in &current {
                        let el = self.element(&(key.0, path.clone()));
                        let class = mm
                            .class(&el.class)
                            .ok_or_else(|| M2mError::UnknownClass(el.class.clone()))?;
                        match class.feature(step) {
                            Some(Feature::Attribute(_)) => {
                                return Ok(Val::Prim(el.attr(step).cloned()));
                            }
                            Some(Feature::Collection(_)) => {
                                next.extend((0..el.children(step).len()).map(|i| path.child(step, i)));
                            }
                            Some(Feature::Reference { .. }) => {
                                if let Some(target) = el.refs.get(step) {
                                    resolve_path(model, target)
                                        .map_err(|err| self.eval_error(rule, key, &err.to_string()))?;
                                    next.push(target.normalized());
                                }
                            }
                            None => {
                                return Err(M2mError::UnknownFeature {
                                    class: el.class.clone(),
                                    feature: step.clone(),
                                })
                            }
                        }
                    }
                    current = next;
                }
                Ok(Val::Elems(
                    current.into_iter().map(|p| ElemRef::Source((key.0, p))).collect(),
                ))
            }
        }
    }

    fn resolve(&self, rule: &Rule, feature: &str, r: &ElemRef) -> Result<usize, M2mError> {
        match r {
            ElemRef::Target(s) => Ok(*s),
            ElemRef::Source(key) => self
                .resolved
                .get(key)
                .copied()
                .ok_or_else(|| M2mError::UnresolvedBinding {
                    rule: rule.name.clone(),
                    feature: feature.to_string(),
                    path: format!("{}:{}", self.models[key.0].uri, key.1),
                }),
        }
    }

    fn apply_bindings(&mut self, m: &Match) -> Result<(), M2mError> {
        for (pi, pattern) in m.rule.to.iter().enumerate() {
            let slot = m.slots[pi];
            let class = self
                .out_mm
                .class(&pattern.class)
                .ok_or_else(|| M2mError::UnknownClass(pattern.class.clone()))?;
            for b in &pattern.bindings {
                let feature = class.feature(&b.feature).ok_or_else(|| M2mError::UnknownFeature {
                    class: class.name.clone(),
                    feature: b.feature.clone(),
                })?;
                let value = self.eval(m.rule, &m.source, &m.slots, &b.expr)?;
                match (feature, value) {
                    (Feature::Attribute(ty), Val::Prim(v)) => {
                        if let Some(v) = v {
                            self.slots[slot]
                                .element
                                .attrs
                                .insert(b.feature.clone(), v.coerce_to(ty));
                        }
                    }
                    (Feature::Collection(_), Val::Elems(refs)) => {
                        for r in &refs {
                            let child = self.resolve(m.rule, &b.feature, r)?;
                            if child == slot || self.slots[child].container.is_some() {
                                return Err(M2mError::Placement(format!(
                                    "element created for `{}` is contained twice (binding `{}` of rule `{}`)",
                                    self.describe(child),
                                    b.feature,
                                    m.rule.name
                                )));
                            }
                            self.slots[child].container = Some(slot);
                            self.slots[slot]
                                .children
                                .entry(b.feature.clone())
                                .or_default()
                                .push(child);
                        }
                    }
                    (Feature::Reference { .. }, Val::Elems(refs)) => match refs.as_slice() {
                        [] => {}
                        [r] => {
                            let target = self.resolve(m.rule, &b.feature, r)?;
                            self.slots[slot].refs.insert(b.feature.clone(), target);
                        }
                        _ => {
                            return Err(self.eval_error(
                                m.rule,
                                &m.source,
                                &format!("`{}` expects a single element", b.feature),
                            ))
                        }
                    },
                    _ => {
                        return Err(self.eval_error(
                            m.rule,
                            &m.source,
                            &format!("binding `{}` has the wrong kind of value", b.feature),
                        ))
                    }
                }
            }
        }
        Ok(())
    }

    fn describe(&self, slot: usize) -> String {
        self.resolved
            .iter()
            .find(|(_, s)| **s == slot)
            .map(|((mi, p), _)| format!("{}:{}", self.models[*mi].uri, p))
            .unwrap_or_else(|| format!("{} #{slot}", self.slots[slot].element.class))
    }

    fn assemble(&mut self, metamodel: &str, uri: &str) -> Result<(Model, Vec<ElementPath>), M2mError> {
        let roots: Vec<usize> = (0..self.slots.len())
            .filter(|s| self.slots[*s].container.is_none())
            .collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => {
                return Err(M2mError::Placement(
                    "no uncontained element to serve as the root".into(),
                ))
            }
            many => {
                let names: Vec<String> = many.iter().map(|s| self.describe(*s)).collect();
                return Err(M2mError::Placement(format!(
                    "several uncontained elements: {}",
                    names.join(", ")
                )));
            }
        };

        let mut paths: Vec<Option<ElementPath>> = vec![None; self.slots.len()];
        paths[root] = Some(ElementPath::root());
        let mut queue = VecDeque::from([root]);
        while let Some(s) = queue.pop_front() {
            let parent = paths[s].clone().expect("queued slots have paths");
            for (name, children) in &self.slots[s].children {
                for (i, c) in children.iter().enumerate() {
                    paths[*c] = Some(parent.child(name, i));
                    queue.push_back(*c);
                }
            }
        }
        let paths: Vec<ElementPath> = paths
            .into_iter()
            .enumerate()
            .map(|(s, p)| {
                p.ok_or_else(|| {
                    M2mError::Placement(format!(
                        "element created for `{}` is not reachable from the root",
                        self.describe(s)
                    ))
                })
            })
            .collect::<Result<_, _>>()?;

        for s in 0..self.slots.len() {
            let refs: Vec<(String, ElementPath)> = self.slots[s]
                .refs
                .iter()
                .map(|(k, t)| (k.clone(), paths[*t].clone()))
                .collect();
            self.slots[s].element.refs.extend(refs);
        }
        let root_element = self.build(root);
        let model = Model::new(uri, metamodel, root_element);
        if let Some(v) = check_conformance(&model, self.out_mm).into_iter().next() {
            return Err(M2mError::Conformance {
                path: v.path.to_string(),
                message: v.message,
            });
        }
        Ok((model, paths))
    }

    fn build(&mut self, s: usize) -> Element {
        let children = std::mem::take(&mut self.slots[s].children);
        let mut e = std::mem::replace(&mut self.slots[s].element, Element::new(""));
        for (name, list) in children {
            let built: Vec<Element> = list.into_iter().map(|c| self.build(c)).collect();
            e.collections.insert(name, built);
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::m2m::tests::registry;
    use crate::m2m::{augment_m2m, parse_m2m};

    fn net() -> Model {
        let root = Element::new("Net")
            .with_attr("name", "n")
            .with_child(
                "nodes",
                Element::new("Node").with_attr("id", "a").with_attr("kind", "sink"),
            )
            .with_child(
                "nodes",
                Element::new("Node").with_attr("id", "b").with_attr("kind", "src"),
            );
        Model::new("in.model.json", "PIMM", root)
    }

    fn inputs() -> BTreeMap<String, Model> {
        BTreeMap::from([("in".to_string(), net())])
    }

    const BASE: &str = "module T; create out : PSMM from in : PIMM;
        rule Net2System { from s : PIMM!Net to t : PSMM!System (name <- s.name, features <- s.nodes) }
        rule Node2Feature { from s : PIMM!Node to t : PSMM!Feature (node_id <- s.id) }";

    #[test]
    fn maps_a_containment_tree() {
        let t = parse_m2m(BASE, &registry()).unwrap();
        let out = execute_m2m(&t, &inputs(), &registry(), "out.model.json").unwrap();
        assert_eq!(out.root.class, "System");
        let ids: Vec<_> = out
            .root
            .children("features")
            .iter()
            .map(|f| f.attr("node_id").unwrap().to_string())
            .collect();
        assert_eq!(ids, ["a", "b"]);
        assert!(check_conformance(&out, registry().get("PSMM").unwrap()).is_empty());
    }

    #[test]
    fn augmented_run_produces_the_same_model_and_one_link_per_element() {
        let t = parse_m2m(BASE, &registry()).unwrap();
        let plain = execute_m2m(&t, &inputs(), &registry(), "out.model.json").unwrap();
        let (aug, links) = execute_augmented_m2m(&augment_m2m(&t), &inputs(), &registry(), "out.model.json").unwrap();
        assert_eq!(plain, aug);
        assert_eq!(links.len(), 3);
        let pairs: Vec<(String, String, &str)> = links
            .iter()
            .map(|l| {
                (
                    l.sources[0].to_string(),
                    l.targets[0].to_string(),
                    l.tag("rule").unwrap(),
                )
            })
            .collect();
        assert_eq!(
            pairs,
            [
                (
                    "in.model.json:nodes[0]".into(),
                    "out.model.json:features[0]".into(),
                    "Node2Feature"
                ),
                (
                    "in.model.json:nodes[1]".into(),
                    "out.model.json:features[1]".into(),
                    "Node2Feature"
                ),
                ("in.model.json:root".into(), "out.model.json:root".into(), "Net2System"),
            ]
        );
    }

    #[test]
    fn identity_like_rule_on_single_node() {
        let t = parse_m2m(
            "module M; create out : PSMM from in : PIMM;
             rule Node2Feature { from s : PIMM!Node to t : PSMM!Feature (node_id <- s.id) }",
            &registry(),
        )
        .unwrap();
        let single = Model::new("one", "PIMM", Element::new("Node").with_attr("id", "x"));
        let inputs = BTreeMap::from([("in".to_string(), single)]);
        let (out, links) = execute_augmented_m2m(&augment_m2m(&t), &inputs, &registry(), "o").unwrap();
        assert_eq!(out.root, Element::new("Feature").with_attr("node_id", "x"));
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].sources[0].path, ElementPath::root());
    }

    #[test]
    fn overlapping_guards_are_ambiguous() {
        let t = parse_m2m(
            "module M; create out : PSMM from in : PIMM;
             rule Net2System { from s : PIMM!Net to t : PSMM!System (features <- s.nodes) }
             rule A { from s : PIMM!Node (s.kind = 'sink') to t : PSMM!Feature () }
             rule B { from s : PIMM!Node (s.id = 'a') to t : PSMM!Feature () }",
            &registry(),
        )
        .unwrap();
        let err = execute_m2m(&t, &inputs(), &registry(), "o").unwrap_err();
        assert_eq!(
            err,
            M2mError::MatchAmbiguity {
                path: "in.model.json:nodes[0]".into(),
                rules: vec!["A".into(), "B".into()]
            }
        );
    }

    #[test]
    fn unmatched_collection_member_is_unresolved() {
        let t = parse_m2m(
            "module M; create out : PSMM from in : PIMM;
             rule Net2System { from s : PIMM!Net to t : PSMM!System (features <- s.nodes) }
             rule A { from s : PIMM!Node (s.kind = 'sink') to t : PSMM!Feature () }",
            &registry(),
        )
        .unwrap();
        let err = execute_m2m(&t, &inputs(), &registry(), "o").unwrap_err();
        assert!(matches!(err, M2mError::UnresolvedBinding { ref path, .. } if path == "in.model.json:nodes[1]"));
    }

    #[test]
    fn uncontained_elements_fail_placement() {
        let t = parse_m2m(
            "module M; create out : PSMM from in : PIMM;
             rule Net2System { from s : PIMM!Net to t : PSMM!System () }
             rule N { from s : PIMM!Node to t : PSMM!Feature () }",
            &registry(),
        )
        .unwrap();
        assert!(matches!(
            execute_m2m(&t, &inputs(), &registry(), "o"),
            Err(M2mError::Placement(_))
        ));
    }

    #[test]
    fn two_patterns_and_local_reference() {
        let t = parse_m2m(
            "module M; create out : PSMM from in : PIMM;
             rule Net2System { from s : PIMM!Net to t : PSMM!System (features <- s.nodes) }
             rule Node2Feature { from s : PIMM!Node
               to t : PSMM!Feature (node_id <- s.id, peer <- u),
                  u : PSMM!Feature (node_id <- concat(s.id, '_peer')) }",
            &registry(),
        )
        .unwrap();
        // `u` is never contained, so the output has several roots.
        assert!(matches!(
            execute_m2m(&t, &inputs(), &registry(), "o"),
            Err(M2mError::Placement(_))
        ));
    }

    #[test]
    fn missing_input_alias() {
        let t = parse_m2m(BASE, &registry()).unwrap();
        assert_eq!(
            execute_m2m(&t, &BTreeMap::new(), &registry(), "o"),
            Err(M2mError::MissingInput("in".into()))
        );
    }
}
