//! Activity-diagram processes: actions bound to transformations, control
//! flow through initial, final, fork and join nodes, and object flow between
//! action pins. [`schedule`] stages the actions; [`enact`] runs them.

mod enact;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use enact::{enact, ActionRecord, EnactError, EnactOptions, EnactmentResult, ENACTMENT_SUMMARY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Initial,
    Final,
    Fork,
    Join,
    Action,
}

/// Named model parameter of an action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pin {
    pub name: String,
    pub metamodel: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    /// Megamodel id of the transformation an action runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transformation: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<Pin>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<Pin>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlEdge {
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PinRef {
    pub node: String,
    pub pin: String,
}

impl std::fmt::Display for PinRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.node, self.pin)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectEdge {
    pub from: PinRef,
    pub to: PinRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ProcessModel {
    pub name: String,
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub control_edges: Vec<ControlEdge>,
    #[serde(default)]
    pub object_edges: Vec<ObjectEdge>,
}

/// Stages of mutually independent actions, each sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExecutionPlan {
    pub stages: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProcessError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("ill-formed process: {0}")]
    WellFormedness(String),
    #[error("precedence cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
}

impl ProcessModel {
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn actions(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Action)
    }

    /// Object edge feeding an input pin, if any.
    pub fn feeder(&self, to: &PinRef) -> Option<&PinRef> {
        self.object_edges.iter().find(|e| &e.to == to).map(|e| &e.from)
    }

    pub fn to_json(&self) -> String {
        crate::json::to_canonical_string(self)
    }

    pub fn validate(&self) -> Result<(), ProcessError> {
        let fail = |m: String| Err(ProcessError::WellFormedness(m));
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if n.id.is_empty() {
                return fail("node with an empty id".into());
            }
            if !ids.insert(n.id.as_str()) {
                return fail(format!("duplicate node id `{}`", n.id));
            }
            let is_action = n.kind == NodeKind::Action;
            if is_action && n.transformation.is_none() {
                return fail(format!("action `{}` has no transformation", n.id));
            }
            if !is_action && (n.transformation.is_some() || !n.inputs.is_empty() || !n.outputs.is_empty()) {
                return fail(format!(
                    "{:?} node `{}` cannot carry a transformation or pins",
                    n.kind, n.id
                ));
            }
            let mut pins = BTreeSet::new();
            for p in n.inputs.iter().chain(&n.outputs) {
                if !pins.insert(p.name.as_str()) {
                    return fail(format!("duplicate pin `{}` on action `{}`", p.name, n.id));
                }
            }
        }
        let initials: Vec<&Node> = self.nodes.iter().filter(|n| n.kind == NodeKind::Initial).collect();
        if initials.len() != 1 {
            return fail(format!("expected exactly one Initial node, found {}", initials.len()));
        }
        if !self.nodes.iter().any(|n| n.kind == NodeKind::Final) {
            return fail("no Final node".into());
        }

        let mut indeg: BTreeMap<&str, usize> = ids.iter().map(|id| (*id, 0)).collect();
        let mut outdeg = indeg.clone();
        let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in &self.control_edges {
            for end in [&e.from, &e.to] {
                if !ids.contains(end.as_str()) {
                    return fail(format!("control edge {} -> {} names an unknown node", e.from, e.to));
                }
            }
            *outdeg.get_mut(e.from.as_str()).expect("checked") += 1;
            *indeg.get_mut(e.to.as_str()).expect("checked") += 1;
            succ.entry(&e.from).or_default().push(&e.to);
        }
        for n in &self.nodes {
            let (i, o) = (indeg[n.id.as_str()], outdeg[n.id.as_str()]);
            let problem = match n.kind {
                NodeKind::Initial if i > 0 => Some("Initial node has incoming control flow"),
                NodeKind::Final if o > 0 => Some("Final node has outgoing control flow"),
                NodeKind::Fork if o < 2 => Some("Fork node needs at least two outgoing edges"),
                NodeKind::Join if i < 2 => Some("Join node needs at least two incoming edges"),
                _ => None,
            };
            if let Some(p) = problem {
                return fail(format!("{p} (`{}`)", n.id));
            }
        }
        let mut seen = BTreeSet::from([initials[0].id.as_str()]);
        let mut queue = VecDeque::from([initials[0].id.as_str()]);
        while let Some(n) = queue.pop_front() {
            for &m in succ.get(n).into_iter().flatten() {
                if seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
        if let Some(n) = self.nodes.iter().find(|n| !seen.contains(n.id.as_str())) {
            return fail(format!("node `{}` is not reachable from the Initial node", n.id));
        }

        let mut fed = BTreeSet::new();
        for e in &self.object_edges {
            let out = self
                .node(&e.from.node)
                .filter(|n| n.kind == NodeKind::Action)
                .and_then(|n| n.outputs.iter().find(|p| p.name == e.from.pin));
            let inp = self
                .node(&e.to.node)
                .filter(|n| n.kind == NodeKind::Action)
                .and_then(|n| n.inputs.iter().find(|p| p.name == e.to.pin));
            let (Some(out), Some(inp)) = (out, inp) else {
                return fail(format!("object edge {} -> {} names an unknown pin", e.from, e.to));
            };
            if out.metamodel != inp.metamodel {
                return fail(format!(
                    "object edge {} -> {} carries {} into a {} pin",
                    e.from, e.to, out.metamodel, inp.metamodel
                ));
            }
            if !fed.insert(&e.to) {
                return fail(format!("input pin {} is fed by more than one object edge", e.to));
            }
        }
        Ok(())
    }
}

pub fn parse_process(text: &str) -> Result<ProcessModel, ProcessError> {
    let p: ProcessModel = serde_json::from_str(text).map_err(|e| ProcessError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    p.validate()?;
    Ok(p)
}

/// Stages actions by longest path over control and object flow: an action
/// runs one stage after the latest action that must precede it.
pub fn schedule(p: &ProcessModel) -> Result<ExecutionPlan, ProcessError> {
    let mut succ: BTreeMap<&str, BTreeSet<&str>> = p.nodes.iter().map(|n| (n.id.as_str(), BTreeSet::new())).collect();
    let edges = p.control_edges.iter().map(|e| (e.from.as_str(), e.to.as_str())).chain(
        p.object_edges
            .iter()
            .map(|e| (e.from.node.as_str(), e.to.node.as_str())),
    );
    for (a, b) in edges {
        if let Some(s) = succ.get_mut(a) {
            s.insert(b);
        }
    }
    let mut indeg: BTreeMap<&str, usize> = succ.keys().map(|k| (*k, 0)).collect();
    for s in succ.values() {
        for b in s {
            if let Some(d) = indeg.get_mut(b) {
                *d += 1;
            }
        }
    }
    let is_action = |id: &str| p.node(id).is_some_and(|n| n.kind == NodeKind::Action);
    // Number of actions that must run before the node is reached.
    let mut level: BTreeMap<&str, usize> = succ.keys().map(|k| (*k, 0)).collect();
    let mut queue: VecDeque<&str> = indeg.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
    let mut done = 0;
    while let Some(n) = queue.pop_front() {
        done += 1;
        let next = level[n] + usize::from(is_action(n));
        for &m in &succ[n] {
            let l = level.get_mut(m).expect("known node");
            *l = (*l).max(next);
            let d = indeg.get_mut(m).expect("known node");
            *d -= 1;
            if *d == 0 {
                queue.push_back(m);
            }
        }
    }
    if done < succ.len() {
        let remaining: BTreeSet<&str> = indeg.iter().filter(|(_, d)| **d > 0).map(|(k, _)| *k).collect();
        return Err(ProcessError::Cycle(find_cycle(&succ, &remaining)));
    }
    let mut stages: Vec<Vec<String>> = Vec::new();
    for a in p.actions() {
        let l = level[a.id.as_str()];
        if stages.len() <= l {
            stages.resize(l + 1, Vec::new());
        }
        stages[l].push(a.id.clone());
    }
    for s in &mut stages {
        s.sort();
    }
    Ok(ExecutionPlan { stages })
}

/// A cycle among `nodes`, each of which lies on or leads into one.
fn find_cycle(succ: &BTreeMap<&str, BTreeSet<&str>>, nodes: &BTreeSet<&str>) -> Vec<String> {
    let Some(&start) = nodes.iter().next() else {
        return Vec::new();
    };
    // Every remaining node has a remaining predecessor, so walking
    // predecessors backwards must revisit a node.
    let pred = |n: &str| {
        succ.iter()
            .find(|(a, s)| nodes.contains(*a) && s.contains(n))
            .map(|(a, _)| *a)
    };
    let mut path = vec![start];
    let mut at = start;
    loop {
        let Some(p) = pred(at) else {
            return vec![start.to_string()];
        };
        if let Some(i) = path.iter().position(|x| *x == p) {
            let mut cycle: Vec<String> = path[i..].iter().rev().map(|s| s.to_string()).collect();
            cycle.push(cycle[0].clone());
            return cycle;
        }
        path.push(p);
        at = p;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn linear() -> ProcessModel {
        parse_process(
            r#"{
              "name": "p",
              "nodes": [
                {"id": "start", "kind": "Initial"},
                {"id": "A", "kind": "Action", "transformation": "TransformationM2M:a.m2m",
                 "inputs": [{"name": "in", "metamodel": "MM"}], "outputs": [{"name": "out", "metamodel": "MM"}]},
                {"id": "B", "kind": "Action", "transformation": "TransformationM2M:b.m2m",
                 "inputs": [{"name": "in", "metamodel": "MM"}], "outputs": [{"name": "out", "metamodel": "MM"}]},
                {"id": "end", "kind": "Final"}
              ],
              "controlEdges": [{"from": "start", "to": "A"}, {"from": "A", "to": "B"}, {"from": "B", "to": "end"}],
              "objectEdges": [{"from": {"node": "A", "pin": "out"}, "to": {"node": "B", "pin": "in"}}]
            }"#,
        )
        .unwrap()
    }

    fn action(id: &str) -> Node {
        Node {
            id: id.into(),
            kind: NodeKind::Action,
            transformation: Some(format!("TransformationM2M:{id}.m2m")),
            inputs: vec![],
            outputs: vec![],
        }
    }

    fn control(node: &str, kind: NodeKind) -> Node {
        Node {
            id: node.into(),
            kind,
            transformation: None,
            inputs: vec![],
            outputs: vec![],
        }
    }

    fn edge(a: &str, b: &str) -> ControlEdge {
        ControlEdge {
            from: a.into(),
            to: b.into(),
        }
    }

    #[test]
    fn three_node_process() {
        let p = ProcessModel {
            name: "p".into(),
            nodes: vec![
                control("s", NodeKind::Initial),
                action("A"),
                control("e", NodeKind::Final),
            ],
            control_edges: vec![edge("s", "A"), edge("A", "e")],
            object_edges: vec![],
        };
        let back = parse_process(&p.to_json()).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.nodes.len(), 3);
        assert_eq!(schedule(&p).unwrap().stages, [["A"]]);
    }

    #[test]
    fn linear_schedule() {
        assert_eq!(schedule(&linear()).unwrap().stages, [["A"], ["B"]]);
    }

    #[test]
    fn no_initial_node() {
        let p = ProcessModel {
            name: "p".into(),
            nodes: vec![action("A"), control("e", NodeKind::Final)],
            control_edges: vec![edge("A", "e")],
            object_edges: vec![],
        };
        assert!(matches!(
            parse_process(&p.to_json()),
            Err(ProcessError::WellFormedness(_))
        ));
    }

    #[test]
    fn ill_formed_processes() {
        let base = linear();
        let mut two_initials = base.clone();
        two_initials.nodes.push(control("s2", NodeKind::Initial));
        let mut unreachable = base.clone();
        unreachable.nodes.push(action("C"));
        unreachable.control_edges.push(edge("C", "end"));
        let mut fork = base.clone();
        fork.nodes.push(control("f", NodeKind::Fork));
        fork.control_edges.push(edge("start", "f"));
        fork.control_edges.push(edge("f", "end"));
        let mut bad_pin = base.clone();
        bad_pin.object_edges[0].to.pin = "nope".into();
        let mut mismatch = base.clone();
        mismatch.nodes[2].inputs[0].metamodel = "Other".into();
        for p in [two_initials, unreachable, fork, bad_pin, mismatch] {
            assert!(matches!(p.validate(), Err(ProcessError::WellFormedness(_))), "{p:?}");
        }
        assert!(matches!(parse_process("{"), Err(ProcessError::Syntax { .. })));
    }

    #[test]
    fn object_edge_against_control_flow_is_a_cycle() {
        let mut p = linear();
        p.object_edges.push(ObjectEdge {
            from: PinRef {
                node: "B".into(),
                pin: "out".into(),
            },
            to: PinRef {
                node: "A".into(),
                pin: "in".into(),
            },
        });
        match schedule(&p) {
            Err(ProcessError::Cycle(c)) => {
                assert_eq!(c.first(), c.last());
                assert!(c.contains(&"A".to_string()) && c.contains(&"B".to_string()), "{c:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fork_join_stages() {
        let mut nodes = vec![
            control("s", NodeKind::Initial),
            control("f", NodeKind::Fork),
            control("j", NodeKind::Join),
            control("e", NodeKind::Final),
        ];
        let mut edges = vec![edge("s", "f"), edge("j", "e")];
        for x in ["M2", "M1", "M3"] {
            let g = x.replace('M', "G");
            nodes.push(action(x));
            nodes.push(action(&g));
            edges.push(edge("f", x));
            edges.push(edge(x, &g));
            edges.push(edge(&g, "j"));
        }
        let p = ProcessModel {
            name: "p".into(),
            nodes,
            control_edges: edges,
            object_edges: vec![],
        };
        p.validate().unwrap();
        assert_eq!(schedule(&p).unwrap().stages, [["M1", "M2", "M3"], ["G1", "G2", "G3"]]);
    }
}
