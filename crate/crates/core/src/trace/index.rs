use std::collections::{BTreeMap, BTreeSet};

use super::{TraceLink, TraceNode};

/// Forward (source to targets) and backward (target to sources) lookups over
/// a set of links.
#[derive(Debug, Clone, Default)]
pub struct TraceIndex {
    forward: BTreeMap<TraceNode, BTreeSet<TraceNode>>,
    backward: BTreeMap<TraceNode, BTreeSet<TraceNode>>,
}

impl TraceIndex {
    pub fn new(links: &[TraceLink]) -> Self {
        let mut idx = TraceIndex::default();
        for link in links {
            for s in &link.sources {
                let s = TraceNode::Model(s.clone());
                for t in &link.targets {
                    idx.forward.entry(s.clone()).or_default().insert(t.clone());
                    idx.backward.entry(t.clone()).or_default().insert(s.clone());
                }
            }
        }
        idx
    }

    /// Outputs generated from `source`.
    pub fn targets_of(&self, source: &TraceNode) -> impl Iterator<Item = &TraceNode> {
        self.forward.get(source).into_iter().flatten()
    }

    /// Inputs used to generate `target`.
    pub fn sources_of(&self, target: &TraceNode) -> impl Iterator<Item = &TraceNode> {
        self.backward.get(target).into_iter().flatten()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&TraceNode, &TraceNode)> {
        self.forward.iter().flat_map(|(s, ts)| ts.iter().map(move |t| (s, t)))
    }

    pub fn inverse_pairs(&self) -> impl Iterator<Item = (&TraceNode, &TraceNode)> {
        self.backward.iter().flat_map(|(t, ss)| ss.iter().map(move |s| (s, t)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::ModelRef;
    use proptest::prelude::*;

    fn node(i: u8) -> ModelRef {
        ModelRef::new(format!("m{}", i % 3), format!("e[{i}]").parse().unwrap())
    }

    proptest! {
        #[test]
        fn forward_and_backward_are_inverse(pairs in prop::collection::vec((0u8..20, 0u8..20), 0..40)) {
            let links: Vec<TraceLink> = pairs
                .iter()
                .map(|(a, b)| TraceLink::new(node(*a), TraceNode::Model(node(*b + 100))))
                .collect();
            let idx = TraceIndex::new(&links);
            let fwd: BTreeSet<_> = idx.pairs().collect();
            let bwd: BTreeSet<_> = idx.inverse_pairs().collect();
            prop_assert_eq!(&fwd, &bwd);
            for (s, t) in &fwd {
                prop_assert!(idx.sources_of(t).any(|x| x == *s));
                prop_assert!(idx.targets_of(s).any(|x| x == *t));
            }
        }
    }
}
