//! Prefix tree over identifier paths.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::model::{ElementPath, Segment};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreeNode {
    pub children: BTreeMap<Segment, TreeNode>,
    /// Set when an inserted path ends at this node.
    pub terminal: bool,
}

/// One node per path segment, shared between paths with a common prefix.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceIdentifierTree {
    pub root: TreeNode,
}

impl TraceIdentifierTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserting a path already present is a no-op.
    pub fn insert(&mut self, path: &ElementPath) {
        let mut node = &mut self.root;
        for seg in path.segments() {
            node = node.children.entry(seg.clone()).or_default();
        }
        node.terminal = true;
    }

    /// Every inserted path.
    pub fn enumerate(&self) -> BTreeSet<ElementPath> {
        fn walk(node: &TreeNode, prefix: &mut Vec<Segment>, out: &mut BTreeSet<ElementPath>) {
            if node.terminal && !prefix.is_empty() {
                out.insert(ElementPath::from_segments(prefix.clone()));
            }
            for (seg, child) in &node.children {
                prefix.push(seg.clone());
                walk(child, prefix, out);
                prefix.pop();
            }
        }
        let mut out = BTreeSet::new();
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    /// Root-to-leaf paths.
    pub fn leaves(&self) -> BTreeSet<ElementPath> {
        fn walk(node: &TreeNode, prefix: &mut Vec<Segment>, out: &mut BTreeSet<ElementPath>) {
            if node.children.is_empty() && !prefix.is_empty() {
                out.insert(ElementPath::from_segments(prefix.clone()));
            }
            for (seg, child) in &node.children {
                prefix.push(seg.clone());
                walk(child, prefix, out);
                prefix.pop();
            }
        }
        let mut out = BTreeSet::new();
        walk(&self.root, &mut Vec::new(), &mut out);
        out
    }

    /// Number of levels below the root.
    pub fn depth(&self) -> usize {
        fn depth(node: &TreeNode) -> usize {
            node.children.values().map(|c| 1 + depth(c)).max().unwrap_or(0)
        }
        depth(&self.root)
    }

    pub fn is_empty(&self) -> bool {
        self.root.children.is_empty()
    }
}

impl fmt::Display for TraceIdentifierTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn walk(node: &TreeNode, depth: usize, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            for (seg, child) in &node.children {
                writeln!(f, "{}{}", "  ".repeat(depth + 1), seg)?;
                walk(child, depth + 1, f)?;
            }
            Ok(())
        }
        writeln!(f, "root")?;
        walk(&self.root, 0, f)
    }
}

pub fn build_identifier_tree<'a>(paths: impl IntoIterator<Item = &'a ElementPath>) -> TraceIdentifierTree {
    let mut tree = TraceIdentifierTree::new();
    for p in paths {
        tree.insert(p);
    }
    tree
}
