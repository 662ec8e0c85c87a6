//! LCA labels over BFS trees via heavy-path decomposition.
//!
//! A label is the chain of (heavy-path head, entry depth) pairs along the
//! root path plus the vertex depth: O(log n) words. Two labels alone
//! determine the LCA depth and ancestry relations, which is exactly what
//! the hard-path distance formula needs a vertex to evaluate offline.

use serde::{Deserialize, Serialize};

use crate::graph::{ShortestPathTree, VertexId};

/// Compressed root-path representation in one tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LcaLabel {
    /// (head vertex, depth at which the root path enters that heavy path),
    /// ordered from the root down. The first entry is always the root at
    /// depth 0.
    pub segments: Vec<(VertexId, usize)>,
    pub depth: usize,
}

impl LcaLabel {
    /// Word count when shipped over the network.
    pub fn words(&self) -> usize {
        2 * self.segments.len() + 1
    }
}

/// Depth of the lowest common ancestor, from labels alone.
pub fn lca_depth(a: &LcaLabel, b: &LcaLabel) -> usize {
    let mut common = 0;
    while common < a.segments.len()
        && common < b.segments.len()
        && a.segments[common] == b.segments[common]
    {
        common += 1;
    }
    assert!(common > 0, "labels from different trees share no root");
    let j = common - 1;
    // The paths part ways on segment j: each side stays on it until its next
    // entry depth (or its own depth if the vertex lies on that heavy path).
    let end = |l: &LcaLabel| -> usize {
        if j + 1 < l.segments.len() {
            l.segments[j + 1].1 - 1
        } else {
            l.depth
        }
    };
    end(a).min(end(b))
}

/// True when the vertex labeled `anc` is an ancestor of (or equal to) the
/// vertex labeled `v`.
pub fn is_ancestor(anc: &LcaLabel, v: &LcaLabel) -> bool {
    lca_depth(anc, v) == anc.depth
}

/// Heavy child of every vertex: the child with the largest subtree, ties to
/// the minimum ID. `usize::MAX` marks "no child". The distributed label
/// construction follows the same rule, so both produce identical labels.
pub fn heavy_children(tree: &ShortestPathTree) -> Vec<VertexId> {
    let n = tree.n();
    let mut size = vec![1usize; n];
    // process vertices bottom-up by depth
    let mut order: Vec<VertexId> = (0..n).filter(|&v| tree.reachable(v)).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(tree.depth(v).unwrap()));
    for &v in &order {
        if let Some(p) = tree.parent(v) {
            size[p] += size[v];
        }
    }
    let mut heavy = vec![usize::MAX; n];
    for &v in order.iter().rev() {
        if let Some(p) = tree.parent(v) {
            let cur = heavy[p];
            if cur == usize::MAX || size[v] > size[cur] || (size[v] == size[cur] && v < cur) {
                heavy[p] = v;
            }
        }
    }
    heavy
}

/// Labels for every reachable vertex of the tree; unreachable vertices get
/// `None`.
pub fn hld_labels(tree: &ShortestPathTree) -> Vec<Option<LcaLabel>> {
    let n = tree.n();
    let heavy = heavy_children(tree);
    let mut labels: Vec<Option<LcaLabel>> = vec![None; n];
    let mut order: Vec<VertexId> = (0..n).filter(|&v| tree.reachable(v)).collect();
    order.sort_by_key(|&v| tree.depth(v).unwrap());
    for &v in &order {
        let depth = tree.depth(v).unwrap();
        let label = match tree.parent(v) {
            None => LcaLabel { segments: vec![(v, 0)], depth: 0 },
            Some(p) => {
                let mut l = labels[p].clone().expect("parent labeled first");
                l.depth = depth;
                if heavy[p] != v {
                    l.segments.push((v, depth));
                }
                l
            }
        };
        labels[v] = Some(label);
    }
    labels
}

/// Brute-force LCA by walking parent pointers; the independent check the
/// label algebra is tested against.
pub fn lca_by_walk(tree: &ShortestPathTree, mut u: VertexId, mut v: VertexId) -> VertexId {
    let mut du = tree.depth(u).expect("u reachable");
    let mut dv = tree.depth(v).expect("v reachable");
    while du > dv {
        u = tree.parent(u).unwrap();
        du -= 1;
    }
    while dv > du {
        v = tree.parent(v).unwrap();
        dv -= 1;
    }
    while u != v {
        u = tree.parent(u).unwrap();
        v = tree.parent(v).unwrap();
    }
    u
}
