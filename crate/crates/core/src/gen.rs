//! Deterministic graph generators for tests and experiment sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{Graph, VertexId};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("unsatisfiable generator parameters: {0}")]
    Unsatisfiable(String),
}

pub fn path(n: usize) -> Graph {
    Graph::from_edges(n, (1..n).map(|i| (i - 1, i))).unwrap()
}

pub fn cycle(n: usize) -> Graph {
    assert!(n >= 3, "a cycle needs at least 3 vertices");
    Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
}

/// rows x cols grid; vertex (r, c) has ID r*cols + c.
pub fn grid(rows: usize, cols: usize) -> Graph {
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.push((v, v + 1));
            }
            if r + 1 < rows {
                edges.push((v, v + cols));
            }
        }
    }
    Graph::from_edges(rows * cols, edges).unwrap()
}

/// G(n, p): each vertex pair independently with probability p.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

/// Random geometric graph on the unit square: vertices connected when
/// their Euclidean distance is at most `r`.
pub fn random_geometric(n: usize, r: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen(), rng.gen())).collect();
    let r2 = r * r;
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let dx = pts[u].0 - pts[v].0;
            let dy = pts[u].1 - pts[v].1;
            if dx * dx + dy * dy <= r2 {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

/// Long-forced-detour family used to exercise hard replacement paths.
///
/// Two branches hang off a fork below the root: a short branch crossing a
/// cut edge into a `drop`-deep tail, and a long branch reaching a chain of
/// `detour_len` vertices that re-attaches just below the cut edge. Removing
/// the cut edge forces the unique replacement path to run down the long
/// branch and climb the whole chain, so the sensitive detour has length
/// `detour_len + drop`, while the fault sits only `drop` hops from the
/// tail's end.
///
/// Vertex IDs are a seeded permutation of the construction order, which the
/// builder keeps tie-break-safe (no shortest-path ties exist by design).
pub struct Lollipop {
    pub graph: Graph,
    pub source: VertexId,
    pub target: VertexId,
    /// The cut edge whose failure forces the long detour.
    pub cut_edge: (VertexId, VertexId),
    pub detour_len: usize,
}

pub fn lollipop(detour_len: usize, drop: usize, seed: u64) -> Lollipop {
    assert!(detour_len >= 2 && drop >= 1);
    // Construction-order vertices:
    //   0 = s, 1 = fork, 2 = p (pre-cut), 3 = x, 4 = y,
    //   tail a_1..a_drop (t = a_drop),
    //   long branch q_1..q_J with J = detour chain offset,
    //   chain b_1..b_L attached y -> b_1, b_L adjacent q_J.
    let l = detour_len;
    let depth_y = 4usize;
    // The long branch's tip u = q_J sits at the same depth as the chain's
    // bottom b_L, one more than b_{L-1}: every BFS parent along both the
    // chain and the branch is then unique (no ties anywhere).
    let j = depth_y + l - 1; // depth(q_J) = 1 + J = depth_y + l
    let mut next = 0usize;
    let mut fresh = || {
        let v = next;
        next += 1;
        v
    };
    let s = fresh();
    let fork = fresh();
    let p = fresh();
    let x = fresh();
    let y = fresh();
    let tail: Vec<usize> = (0..drop).map(|_| fresh()).collect();
    let long: Vec<usize> = (0..j).map(|_| fresh()).collect();
    let chain: Vec<usize> = (0..l).map(|_| fresh()).collect();
    let n = next;

    let mut edges = vec![(s, fork), (fork, p), (p, x), (x, y)];
    let mut prev = y;
    for &a in &tail {
        edges.push((prev, a));
        prev = a;
    }
    let mut prev = fork;
    for &q in &long {
        edges.push((prev, q));
        prev = q;
    }
    let mut prev = y;
    for &b in &chain {
        edges.push((prev, b));
        prev = b;
    }
    edges.push((*long.last().unwrap(), *chain.last().unwrap()));

    // Permute IDs; no ties exist, so any bijection preserves the structure.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let k = rng.gen_range(0..=i);
        perm.swap(i, k);
    }
    let graph = Graph::from_edges(n, edges.iter().map(|&(u, v)| (perm[u], perm[v]))).unwrap();
    Lollipop {
        graph,
        source: perm[s],
        target: perm[*tail.last().unwrap()],
        cut_edge: (perm[x], perm[y]),
        detour_len: l + drop,
    }
}

/// Retries `build` until the output is connected; errors after `attempts`.
pub fn connected<F>(mut build: F, attempts: usize) -> Result<Graph, GenError>
where
    F: FnMut(u64) -> Graph,
{
    for salt in 0..attempts as u64 {
        let g = build(salt);
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(GenError::Unsatisfiable(format!(
        "no connected graph after {attempts} attempts"
    )))
}

/// Largest connected component of `g` (ties to the smallest member ID).
pub fn largest_component(g: &Graph) -> Graph {
    let comps = g.components();
    let best = comps
        .iter()
        .max_by_key(|c| (c.len(), std::cmp::Reverse(c[0])))
        .expect("nonempty graph");
    g.induced(best).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{bfs_consistent, replacement_path, EdgeId, FaultSet};

    #[test]
    fn shapes() {
        assert_eq!(path(5).m(), 4);
        assert_eq!(path(5).diameter(), 4);
        let c = cycle(4);
        assert_eq!(c.m(), 4);
        assert_eq!(c.diameter(), 2);
        let g = grid(3, 4);
        assert_eq!(g.n(), 12);
        assert_eq!(g.m(), 17);
    }

    #[test]
    fn erdos_renyi_deterministic() {
        let a = erdos_renyi(100, 0.05, 9);
        let b = erdos_renyi(100, 0.05, 9);
        assert_eq!(a.edges(), b.edges());
        let c = erdos_renyi(100, 0.05, 10);
        assert_ne!(a.edges(), c.edges());
    }

    #[test]
    fn lollipop_forces_long_detour() {
        let lp = lollipop(12, 2, 3);
        let g = &lp.graph;
        assert!(g.is_connected());
        let e = EdgeId::new(lp.cut_edge.0, lp.cut_edge.1);
        let base = replacement_path(g, lp.source, lp.target, FaultSet::empty()).unwrap();
        assert!(base.contains_edge(e));
        let repl = replacement_path(g, lp.source, lp.target, FaultSet::single(e)).unwrap();
        assert!(repl.len() > base.len() + lp.detour_len);
        // the fault stays near the target on the original path
        let tree = bfs_consistent(g, lp.source, FaultSet::empty());
        let t_depth = tree.depth(lp.target).unwrap();
        let y = lp.cut_edge.1;
        // cut edge's lower endpoint sits `drop` hops above the target
        assert_eq!(tree.depth(y).unwrap() + 2, t_depth);
    }
}
