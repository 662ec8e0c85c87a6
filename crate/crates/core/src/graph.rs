//! Undirected unweighted graphs with dense vertex IDs, deterministic
//! tie-broken BFS, replacement paths and path-suffix utilities.
//!
//! Every shortest-path computation in this crate goes through
//! [`bfs_consistent`]: ties are always broken toward the lower vertex ID,
//! so the shortest path between two vertices under a fixed fault set is
//! unique and subpaths of canonical paths are canonical.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path as FsPath;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type VertexId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("self-loop at vertex {0}")]
    SelfLoop(VertexId),
    #[error("vertex {vertex} out of range (n = {n})")]
    VertexOutOfRange { vertex: VertexId, n: usize },
    #[error("edge {0} not present in graph")]
    MissingEdge(EdgeId),
    #[error("empty graph file {0}")]
    EmptyFile(String),
    #[error("malformed edge list line {line}: {text:?}")]
    MalformedLine { line: usize, text: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Canonical undirected edge: endpoints stored as (min, max).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeId {
    a: VertexId,
    b: VertexId,
}

impl EdgeId {
    /// Canonicalizes the endpoint order; `u == v` is rejected by the graph
    /// constructors, so this only asserts in debug builds.
    pub fn new(u: VertexId, v: VertexId) -> Self {
        debug_assert_ne!(u, v, "self-loop edge ({u},{v})");
        if u < v {
            EdgeId { a: u, b: v }
        } else {
            EdgeId { a: v, b: u }
        }
    }

    pub fn endpoints(&self) -> (VertexId, VertexId) {
        (self.a, self.b)
    }

    pub fn lo(&self) -> VertexId {
        self.a
    }

    pub fn hi(&self) -> VertexId {
        self.b
    }

    pub fn touches(&self, v: VertexId) -> bool {
        self.a == v || self.b == v
    }

    /// The endpoint that is not `v`. Panics if `v` is not an endpoint.
    pub fn other(&self, v: VertexId) -> VertexId {
        if v == self.a {
            self.b
        } else {
            assert_eq!(v, self.b, "vertex {v} not on edge {self}");
            self.a
        }
    }

    /// True when this edge is the (unordered) pair {u, v}.
    pub fn is(&self, u: VertexId, v: VertexId) -> bool {
        (self.a == u && self.b == v) || (self.a == v && self.b == u)
    }
}

impl fmt::Debug for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.a, self.b)
    }
}

/// Set of 0, 1 or 2 failed edges defining the surviving graph view.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct FaultSet {
    faults: [Option<EdgeId>; 2],
}

impl FaultSet {
    pub fn empty() -> Self {
        FaultSet { faults: [None, None] }
    }

    pub fn single(e: EdgeId) -> Self {
        FaultSet { faults: [Some(e), None] }
    }

    /// Two distinct failed edges; collapses to a single fault when equal.
    pub fn dual(e1: EdgeId, e2: EdgeId) -> Self {
        if e1 == e2 {
            Self::single(e1)
        } else if e1 < e2 {
            FaultSet { faults: [Some(e1), Some(e2)] }
        } else {
            FaultSet { faults: [Some(e2), Some(e1)] }
        }
    }

    pub fn from_edges(edges: &[EdgeId]) -> Self {
        match edges {
            [] => Self::empty(),
            [e] => Self::single(*e),
            [e1, e2] => Self::dual(*e1, *e2),
            _ => panic!("fault sets hold at most two edges"),
        }
    }

    pub fn len(&self) -> usize {
        self.faults.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.faults[0].is_none()
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.faults.iter().flatten().any(|f| *f == e)
    }

    pub fn iter(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.faults.iter().flatten().copied()
    }

    /// True when the edge (u, v) survives this fault set.
    pub fn allows(&self, u: VertexId, v: VertexId) -> bool {
        !self.faults.iter().flatten().any(|f| f.is(u, v))
    }
}

impl fmt::Debug for FaultSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, e) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

/// Undirected unweighted graph over dense IDs `0..n`.
///
/// Neighbor lists are sorted ascending, which makes "first neighbor at
/// depth d-1" equal to "minimum-ID neighbor at depth d-1" everywhere.
#[derive(Debug)]
pub struct Graph {
    adj: Vec<Vec<VertexId>>,
    edges: Vec<EdgeId>,
    diameter: OnceLock<usize>,
}

impl Clone for Graph {
    fn clone(&self) -> Self {
        Graph {
            adj: self.adj.clone(),
            edges: self.edges.clone(),
            diameter: OnceLock::new(),
        }
    }
}

impl Graph {
    /// Builds a graph on `n` vertices from an edge iterator. Duplicate
    /// edges (in either orientation) are collapsed; self-loops and
    /// out-of-range endpoints are errors.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (VertexId, VertexId)>,
    {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            for w in [u, v] {
                if w >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: w, n });
                }
            }
            set.insert(EdgeId::new(u, v));
        }
        let mut adj = vec![Vec::new(); n];
        for e in &set {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Ok(Graph {
            adj,
            edges: set.into_iter().collect(),
            diameter: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> std::ops::Range<VertexId> {
        0..self.n()
    }

    /// Sorted ascending.
    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.adj[v]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adj[v].len()
    }

    /// Sorted by canonical order.
    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn contains_edge(&self, e: EdgeId) -> bool {
        self.adj[e.a].binary_search(&e.b).is_ok()
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        u != v && self.adj[u].binary_search(&v).is_ok()
    }

    pub fn edge_index(&self, e: EdgeId) -> Option<usize> {
        self.edges.binary_search(&e).ok()
    }

    /// Largest finite eccentricity over all vertices (0 for n <= 1).
    /// On a disconnected graph this is the max over components.
    pub fn diameter(&self) -> usize {
        *self.diameter.get_or_init(|| {
            let mut best = 0;
            for s in self.vertices() {
                let tree = bfs_consistent(self, s, FaultSet::empty());
                for v in self.vertices() {
                    if let Some(d) = tree.depth(v) {
                        best = best.max(d);
                    }
                }
            }
            best
        })
    }

    /// Connected components, each sorted ascending, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<VertexId>> {
        let mut seen = vec![false; self.n()];
        let mut out = Vec::new();
        for s in self.vertices() {
            if seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(v) = queue.pop_front() {
                for &u in self.neighbors(v) {
                    if !seen[u] {
                        seen[u] = true;
                        comp.push(u);
                        queue.push_back(u);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.n() <= 1 || self.components().len() == 1
    }

    /// Induced subgraph on `vertices` (must be sorted ascending).
    /// Returns the subgraph plus the old-ID list; new IDs are positions in
    /// that list, so the remap is monotone and tie-breaking is preserved.
    pub fn induced(&self, vertices: &[VertexId]) -> (Graph, Vec<VertexId>) {
        debug_assert!(vertices.windows(2).all(|w| w[0] < w[1]));
        let mut pos = vec![usize::MAX; self.n()];
        for (i, &v) in vertices.iter().enumerate() {
            pos[v] = i;
        }
        let mut edges = Vec::new();
        for e in &self.edges {
            if pos[e.a] != usize::MAX && pos[e.b] != usize::MAX {
                edges.push((pos[e.a], pos[e.b]));
            }
        }
        let g = Graph::from_edges(vertices.len(), edges).expect("induced subgraph is valid");
        (g, vertices.to_vec())
    }

    /// Validates that every fault edge exists in this graph.
    pub fn check_faults(&self, faults: FaultSet) -> Result<(), GraphError> {
        for e in faults.iter() {
            if !self.contains_edge(e) {
                return Err(GraphError::MissingEdge(e));
            }
        }
        Ok(())
    }
}

/// BFS tree with consistent min-ID tie-breaking.
///
/// `depth` is `None` exactly for vertices unreachable from the source in
/// the surviving graph; unreachability is absence, never a sentinel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShortestPathTree {
    source: VertexId,
    parent: Vec<Option<VertexId>>,
    depth: Vec<Option<usize>>,
}

impl ShortestPathTree {
    pub fn source(&self) -> VertexId {
        self.source
    }

    pub fn depth(&self, v: VertexId) -> Option<usize> {
        self.depth[v]
    }

    pub fn parent(&self, v: VertexId) -> Option<VertexId> {
        self.parent[v]
    }

    pub fn reachable(&self, v: VertexId) -> bool {
        self.depth[v].is_some()
    }

    pub fn n(&self) -> usize {
        self.depth.len()
    }

    /// The canonical tie-broken path from the source to `t`.
    pub fn path_to(&self, t: VertexId) -> Option<Path> {
        self.depth[t]?;
        let mut vertices = vec![t];
        let mut v = t;
        while let Some(p) = self.parent[v] {
            vertices.push(p);
            v = p;
        }
        debug_assert_eq!(v, self.source);
        vertices.reverse();
        Some(Path { vertices })
    }

    /// The parent edge of `v`, i.e. the last edge of the canonical path.
    pub fn parent_edge(&self, v: VertexId) -> Option<EdgeId> {
        self.parent[v].map(|p| EdgeId::new(p, v))
    }

    /// All tree edges (parent(v), v), sorted.
    pub fn tree_edges(&self) -> Vec<EdgeId> {
        let mut out: Vec<EdgeId> = self
            .vertices_with_parents()
            .map(|(v, p)| EdgeId::new(p, v))
            .collect();
        out.sort_unstable();
        out
    }

    fn vertices_with_parents(&self) -> impl Iterator<Item = (VertexId, VertexId)> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter_map(|(v, p)| p.map(|p| (v, p)))
    }

    /// True when `e` lies on the canonical path from the source to `v`,
    /// i.e. `e` is a tree edge and `v` sits in the subtree under its lower
    /// endpoint.
    pub fn on_path(&self, e: EdgeId, v: VertexId) -> bool {
        let (x, y) = match self.orient(e) {
            Some(xy) => xy,
            None => return false,
        };
        let _ = x;
        let ydepth = self.depth[y].expect("tree edge endpoint has a depth");
        let mut cur = v;
        loop {
            match self.depth[cur] {
                Some(d) if d > ydepth => match self.parent[cur] {
                    Some(p) => cur = p,
                    None => return false,
                },
                Some(d) => return d == ydepth && cur == y,
                None => return false,
            }
        }
    }

    /// Orients a tree edge as (parent, child); `None` if `e` is not a tree edge.
    pub fn orient(&self, e: EdgeId) -> Option<(VertexId, VertexId)> {
        let (a, b) = e.endpoints();
        if self.parent[a] == Some(b) {
            Some((b, a))
        } else if self.parent[b] == Some(a) {
            Some((a, b))
        } else {
            None
        }
    }
}

/// Simple path: ordered vertices, consecutive pairs adjacent in the host graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Path {
    vertices: Vec<VertexId>,
}

impl Path {
    pub fn from_vertices(vertices: Vec<VertexId>) -> Self {
        assert!(!vertices.is_empty(), "a path has at least one vertex");
        Path { vertices }
    }

    /// Number of edges.
    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn source(&self) -> VertexId {
        self.vertices[0]
    }

    pub fn target(&self) -> VertexId {
        *self.vertices.last().unwrap()
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.vertices.windows(2).map(|w| EdgeId::new(w[0], w[1]))
    }

    pub fn contains_edge(&self, e: EdgeId) -> bool {
        self.edges().any(|pe| pe == e)
    }

    /// Subpath between two vertices that must both lie on the path.
    pub fn segment(&self, from: VertexId, to: VertexId) -> Path {
        let i = self.vertices.iter().position(|&v| v == from).expect("from on path");
        let j = self.vertices.iter().position(|&v| v == to).expect("to on path");
        assert!(i <= j, "segment endpoints out of order");
        Path { vertices: self.vertices[i..=j].to_vec() }
    }

    /// Hop distance from the nearer endpoint of `e` to the path target,
    /// measured along the path. `None` when `e` is not on the path.
    pub fn edge_pos_from_target(&self, e: EdgeId) -> Option<usize> {
        let k = self.len();
        self.vertices
            .windows(2)
            .position(|w| e.is(w[0], w[1]))
            .map(|i| k - i - 1)
    }
}

/// The last `min(sigma, |path|)` edges of a path, in path order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSuffix {
    edges: Vec<EdgeId>,
}

impl PathSuffix {
    pub fn edges(&self) -> &[EdgeId] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.edges.contains(&e)
    }
}

/// BFS of `g` minus `faults` rooted at `s`, ties broken to the minimum-ID
/// parent. Pure function of its arguments.
pub fn bfs_consistent(g: &Graph, s: VertexId, faults: FaultSet) -> ShortestPathTree {
    let n = g.n();
    let mut depth: Vec<Option<usize>> = vec![None; n];
    depth[s] = Some(0);
    let mut queue = std::collections::VecDeque::with_capacity(n);
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        let dv = depth[v].unwrap();
        for &u in g.neighbors(v) {
            if depth[u].is_none() && faults.allows(v, u) {
                depth[u] = Some(dv + 1);
                queue.push_back(u);
            }
        }
    }
    // Parent = minimum-ID neighbor one level up; neighbor lists are sorted,
    // so the first match is the minimum.
    let mut parent = vec![None; n];
    for v in 0..n {
        let dv = match depth[v] {
            Some(d) if d > 0 => d,
            _ => continue,
        };
        parent[v] = g
            .neighbors(v)
            .iter()
            .copied()
            .find(|&u| faults.allows(v, u) && depth[u] == Some(dv - 1));
        debug_assert!(parent[v].is_some());
    }
    ShortestPathTree { source: s, parent, depth }
}

/// The unique tie-broken s-t shortest path in `g` minus `faults`.
pub fn replacement_path(g: &Graph, s: VertexId, t: VertexId, faults: FaultSet) -> Option<Path> {
    bfs_consistent(g, s, faults).path_to(t)
}

/// Last `min(sigma, |p|)` edges of `p`, nearest the target, in path order.
pub fn suffix(p: &Path, sigma: usize) -> PathSuffix {
    let k = p.len().min(sigma);
    PathSuffix {
        edges: p.edges().skip(p.len() - k).collect(),
    }
}

/// Final edge of a path (incident to the target); `None` for a single vertex.
pub fn last_edge(p: &Path) -> Option<EdgeId> {
    let v = p.vertices();
    if v.len() < 2 {
        None
    } else {
        Some(EdgeId::new(v[v.len() - 2], v[v.len() - 1]))
    }
}

/// `min(dist(x,t), dist(y,t))` in `g` minus `faults` for `e = (x,y)`;
/// `None` when neither endpoint reaches `t`.
pub fn dist_edge_vertex(g: &Graph, e: EdgeId, t: VertexId, faults: FaultSet) -> Option<usize> {
    let tree = bfs_consistent(g, t, faults);
    let (x, y) = e.endpoints();
    match (tree.depth(x), tree.depth(y)) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (Some(a), None) => Some(a),
        (None, Some(b)) => Some(b),
        (None, None) => None,
    }
}

/// Independent inclusion of each vertex with probability `min(p, 1)`;
/// deterministic in the seed. Returns a sorted vertex list.
pub fn sample(g: &Graph, p: f64, seed: u64) -> Vec<VertexId> {
    let p = p.clamp(0.0, 1.0);
    if p == 0.0 {
        return Vec::new();
    }
    if p >= 1.0 {
        return g.vertices().collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    g.vertices().filter(|_| rng.gen::<f64>() < p).collect()
}

/// Natural log of `n` rounded up, as used in every sampling-probability
/// and suffix-length formula. Zero for n <= 1.
pub fn param_ln(n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        (n as f64).ln().ceil()
    }
}

/// `ceil(sqrt(a / b))` as a hop count, at least 1.
pub fn ceil_sqrt_ratio(a: usize, b: usize) -> usize {
    let x = (a as f64 / b as f64).sqrt().ceil() as usize;
    x.max(1)
}

/// `ceil((a / b)^(1/4))`, at least 1.
pub fn ceil_fourth_root_ratio(a: usize, b: usize) -> usize {
    let x = (a as f64 / b as f64).powf(0.25).ceil() as usize;
    x.max(1)
}

// ---------------------------------------------------------------------------
// Edge-list I/O: "u v" per line, '#' comments. Arbitrary labels are remapped
// to dense IDs; the sorted label list is returned so writers can round-trip.
// ---------------------------------------------------------------------------

/// Parses an edge list. Labels are sorted (numerically when every label is
/// an integer, lexicographically otherwise) and mapped to 0..n in order.
pub fn parse_edge_list(text: &str) -> Result<(Graph, Vec<String>), GraphError> {
    let mut raw_edges: Vec<(String, String)> = Vec::new();
    let mut labels: BTreeSet<String> = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        };
        let mut parts = line.split_whitespace();
        let (u, v) = match (parts.next(), parts.next()) {
            (None, _) => continue,
            (Some(u), Some(v)) => (u.to_string(), v.to_string()),
            (Some(_), None) => {
                return Err(GraphError::MalformedLine { line: lineno + 1, text: line.to_string() })
            }
        };
        if parts.next().is_some() {
            return Err(GraphError::MalformedLine { line: lineno + 1, text: line.to_string() });
        }
        labels.insert(u.clone());
        labels.insert(v.clone());
        raw_edges.push((u, v));
    }
    let mut labels: Vec<String> = labels.into_iter().collect();
    if labels.iter().all(|l| l.parse::<u64>().is_ok()) {
        labels.sort_by_key(|l| l.parse::<u64>().unwrap());
    }
    let index = |l: &str| labels.iter().position(|x| x == l).unwrap();
    let n = labels.len();
    let edges: Vec<(usize, usize)> = raw_edges
        .iter()
        .map(|(u, v)| (index(u), index(v)))
        .collect();
    // Self-loop check happens in from_edges via the original labels' indices.
    for ((u, v), (lu, lv)) in edges.iter().zip(&raw_edges) {
        if u == v {
            let _ = (lu, lv);
            return Err(GraphError::SelfLoop(*u));
        }
    }
    let g = Graph::from_edges(n, edges)?;
    Ok((g, labels))
}

/// Parses an edge list whose labels must all resolve against an existing
/// label table (as produced by [`parse_edge_list`] on the host graph).
/// Used to read subgraph files back into the host's ID space.
pub fn parse_edge_list_in(
    text: &str,
    labels: &[String],
) -> Result<Vec<(VertexId, VertexId)>, GraphError> {
    let index: std::collections::HashMap<&str, usize> =
        labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        };
        let mut parts = line.split_whitespace();
        let (u, v) = match (parts.next(), parts.next()) {
            (None, _) => continue,
            (Some(u), Some(v)) => (u, v),
            (Some(_), None) => {
                return Err(GraphError::MalformedLine { line: lineno + 1, text: line.to_string() })
            }
        };
        if parts.next().is_some() {
            return Err(GraphError::MalformedLine { line: lineno + 1, text: line.to_string() });
        }
        match (index.get(u), index.get(v)) {
            (Some(&a), Some(&b)) => edges.push((a, b)),
            _ => {
                return Err(GraphError::MalformedLine {
                    line: lineno + 1,
                    text: format!("unknown vertex label in {line:?}"),
                })
            }
        }
    }
    Ok(edges)
}

pub fn read_edge_list(path: impl AsRef<FsPath>) -> Result<(Graph, Vec<String>), GraphError> {
    let file = std::fs::File::open(&path)?;
    let mut text = String::new();
    for line in std::io::BufReader::new(file).lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    if text.trim().is_empty() {
        return Err(GraphError::EmptyFile(path.as_ref().display().to_string()));
    }
    parse_edge_list(&text)
}

/// Writes the same "u v" format the reader accepts. `labels` maps dense IDs
/// back to their original names; pass `None` to emit the dense IDs.
pub fn write_edge_list(
    g: &Graph,
    labels: Option<&[String]>,
    w: &mut impl Write,
) -> std::io::Result<()> {
    let mut w = BufWriter::new(w);
    for e in g.edges() {
        let (a, b) = e.endpoints();
        match labels {
            Some(l) => writeln!(w, "{} {}", l[a], l[b])?,
            None => writeln!(w, "{a} {b}")?,
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c4() -> Graph {
        Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap()
    }

    fn p5() -> Graph {
        Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap()
    }

    #[test]
    fn c4_tie_breaks_to_min_id() {
        let g = c4();
        let tree = bfs_consistent(&g, 0, FaultSet::empty());
        assert_eq!(tree.parent(2), Some(1));
        assert_eq!(tree.depth(2), Some(2));
    }

    #[test]
    fn c4_fault_reroutes() {
        let g = c4();
        let tree = bfs_consistent(&g, 0, FaultSet::single(EdgeId::new(1, 2)));
        assert_eq!(tree.depth(2), Some(2));
        let p = tree.path_to(2).unwrap();
        assert_eq!(p.vertices(), &[0, 3, 2]);
    }

    #[test]
    fn p5_bridge_disconnects() {
        let g = p5();
        let tree = bfs_consistent(&g, 0, FaultSet::single(EdgeId::new(2, 3)));
        assert_eq!(tree.depth(4), None);
        assert_eq!(tree.depth(2), Some(2));
    }

    #[test]
    fn replacement_path_identity() {
        let g = c4();
        let p = replacement_path(&g, 1, 1, FaultSet::empty()).unwrap();
        assert_eq!(p.vertices(), &[1]);
        assert_eq!(p.len(), 0);
        assert_eq!(last_edge(&p), None);
    }

    #[test]
    fn replacement_path_c4() {
        let g = c4();
        let p = replacement_path(&g, 0, 2, FaultSet::single(EdgeId::new(1, 2))).unwrap();
        assert_eq!(p.vertices(), &[0, 3, 2]);
        assert_eq!(last_edge(&p), Some(EdgeId::new(2, 3)));
    }

    #[test]
    fn suffix_clamps() {
        let g = p5();
        let p = replacement_path(&g, 0, 4, FaultSet::empty()).unwrap();
        assert_eq!(suffix(&p, 2).edges(), &[EdgeId::new(2, 3), EdgeId::new(3, 4)]);
        assert_eq!(suffix(&p, 10).len(), 4);
        let single = replacement_path(&g, 3, 3, FaultSet::empty()).unwrap();
        assert!(suffix(&single, 4).is_empty());
    }

    #[test]
    fn dist_edge_vertex_examples() {
        let g = c4();
        assert_eq!(dist_edge_vertex(&g, EdgeId::new(0, 1), 2, FaultSet::empty()), Some(1));
        assert_eq!(dist_edge_vertex(&g, EdgeId::new(1, 2), 2, FaultSet::empty()), Some(0));
    }

    #[test]
    fn sample_extremes() {
        let g = p5();
        assert!(sample(&g, 0.0, 7).is_empty());
        assert_eq!(sample(&g, 1.0, 7), vec![0, 1, 2, 3, 4]);
        assert_eq!(sample(&g, 3.5, 7), vec![0, 1, 2, 3, 4]);
        assert_eq!(sample(&g, 0.5, 42), sample(&g, 0.5, 42));
    }

    #[test]
    fn sample_frequency() {
        let g = Graph::from_edges(20, (0..19).map(|i| (i, i + 1))).unwrap();
        let trials = 10_000;
        let mut counts = vec![0usize; 20];
        for t in 0..trials {
            for v in sample(&g, 0.5, t) {
                counts[v] += 1;
            }
        }
        for (v, c) in counts.iter().enumerate() {
            let freq = *c as f64 / trials as f64;
            assert!((freq - 0.5).abs() < 0.02, "vertex {v}: frequency {freq}");
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let text = "# a square\n10 20\n20 foo\nfoo 10\n";
        let (g, labels) = parse_edge_list(text).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.m(), 3);
        // labels are non-numeric ("foo"), so they sort lexicographically
        assert_eq!(labels, vec!["10", "20", "foo"]);
        let mut buf = Vec::new();
        write_edge_list(&g, Some(&labels), &mut buf).unwrap();
        let (g2, labels2) = parse_edge_list(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(labels, labels2);
        assert_eq!(g.edges(), g2.edges());
    }

    #[test]
    fn numeric_labels_sort_numerically() {
        let (g, labels) = parse_edge_list("2 10\n1 2\n").unwrap();
        assert_eq!(labels, vec!["1", "2", "10"]);
        assert!(g.has_edge(1, 2));
        assert!(g.has_edge(0, 1));
    }

    #[test]
    fn on_path_subtree_test() {
        let g = p5();
        let tree = bfs_consistent(&g, 0, FaultSet::empty());
        let e = EdgeId::new(1, 2);
        assert!(tree.on_path(e, 2));
        assert!(tree.on_path(e, 4));
        assert!(!tree.on_path(e, 1));
        assert!(!tree.on_path(e, 0));
    }

    #[test]
    fn induced_preserves_order() {
        let g = Graph::from_edges(6, [(0, 1), (1, 2), (3, 4), (4, 5)]).unwrap();
        let comps = g.components();
        assert_eq!(comps.len(), 2);
        let (sub, ids) = g.induced(&comps[1]);
        assert_eq!(ids, vec![3, 4, 5]);
        assert!(sub.has_edge(0, 1));
        assert!(sub.has_edge(1, 2));
    }
}
