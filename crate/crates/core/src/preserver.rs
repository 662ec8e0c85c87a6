//! Output subgraphs with per-edge provenance: which construction rule
//! contributed each edge. Serialized as the shared edge-list format plus a
//! JSON sidecar mapping edges to rule tags.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::graph::{EdgeId, Graph, GraphError, VertexId};

/// Construction rule that first contributed an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    /// BFS tree of a requested source.
    SourceTree,
    /// BFS tree of a sampled vertex.
    SampleTree,
    /// Last edge recorded by a truncated single-fault BFS token.
    TokenParent,
    /// Last edge recorded by a dual-fault BFS token.
    DualToken,
    /// Last edge of an enumerated single-fault replacement path.
    LastEdgeSingle,
    /// Last edge of an enumerated dual-fault replacement path.
    LastEdgeDual,
    /// Single-fault preserver built w.r.t. a sampled source set.
    FtSample,
    /// Edge incident to a low-degree vertex in a spanner.
    SpannerLowDegree,
    /// Representative edge from a high-degree vertex into the source set.
    SpannerRepresentative,
    /// All edges of a high-degree vertex that lacked enough sampled neighbors.
    SpannerFallback,
}

impl Rule {
    pub fn as_str(&self) -> &'static str {
        match self {
            Rule::SourceTree => "source_tree",
            Rule::SampleTree => "sample_tree",
            Rule::TokenParent => "token_parent",
            Rule::DualToken => "dual_token",
            Rule::LastEdgeSingle => "last_edge_single",
            Rule::LastEdgeDual => "last_edge_dual",
            Rule::FtSample => "ft_sample",
            Rule::SpannerLowDegree => "spanner_low_degree",
            Rule::SpannerRepresentative => "spanner_representative",
            Rule::SpannerFallback => "spanner_fallback",
        }
    }
}

/// Edge subset of a host graph, each edge tagged with the rule that first
/// added it. Insertion order decides the tag; later rules never overwrite.
#[derive(Clone, Debug, Default)]
pub struct PreserverSubgraph {
    n: usize,
    edges: BTreeMap<EdgeId, Rule>,
}

impl PreserverSubgraph {
    pub fn new(n: usize) -> Self {
        PreserverSubgraph { n, edges: BTreeMap::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn insert(&mut self, e: EdgeId, rule: Rule) {
        self.edges.entry(e).or_insert(rule);
    }

    pub fn insert_all<I: IntoIterator<Item = EdgeId>>(&mut self, edges: I, rule: Rule) {
        for e in edges {
            self.insert(e, rule);
        }
    }

    /// Merges `other` in, keeping existing tags and remapping new ones.
    pub fn merge_retagged(&mut self, other: &PreserverSubgraph, rule: Rule) {
        for e in other.edges.keys() {
            self.insert(*e, rule);
        }
    }

    pub fn merge(&mut self, other: &PreserverSubgraph) {
        for (e, r) in &other.edges {
            self.insert(*e, *r);
        }
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.edges.contains_key(&e)
    }

    pub fn rule_of(&self, e: EdgeId) -> Option<Rule> {
        self.edges.get(&e).copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.edges.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EdgeId, Rule)> + '_ {
        self.edges.iter().map(|(e, r)| (*e, *r))
    }

    pub fn count_by_rule(&self) -> BTreeMap<Rule, usize> {
        let mut out = BTreeMap::new();
        for r in self.edges.values() {
            *out.entry(*r).or_insert(0) += 1;
        }
        out
    }

    /// Materializes the subgraph for distance queries.
    pub fn to_graph(&self) -> Result<Graph, GraphError> {
        Graph::from_edges(self.n, self.edges.keys().map(|e| e.endpoints()))
    }

    /// Validates containment in the host graph.
    pub fn check_subgraph_of(&self, g: &Graph) -> Result<(), GraphError> {
        for e in self.edges.keys() {
            if !g.contains_edge(*e) {
                return Err(GraphError::MissingEdge(*e));
            }
        }
        Ok(())
    }

    pub fn write_edge_list(
        &self,
        labels: Option<&[String]>,
        w: &mut impl Write,
    ) -> std::io::Result<()> {
        for e in self.edges.keys() {
            let (a, b) = e.endpoints();
            match labels {
                Some(l) => writeln!(w, "{} {}", l[a], l[b])?,
                None => writeln!(w, "{a} {b}")?,
            }
        }
        Ok(())
    }

    /// Provenance sidecar: edge -> rule tag, with the label mapping when the
    /// input used non-dense names.
    pub fn sidecar(&self, labels: Option<&[String]>) -> Sidecar {
        Sidecar {
            n: self.n,
            labels: labels.map(|l| l.to_vec()),
            edges: self
                .edges
                .iter()
                .map(|(e, r)| SidecarEdge {
                    u: e.lo(),
                    v: e.hi(),
                    rule: r.as_str().to_string(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SidecarEdge {
    pub u: VertexId,
    pub v: VertexId,
    pub rule: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub edges: Vec<SidecarEdge>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_rule_wins() {
        let mut h = PreserverSubgraph::new(4);
        let e = EdgeId::new(0, 1);
        h.insert(e, Rule::SourceTree);
        h.insert(e, Rule::TokenParent);
        assert_eq!(h.rule_of(e), Some(Rule::SourceTree));
        assert_eq!(h.len(), 1);
    }

    #[test]
    fn sidecar_is_sorted_and_stable() {
        let mut h = PreserverSubgraph::new(4);
        h.insert(EdgeId::new(2, 3), Rule::SampleTree);
        h.insert(EdgeId::new(0, 1), Rule::SourceTree);
        let sc = h.sidecar(None);
        assert_eq!(sc.edges[0].u, 0);
        assert_eq!(sc.edges[1].rule, "sample_tree");
        let json = serde_json::to_string(&sc).unwrap();
        assert_eq!(json, serde_json::to_string(&h.sidecar(None)).unwrap());
    }
}
