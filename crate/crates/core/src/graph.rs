//! The directed attribute graph: nodes are attribute tokens, edges are
//! lift-weighted simple rules, and every node is a source, intern or sink.
//!
//! Self-loops are banned; longer cycles among intern nodes are allowed, so
//! path generators must guard against revisiting nodes themselves.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::SimpleRule;
use crate::transactions::AttributeToken;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeRole {
    /// Indegree 0, outdegree > 0: eligible starting stop.
    Source,
    /// Indegree > 0 and outdegree > 0: intermediate stop.
    Intern,
    /// Outdegree 0, indegree > 0: eligible final stop.
    Sink,
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeRole::Source => "source",
            NodeRole::Intern => "intern",
            NodeRole::Sink => "sink",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("rule {0} => {0} is a self-loop")]
    SelfLoop(AttributeToken),
    #[error("graph has no source node (indegree 0); metro lines cannot start")]
    NoSource,
    #[error("graph has no sink node (outdegree 0); metro lines cannot end")]
    NoSink,
    #[error("node {0} is not in the graph")]
    UnknownNode(AttributeToken),
    #[error("graph document is inconsistent: {0}")]
    InconsistentDocument(String),
}

/// Immutable after construction; concurrent reads are safe.
#[derive(Debug, Clone)]
pub struct AttributeGraph {
    nodes: Vec<AttributeToken>,
    node_index: HashMap<AttributeToken, usize>,
    edges: Vec<SimpleRule>,
    edge_endpoints: Vec<(usize, usize)>,
    /// Per node, edge indices sorted by consequent node id.
    out_edges: Vec<Vec<usize>>,
    in_degree: Vec<usize>,
    roles: Vec<NodeRole>,
    adjacency: Vec<bool>,
}

/// Builds the graph from deduplicated simple rules: nodes in first-appearance
/// order, parallel duplicate edges collapsed keeping the first, roles
/// assigned from degrees.
pub fn build_attribute_graph(rules: Vec<SimpleRule>) -> Result<AttributeGraph, GraphError> {
    let mut nodes: Vec<AttributeToken> = Vec::new();
    let mut node_index: HashMap<AttributeToken, usize> = HashMap::new();
    let mut intern = |token: &AttributeToken, nodes: &mut Vec<AttributeToken>| -> usize {
        if let Some(&idx) = node_index.get(token) {
            return idx;
        }
        let idx = nodes.len();
        nodes.push(token.clone());
        node_index.insert(token.clone(), idx);
        idx
    };

    let mut edges: Vec<SimpleRule> = Vec::new();
    let mut endpoint_pairs: Vec<(usize, usize)> = Vec::new();
    let mut seen_pairs: std::collections::HashSet<(usize, usize)> =
        std::collections::HashSet::new();
    for rule in rules {
        if rule.antecedent == rule.consequent {
            return Err(GraphError::SelfLoop(rule.antecedent));
        }
        let from = intern(&rule.antecedent, &mut nodes);
        let to = intern(&rule.consequent, &mut nodes);
        if !seen_pairs.insert((from, to)) {
            continue;
        }
        endpoint_pairs.push((from, to));
        edges.push(rule);
    }

    let n = nodes.len();
    let mut adjacency = vec![false; n * n];
    let mut out_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut in_degree = vec![0usize; n];
    for (edge_idx, &(from, to)) in endpoint_pairs.iter().enumerate() {
        adjacency[from * n + to] = true;
        out_edges[from].push(edge_idx);
        in_degree[to] += 1;
    }
    for edge_list in out_edges.iter_mut() {
        edge_list.sort_by_key(|&e| endpoint_pairs[e].1);
    }

    // Nodes exist only as edge endpoints, so indegree 0 and outdegree 0
    // cannot coincide and the role partition is total.
    let roles: Vec<NodeRole> = (0..n)
        .map(|i| match (in_degree[i], out_edges[i].len()) {
            (0, _) => NodeRole::Source,
            (_, 0) => NodeRole::Sink,
            _ => NodeRole::Intern,
        })
        .collect();
    if !roles.contains(&NodeRole::Source) {
        return Err(GraphError::NoSource);
    }
    if !roles.contains(&NodeRole::Sink) {
        return Err(GraphError::NoSink);
    }

    Ok(AttributeGraph {
        nodes,
        node_index,
        edges,
        edge_endpoints: endpoint_pairs,
        out_edges,
        in_degree,
        roles,
        adjacency,
    })
}

impl AttributeGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[AttributeToken] {
        &self.nodes
    }

    pub fn edges(&self) -> &[SimpleRule] {
        &self.edges
    }

    pub fn node_id(&self, token: &AttributeToken) -> Option<usize> {
        self.node_index.get(token).copied()
    }

    pub fn role(&self, token: &AttributeToken) -> Option<NodeRole> {
        self.node_id(token).map(|i| self.roles[i])
    }

    pub fn role_of_id(&self, id: usize) -> NodeRole {
        self.roles[id]
    }

    pub fn adjacency(&self, from: usize, to: usize) -> bool {
        self.adjacency[from * self.nodes.len() + to]
    }

    pub fn in_degree_of_id(&self, id: usize) -> usize {
        self.in_degree[id]
    }

    pub fn out_degree_of_id(&self, id: usize) -> usize {
        self.out_edges[id].len()
    }

    /// Edges leaving the node, in stable node order of their consequents.
    pub fn out_neighbors(&self, node: &AttributeToken) -> Result<Vec<&SimpleRule>, GraphError> {
        let id = self
            .node_id(node)
            .ok_or_else(|| GraphError::UnknownNode(node.clone()))?;
        Ok(self.out_edges_of_id(id))
    }

    pub(crate) fn out_edges_of_id(&self, id: usize) -> Vec<&SimpleRule> {
        self.out_edges[id].iter().map(|&e| &self.edges[e]).collect()
    }

    /// Out-edges of a node as (consequent node id, edge) pairs, in stable
    /// node order.
    pub(crate) fn out_edge_targets(&self, id: usize) -> Vec<(usize, &SimpleRule)> {
        self.out_edges[id]
            .iter()
            .map(|&e| (self.edge_endpoints[e].1, &self.edges[e]))
            .collect()
    }

    /// Whether the exact edge (same endpoints) is part of the graph.
    pub fn has_edge(&self, antecedent: &AttributeToken, consequent: &AttributeToken) -> bool {
        match (self.node_id(antecedent), self.node_id(consequent)) {
            (Some(from), Some(to)) => self.adjacency(from, to),
            _ => false,
        }
    }

    pub fn sources(&self) -> Vec<&AttributeToken> {
        self.nodes_with_role(NodeRole::Source)
    }

    pub fn sinks(&self) -> Vec<&AttributeToken> {
        self.nodes_with_role(NodeRole::Sink)
    }

    fn nodes_with_role(&self, role: NodeRole) -> Vec<&AttributeToken> {
        self.nodes
            .iter()
            .zip(&self.roles)
            .filter(|(_, r)| **r == role)
            .map(|(n, _)| n)
            .collect()
    }

    /// (source, intern, sink) counts.
    pub fn role_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for role in &self.roles {
            match role {
                NodeRole::Source => counts.0 += 1,
                NodeRole::Intern => counts.1 += 1,
                NodeRole::Sink => counts.2 += 1,
            }
        }
        counts
    }

    /// Diagnostic DOT rendering of the whole graph.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph attributes {\n  rankdir=LR;\n");
        for (node, role) in self.nodes.iter().zip(&self.roles) {
            let shape = match role {
                NodeRole::Source => "invhouse",
                NodeRole::Intern => "ellipse",
                NodeRole::Sink => "house",
            };
            out.push_str(&format!(
                "  {} [shape={shape}];\n",
                dot_quote(node.as_str())
            ));
        }
        for edge in &self.edges {
            out.push_str(&format!(
                "  {} -> {} [label=\"{:.3}\"];\n",
                dot_quote(edge.antecedent.as_str()),
                dot_quote(edge.consequent.as_str()),
                edge.lift,
            ));
        }
        out.push_str("}\n");
        out
    }

    pub fn to_json(&self) -> String {
        let doc = GraphDoc {
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            roles: self
                .nodes
                .iter()
                .zip(&self.roles)
                .map(|(n, r)| (n.clone(), *r))
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("graph document serializes")
    }

    /// Parses [`AttributeGraph::to_json`] output, rebuilding the graph from its edges and
    /// cross-checking the recorded node list and roles.
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let doc: GraphDoc = serde_json::from_str(text)
            .map_err(|e| GraphError::InconsistentDocument(e.to_string()))?;
        let graph = build_attribute_graph(doc.edges)?;
        if graph.nodes != doc.nodes {
            return Err(GraphError::InconsistentDocument(
                "node list does not match the edges".into(),
            ));
        }
        for (node, role) in &doc.roles {
            if graph.role(node) != Some(*role) {
                return Err(GraphError::InconsistentDocument(format!(
                    "recorded role of {node} does not match the edges"
                )));
            }
        }
        Ok(graph)
    }
}

pub(crate) fn dot_quote(text: &str) -> String {
    format!("\"{}\"", text.replace('\\', "\\\\").replace('"', "\\\""))
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    nodes: Vec<AttributeToken>,
    edges: Vec<SimpleRule>,
    roles: BTreeMap<AttributeToken, NodeRole>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn token(text: &str) -> AttributeToken {
        AttributeToken::new(text).unwrap()
    }

    fn edge(a: &str, c: &str) -> SimpleRule {
        SimpleRule {
            antecedent: token(a),
            consequent: token(c),
            lift: 1.0,
        }
    }

    #[test]
    fn chain_roles() {
        let graph = build_attribute_graph(vec![edge("a", "b"), edge("b", "c")]).unwrap();
        assert_eq!(graph.node_count(), 3);
        assert_eq!(graph.edge_count(), 2);
        assert_eq!(graph.role(&token("a")), Some(NodeRole::Source));
        assert_eq!(graph.role(&token("b")), Some(NodeRole::Intern));
        assert_eq!(graph.role(&token("c")), Some(NodeRole::Sink));
        assert_eq!(graph.role_counts(), (1, 1, 1));
    }

    #[test]
    fn pure_cycle_has_no_source() {
        let err = build_attribute_graph(vec![edge("a", "b"), edge("b", "a")]).unwrap_err();
        assert_eq!(err, GraphError::NoSource);
    }

    #[test]
    fn self_loop_is_rejected() {
        let err = build_attribute_graph(vec![edge("a", "a")]).unwrap_err();
        assert_eq!(err, GraphError::SelfLoop(token("a")));
    }

    #[test]
    fn duplicate_edges_collapse_keeping_first() {
        let mut dup = edge("a", "b");
        dup.lift = 9.0;
        let graph = build_attribute_graph(vec![edge("a", "b"), dup, edge("b", "c")]).unwrap();
        assert_eq!(graph.edge_count(), 2);
        assert_eq!(graph.out_neighbors(&token("a")).unwrap()[0].lift, 1.0);
    }

    #[test]
    fn out_neighbors_in_node_order() {
        let graph = build_attribute_graph(vec![
            edge("a", "c"),
            edge("a", "b"),
            edge("b", "d"),
            edge("c", "d"),
        ])
        .unwrap();
        // Node order is first appearance: a, c, b, d — so a's edges list c
        // before b.
        let neighbors = graph.out_neighbors(&token("a")).unwrap();
        assert_eq!(neighbors.len(), 2);
        assert_eq!(neighbors[0].consequent, token("c"));
        assert_eq!(neighbors[1].consequent, token("b"));

        assert!(graph.out_neighbors(&token("d")).unwrap().is_empty());
        assert_eq!(
            graph.out_neighbors(&token("zz")).unwrap_err(),
            GraphError::UnknownNode(token("zz"))
        );
    }

    #[test]
    fn adjacency_has_no_diagonal() {
        let graph = build_attribute_graph(vec![edge("a", "b"), edge("b", "c")]).unwrap();
        for i in 0..graph.node_count() {
            assert!(!graph.adjacency(i, i));
        }
        assert!(graph.has_edge(&token("a"), &token("b")));
        assert!(!graph.has_edge(&token("b"), &token("a")));
    }

    #[test]
    fn json_round_trip() {
        let graph =
            build_attribute_graph(vec![edge("a", "b"), edge("b", "c"), edge("a", "c")]).unwrap();
        let text = graph.to_json();
        let reloaded = AttributeGraph::from_json(&text).unwrap();
        assert_eq!(reloaded.nodes(), graph.nodes());
        assert_eq!(reloaded.edge_count(), graph.edge_count());
        assert_eq!(reloaded.to_json(), text);
    }
}
