//! Attribute-graph structural properties on random edge sets.

use std::collections::BTreeSet;

use proptest::prelude::*;
use rulemap_core::graph::{build_attribute_graph, GraphError, NodeRole};
use rulemap_core::rules::SimpleRule;
use rulemap_core::AttributeToken;

fn token(id: u8) -> AttributeToken {
    AttributeToken::new(format!("n{id}")).unwrap()
}

fn edge(from: u8, to: u8) -> SimpleRule {
    SimpleRule {
        antecedent: token(from),
        consequent: token(to),
        lift: 1.0 + from as f64 / 10.0,
    }
}

fn edge_set_strategy() -> impl Strategy<Value = Vec<(u8, u8)>> {
    proptest::collection::btree_set((0u8..10, 0u8..10), 1..25).prop_map(|set| {
        set.into_iter()
            .filter(|(from, to)| from != to)
            .collect::<Vec<_>>()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn distinct_edges_are_all_kept_and_roles_partition(pairs in edge_set_strategy()) {
        prop_assume!(!pairs.is_empty());
        let rules: Vec<SimpleRule> = pairs.iter().map(|&(f, t)| edge(f, t)).collect();
        match build_attribute_graph(rules) {
            Ok(graph) => {
                // M equals the number of distinct simple rules, and the
                // outdegrees sum to M.
                prop_assert_eq!(graph.edge_count(), pairs.len());
                let outdegree_sum: usize = (0..graph.node_count())
                    .map(|id| graph.out_degree_of_id(id))
                    .sum();
                prop_assert_eq!(outdegree_sum, graph.edge_count());

                // Every node has exactly one role and the partition is total.
                let (sources, intern, sinks) = graph.role_counts();
                prop_assert_eq!(sources + intern + sinks, graph.node_count());
                prop_assert!(sources >= 1 && sinks >= 1);
                for id in 0..graph.node_count() {
                    let role = graph.role_of_id(id);
                    let indeg = graph.in_degree_of_id(id);
                    let outdeg = graph.out_degree_of_id(id);
                    match role {
                        NodeRole::Source => prop_assert!(indeg == 0 && outdeg > 0),
                        NodeRole::Sink => prop_assert!(outdeg == 0 && indeg > 0),
                        NodeRole::Intern => prop_assert!(indeg > 0 && outdeg > 0),
                    }
                }
            }
            Err(GraphError::NoSource) => {
                // Verify by hand: every node with out-edges also has in-edges.
                let with_out: BTreeSet<u8> = pairs.iter().map(|&(f, _)| f).collect();
                let with_in: BTreeSet<u8> = pairs.iter().map(|&(_, t)| t).collect();
                prop_assert!(with_out.is_subset(&with_in));
            }
            Err(GraphError::NoSink) => {
                let with_out: BTreeSet<u8> = pairs.iter().map(|&(f, _)| f).collect();
                let with_in: BTreeSet<u8> = pairs.iter().map(|&(_, t)| t).collect();
                prop_assert!(with_in.is_subset(&with_out));
            }
            Err(other) => prop_assert!(false, "unexpected graph error {other:?}"),
        }
    }

    /// Rebuilding from a shuffled copy yields an isomorphic graph: same node
    /// set, same edge set, same role per node.
    #[test]
    fn shuffled_rebuild_is_isomorphic(pairs in edge_set_strategy(), rotation in 0usize..24) {
        prop_assume!(!pairs.is_empty());
        let rules: Vec<SimpleRule> = pairs.iter().map(|&(f, t)| edge(f, t)).collect();
        let Ok(original) = build_attribute_graph(rules.clone()) else { return Ok(()) };

        let mut shuffled = rules;
        let len = shuffled.len();
        shuffled.rotate_left(rotation % len);
        let rebuilt = build_attribute_graph(shuffled).unwrap();

        let node_set = |g: &rulemap_core::graph::AttributeGraph| -> BTreeSet<AttributeToken> {
            g.nodes().iter().cloned().collect()
        };
        prop_assert_eq!(node_set(&original), node_set(&rebuilt));
        prop_assert_eq!(original.edge_count(), rebuilt.edge_count());
        prop_assert_eq!(original.role_counts(), rebuilt.role_counts());
        for node in original.nodes() {
            prop_assert_eq!(original.role(node), rebuilt.role(node));
        }
        let edge_set = |g: &rulemap_core::graph::AttributeGraph| -> BTreeSet<(String, String)> {
            g.edges()
                .iter()
                .map(|e| (e.antecedent.to_string(), e.consequent.to_string()))
                .collect()
        };
        prop_assert_eq!(edge_set(&original), edge_set(&rebuilt));
    }
}
