//! Apriori checked against powerset brute force on small databases.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rulemap_core::apriori::{
    generate_rules, mine_frequent_itemsets, write_rules, MiningThresholds,
};
use rulemap_core::transactions::{Itemset, Rational, TransactionDB};
use rulemap_core::AttributeToken;

fn token(id: u8) -> AttributeToken {
    AttributeToken::new(format!("t{id}")).unwrap()
}

fn to_itemset(ids: &BTreeSet<u8>) -> Itemset {
    ids.iter().map(|&id| token(id)).collect()
}

fn build_db(raw: &[BTreeSet<u8>]) -> TransactionDB {
    TransactionDB::from_transactions(raw.iter().map(to_itemset).collect()).unwrap()
}

fn naive_count(raw: &[BTreeSet<u8>], items: &BTreeSet<u8>) -> u64 {
    raw.iter().filter(|t| items.is_subset(t)).count() as u64
}

/// Oracle: enumerate every non-empty subset of the universe and keep the
/// frequent ones, counting support by scanning.
fn brute_force_frequent(
    raw: &[BTreeSet<u8>],
    min_support: Rational,
) -> BTreeMap<Itemset, Rational> {
    let universe: Vec<u8> = raw
        .iter()
        .flat_map(|t| t.iter().copied())
        .collect::<BTreeSet<u8>>()
        .into_iter()
        .collect();
    let n = raw.len() as u64;
    let mut out = BTreeMap::new();
    for mask in 1u32..(1 << universe.len()) {
        let items: BTreeSet<u8> = universe
            .iter()
            .enumerate()
            .filter(|(pos, _)| mask & (1 << pos) != 0)
            .map(|(_, &id)| id)
            .collect();
        let support = Rational::new(naive_count(raw, &items), n);
        if support >= min_support {
            out.insert(to_itemset(&items), support);
        }
    }
    out
}

/// Oracle: every (antecedent, consequent) split of every frequent itemset
/// whose confidence clears the threshold.
fn brute_force_rules(
    raw: &[BTreeSet<u8>],
    min_support: Rational,
    min_confidence: Rational,
) -> BTreeSet<(Itemset, Itemset, Rational, Rational)> {
    let frequent = brute_force_frequent(raw, min_support);
    let n = raw.len() as u64;
    let mut out = BTreeSet::new();
    for itemset in frequent.keys() {
        if itemset.len() < 2 {
            continue;
        }
        let items: Vec<&AttributeToken> = itemset.iter().collect();
        let raw_items: BTreeSet<u8> = items
            .iter()
            .map(|t| t.as_str()[1..].parse::<u8>().unwrap())
            .collect();
        let union_count = naive_count(raw, &raw_items);
        for mask in 1u32..(1 << items.len()) - 1 {
            let mut ante_ids = BTreeSet::new();
            let mut ante = Itemset::new();
            let mut cons = Itemset::new();
            for (pos, item) in items.iter().enumerate() {
                if mask & (1 << pos) != 0 {
                    ante.insert((*item).clone());
                    ante_ids.insert(item.as_str()[1..].parse::<u8>().unwrap());
                } else {
                    cons.insert((*item).clone());
                }
            }
            let confidence = Rational::new(union_count, naive_count(raw, &ante_ids));
            if confidence >= min_confidence {
                out.insert((ante, cons, Rational::new(union_count, n), confidence));
            }
        }
    }
    out
}

fn db_strategy() -> impl Strategy<Value = Vec<BTreeSet<u8>>> {
    proptest::collection::vec(proptest::collection::btree_set(0u8..8, 0..=6), 1..30)
}

fn threshold_strategy() -> impl Strategy<Value = Rational> {
    (1u64..=5, 2u64..=5).prop_map(|(n, d)| Rational::new(n.min(d), d))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn frequent_itemsets_match_brute_force(
        raw in db_strategy(),
        min_support in threshold_strategy(),
    ) {
        let db = build_db(&raw);
        let mined = mine_frequent_itemsets(&db, min_support);
        prop_assert_eq!(mined, brute_force_frequent(&raw, min_support));
    }

    #[test]
    fn rules_match_brute_force(
        raw in db_strategy(),
        min_support in threshold_strategy(),
        min_confidence in threshold_strategy(),
    ) {
        let db = build_db(&raw);
        let thresholds = MiningThresholds::new(min_support, min_confidence).unwrap();
        let frequent = mine_frequent_itemsets(&db, min_support);
        let mined: BTreeSet<(Itemset, Itemset, Rational, Rational)> =
            generate_rules(&frequent, &db, &thresholds)
                .into_iter()
                .map(|r| (r.antecedents, r.consequents, r.support, r.confidence))
                .collect();
        prop_assert_eq!(mined, brute_force_rules(&raw, min_support, min_confidence));
    }

    #[test]
    fn mining_is_deterministic(
        raw in db_strategy(),
        min_support in threshold_strategy(),
        min_confidence in threshold_strategy(),
    ) {
        let db = build_db(&raw);
        let thresholds = MiningThresholds::new(min_support, min_confidence).unwrap();
        let first = write_rules(&generate_rules(
            &mine_frequent_itemsets(&db, min_support),
            &db,
            &thresholds,
        ));
        let second = write_rules(&generate_rules(
            &mine_frequent_itemsets(&db, min_support),
            &db,
            &thresholds,
        ));
        prop_assert_eq!(first, second);
    }
}
