//! Metro maps of association-rule information.
//!
//! The pipeline turns a transaction dataset into a metro-map diagram in five
//! stages: mine association rules ([`apriori`]), filter and simplify them into
//! single-antecedent/single-consequent edges ([`rules`]), assemble the directed
//! attribute graph ([`graph`]), select a constrained set of high-lift,
//! mutually diverse source-to-sink paths with an evolutionary algorithm
//! ([`ea`] over the objectives in [`metromap`]), and draw the result
//! ([`render`]).
//!
//! All rule measures (support, confidence, lift) are computed as exact
//! rationals over transaction counts; floating point enters only where the
//! map objective and the output formats need it.

pub mod apriori;
pub mod ea;
pub mod graph;
pub mod metromap;
pub mod render;
pub mod rules;
pub mod transactions;

pub use transactions::{AttributeToken, Rational, TransactionDB};
