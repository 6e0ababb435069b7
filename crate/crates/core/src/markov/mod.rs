//! Continuous-time chains of group conversation: who talks with whom, what
//! they talk about, and how the theme wanders.

pub mod conversation;
pub mod ctmc;
pub mod partition;
pub mod theme;
pub mod tree;

pub use conversation::{closed_form_stationary, conversation_chain, unit_conversation_chain};
pub use ctmc::{
    characteristic_polynomial, closed_classes, eigenvalues, solve_ctmc, stationary, trajectory, ChainDoc, EdgeDoc,
    RateMatrix,
};
pub use partition::{
    build_partition_chain, enumerate_agreed_partitions, Mark, MarkedPartition, NeighborFn, Partition, RateSpec,
    UniformRates,
};
pub use theme::{theme_distribution, theme_probability, Preferences, ThemeWeights};
pub use tree::{tree_transition, tree_walk_ctmc, SemanticTree, TreeDoc};
