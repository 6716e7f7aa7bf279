//! Probabilistic circuits (sum-product networks) learned from tabular data.
//!
//! Two structure learners share one recursive engine:
//!
//! * [`learner::learn_spn`] partitions instances with *hard* clusters, sending
//!   every row down exactly one child of each sum node.
//! * [`learner::soft_learn`] partitions instances with *soft* memberships; every
//!   row reaches every child of a sum node, carrying a weight equal to the
//!   product of its responsibilities along the path.
//!
//! Learned models are [`circuit::Circuit`]s: smooth and decomposable DAGs of
//! sum, product and univariate leaf nodes that support exact log-densities,
//! marginals over intervals, ancestral sampling and a JSON model file.
//!
//! Module map:
//!
//! | module | contents |
//! |--------|----------|
//! | [`circuit`] | node table, validation, evaluation, sampling, model files |
//! | [`estimators`] | weighted multinomial / Gaussian leaf fitting |
//! | [`independence`] | weighted chi-square tests and scope partitioning |
//! | [`clustering`] | weighted soft k-means, weighted EM, hardening |
//! | [`learner`] | LearnSPN and SoftLearn, alternative-circuit likelihood trace |
//! | [`data`] | schemas, tables, benchmark loaders, standardization |

pub mod circuit;
pub mod clustering;
pub mod data;
pub mod estimators;
pub mod independence;
pub mod learner;
pub mod math;

pub use circuit::{Circuit, CircuitBuilder, CircuitError, Evidence, Node, NodeId, Query, Violation};
pub use clustering::{em_factorized, harden, soft_kmeans, FactorizedMixture, Membership};
pub use data::{DataError, DatasetBundle, Schema, Table, VarKind, Variable, WeightedDataset};
pub use estimators::{fit_gaussian, fit_multinomial, Gaussian, LeafDist, Multinomial, WeightedColumn};
pub use independence::{partition_scope, weighted_chi2, Chi2Test, ContingencyTable};
pub use learner::{learn_spn, soft_learn, ClustererKind, Hyperparams, LearnError, LearnTrace, Learned, Method};
