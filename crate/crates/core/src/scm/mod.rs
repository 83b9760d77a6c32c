//! Synthetic structural causal models and the enumeration oracle.

pub mod expr;
pub mod mechanism;
pub mod oracle;
pub mod random;
pub mod spec;

pub use mechanism::{label_dataset, ClusterMechanism, ExprMechanism, FnMechanism, LabelLookup};
pub use oracle::{
    decomposition_check, ground_truth_all, ground_truth_effects, monte_carlo_effects, ClusterEffects,
    DecompositionReport, GroundTruthEffects, MonteCarloEffects, DEFAULT_ENUMERATION_CAP,
};
pub use random::{random_mechanism_expr, random_scm, RandomScm, RandomScmOptions};
pub use spec::{format_level, CompiledScm, Endogenous, Intervention, ScmSpec, Unit};
