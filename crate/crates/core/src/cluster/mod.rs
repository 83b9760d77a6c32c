//! Mixed-data clustering and the balanced baseline.

pub mod balanced;
pub mod features;
pub mod kproto;
pub mod mechanism;

pub use balanced::{balanced_fit, BalancedModel};
pub use features::FeatureMatrix;
pub use mechanism::ModelMechanism;
pub use kproto::{kprototypes_fit, Assignment, ClusterModel, Prototype};
