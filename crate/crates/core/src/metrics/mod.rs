//! Causal fairness metrics of a cluster assignment.

pub mod bootstrap;
pub mod estimate;
pub mod report;
pub(crate) mod tables;

pub use bootstrap::{bootstrap, BootstrapConfig};
pub use estimate::{
    estimate_exp_se, estimate_nde, estimate_nie, estimate_tv, exp_se_bound, nie_bound, Audit, Effect, EffectEstimate,
};
pub use report::{full_report, write_tidy_csv, ClusterReport, EffectReport, ReportSpec, TidyRow};
pub use tables::Effects;
