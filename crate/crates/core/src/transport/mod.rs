//! Optimal-transport adaptation of confounders and mediators.

pub mod categorical;
pub mod plan;
pub mod quantile;

pub use categorical::CategoricalMap;
pub use plan::{apply_plan, fit_and_apply, fit_plan, ApplyStats, CellMap, ColumnMap, ConditionalMap, TransportPlan};
pub use quantile::QuantileMap;
