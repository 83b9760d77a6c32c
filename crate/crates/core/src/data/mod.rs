//! Schemas, datasets, CSV ingestion and the shared probability tables.

pub mod cells;
pub mod csv_io;
pub mod dataset;
pub mod discretize;
pub mod prob;
pub mod schema;

pub use cells::{Residuals, Smoothing};
pub use csv_io::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use dataset::{Column, Dataset, Value};
pub use discretize::Discretizer;
pub use prob::{empirical_conditional, empirical_marginal, ProbTable};
pub use schema::{ColumnSpec, EffectFlags, Kind, Role, SfmSchema};
