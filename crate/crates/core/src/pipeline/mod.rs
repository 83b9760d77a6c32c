//! End-to-end runs: fair clustering, the five-method benchmark, SCM
//! simulation, and the files they write.

pub mod config;
pub mod output;
pub mod run;
pub mod simulate;

pub use config::RunConfig;
pub use output::{read_assignment, write_assignment, write_benchmark, write_run};
pub use run::{run_algorithm1, run_benchmark, run_method, Benchmark, Method, RunOutput};
pub use simulate::{run_simulate, simulate_spec, GroundTruth};
