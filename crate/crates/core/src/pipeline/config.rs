use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::schema::{EffectFlags, DEFAULT_BINS};
use crate::error::{Error, Result};
use crate::metrics::BootstrapConfig;
use crate::rng::derive_seed;

/// Everything a pipeline run depends on. Written next to every output as
/// `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub flags: EffectFlags,
    pub k: usize,
    /// Categorical mismatch weight; `None` picks it from the data.
    pub gamma: Option<f64>,
    pub seed: u64,
    pub n_inner: usize,
    pub n_outer: usize,
    pub bins: usize,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            schema: None,
            flags: EffectFlags::ALL,
            k: 2,
            gamma: None,
            seed: 0,
            n_inner: 100,
            n_outer: 5,
            bins: DEFAULT_BINS,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.n_inner < 1 || self.n_outer < 1 {
            return Err(Error::Config("n_inner and n_outer must be at least 1".into()));
        }
        if self.bins < 1 {
            return Err(Error::Config("bins must be at least 1".into()));
        }
        if let Some(g) = self.gamma {
            if !(g.is_finite() && g >= 0.0) {
                return Err(Error::Config(format!("gamma must be a finite non-negative number, got {g}")));
            }
        }
        Ok(())
    }

    pub fn transport_seed(&self) -> u64 {
        derive_seed(self.seed, &[1])
    }

    /// Clustering uses the run seed itself, so a run without adjustments
    /// reproduces a direct clustering call.
    pub fn cluster_seed(&self) -> u64 {
        self.seed
    }

    pub fn bootstrap(&self) -> BootstrapConfig {
        BootstrapConfig {
            n_inner: self.n_inner,
            n_outer: self.n_outer,
            seed: derive_seed(self.seed, &[3]),
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
