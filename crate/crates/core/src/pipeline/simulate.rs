use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scm::{ground_truth_all, DecompositionReport, ExprMechanism, ScmSpec, DEFAULT_ENUMERATION_CAP};

/// Exact effects of every probe mechanism of an SCM spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub description: String,
    pub n: usize,
    pub seed: u64,
    pub p_x1: f64,
    /// The NIE subscript order under which TV = NDE − NIE + Exp-SE holds.
    pub convention: String,
    pub probes: BTreeMap<String, Vec<DecompositionReport>>,
}

impl GroundTruth {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }
}

pub fn simulate_spec(spec: &ScmSpec, n: usize, seed: u64) -> Result<(Dataset, GroundTruth)> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    let scm = spec.compile()?;
    let d = scm.sample(n, seed)?;
    let mut probes = BTreeMap::new();
    let mut p_x1 = f64::NAN;
    for name in spec.probes.keys() {
        let f = ExprMechanism::probe(spec, name)?;
        let truth = ground_truth_all(&scm, &f, DEFAULT_ENUMERATION_CAP)?;
        p_x1 = truth.p_x1;
        probes.insert(name.clone(), truth.clusters.iter().map(DecompositionReport::from_effects).collect());
    }
    Ok((
        d,
        GroundTruth {
            description: spec.description.clone(),
            n,
            seed,
            p_x1,
            convention: "x1,x0".into(),
            probes,
        },
    ))
}

/// Samples `n` rows from the SCM spec at `spec_path` and computes the
/// ground truth of its probes.
pub fn run_simulate(spec_path: impl AsRef<Path>, n: usize, seed: u64) -> Result<(Dataset, GroundTruth)> {
    simulate_spec(&ScmSpec::from_json_file(spec_path)?, n, seed)
}
