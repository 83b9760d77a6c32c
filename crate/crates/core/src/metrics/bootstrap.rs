//! Two-stage bootstrap: inner replicates resample rows for the outcome
//! tables, outer replicates resample rows for the covariate weights.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::kproto::Assignment;
use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::estimate::{Audit, Effect, EffectEstimate};
use crate::metrics::tables::{raw_outcome, Effects};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub n_inner: usize,
    pub n_outer: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_inner: 100,
            n_outer: 5,
            seed: 0,
        }
    }
}

/// Row multiplicities of a uniform resample with replacement.
fn resample(n: usize, seed: u64) -> Vec<u32> {
    let mut rng = rng::stream(seed, &[]);
    let mut w = vec![0u32; n];
    for _ in 0..n {
        w[rng.gen_range(0..n)] += 1;
    }
    w
}

/// Type-7 sample quantile of sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Effects of every cluster in every replicate, in (inner, outer) order.
/// Replicates where a resample misses a protected group are dropped.
pub fn replicates(audit: &Audit, cfg: BootstrapConfig) -> Result<Vec<Vec<Effects>>> {
    if cfg.n_inner == 0 || cfg.n_outer == 0 {
        return Err(Error::Config("bootstrap needs n_inner >= 1 and n_outer >= 1".into()));
    }
    let n = audit.n();
    let per_inner: Vec<Vec<Option<Vec<Effects>>>> = (0..cfg.n_inner)
        .into_par_iter()
        .map(|i| {
            let wa = resample(n, rng::derive_seed(cfg.seed, &[i as u64]));
            let a = audit.tally(&wa, true);
            let a_cf = audit.tally_outcome(&wa);
            let outcome = a_cf.as_ref().unwrap_or(&a);
            (0..cfg.n_outer)
                .map(|o| {
                    let b = audit.tally(&resample(n, rng::derive_seed(cfg.seed, &[i as u64, o as u64 + 1])), false);
                    let t = audit.tables(outcome, &b).ok()?;
                    Some(
                        (0..audit.k())
                            .map(|j| t.effects(audit.index(), j, &raw_outcome(&a, &t, j)))
                            .collect(),
                    )
                })
                .collect()
        })
        .collect();
    let total = cfg.n_inner * cfg.n_outer;
    let reps: Vec<Vec<Effects>> = per_inner.into_iter().flatten().flatten().collect();
    if reps.is_empty() {
        return Err(Error::Estimation("every bootstrap replicate missed a protected group".into()));
    }
    if reps.len() < total {
        log::warn!("{} of {total} bootstrap replicates dropped for missing a protected group", total - reps.len());
    }
    Ok(reps)
}

/// 95% percentile interval of `values`, widened to contain `point`.
pub fn interval(point: f64, values: &[f64], cfg: BootstrapConfig, flagged: usize) -> EffectEstimate {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&sorted, 0.025);
    let hi = quantile_sorted(&sorted, 0.975);
    EffectEstimate {
        point,
        ci_low: lo.min(point),
        ci_high: hi.max(point),
        n_inner: cfg.n_inner,
        n_outer: cfg.n_outer,
        flagged_cells: flagged,
        degenerate: values.len() == 1,
    }
}

/// Bootstrapped estimate of one effect for cluster `k`.
pub fn bootstrap(effect: Effect, d: &Dataset, a: &Assignment, k: usize, cfg: BootstrapConfig) -> Result<EffectEstimate> {
    let audit = Audit::new(d, a, a.n_clusters().max(k + 1))?;
    let (point, flagged) = audit.point()?;
    let reps = replicates(&audit, cfg)?;
    let values: Vec<f64> = reps.iter().map(|r| effect.of(&r[k])).collect();
    if values.len() == 1 {
        log::warn!("bootstrap with a single replicate: the interval is degenerate");
    }
    Ok(interval(effect.of(&point[k]), &values, cfg, flagged))
}
