//! Ground-truth effects by exhaustive enumeration of the exogenous support,
//! with a Monte Carlo fallback for supports too large to enumerate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::scm::mechanism::ClusterMechanism;
use crate::scm::spec::CompiledScm;

pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// Units per work chunk; partial sums are combined in chunk order so the
/// result does not depend on the thread count.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterEffects {
    pub cluster: usize,
    pub tv: f64,
    pub nde_x0x1: f64,
    pub nie_x0x1: f64,
    pub nie_x1x0: f64,
    pub exp_se_x0x1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEffects {
    pub p_x1: f64,
    pub clusters: Vec<ClusterEffects>,
}

/// Per-cluster probabilities the effects are assembled from.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Terms {
    /// P(c | x0), P(c | x1)
    cond: [f64; 2],
    /// P(c_{x0}), P(c_{x1})
    total: [f64; 2],
    /// P(c_{x1, W_{x0}})
    c10: f64,
    /// P(c_{x0, W_{x1}})
    c01: f64,
}

impl Terms {
    fn effects(&self, cluster: usize) -> ClusterEffects {
        ClusterEffects {
            cluster,
            tv: self.cond[1] - self.cond[0],
            nde_x0x1: self.c10 - self.total[0],
            nie_x0x1: self.c01 - self.total[0],
            nie_x1x0: self.c10 - self.total[1],
            exp_se_x0x1: (self.cond[1] - self.total[1]) - (self.cond[0] - self.total[0]),
        }
    }
}

// Accumulator layout: [P(x0), P(x1), then per cluster
// (P(c, x0), P(c, x1), P(c_x0), P(c_x1), P(c_10), P(c_01))].
const PER_K: usize = 6;

/// Adds one unit's indicator contributions, weighted by `p`.
fn accumulate(
    scm: &CompiledScm,
    f: &dyn ClusterMechanism,
    slots: &mut [f64],
    p: f64,
    acc: &mut [f64],
) -> Result<()> {
    let nw = scm.n_w();
    let none = vec![None; nw];
    scm.evaluate(slots, None, &none)?;
    let fact = scm.read(slots);
    scm.evaluate(slots, Some(0), &none)?;
    let w0 = scm.read(slots).w;
    scm.evaluate(slots, Some(1), &none)?;
    let w1 = scm.read(slots).w;
    let z = &fact.z;
    let c_f = f.assign(fact.x, z, &fact.w)?;
    let c_0 = f.assign(0, z, &w0)?;
    let c_1 = f.assign(1, z, &w1)?;
    let c_10 = f.assign(1, z, &w0)?;
    let c_01 = f.assign(0, z, &w1)?;
    acc[fact.x] += p;
    let at = |c: usize, j: usize| 2 + c * PER_K + j;
    acc[at(c_f, fact.x)] += p;
    acc[at(c_0, 2)] += p;
    acc[at(c_1, 3)] += p;
    acc[at(c_10, 4)] += p;
    acc[at(c_01, 5)] += p;
    Ok(())
}

fn support_size(scm: &CompiledScm) -> u128 {
    scm.spec()
        .exogenous
        .iter()
        .fold(1u128, |a, e| a.saturating_mul(e.values.len() as u128))
}

fn check_clusters(f: &dyn ClusterMechanism) -> Result<usize> {
    match f.n_clusters() {
        0 => Err(Error::Config("cluster mechanism has no clusters".into())),
        k => Ok(k),
    }
}

fn terms_from(acc: &[f64], k: usize) -> Result<Vec<Terms>> {
    let px = [acc[0], acc[1]];
    if px[0] <= 0.0 || px[1] <= 0.0 {
        return Err(Error::Scm(format!(
            "the protected attribute must take both values with positive probability (P(x0) = {}, P(x1) = {})",
            px[0], px[1]
        )));
    }
    Ok((0..k)
        .map(|c| {
            let b = 2 + c * PER_K;
            Terms {
                cond: [acc[b] / px[0], acc[b + 1] / px[1]],
                total: [acc[b + 2], acc[b + 3]],
                c10: acc[b + 4],
                c01: acc[b + 5],
            }
        })
        .collect())
}

fn enumerate_terms(scm: &CompiledScm, f: &dyn ClusterMechanism, cap: u64) -> Result<(f64, Vec<Terms>)> {
    let k = check_clusters(f)?;
    let states = support_size(scm);
    if states > cap as u128 {
        return Err(Error::EnumerationTooLarge { states, cap });
    }
    let states = states as usize;
    let exo = &scm.spec().exogenous;
    let width = 2 + k * PER_K;
    let partials: Vec<Vec<f64>> = (0..states.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut acc = vec![0.0; width];
            let mut slots = vec![0.0; scm.n_slots()];
            for idx in chunk * CHUNK..((chunk + 1) * CHUNK).min(states) {
                // Mixed-radix decode, last exogenous variable fastest.
                let mut rest = idx;
                let mut p = 1.0;
                for (i, e) in exo.iter().enumerate().rev() {
                    let m = e.values.len();
                    let j = rest % m;
                    rest /= m;
                    slots[i] = e.values[j];
                    p *= e.probs[j];
                }
                accumulate(scm, f, &mut slots, p, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut acc = vec![0.0; width];
    for part in &partials {
        for (a, b) in acc.iter_mut().zip(part) {
            *a += b;
        }
    }
    Ok((acc[1], terms_from(&acc, k)?))
}

/// Exact effects for cluster `k` under mechanism `f`.
pub fn ground_truth_effects(scm: &CompiledScm, f: &dyn ClusterMechanism, k: usize) -> Result<ClusterEffects> {
    let all = ground_truth_all(scm, f, DEFAULT_ENUMERATION_CAP)?;
    all.clusters
        .get(k)
        .copied()
        .ok_or_else(|| Error::Config(format!("cluster {k} out of range for {} clusters", all.clusters.len())))
}

/// Exact effects for every cluster, refusing supports above `cap` states.
pub fn ground_truth_all(scm: &CompiledScm, f: &dyn ClusterMechanism, cap: u64) -> Result<GroundTruthEffects> {
    let (p_x1, terms) = enumerate_terms(scm, f, cap)?;
    Ok(GroundTruthEffects {
        p_x1,
        clusters: terms.iter().enumerate().map(|(c, t)| t.effects(c)).collect(),
    })
}

/// TV against NDE − NIE + Exp-SE under both NIE subscript orders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub cluster: usize,
    pub lhs_tv: f64,
    pub nde_x0x1: f64,
    pub nie_x0x1: f64,
    pub nie_x1x0: f64,
    pub exp_se_x0x1: f64,
    /// TV − (NDE − NIE_{x0,x1} + Exp-SE)
    pub residual_x0x1: f64,
    /// TV − (NDE − NIE_{x1,x0} + Exp-SE)
    pub residual_x1x0: f64,
}

impl DecompositionReport {
    pub fn from_effects(e: &ClusterEffects) -> Self {
        DecompositionReport {
            cluster: e.cluster,
            lhs_tv: e.tv,
            nde_x0x1: e.nde_x0x1,
            nie_x0x1: e.nie_x0x1,
            nie_x1x0: e.nie_x1x0,
            exp_se_x0x1: e.exp_se_x0x1,
            residual_x0x1: e.tv - (e.nde_x0x1 - e.nie_x0x1 + e.exp_se_x0x1),
            residual_x1x0: e.tv - (e.nde_x0x1 - e.nie_x1x0 + e.exp_se_x0x1),
        }
    }

    /// The subscript order whose residual is at most `tol`, if exactly one is.
    pub fn vanishing_convention(&self, tol: f64) -> Option<&'static str> {
        match (self.residual_x0x1.abs() <= tol, self.residual_x1x0.abs() <= tol) {
            (true, false) => Some("x0,x1"),
            (false, true) => Some("x1,x0"),
            _ => None,
        }
    }
}

pub fn decomposition_check(scm: &CompiledScm, f: &dyn ClusterMechanism, k: usize) -> Result<DecompositionReport> {
    Ok(DecompositionReport::from_effects(&ground_truth_effects(scm, f, k)?))
}

/// Monte Carlo effects with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEffects {
    pub n: usize,
    pub effects: GroundTruthEffects,
    /// Standard errors in the same layout as `effects.clusters`.
    pub std_errors: Vec<ClusterEffects>,
}

/// Estimates the effects from `n` sampled units.
///
/// Standard errors: binomial for TV, per-unit paired differences for the
/// interventional contrasts, and the root sum of squares of the TV and
/// total-effect errors for Exp-SE.
pub fn monte_carlo_effects(scm: &CompiledScm, f: &dyn ClusterMechanism, n: usize, seed: u64) -> Result<MonteCarloEffects> {
    let k = check_clusters(f)?;
    if n == 0 {
        return Err(Error::Config("Monte Carlo needs at least one sample".into()));
    }
    let width = 2 + k * PER_K;
    // Per-chunk sums of indicators plus sums of squared paired differences.
    let extra = 3 * k;
    let partials: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut rng = rng::stream(seed, &[chunk as u64]);
            let mut acc = vec![0.0; width + extra];
            let mut unit = vec![0.0; width];
            let mut slots = vec![0.0; scm.n_slots()];
            for _ in chunk * CHUNK..((chunk + 1) * CHUNK).min(n) {
                scm.draw_unit_into(&mut rng, &mut slots);
                unit.iter_mut().for_each(|v| *v = 0.0);
                accumulate(scm, f, &mut slots, 1.0, &mut unit)?;
                for (a, u) in acc.iter_mut().zip(&unit) {
                    *a += u;
                }
                for c in 0..k {
                    let b = 2 + c * PER_K;
                    let nde = unit[b + 4] - unit[b + 2];
                    let nie = unit[b + 5] - unit[b + 2];
                    let te = unit[b + 3] - unit[b + 2];
                    acc[width + 3 * c] += nde * nde;
                    acc[width + 3 * c + 1] += nie * nie;
                    acc[width + 3 * c + 2] += te * te;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut acc = vec![0.0; width + extra];
    for part in &partials {
        for (a, b) in acc.iter_mut().zip(part) {
            *a += b;
        }
    }
    let nf = n as f64;
    let means: Vec<f64> = acc[..width].iter().map(|v| v / nf).collect();
    let terms = terms_from(&means, k)?;
    let n_x = [acc[0], acc[1]];
    let paired_se = |sum_sq: f64, mean: f64| ((sum_sq / nf - mean * mean).max(0.0) / nf).sqrt();
    let mut std_errors = Vec::with_capacity(k);
    for (c, t) in terms.iter().enumerate() {
        let e = t.effects(c);
        let se_tv = (t.cond[0] * (1.0 - t.cond[0]) / n_x[0] + t.cond[1] * (1.0 - t.cond[1]) / n_x[1]).sqrt();
        let se_nde = paired_se(acc[width + 3 * c], e.nde_x0x1);
        let se_nie = paired_se(acc[width + 3 * c + 1], e.nie_x0x1);
        let te = t.total[1] - t.total[0];
        let se_te = paired_se(acc[width + 3 * c + 2], te);
        // NIE_{x1,x0} = NDE - TE
        let se_nie10 = (se_nde * se_nde + se_te * se_te).sqrt();
        std_errors.push(ClusterEffects {
            cluster: c,
            tv: se_tv,
            nde_x0x1: se_nde,
            nie_x0x1: se_nie,
            nie_x1x0: se_nie10,
            exp_se_x0x1: (se_tv * se_tv + se_te * se_te).sqrt(),
        });
    }
    Ok(MonteCarloEffects {
        n,
        effects: GroundTruthEffects {
            p_x1: means[1],
            clusters: terms.iter().enumerate().map(|(c, t)| t.effects(c)).collect(),
        },
        std_errors,
    })
}
