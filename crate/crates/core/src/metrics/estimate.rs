//! Plug-in estimators of TV, NDE, NIE and Exp-SE for a labelled dataset,
//! and the transport-residual bounds on NIE and Exp-SE.

use serde::{Deserialize, Serialize};

use crate::cluster::kproto::Assignment;
use crate::data::cells::{CellCounts, CellIndex, Smoothing};
use crate::data::dataset::Dataset;
use crate::data::discretize::Discretizer;
use crate::error::{Error, Result};
use crate::metrics::tables::{Effects, Tables};
use crate::transport::plan::TransportPlan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_inner: usize,
    pub n_outer: usize,
    /// Smoothed (group, cell) tables behind the point estimate.
    pub flagged_cells: usize,
    /// True when the interval rests on a single resample.
    #[serde(default)]
    pub degenerate: bool,
}

impl EffectEstimate {
    /// A point estimate without an interval.
    pub fn point_only(point: f64, flagged_cells: usize) -> Self {
        EffectEstimate {
            point,
            ci_low: point,
            ci_high: point,
            n_inner: 0,
            n_outer: 0,
            flagged_cells,
            degenerate: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Tv,
    Nde,
    Nie,
    NieX1X0,
    ExpSe,
}

impl Effect {
    pub const REPORTED: [Effect; 4] = [Effect::Tv, Effect::Nde, Effect::Nie, Effect::ExpSe];

    pub fn of(self, e: &Effects) -> f64 {
        match self {
            Effect::Tv => e.tv,
            Effect::Nde => e.nde,
            Effect::Nie => e.nie,
            Effect::NieX1X0 => e.nie_x1x0,
            Effect::ExpSe => e.exp_se,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Effect::Tv => "tv",
            Effect::Nde => "nde",
            Effect::Nie => "nie",
            Effect::NieX1X0 => "nie_x1x0",
            Effect::ExpSe => "exp_se",
        }
    }
}

/// Cell structure and label counts of one labelled dataset, shared by all
/// estimators and bootstrap replicates.
#[derive(Debug, Clone)]
pub struct Audit {
    index: CellIndex,
    x: Vec<u32>,
    labels: Vec<u32>,
    k: usize,
    counts: CellCounts,
    /// Labels of every row under x0 and under x1, when the mechanism that
    /// produced the assignment is known.
    counterfactual: Option<[Vec<u32>; 2]>,
    outcome: CellCounts,
    smoothing: Smoothing,
}

impl Audit {
    /// `k` is the number of clusters; labels must be below it.
    pub fn new(d: &Dataset, a: &Assignment, k: usize) -> Result<Self> {
        Self::with_smoothing(d, a, k, Smoothing::default())
    }

    pub fn with_smoothing(d: &Dataset, a: &Assignment, k: usize, smoothing: Smoothing) -> Result<Self> {
        if a.len() != d.n() {
            return Err(Error::Data(format!("{} labels for {} rows", a.len(), d.n())));
        }
        if let Some(&bad) = a.labels.iter().find(|&&l| l >= k) {
            return Err(Error::Data(format!("label {bad} is not below K = {k}")));
        }
        let [n0, n1] = d.group_sizes();
        if n0 == 0 || n1 == 0 {
            return Err(Error::Estimation(format!(
                "both protected groups must be non-empty (x0: {n0}, x1: {n1})"
            )));
        }
        let index = CellIndex::build(d, &Discretizer::for_dataset(d));
        let labels: Vec<u32> = a.labels.iter().map(|&l| l as u32).collect();
        let counts = CellCounts::tally(&index, d.x(), Some((&labels, k)), None);
        Ok(Audit {
            index,
            x: d.x().to_vec(),
            labels,
            k,
            outcome: counts.clone(),
            counts,
            counterfactual: None,
            smoothing,
        })
    }

    /// Outcome tables `P(c | x, z, w)` are built from the labels every row
    /// would get under x0 and x1 (`counterfactual[x][r]`) instead of from
    /// the rows observed in group x. This removes the need for both groups
    /// to populate a cell, which matters when (Z, W) cells are sparse.
    /// Covariate weights and TV still come from the observed rows.
    pub fn with_counterfactuals(mut self, counterfactual: [Vec<usize>; 2]) -> Result<Self> {
        let n = self.n();
        let mut cf: [Vec<u32>; 2] = [Vec::with_capacity(n), Vec::with_capacity(n)];
        for (x, labels) in counterfactual.iter().enumerate() {
            if labels.len() != n {
                return Err(Error::Estimation(format!("{} counterfactual labels for {n} rows", labels.len())));
            }
            for (r, &l) in labels.iter().enumerate() {
                if l >= self.k {
                    return Err(Error::Estimation(format!("label {l} is not below K = {}", self.k)));
                }
                if self.x[r] as usize == x && l as u32 != self.labels[r] {
                    return Err(Error::Estimation(format!(
                        "row {}: counterfactual label under its own group differs from the assignment",
                        r + 1
                    )));
                }
                cf[x].push(l as u32);
            }
        }
        self.outcome = CellCounts::tally_counterfactual(&self.index, [&cf[0], &cf[1]], self.k, None);
        self.counterfactual = Some(cf);
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn index(&self) -> &CellIndex {
        &self.index
    }

    pub(crate) fn tally(&self, weights: &[u32], with_labels: bool) -> CellCounts {
        let labels = with_labels.then_some((self.labels.as_slice(), self.k));
        CellCounts::tally(&self.index, &self.x, labels, Some(weights))
    }

    /// Outcome counts of a resample, or `None` when they coincide with the
    /// observed-label counts.
    pub(crate) fn tally_outcome(&self, weights: &[u32]) -> Option<CellCounts> {
        self.counterfactual
            .as_ref()
            .map(|cf| CellCounts::tally_counterfactual(&self.index, [&cf[0], &cf[1]], self.k, Some(weights)))
    }

    pub(crate) fn tables(&self, a: &CellCounts, b: &CellCounts) -> Result<Tables> {
        Tables::build(&self.index, a, b, self.smoothing)
    }

    /// Full-sample estimates for every cluster, plus the number of smoothed
    /// tables. TV uses the direct group frequencies.
    pub fn point(&self) -> Result<(Vec<Effects>, usize)> {
        let t = self.tables(&self.outcome, &self.counts)?;
        let mut n_x = [0.0; 2];
        let mut nk_x = vec![[0.0; 2]; self.k];
        for c in 0..self.index.n_cells() {
            for x in 0..2 {
                n_x[x] += self.counts.n(c, x);
                for (j, nk) in nk_x.iter_mut().enumerate() {
                    nk[x] += self.counts.nk(c, x, j);
                }
            }
        }
        let effects = (0..self.k)
            .map(|j| {
                let mut e = t.effects(&self.index, j, &|c, x| t.pk(c, x, j));
                e.tv = nk_x[j][1] / n_x[1] - nk_x[j][0] / n_x[0];
                e
            })
            .collect();
        Ok((effects, t.flagged))
    }

    /// `sup_w P̂(c_j | x0, z, w) · δ_w(z)` weighted by `P̂(z)` and summed,
    /// with `delta_w` looked up by Z-cell label.
    pub fn nie_bound_with(&self, j: usize, delta_w: &dyn Fn(&str) -> Option<f64>) -> Result<f64> {
        let t = self.tables(&self.outcome, &self.counts)?;
        let own = crate::data::cells::mediator_residuals(&self.index, &t.p_w);
        let mut bound = 0.0;
        for z in 0..self.index.n_z() {
            let sup = self
                .index
                .z_members(z)
                .iter()
                .map(|&c| t.pk(c as usize, 0, j))
                .fold(0.0, f64::max);
            let dw = delta_w(self.index.z_key(z)).unwrap_or(own[z]);
            bound += t.p_z[z] * sup * dw;
        }
        Ok(bound)
    }

    /// `sup_z max_x P̂(c_j | x, z) · δ_z`.
    pub fn exp_se_bound_with(&self, j: usize, delta_z: f64) -> Result<f64> {
        let t = self.tables(&self.outcome, &self.counts)?;
        let sup = (0..self.index.n_z())
            .map(|z| t.pk_z(&self.index, z, 0, j).max(t.pk_z(&self.index, z, 1, j)))
            .fold(0.0, f64::max);
        Ok(sup * delta_z)
    }

    /// The data's own residuals under the audit's tables.
    pub fn residuals(&self) -> Result<(f64, Vec<(String, f64)>)> {
        let t = self.tables(&self.outcome, &self.counts)?;
        let delta_z = t
            .p_z_x
            .iter()
            .map(|p| (p[1] - p[0]).abs())
            .sum();
        let dw = crate::data::cells::mediator_residuals(&self.index, &t.p_w);
        Ok((
            delta_z,
            dw.into_iter()
                .enumerate()
                .map(|(z, v)| (self.index.z_key(z).to_owned(), v))
                .collect(),
        ))
    }
}

fn single(effect: Effect, d: &Dataset, a: &Assignment, k: usize) -> Result<EffectEstimate> {
    let audit = Audit::new(d, a, a.n_clusters().max(k + 1))?;
    let (effects, flagged) = audit.point()?;
    Ok(EffectEstimate::point_only(effect.of(&effects[k]), flagged))
}

/// `P̂(c_k | x1) − P̂(c_k | x0)` by direct frequencies.
pub fn estimate_tv(d: &Dataset, a: &Assignment, k: usize) -> Result<EffectEstimate> {
    single(Effect::Tv, d, a, k)
}

/// `Σ_{z,w} [P̂(c_k|x1,z,w) − P̂(c_k|x0,z,w)] P̂(w|x0,z) P̂(z)`.
pub fn estimate_nde(d: &Dataset, a: &Assignment, k: usize) -> Result<EffectEstimate> {
    single(Effect::Nde, d, a, k)
}

/// `Σ_{z,w} P̂(c_k|x0,z,w) [P̂(w|x1,z) − P̂(w|x0,z)] P̂(z)`.
pub fn estimate_nie(d: &Dataset, a: &Assignment, k: usize) -> Result<EffectEstimate> {
    single(Effect::Nie, d, a, k)
}

/// `Σ_z P̂(c_k|x1,z)[P̂(z|x1) − P̂(z)] − P̂(c_k|x0,z)[P̂(z|x0) − P̂(z)]`, i.e.
/// `[P(c_k|x1) − P(c_k do x1)] − [P(c_k|x0) − P(c_k do x0)]`.
pub fn estimate_exp_se(d: &Dataset, a: &Assignment, k: usize) -> Result<EffectEstimate> {
    single(Effect::ExpSe, d, a, k)
}

/// Upper bound on |NIE| from the plan's mediator residuals.
pub fn nie_bound(d: &Dataset, a: &Assignment, k: usize, plan: &TransportPlan) -> Result<f64> {
    let audit = Audit::new(d, a, a.n_clusters().max(k + 1))?;
    audit.nie_bound_with(k, &|key| plan.residual_delta_w.get(key).copied())
}

/// Upper bound on |Exp-SE| from the plan's confounder residual. Only
/// defined for assignments that ignore X (`ftu`) on mediator-adapted data.
pub fn exp_se_bound(d: &Dataset, a: &Assignment, k: usize, plan: &TransportPlan, ftu: bool) -> Result<f64> {
    check_exp_se_hypotheses(plan, ftu)?;
    let audit = Audit::new(d, a, a.n_clusters().max(k + 1))?;
    audit.exp_se_bound_with(k, plan.residual_delta_z)
}

pub(crate) fn check_exp_se_hypotheses(plan: &TransportPlan, ftu: bool) -> Result<()> {
    if !ftu {
        return Err(Error::Hypothesis(
            "the Exp-SE bound assumes an assignment that does not read the protected attribute".into(),
        ));
    }
    if !plan.flags.nie {
        return Err(Error::Hypothesis(
            "the Exp-SE bound assumes mediators transported across groups (NIE flag)".into(),
        ));
    }
    Ok(())
}
