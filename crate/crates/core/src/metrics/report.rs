//! Per-cluster effect reports and their JSON / tidy CSV forms.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cluster::kproto::Assignment;
use crate::data::cells::Smoothing;
use crate::data::dataset::Dataset;
use crate::error::Result;
use crate::metrics::bootstrap::{interval, replicates, BootstrapConfig};
use crate::metrics::estimate::{check_exp_se_hypotheses, Audit, Effect, EffectEstimate};
use crate::transport::plan::TransportPlan;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    /// 1-based, as in assignment files.
    pub cluster: usize,
    pub tv: EffectEstimate,
    pub nde: EffectEstimate,
    pub nie: EffectEstimate,
    pub exp_se: EffectEstimate,
    pub nie_x1x0: f64,
    pub nie_bound: f64,
    pub exp_se_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exp_se_bound_note: Option<String>,
    /// `TV − (NDE − NIE_{x1,x0} + Exp-SE)` on the point estimates.
    pub decomposition_residual: f64,
}

impl ClusterReport {
    pub fn get(&self, e: Effect) -> Option<&EffectEstimate> {
        match e {
            Effect::Tv => Some(&self.tv),
            Effect::Nde => Some(&self.nde),
            Effect::Nie => Some(&self.nie),
            Effect::ExpSe => Some(&self.exp_se),
            Effect::NieX1X0 => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectReport {
    pub method: String,
    pub display_name: String,
    pub n: usize,
    pub k: usize,
    pub smoothing: Smoothing,
    pub bootstrap: BootstrapConfig,
    pub flagged_cells: usize,
    /// Residuals the bounds were computed from.
    pub delta_z: f64,
    pub delta_w: BTreeMap<String, f64>,
    pub clusters: Vec<ClusterReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TidyRow {
    pub method: String,
    pub cluster: usize,
    pub metric: String,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

impl EffectReport {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn tidy_rows(&self) -> Vec<TidyRow> {
        let mut rows = Vec::new();
        for c in &self.clusters {
            let mut push = |metric: &str, point: f64, lo: f64, hi: f64| {
                rows.push(TidyRow {
                    method: self.method.clone(),
                    cluster: c.cluster,
                    metric: metric.to_owned(),
                    point,
                    lo,
                    hi,
                })
            };
            for e in Effect::REPORTED {
                let est = c.get(e).expect("reported effect");
                push(e.name(), est.point, est.ci_low, est.ci_high);
            }
            push("nie_bound", c.nie_bound, c.nie_bound, c.nie_bound);
            if let Some(b) = c.exp_se_bound {
                push("exp_se_bound", b, b, b);
            }
        }
        rows
    }
}

/// Writes `method,cluster,metric,point,lo,hi` rows for several reports.
pub fn write_tidy_csv<W: Write>(reports: &[EffectReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in reports {
        for row in r.tidy_rows() {
            out.serialize(row)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// How a report is labelled and which bound hypotheses hold.
#[derive(Debug, Clone)]
pub struct ReportSpec<'a> {
    pub method: &'a str,
    pub display_name: &'a str,
    /// The assignment ignores the protected attribute.
    pub ftu: bool,
    pub plan: Option<&'a TransportPlan>,
    /// Labels of every row under x0 and x1, when the assignment comes from
    /// a known mechanism (see [`Audit::with_counterfactuals`]).
    pub counterfactual: Option<&'a [Vec<usize>; 2]>,
}

/// Estimates, intervals and bounds for every cluster of `a` on `d`.
///
/// With a plan, the bounds use its stored residuals; without one they use
/// the residuals of `d` itself and the Exp-SE bound is omitted.
pub fn full_report(d: &Dataset, a: &Assignment, k: usize, spec: &ReportSpec, cfg: BootstrapConfig) -> Result<EffectReport> {
    let mut audit = Audit::new(d, a, k)?;
    if let Some(cf) = spec.counterfactual {
        audit = audit.with_counterfactuals(cf.clone())?;
    }
    let (point, flagged) = audit.point()?;
    let reps = replicates(&audit, cfg)?;
    if reps.len() == 1 {
        log::warn!("bootstrap with a single replicate: intervals are degenerate");
    }
    let (own_dz, own_dw) = audit.residuals()?;
    let (delta_z, delta_w): (f64, BTreeMap<String, f64>) = match spec.plan {
        Some(p) => {
            let mut dw: BTreeMap<String, f64> = own_dw.into_iter().collect();
            for (key, v) in dw.iter_mut() {
                if let Some(&stored) = p.residual_delta_w.get(key) {
                    *v = stored;
                }
            }
            (p.residual_delta_z, dw)
        }
        None => (own_dz, own_dw.into_iter().collect()),
    };
    let bound_check = match spec.plan {
        Some(p) => check_exp_se_hypotheses(p, spec.ftu).err().map(|e| e.to_string()),
        None => Some("no transport plan".to_owned()),
    };

    let mut clusters = Vec::with_capacity(k);
    for j in 0..k {
        let est = |e: Effect| {
            let values: Vec<f64> = reps.iter().map(|r| e.of(&r[j])).collect();
            interval(e.of(&point[j]), &values, cfg, flagged)
        };
        let nie_bound = audit.nie_bound_with(j, &|key| delta_w.get(key).copied())?;
        let exp_se_bound = match bound_check {
            None => Some(audit.exp_se_bound_with(j, delta_z)?),
            Some(_) => None,
        };
        clusters.push(ClusterReport {
            cluster: j + 1,
            tv: est(Effect::Tv),
            nde: est(Effect::Nde),
            nie: est(Effect::Nie),
            exp_se: est(Effect::ExpSe),
            nie_x1x0: point[j].nie_x1x0,
            nie_bound,
            exp_se_bound,
            exp_se_bound_note: bound_check.clone(),
            decomposition_residual: point[j].decomposition_residual(),
        });
    }
    Ok(EffectReport {
        method: spec.method.to_owned(),
        display_name: spec.display_name.to_owned(),
        n: d.n(),
        k,
        smoothing: Smoothing::default(),
        bootstrap: cfg,
        flagged_cells: flagged,
        delta_z,
        delta_w,
        clusters,
    })
}
