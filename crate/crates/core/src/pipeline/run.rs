use serde::{Deserialize, Serialize};

use crate::cluster::{balanced_fit, kprototypes_fit, Assignment, ClusterModel};
use crate::data::dataset::Dataset;
use crate::data::schema::EffectFlags;
use crate::error::{Error, Result};
use crate::metrics::{full_report, EffectReport, ReportSpec};
use crate::pipeline::config::RunConfig;
use crate::transport::{fit_and_apply, TransportPlan};

/// The five benchmarked clustering methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Unadjusted,
    Ftu,
    Balanced,
    CausalNdeNie,
    CausalNdeNieSe,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Unadjusted,
        Method::Ftu,
        Method::Balanced,
        Method::CausalNdeNie,
        Method::CausalNdeNieSe,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::Unadjusted => "unadjusted",
            Method::Ftu => "ftu",
            Method::Balanced => "balanced",
            Method::CausalNdeNie => "causal_nde_nie",
            Method::CausalNdeNieSe => "causal_nde_nie_se",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Method::Unadjusted => "unadjusted",
            Method::Ftu => "fairness through unawareness",
            Method::Balanced => crate::cluster::balanced::DISPLAY_NAME,
            Method::CausalNdeNie => "causally fair (NDE+NIE)",
            Method::CausalNdeNieSe => "causally fair (NDE+NIE+SE)",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Output of one clustering method on one dataset.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub method: String,
    pub assignment: Assignment,
    pub model: ClusterModel,
    /// Present for the causally fair runs.
    pub plan: Option<TransportPlan>,
    pub report: EffectReport,
}

fn method_for(flags: EffectFlags) -> (String, String) {
    if flags == EffectFlags::ALL {
        (Method::CausalNdeNieSe.id().into(), Method::CausalNdeNieSe.display_name().into())
    } else if flags == EffectFlags::new(true, true, false) {
        (Method::CausalNdeNie.id().into(), Method::CausalNdeNie.display_name().into())
    } else {
        (format!("causal_{}", flags.to_string().replace(',', "")), format!("causally fair ({flags})"))
    }
}

/// Fair clustering: transports Z when the SE flag is set, transports W
/// across groups when the NIE flag is set (within groups otherwise),
/// clusters without X when the NDE flag is set, and audits the result on
/// the adapted covariates the clustering consumed.
pub fn run_algorithm1(d: &Dataset, cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let flags = cfg.flags;
    let (plan, adapted) = fit_and_apply(d, flags, cfg.transport_seed()).map_err(|e| e.in_stage("transport"))?;
    let (model, assignment) = kprototypes_fit(&adapted, cfg.k, cfg.gamma, flags.nde, cfg.cluster_seed())
        .map_err(|e| e.in_stage("clustering"))?;
    let (method, display) = method_for(flags);
    let cf = model.counterfactual_labels(&adapted).map_err(|e| e.in_stage("evaluation"))?;
    let spec = ReportSpec {
        method: &method,
        display_name: &display,
        ftu: flags.nde,
        plan: Some(&plan),
        counterfactual: Some(&cf),
    };
    let report = full_report(&adapted, &assignment, cfg.k, &spec, cfg.bootstrap()).map_err(|e| e.in_stage("evaluation"))?;
    Ok(RunOutput {
        method,
        assignment,
        model,
        plan: Some(plan),
        report,
    })
}

/// Runs one benchmark method.
pub fn run_method(method: Method, d: &Dataset, cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    // The balanced labels belong to fairlets, not to rows, so they have no
    // per-row counterfactual.
    let baseline = |ftu: bool, model: ClusterModel, assignment: Assignment, with_cf: bool| -> Result<RunOutput> {
        let cf = if with_cf {
            Some(model.counterfactual_labels(d).map_err(|e| e.in_stage("evaluation"))?)
        } else {
            None
        };
        let spec = ReportSpec {
            method: method.id(),
            display_name: method.display_name(),
            ftu,
            plan: None,
            counterfactual: cf.as_ref(),
        };
        let report = full_report(d, &assignment, cfg.k, &spec, cfg.bootstrap()).map_err(|e| e.in_stage("evaluation"))?;
        Ok(RunOutput {
            method: method.id().into(),
            assignment,
            model,
            plan: None,
            report,
        })
    };
    match method {
        Method::Unadjusted | Method::Ftu => {
            let ftu = method == Method::Ftu;
            let (model, a) =
                kprototypes_fit(d, cfg.k, cfg.gamma, ftu, cfg.cluster_seed()).map_err(|e| e.in_stage("clustering"))?;
            baseline(ftu, model, a, true)
        }
        Method::Balanced => {
            let (model, a) =
                balanced_fit(d, cfg.k, cfg.gamma, cfg.cluster_seed()).map_err(|e| e.in_stage("clustering"))?;
            baseline(false, model.centroid_model, a, false)
        }
        Method::CausalNdeNie | Method::CausalNdeNieSe => {
            let flags = EffectFlags::new(true, true, method == Method::CausalNdeNieSe);
            run_algorithm1(d, &RunConfig { flags, ..cfg.clone() })
        }
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub config: RunConfig,
    pub runs: Vec<RunOutput>,
    /// Methods that could not run, with the reason.
    pub skipped: Vec<(String, String)>,
}

impl Benchmark {
    pub fn reports(&self) -> Vec<EffectReport> {
        self.runs.iter().map(|r| r.report.clone()).collect()
    }

    pub fn run(&self, method: Method) -> Option<&RunOutput> {
        self.runs.iter().find(|r| r.method == method.id())
    }

    pub fn metrics_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        crate::metrics::write_tidy_csv(&self.reports(), &mut buf)?;
        Ok(String::from_utf8(buf).expect("csv is utf-8"))
    }
}

/// All five methods with the same configuration and seed, one after the
/// other. The balanced baseline is skipped with a warning when a protected
/// group is empty.
pub fn run_benchmark(d: &Dataset, cfg: &RunConfig) -> Result<Benchmark> {
    cfg.validate()?;
    let mut runs = Vec::new();
    let mut skipped = Vec::new();
    for method in Method::ALL {
        if method == Method::Balanced && d.group_sizes().contains(&0) {
            let reason = "a protected group is empty".to_owned();
            log::warn!("skipping {}: {reason}", method.id());
            skipped.push((method.id().to_owned(), reason));
            continue;
        }
        log::info!("benchmark: running {}", method.id());
        runs.push(run_method(method, d, cfg)?);
    }
    Ok(Benchmark {
        config: cfg.clone(),
        runs,
        skipped,
    })
}
