//! Deterministic cluster mechanisms `f_C(x, z, w)` evaluated by the oracle.

use std::collections::HashMap;

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scm::expr::Expr;
use crate::scm::spec::{format_level, ScmSpec};

/// A cluster assignment as a function of the endogenous values.
///
/// `x` is the group index (0 for x0, 1 for x1); `z` and `w` follow the
/// spec's confounder and mediator order.
pub trait ClusterMechanism: Sync {
    fn n_clusters(&self) -> usize;
    fn assign(&self, x: usize, z: &[f64], w: &[f64]) -> Result<usize>;
}

/// A mechanism written in the SCM expression language over the names of X,
/// Z and W.
#[derive(Debug, Clone)]
pub struct ExprMechanism {
    k: usize,
    expr: Expr,
    n_z: usize,
}

impl ExprMechanism {
    pub fn new(spec: &ScmSpec, k: usize, src: &str) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("a cluster mechanism needs k >= 1".into()));
        }
        let mut slots = HashMap::new();
        slots.insert(spec.protected.name.clone(), 0);
        for (j, v) in spec.confounders.iter().chain(&spec.mediators).enumerate() {
            slots.insert(v.name.clone(), 1 + j);
        }
        let expr = Expr::parse(src)?.bind(&slots)?;
        Ok(ExprMechanism {
            k,
            expr,
            n_z: spec.confounders.len(),
        })
    }

    /// The probe of that name shipped with the spec.
    pub fn probe(spec: &ScmSpec, name: &str) -> Result<Self> {
        let p = spec
            .probes
            .get(name)
            .ok_or_else(|| Error::Scm(format!("spec has no probe named {name:?}")))?;
        Self::new(spec, p.k, &p.expr)
    }

    /// True when the expression mentions the protected attribute.
    pub fn reads_x(&self, spec: &ScmSpec) -> bool {
        self.expr.variables().contains(&spec.protected.name)
    }
}

impl ClusterMechanism for ExprMechanism {
    fn n_clusters(&self) -> usize {
        self.k
    }

    fn assign(&self, x: usize, z: &[f64], w: &[f64]) -> Result<usize> {
        debug_assert_eq!(z.len(), self.n_z);
        let mut slots = Vec::with_capacity(1 + z.len() + w.len());
        slots.push(x as f64);
        slots.extend_from_slice(z);
        slots.extend_from_slice(w);
        let v = self.expr.eval(&slots)?;
        if v.fract() != 0.0 || v < 0.0 || v >= self.k as f64 {
            return Err(Error::Scm(format!(
                "cluster mechanism returned {v}, expected an index below {}",
                self.k
            )));
        }
        Ok(v as usize)
    }
}

/// Wraps a closure as a mechanism.
pub struct FnMechanism<F> {
    k: usize,
    f: F,
}

impl<F> FnMechanism<F>
where
    F: Fn(usize, &[f64], &[f64]) -> usize + Sync,
{
    pub fn new(k: usize, f: F) -> Self {
        FnMechanism { k, f }
    }
}

impl<F> ClusterMechanism for FnMechanism<F>
where
    F: Fn(usize, &[f64], &[f64]) -> usize + Sync,
{
    fn n_clusters(&self) -> usize {
        self.k
    }

    fn assign(&self, x: usize, z: &[f64], w: &[f64]) -> Result<usize> {
        let c = (self.f)(x, z, w);
        if c >= self.k {
            return Err(Error::Scm(format!("cluster mechanism returned {c}, expected below {}", self.k)));
        }
        Ok(c)
    }
}

/// The majority label of each observed (x, z, w) value combination of a
/// labelled discrete dataset, with the overall majority label for
/// combinations never observed. Turns any assignment of a discrete sample
/// into a total mechanism the oracle can evaluate.
#[derive(Debug, Clone)]
pub struct LabelLookup {
    k: usize,
    table: HashMap<String, usize>,
    fallback: usize,
    use_x: bool,
}

fn key(x: Option<usize>, z: &[String], w: &[String]) -> String {
    let mut parts: Vec<&str> = Vec::with_capacity(1 + z.len() + w.len());
    let xs = x.map(|x| x.to_string());
    if let Some(x) = &xs {
        parts.push(x);
    }
    parts.extend(z.iter().map(String::as_str));
    parts.extend(w.iter().map(String::as_str));
    parts.join("\u{1f}")
}

fn argmax_lowest(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

impl LabelLookup {
    /// `labels` are 0-based cluster ids of the rows of `d`. With `use_x`
    /// false the key omits X, so the mechanism is X-free by construction.
    pub fn majority(d: &Dataset, labels: &[usize], k: usize, use_x: bool) -> Result<Self> {
        if labels.len() != d.n() {
            return Err(Error::Data(format!("{} labels for {} rows", labels.len(), d.n())));
        }
        let schema = d.schema();
        let zc = schema.confounders();
        let wc = schema.mediators();
        let mut counts: HashMap<String, Vec<usize>> = HashMap::new();
        let mut overall = vec![0usize; k];
        let x = d.x();
        for (r, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::Data(format!("label {l} is not below k = {k}")));
            }
            let z: Vec<String> = zc.iter().map(|&c| d.value(r, c).to_string()).collect();
            let w: Vec<String> = wc.iter().map(|&c| d.value(r, c).to_string()).collect();
            let kk = key(use_x.then_some(x[r] as usize), &z, &w);
            counts.entry(kk).or_insert_with(|| vec![0; k])[l] += 1;
            overall[l] += 1;
        }
        Ok(LabelLookup {
            k,
            table: counts.into_iter().map(|(kk, c)| (kk, argmax_lowest(&c))).collect(),
            fallback: argmax_lowest(&overall),
            use_x,
        })
    }
}

impl ClusterMechanism for LabelLookup {
    fn n_clusters(&self) -> usize {
        self.k
    }

    fn assign(&self, x: usize, z: &[f64], w: &[f64]) -> Result<usize> {
        let z: Vec<String> = z.iter().map(|&v| format_level(v)).collect();
        let w: Vec<String> = w.iter().map(|&v| format_level(v)).collect();
        Ok(*self
            .table
            .get(&key(self.use_x.then_some(x), &z, &w))
            .unwrap_or(&self.fallback))
    }
}

/// Applies `f` to every row of a dataset whose Z and W columns hold
/// numeric values (numeric level labels for categorical columns).
pub fn label_dataset(f: &dyn ClusterMechanism, d: &Dataset) -> Result<crate::cluster::Assignment> {
    let schema = d.schema();
    let zc = schema.confounders();
    let wc = schema.mediators();
    let numeric = |r: usize, c: usize| -> Result<f64> {
        match d.value(r, c) {
            crate::data::dataset::Value::Number(v) => Ok(v),
            crate::data::dataset::Value::Level(s) => s.parse().map_err(|_| {
                Error::Data(format!(
                    "column {:?} level {s:?} is not numeric",
                    schema.columns[c].name
                ))
            }),
        }
    };
    let x = d.x();
    let mut labels = Vec::with_capacity(d.n());
    let (mut z, mut w) = (vec![0.0; zc.len()], vec![0.0; wc.len()]);
    for r in 0..d.n() {
        for (slot, &c) in z.iter_mut().zip(&zc) {
            *slot = numeric(r, c)?;
        }
        for (slot, &c) in w.iter_mut().zip(&wc) {
            *slot = numeric(r, c)?;
        }
        labels.push(f.assign(x[r] as usize, &z, &w)?);
    }
    Ok(crate::cluster::Assignment::new(labels))
}
