//! k-prototypes: Lloyd iterations with means for numeric features and modes
//! for categorical ones.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::features::{mixed_cost, FeatureMatrix};
use crate::data::dataset::{Column, Dataset, Value};
use crate::error::{Error, Result};
use crate::rng;

pub const MAX_ITERATIONS: usize = 100;

/// Cluster labels in dataset row order, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub labels: Vec<usize>,
}

impl Assignment {
    pub fn new(labels: Vec<usize>) -> Self {
        Assignment { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub numeric: Vec<f64>,
    pub categorical: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub gamma: f64,
    /// Columns the model reads, in schema order.
    pub feature_set: Vec<String>,
    pub numeric_features: Vec<String>,
    pub categorical_features: Vec<String>,
    pub prototypes: Vec<Prototype>,
    pub ftu: bool,
    pub seed: u64,
    pub iterations: usize,
    /// Total cost after each assignment step.
    pub cost_history: Vec<f64>,
}

/// Prototypes in the code space of one feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct RawPrototypes {
    pub k: usize,
    pub numeric: Vec<f64>,
    pub categorical: Vec<u32>,
}

impl RawPrototypes {
    fn num(&self, c: usize, p: usize) -> &[f64] {
        &self.numeric[c * p..(c + 1) * p]
    }

    fn cat(&self, c: usize, q: usize) -> &[u32] {
        &self.categorical[c * q..(c + 1) * q]
    }

    /// Nearest prototype, ties to the lowest index.
    pub fn nearest(&self, f: &FeatureMatrix, r: usize, gamma: f64) -> (usize, f64) {
        let (p, q) = (f.p(), f.q());
        let (xn, xc) = (f.num_row(r), f.cat_row(r));
        let mut best = (0, f64::INFINITY);
        for c in 0..self.k {
            let d = mixed_cost(xn, xc, self.num(c, p), self.cat(c, q), gamma);
            if d < best.1 {
                best = (c, d);
            }
        }
        best
    }
}

/// Seed-dependent hash of a row's feature values; rows with equal features
/// hash equally, so choices made by hash do not depend on row order.
fn content_hash(f: &FeatureMatrix, r: usize, seed: u64) -> u64 {
    let mut h = rng::derive_seed(seed, &[0xfea7]);
    for v in f.num_row(r) {
        h = rng::derive_seed(h, &[v.to_bits()]);
    }
    for &c in f.cat_row(r) {
        h = rng::derive_seed(h, &[u64::from(c)]);
    }
    h
}

fn copy_row(f: &FeatureMatrix, r: usize, protos: &mut RawPrototypes, c: usize) {
    let (p, q) = (f.p(), f.q());
    protos.numeric[c * p..(c + 1) * p].copy_from_slice(f.num_row(r));
    protos.categorical[c * q..(c + 1) * q].copy_from_slice(f.cat_row(r));
}

/// Farthest-point initialization: the first prototype is the row with the
/// smallest content hash; each next one is the row farthest from the chosen
/// ones, ties to the smaller content hash.
fn initialize(f: &FeatureMatrix, k: usize, gamma: f64, hashes: &[u64]) -> RawPrototypes {
    let (p, q) = (f.p(), f.q());
    let mut protos = RawPrototypes {
        k,
        numeric: vec![0.0; k * p],
        categorical: vec![0; k * q],
    };
    let first = (0..f.n).min_by_key(|&r| (hashes[r], r)).expect("non-empty");
    copy_row(f, first, &mut protos, 0);
    let mut min_d: Vec<f64> = (0..f.n)
        .into_par_iter()
        .map(|r| mixed_cost(f.num_row(r), f.cat_row(r), protos.num(0, p), protos.cat(0, q), gamma))
        .collect();
    for c in 1..k {
        let next = pick_farthest(&min_d, hashes);
        copy_row(f, next, &mut protos, c);
        let pn = protos.num(c, p).to_vec();
        let pc = protos.cat(c, q).to_vec();
        min_d.par_iter_mut().enumerate().for_each(|(r, m)| {
            let d = mixed_cost(f.num_row(r), f.cat_row(r), &pn, &pc, gamma);
            if d < *m {
                *m = d;
            }
        });
    }
    protos
}

fn pick_farthest(dist: &[f64], hashes: &[u64]) -> usize {
    let mut best = 0;
    for r in 1..dist.len() {
        if dist[r] > dist[best] || (dist[r] == dist[best] && (hashes[r], r) < (hashes[best], best)) {
            best = r;
        }
    }
    best
}

pub(crate) struct LloydResult {
    pub protos: RawPrototypes,
    pub labels: Vec<usize>,
    pub cost_history: Vec<f64>,
    pub iterations: usize,
}

/// Lloyd iterations from a content-based initialization.
pub(crate) fn lloyd(f: &FeatureMatrix, k: usize, gamma: f64, seed: u64) -> Result<LloydResult> {
    if k == 0 {
        return Err(Error::Cluster("K must be at least 1".into()));
    }
    if k > f.n {
        return Err(Error::Cluster(format!("K = {k} exceeds the {} rows", f.n)));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::Cluster(format!("gamma must be finite and non-negative, got {gamma}")));
    }
    let (p, q) = (f.p(), f.q());
    let hashes: Vec<u64> = (0..f.n).into_par_iter().map(|r| content_hash(f, r, seed)).collect();
    let mut protos = initialize(f, k, gamma, &hashes);
    let mut labels: Vec<usize> = Vec::new();
    let mut cost_history = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let assigned: Vec<(usize, f64)> = (0..f.n).into_par_iter().map(|r| protos.nearest(f, r, gamma)).collect();
        let cost: f64 = assigned.iter().map(|a| a.1).sum();
        let new_labels: Vec<usize> = assigned.iter().map(|a| a.0).collect();
        cost_history.push(cost);
        if new_labels == labels {
            break;
        }
        labels = new_labels;
        if iterations == MAX_ITERATIONS {
            break;
        }

        // Update: means and modes; empty clusters move to the worst-fit row.
        let mut sums = vec![0.0; k * p];
        let mut sizes = vec![0usize; k];
        let mut level_counts: Vec<Vec<Vec<usize>>> = (0..k)
            .map(|_| f.categorical_levels.iter().map(|l| vec![0; l.len()]).collect())
            .collect();
        for r in 0..f.n {
            let c = labels[r];
            sizes[c] += 1;
            for (j, v) in f.num_row(r).iter().enumerate() {
                sums[c * p + j] += v;
            }
            for (j, &code) in f.cat_row(r).iter().enumerate() {
                level_counts[c][j][code as usize] += 1;
            }
        }
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if sizes[c] == 0 {
                let dist: Vec<f64> = (0..f.n)
                    .map(|r| if taken.contains(&r) { -1.0 } else { assigned[r].1 })
                    .collect();
                let r = pick_farthest(&dist, &hashes);
                taken.push(r);
                copy_row(f, r, &mut protos, c);
                continue;
            }
            for j in 0..p {
                protos.numeric[c * p + j] = sums[c * p + j] / sizes[c] as f64;
            }
            for j in 0..q {
                let counts = &level_counts[c][j];
                let mut best = 0;
                for (l, &cnt) in counts.iter().enumerate() {
                    if cnt > counts[best] {
                        best = l;
                    }
                }
                protos.categorical[c * q + j] = best as u32;
            }
        }
    }
    Ok(LloydResult {
        protos,
        labels,
        cost_history,
        iterations,
    })
}

impl ClusterModel {
    pub(crate) fn from_raw(
        f: &FeatureMatrix,
        feature_set: Vec<String>,
        res: &LloydResult,
        gamma: f64,
        ftu: bool,
        seed: u64,
    ) -> Self {
        let (p, q) = (f.p(), f.q());
        let prototypes = (0..res.protos.k)
            .map(|c| Prototype {
                numeric: res.protos.num(c, p).to_vec(),
                categorical: res
                    .protos
                    .cat(c, q)
                    .iter()
                    .enumerate()
                    .map(|(j, &code)| f.categorical_levels[j][code as usize].clone())
                    .collect(),
            })
            .collect();
        ClusterModel {
            k: res.protos.k,
            gamma,
            feature_set,
            numeric_features: f.numeric_names.clone(),
            categorical_features: f.categorical_names.clone(),
            prototypes,
            ftu,
            seed,
            iterations: res.iterations,
            cost_history: res.cost_history.clone(),
        }
    }

    /// Nearest prototype for explicit feature values in the model's numeric
    /// and categorical feature order. Unseen levels count as mismatches.
    pub fn assign_values(&self, numeric: &[f64], categorical: &[&str]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (c, proto) in self.prototypes.iter().enumerate() {
            let mut d = 0.0;
            for (x, m) in numeric.iter().zip(&proto.numeric) {
                d += (x - m) * (x - m);
            }
            if self.gamma != 0.0 {
                let mism = categorical
                    .iter()
                    .zip(&proto.categorical)
                    .filter(|(a, b)| **a != b.as_str())
                    .count();
                d += self.gamma * mism as f64;
            }
            if d < best.1 {
                best = (c, d);
            }
        }
        best.0
    }

    /// Column indices of the model's numeric and categorical features in `d`.
    fn bind(&self, d: &Dataset) -> Result<(Vec<usize>, Vec<usize>)> {
        let find = |name: &String, want_numeric: bool| -> Result<usize> {
            let c = d
                .schema()
                .position(name)
                .ok_or_else(|| Error::Cluster(format!("dataset lacks model feature {name:?}")))?;
            let numeric = matches!(d.column_at(c), Column::Continuous(_));
            if numeric != want_numeric {
                return Err(Error::Cluster(format!("feature {name:?} has a different kind than in the model")));
            }
            Ok(c)
        };
        Ok((
            self.numeric_features.iter().map(|n| find(n, true)).collect::<Result<_>>()?,
            self.categorical_features.iter().map(|n| find(n, false)).collect::<Result<_>>()?,
        ))
    }

    pub fn assign_row(&self, d: &Dataset, r: usize) -> Result<usize> {
        let (nc, cc) = self.bind(d)?;
        Ok(self.assign_bound(d, &nc, &cc, r, None))
    }

    /// `set` replaces the value of one categorical column.
    fn assign_bound(&self, d: &Dataset, nc: &[usize], cc: &[usize], r: usize, set: Option<(usize, &str)>) -> usize {
        let num: Vec<f64> = nc
            .iter()
            .map(|&c| match d.value(r, c) {
                Value::Number(v) => v,
                Value::Level(_) => unreachable!("kind checked"),
            })
            .collect();
        let cat: Vec<&str> = cc
            .iter()
            .map(|&c| match (set, d.value(r, c)) {
                (Some((sc, v)), _) if sc == c => v,
                (_, Value::Level(s)) => s,
                (_, Value::Number(_)) => unreachable!("kind checked"),
            })
            .collect();
        self.assign_values(&num, &cat)
    }

    /// f_C applied to every row of `d`.
    pub fn assign_dataset(&self, d: &Dataset) -> Result<Assignment> {
        let (nc, cc) = self.bind(d)?;
        let labels = (0..d.n())
            .into_par_iter()
            .map(|r| self.assign_bound(d, &nc, &cc, r, None))
            .collect();
        Ok(Assignment { labels })
    }

    /// Labels of every row of `d` with the protected attribute set to x0
    /// and to x1. Both equal the factual labels for an FTU model.
    pub fn counterfactual_labels(&self, d: &Dataset) -> Result<[Vec<usize>; 2]> {
        let schema = d.schema();
        let pi = schema.protected_index();
        let (nc, cc) = self.bind(d)?;
        let mut out: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (x, level) in [&schema.x0, &schema.x1].into_iter().enumerate() {
            if self.ftu && x == 1 {
                out[1] = out[0].clone();
                break;
            }
            out[x] = (0..d.n())
                .into_par_iter()
                .map(|r| self.assign_bound(d, &nc, &cc, r, Some((pi, level.as_str()))))
                .collect();
        }
        Ok(out)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

/// Fits k-prototypes on the non-ignored columns of `d` (without the
/// protected column when `ftu`). `gamma = None` selects half the mean
/// numeric variance.
pub fn kprototypes_fit(d: &Dataset, k: usize, gamma: Option<f64>, ftu: bool, seed: u64) -> Result<(ClusterModel, Assignment)> {
    if d.is_empty() {
        return Err(Error::Cluster("cannot cluster an empty dataset".into()));
    }
    let f = FeatureMatrix::from_dataset(d, ftu)?;
    let gamma = gamma.unwrap_or_else(|| f.auto_gamma());
    let res = lloyd(&f, k, gamma, seed)?;
    let feature_set = d
        .schema()
        .columns
        .iter()
        .filter(|c| f.numeric_names.contains(&c.name) || f.categorical_names.contains(&c.name))
        .map(|c| c.name.clone())
        .collect();
    let model = ClusterModel::from_raw(&f, feature_set, &res, gamma, ftu, seed);
    Ok((model, Assignment { labels: res.labels }))
}
