//! A fairlet baseline: every minority-group row is paired with a majority
//! row, and the pairs are clustered as units so each cluster holds both
//! groups in nearly equal numbers.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::features::{mixed_cost, FeatureMatrix};
use crate::cluster::kproto::{lloyd, Assignment, ClusterModel};
use crate::data::dataset::Dataset;
use crate::error::{Error, Result};

pub const DISPLAY_NAME: &str = "balanced (fairlet)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancedModel {
    pub fairlets: usize,
    /// Majority rows left over after pairing, merged into their nearest
    /// fairlet.
    pub leftovers: usize,
    /// Group index of the paired-from (smaller) group.
    pub minority_group: usize,
    /// k-prototypes model over fairlet centroids.
    pub centroid_model: ClusterModel,
}

fn feature_key(f: &FeatureMatrix, r: usize) -> (Vec<u64>, Vec<u32>) {
    (f.num_row(r).iter().map(|v| v.to_bits()).collect(), f.cat_row(r).to_vec())
}

/// Nearest row among `pool` (by cost, ties to the lowest row index).
fn nearest_in(f: &FeatureMatrix, r: usize, pool: &[usize], gamma: f64) -> usize {
    let (xn, xc) = (f.num_row(r), f.cat_row(r));
    pool.par_iter()
        .map(|&s| (mixed_cost(xn, xc, f.num_row(s), f.cat_row(s), gamma), s))
        .reduce(
            || (f64::INFINITY, usize::MAX),
            |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        )
        .1
}

/// Pairs minority rows with their nearest unmatched majority rows in row
/// order, merges leftovers into the nearest fairlet, clusters the fairlet
/// centroids with k-prototypes on the non-protected features and gives
/// every row its fairlet's label.
pub fn balanced_fit(d: &Dataset, k: usize, gamma: Option<f64>, seed: u64) -> Result<(BalancedModel, Assignment)> {
    let [n0, n1] = d.group_sizes();
    if n0 == 0 || n1 == 0 {
        return Err(Error::Cluster(format!(
            "balanced clustering needs both protected groups (x0: {n0}, x1: {n1})"
        )));
    }
    let f = FeatureMatrix::from_dataset(d, true)?;
    let gamma = gamma.unwrap_or_else(|| f.auto_gamma());
    let minority = if n1 <= n0 { 1 } else { 0 };
    let x = d.x();

    let mut exact: HashMap<(Vec<u64>, Vec<u32>), Vec<usize>> = HashMap::new();
    let mut pool: Vec<usize> = Vec::new();
    for r in 0..d.n() {
        if x[r] as usize != minority {
            pool.push(r);
        }
    }
    for &r in pool.iter().rev() {
        exact.entry(feature_key(&f, r)).or_default().push(r);
    }
    let mut matched = vec![false; d.n()];
    let mut fairlet_of = vec![usize::MAX; d.n()];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for r in 0..d.n() {
        if x[r] as usize != minority {
            continue;
        }
        // Exact duplicates are at distance zero; the stack holds them with
        // the lowest index on top.
        let mut partner = None;
        if let Some(stack) = exact.get_mut(&feature_key(&f, r)) {
            while let Some(s) = stack.pop() {
                if !matched[s] {
                    partner = Some(s);
                    break;
                }
            }
        }
        let s = match partner {
            Some(s) => s,
            None => {
                pool.retain(|&s| !matched[s]);
                nearest_in(&f, r, &pool, gamma)
            }
        };
        matched[s] = true;
        fairlet_of[r] = members.len();
        fairlet_of[s] = members.len();
        members.push(vec![r, s]);
    }
    let fairlets = members.len();
    if fairlets < k {
        return Err(Error::Cluster(format!("only {fairlets} fairlets for K = {k}")));
    }

    let centroids = |members: &[Vec<usize>]| -> FeatureMatrix {
        let (p, q) = (f.p(), f.q());
        let mut numeric = vec![0.0; members.len() * p];
        let mut categorical = vec![0u32; members.len() * q];
        for (i, rows) in members.iter().enumerate() {
            for j in 0..p {
                numeric[i * p + j] = rows.iter().map(|&r| f.num_row(r)[j]).sum::<f64>() / rows.len() as f64;
            }
            for j in 0..q {
                let mut counts = vec![0usize; f.categorical_levels[j].len()];
                for &r in rows {
                    counts[f.cat_row(r)[j] as usize] += 1;
                }
                let mut best = 0;
                for (l, &c) in counts.iter().enumerate() {
                    if c > counts[best] {
                        best = l;
                    }
                }
                categorical[i * q + j] = best as u32;
            }
        }
        FeatureMatrix {
            n: members.len(),
            numeric_names: f.numeric_names.clone(),
            categorical_names: f.categorical_names.clone(),
            categorical_levels: f.categorical_levels.clone(),
            numeric,
            categorical,
        }
    };

    // Leftover majority rows join the fairlet with the nearest pair centroid.
    let leftovers: Vec<usize> = (0..d.n()).filter(|&r| fairlet_of[r] == usize::MAX).collect();
    if !leftovers.is_empty() {
        let pairs = centroids(&members);
        let targets: Vec<usize> = leftovers
            .par_iter()
            .map(|&r| {
                let (xn, xc) = (f.num_row(r), f.cat_row(r));
                let mut best = (f64::INFINITY, 0);
                for i in 0..pairs.n {
                    let dd = mixed_cost(xn, xc, pairs.num_row(i), pairs.cat_row(i), gamma);
                    if dd < best.0 {
                        best = (dd, i);
                    }
                }
                best.1
            })
            .collect();
        for (&r, &i) in leftovers.iter().zip(&targets) {
            fairlet_of[r] = i;
            members[i].push(r);
        }
    }

    let cf = centroids(&members);
    let res = lloyd(&cf, k, gamma, seed)?;
    let feature_set = d
        .schema()
        .columns
        .iter()
        .filter(|c| f.numeric_names.contains(&c.name) || f.categorical_names.contains(&c.name))
        .map(|c| c.name.clone())
        .collect();
    let centroid_model = ClusterModel::from_raw(&cf, feature_set, &res, gamma, true, seed);
    let labels = fairlet_of.iter().map(|&i| res.labels[i]).collect();
    Ok((
        BalancedModel {
            fairlets,
            leftovers: leftovers.len(),
            minority_group: minority,
            centroid_model,
        },
        Assignment::new(labels),
    ))
}
