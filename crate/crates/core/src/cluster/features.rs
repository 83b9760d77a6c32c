//! Dense numeric and categorical feature blocks for clustering.

use crate::data::dataset::{Column, Dataset};
use crate::data::schema::Role;
use crate::error::{Error, Result};

/// Row-major feature storage: `numeric[r * p + j]`, `categorical[r * q + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub n: usize,
    pub numeric_names: Vec<String>,
    pub categorical_names: Vec<String>,
    pub categorical_levels: Vec<Vec<String>>,
    pub numeric: Vec<f64>,
    pub categorical: Vec<u32>,
}

impl FeatureMatrix {
    /// Features are every non-ignored column in schema order; with `ftu`
    /// the protected column is left out.
    pub fn from_dataset(d: &Dataset, ftu: bool) -> Result<Self> {
        let schema = d.schema();
        let cols: Vec<usize> = schema
            .columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role != Role::Ignored && !(ftu && c.role == Role::Protected))
            .map(|(i, _)| i)
            .collect();
        if cols.is_empty() {
            return Err(Error::Cluster("no features left to cluster on".into()));
        }
        Ok(Self::from_columns(d, &cols))
    }

    pub fn from_columns(d: &Dataset, cols: &[usize]) -> Self {
        let schema = d.schema();
        let n = d.n();
        let mut numeric_cols = Vec::new();
        let mut cat_cols = Vec::new();
        for &c in cols {
            match d.column_at(c) {
                Column::Continuous(v) => numeric_cols.push((schema.columns[c].name.clone(), v)),
                Column::Categorical { levels, codes } => cat_cols.push((schema.columns[c].name.clone(), levels, codes)),
            }
        }
        let p = numeric_cols.len();
        let q = cat_cols.len();
        let mut numeric = vec![0.0; n * p];
        let mut categorical = vec![0u32; n * q];
        for (j, (_, v)) in numeric_cols.iter().enumerate() {
            for r in 0..n {
                numeric[r * p + j] = v[r];
            }
        }
        for (j, (_, _, codes)) in cat_cols.iter().enumerate() {
            for r in 0..n {
                categorical[r * q + j] = codes[r];
            }
        }
        FeatureMatrix {
            n,
            numeric_names: numeric_cols.iter().map(|c| c.0.clone()).collect(),
            categorical_levels: cat_cols.iter().map(|c| c.1.clone()).collect(),
            categorical_names: cat_cols.into_iter().map(|c| c.0).collect(),
            numeric,
            categorical,
        }
    }

    pub fn p(&self) -> usize {
        self.numeric_names.len()
    }

    pub fn q(&self) -> usize {
        self.categorical_names.len()
    }

    #[inline]
    pub fn num_row(&self, r: usize) -> &[f64] {
        let p = self.p();
        &self.numeric[r * p..(r + 1) * p]
    }

    #[inline]
    pub fn cat_row(&self, r: usize) -> &[u32] {
        let q = self.q();
        &self.categorical[r * q..(r + 1) * q]
    }

    /// Half the mean population variance of the numeric features, or 1
    /// without numeric features.
    pub fn auto_gamma(&self) -> f64 {
        let p = self.p();
        if p == 0 || self.n == 0 {
            return 1.0;
        }
        let n = self.n as f64;
        let mut total = 0.0;
        for j in 0..p {
            let mean = (0..self.n).map(|r| self.numeric[r * p + j]).sum::<f64>() / n;
            total += (0..self.n).map(|r| (self.numeric[r * p + j] - mean).powi(2)).sum::<f64>() / n;
        }
        0.5 * total / p as f64
    }
}

/// Squared numeric distance plus `gamma` per categorical mismatch.
#[inline]
pub fn mixed_cost(a_num: &[f64], a_cat: &[u32], b_num: &[f64], b_cat: &[u32], gamma: f64) -> f64 {
    let mut s = 0.0;
    for (x, y) in a_num.iter().zip(b_num) {
        let d = x - y;
        s += d * d;
    }
    if gamma != 0.0 {
        let mism = a_cat.iter().zip(b_cat).filter(|(a, b)| a != b).count();
        s += gamma * mism as f64;
    }
    s
}
