//! Shared discretization policy: categorical columns keep their levels,
//! continuous columns are cut into equal-frequency bins.

use serde::{Deserialize, Serialize};

use crate::data::dataset::{Column, Dataset, Value};

/// Equal-frequency cut points: the order statistics at ranks `j*n/bins`,
/// deduplicated. A value `v` falls in bin `#{edges <= v}`.
pub fn equal_frequency_edges(values: &[f64], bins: usize) -> Vec<f64> {
    if values.is_empty() || bins <= 1 {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..bins)
        .map(|j| sorted[(j * n / bins).min(n - 1)])
        .filter(|&e| e > sorted[0])
        .collect();
    edges.dedup();
    edges
}

pub fn bin_of(edges: &[f64], v: f64) -> u32 {
    edges.partition_point(|&e| e <= v) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnBins {
    Levels(Vec<String>),
    Edges(Vec<f64>),
}

impl ColumnBins {
    pub fn n_codes(&self) -> usize {
        match self {
            ColumnBins::Levels(l) => l.len(),
            ColumnBins::Edges(e) => e.len() + 1,
        }
    }

    /// Code of a value; `None` for a categorical label outside the level set
    /// or a value of the wrong kind.
    pub fn code(&self, v: Value<'_>) -> Option<u32> {
        match (self, v) {
            (ColumnBins::Levels(l), Value::Level(s)) => l.iter().position(|x| x == s).map(|p| p as u32),
            (ColumnBins::Edges(e), Value::Number(x)) => Some(bin_of(e, x)),
            _ => None,
        }
    }

    pub fn label(&self, code: u32) -> String {
        match self {
            ColumnBins::Levels(l) => l[code as usize].clone(),
            ColumnBins::Edges(e) => {
                let i = code as usize;
                let lo = if i == 0 { "-inf".to_string() } else { format!("{}", e[i - 1]) };
                let hi = if i == e.len() { "inf".to_string() } else { format!("{}", e[i]) };
                format!("[{lo},{hi})")
            }
        }
    }
}

/// Per-column discretization fitted on one dataset and applicable to any
/// dataset with the same columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretizer {
    columns: Vec<ColumnBins>,
}

impl Discretizer {
    pub fn fit(d: &Dataset, bins: usize) -> Self {
        let columns = d
            .columns()
            .iter()
            .map(|c| match c {
                Column::Categorical { levels, .. } => ColumnBins::Levels(levels.clone()),
                Column::Continuous(v) => ColumnBins::Edges(equal_frequency_edges(v, bins)),
            })
            .collect();
        Discretizer { columns }
    }

    /// Fits with the bin count declared in the dataset's schema.
    pub fn for_dataset(d: &Dataset) -> Self {
        Self::fit(d, d.schema().bins)
    }

    pub fn column(&self, col: usize) -> &ColumnBins {
        &self.columns[col]
    }

    pub fn n_codes(&self, col: usize) -> usize {
        self.columns[col].n_codes()
    }

    pub fn label(&self, col: usize, code: u32) -> String {
        self.columns[col].label(code)
    }

    /// Code of a value; `None` for a categorical label outside the level set.
    pub fn code_of(&self, col: usize, v: Value<'_>) -> Option<u32> {
        self.columns[col].code(v)
    }

    /// Codes of every row of column `col` of `d`. Categorical columns must
    /// share this discretizer's level list.
    pub fn codes(&self, d: &Dataset, col: usize) -> Vec<u32> {
        match (&self.columns[col], d.column_at(col)) {
            (ColumnBins::Levels(l), Column::Categorical { levels, codes }) => {
                if l == levels {
                    codes.clone()
                } else {
                    let remap: Vec<u32> = levels
                        .iter()
                        .map(|s| l.iter().position(|x| x == s).map_or(u32::MAX, |p| p as u32))
                        .collect();
                    codes.iter().map(|&c| remap[c as usize]).collect()
                }
            }
            (ColumnBins::Edges(e), Column::Continuous(v)) => v.iter().map(|&x| bin_of(e, x)).collect(),
            _ => panic!("discretizer column kind does not match dataset column {col}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_frequency_bins_hold_equal_mass() {
        // 1000 distinct values, 10 bins: every bin gets exactly 100.
        let values: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1000) as f64 * 0.37).collect();
        let edges = equal_frequency_edges(&values, 10);
        assert_eq!(edges.len(), 9);
        let mut counts = [0usize; 10];
        for &v in &values {
            counts[bin_of(&edges, v) as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1000.0 - 0.1).abs() <= 1.0 / 1000.0);
        }
    }

    #[test]
    fn ties_collapse_bins() {
        let values = vec![0.0, 0.0, 0.0, 0.0, 1.0, 2.0];
        let edges = equal_frequency_edges(&values, 3);
        assert_eq!(edges, vec![1.0]);
        assert_eq!(bin_of(&edges, 0.0), 0);
        assert_eq!(bin_of(&edges, 2.0), 1);
        assert!(equal_frequency_edges(&[3.0; 5], 4).is_empty());
    }

    #[test]
    fn labels_describe_intervals() {
        let b = ColumnBins::Edges(vec![1.0, 2.5]);
        assert_eq!(b.label(0), "[-inf,1)");
        assert_eq!(b.label(1), "[1,2.5)");
        assert_eq!(b.label(2), "[2.5,inf)");
    }
}
