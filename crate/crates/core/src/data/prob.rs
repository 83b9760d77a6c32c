//! Empirical probability tables over the levels or bins of one column.

use serde::{Deserialize, Serialize};

use crate::data::cells::Smoothing;
use crate::data::dataset::Dataset;
use crate::data::discretize::Discretizer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbTable {
    /// Level labels, or bin labels such as `[30,37)` for continuous columns.
    pub levels: Vec<String>,
    pub probs: Vec<f64>,
    /// Rows in the conditioning cell.
    pub count: usize,
    /// True when the cell had fewer rows than the smoothing threshold.
    pub smoothed: bool,
}

impl ProbTable {
    pub fn get(&self, level: &str) -> Option<f64> {
        self.levels.iter().position(|l| l == level).map(|i| self.probs[i])
    }
}

fn column_index(d: &Dataset, name: &str) -> Result<usize> {
    d.schema()
        .position(name)
        .ok_or_else(|| Error::Schema(format!("no column named {name:?}")))
}

fn levels_of(disc: &Discretizer, col: usize) -> Vec<String> {
    (0..disc.n_codes(col) as u32).map(|c| disc.label(col, c)).collect()
}

pub fn empirical_marginal(d: &Dataset, col: &str) -> Result<ProbTable> {
    if d.is_empty() {
        return Err(Error::Data("empirical marginal of an empty dataset".into()));
    }
    let c = column_index(d, col)?;
    let disc = Discretizer::for_dataset(d);
    let mut counts = vec![0usize; disc.n_codes(c)];
    for code in disc.codes(d, c) {
        counts[code as usize] += 1;
    }
    let n = d.n() as f64;
    Ok(ProbTable {
        levels: levels_of(&disc, c),
        probs: counts.iter().map(|&k| k as f64 / n).collect(),
        count: d.n(),
        smoothed: false,
    })
}

/// `P(target | given)` where each conditioning pair names a column and one
/// of its level (or bin) labels.
///
/// Cells with fewer than five rows get Laplace smoothing with one
/// pseudo-count per level; an empty cell yields the uniform table.
pub fn empirical_conditional(d: &Dataset, target: &str, given: &[(&str, &str)]) -> Result<ProbTable> {
    let t = column_index(d, target)?;
    let disc = Discretizer::for_dataset(d);
    let mut filters = Vec::with_capacity(given.len());
    for &(name, level) in given {
        let c = column_index(d, name)?;
        let code = levels_of(&disc, c)
            .iter()
            .position(|l| l == level)
            .ok_or_else(|| Error::Data(format!("{level:?} is not a level of {name:?}")))?;
        filters.push((disc.codes(d, c), code as u32));
    }
    let target_codes = disc.codes(d, t);
    let m = disc.n_codes(t);
    let mut counts = vec![0usize; m];
    let mut n = 0usize;
    for (r, &code) in target_codes.iter().enumerate() {
        if filters.iter().all(|(codes, want)| codes[r] == *want) {
            counts[code as usize] += 1;
            n += 1;
        }
    }
    let s = Smoothing::default();
    let mf = m as f64;
    Ok(ProbTable {
        levels: levels_of(&disc, t),
        probs: counts
            .iter()
            .map(|&k| s.estimate(k as f64, n as f64, 1.0 / mf, mf))
            .collect(),
        count: n,
        smoothed: s.applies(n as f64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::Column;
    use crate::data::schema::{ColumnSpec, Kind, Role, SfmSchema};

    fn data(x: &[&str], z: &[&str], w: Vec<f64>) -> Dataset {
        let schema = SfmSchema::new(
            vec![
                ColumnSpec::new("x", Role::Protected, Kind::Categorical),
                ColumnSpec::new("z", Role::Confounder, Kind::Categorical),
                ColumnSpec::new("w", Role::Mediator, Kind::Continuous),
            ],
            "0",
            "1",
        )
        .unwrap();
        Dataset::from_columns(
            schema,
            vec![Column::from_labels(x), Column::from_labels(z), Column::Continuous(w)],
        )
        .unwrap()
    }

    #[test]
    fn marginal_of_balanced_column() {
        let d = data(&["0", "1", "0", "1"], &["a", "a", "b", "b"], vec![1.0, 2.0, 3.0, 4.0]);
        let t = empirical_marginal(&d, "z").unwrap();
        assert_eq!(t.probs, vec![0.5, 0.5]);
        // zero-count levels stay in the table once the level set is known
        let sub = d.select_rows(&[0, 1]);
        assert_eq!(empirical_marginal(&sub, "z").unwrap().probs, vec![1.0, 0.0]);
        let one = data(&["0", "1"], &["a", "a"], vec![1.0, 2.0]);
        assert_eq!(empirical_marginal(&one, "z").unwrap().probs, vec![1.0]);
    }

    #[test]
    fn marginal_of_empty_dataset_fails() {
        let d = data(&["0", "1"], &["a", "a"], vec![1.0, 2.0]).select_rows(&[]);
        assert!(empirical_marginal(&d, "z").is_err());
    }

    #[test]
    fn conditional_exact_frequencies_on_crossed_table() {
        let mut x = Vec::new();
        let mut z = Vec::new();
        let mut w = Vec::new();
        // 40 rows of x0, z=a: w = 1 three times out of four
        for i in 0..40 {
            x.push("0");
            z.push("a");
            w.push(if i % 4 == 0 { 0.0 } else { 1.0 });
        }
        for i in 0..40 {
            x.push("1");
            z.push(if i % 2 == 0 { "a" } else { "b" });
            w.push((i % 3) as f64);
        }
        let d = data(&x, &z, w);
        let t = empirical_conditional(&d, "x", &[("z", "a")]).unwrap();
        assert_eq!(t.count, 60);
        assert!((t.get("0").unwrap() - 40.0 / 60.0).abs() < 1e-15);
        assert!(!t.smoothed);
        let sum: f64 = t.probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_cell_is_uniform_and_flagged() {
        let d = data(&["0", "1", "0"], &["a", "a", "b"], vec![1.0, 2.0, 3.0]);
        let t = empirical_conditional(&d, "z", &[("x", "1"), ("z", "b")]).unwrap();
        assert_eq!(t.count, 0);
        assert!(t.smoothed);
        assert_eq!(t.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn unknown_level_is_an_error() {
        let d = data(&["0", "1"], &["a", "a"], vec![1.0, 2.0]);
        assert!(empirical_conditional(&d, "z", &[("x", "2")]).is_err());
    }
}
