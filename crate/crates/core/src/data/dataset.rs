//! Immutable mixed-type tables.

use std::collections::BTreeSet;

use crate::data::schema::{Kind, Role, SfmSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    /// Level codes index into `levels`.
    Categorical { levels: Vec<String>, codes: Vec<u32> },
    Continuous(Vec<f64>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Categorical { codes, .. } => codes.len(),
            Column::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> Kind {
        match self {
            Column::Categorical { .. } => Kind::Categorical,
            Column::Continuous(_) => Kind::Continuous,
        }
    }

    /// Builds a categorical column from labels, freezing the level set from
    /// the observed values in natural order.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Column {
        let levels = natural_level_order(labels.iter().map(|s| s.as_ref()));
        Column::from_labels_with_levels(labels, levels).expect("levels cover labels")
    }

    pub fn from_labels_with_levels<S: AsRef<str>>(labels: &[S], levels: Vec<String>) -> Result<Column> {
        let codes = labels
            .iter()
            .map(|l| {
                levels
                    .iter()
                    .position(|v| v == l.as_ref())
                    .map(|p| p as u32)
                    .ok_or_else(|| Error::Data(format!("value {:?} is not a known level", l.as_ref())))
            })
            .collect::<Result<Vec<u32>>>()?;
        Ok(Column::Categorical { levels, codes })
    }

    pub fn value(&self, row: usize) -> Value<'_> {
        match self {
            Column::Categorical { levels, codes } => Value::Level(&levels[codes[row] as usize]),
            Column::Continuous(v) => Value::Number(v[row]),
        }
    }

    fn select(&self, rows: &[usize]) -> Column {
        match self {
            Column::Categorical { levels, codes } => Column::Categorical {
                levels: levels.clone(),
                codes: rows.iter().map(|&r| codes[r]).collect(),
            },
            Column::Continuous(v) => Column::Continuous(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value<'a> {
    Level(&'a str),
    Number(f64),
}

impl std::fmt::Display for Value<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Level(s) => f.write_str(s),
            Value::Number(v) => write!(f, "{v}"),
        }
    }
}

/// Orders level labels numerically when they all parse as numbers and
/// lexicographically otherwise, so codes do not depend on row order.
pub fn natural_level_order<'a>(labels: impl Iterator<Item = &'a str>) -> Vec<String> {
    let set: BTreeSet<&str> = labels.collect();
    let mut levels: Vec<String> = set.into_iter().map(str::to_owned).collect();
    let numeric: Option<Vec<f64>> = levels.iter().map(|l| l.trim().parse::<f64>().ok()).collect();
    if let Some(nums) = numeric {
        let mut paired: Vec<(f64, String)> = nums.into_iter().zip(levels).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        levels = paired.into_iter().map(|p| p.1).collect();
    }
    levels
}

/// A validated table whose columns follow `schema.columns` order.
///
/// The protected column always has levels `[x0, x1]`, so its codes are the
/// group indices 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: SfmSchema,
    columns: Vec<Column>,
    n: usize,
    dropped_rows: usize,
}

impl Dataset {
    pub fn from_columns(schema: SfmSchema, columns: Vec<Column>) -> Result<Self> {
        schema.validate()?;
        if columns.len() != schema.columns.len() {
            return Err(Error::Schema(format!(
                "schema has {} columns but {} were supplied",
                schema.columns.len(),
                columns.len()
            )));
        }
        let n = columns.first().map_or(0, Column::len);
        for (spec, col) in schema.columns.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::Data(format!("column {:?} has {} rows, expected {n}", spec.name, col.len())));
            }
            if col.kind() != spec.kind {
                return Err(Error::Schema(format!(
                    "column {:?} declared {:?} but holds {:?} data",
                    spec.name,
                    spec.kind,
                    col.kind()
                )));
            }
            match col {
                Column::Continuous(v) => {
                    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
                        return Err(Error::Data(format!("column {:?} holds non-finite value {bad}", spec.name)));
                    }
                }
                Column::Categorical { levels, codes } => {
                    if let Some(c) = codes.iter().find(|&&c| c as usize >= levels.len()) {
                        return Err(Error::Data(format!("column {:?} holds out-of-range code {c}", spec.name)));
                    }
                }
            }
        }
        let mut columns = columns;
        let p = schema.protected_index();
        columns[p] = normalize_protected(&schema, &columns[p])?;
        Ok(Dataset {
            schema,
            columns,
            n,
            dropped_rows: 0,
        })
    }

    pub(crate) fn with_dropped_rows(mut self, dropped: usize) -> Self {
        self.dropped_rows = dropped;
        self
    }

    pub fn schema(&self) -> &SfmSchema {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Rows removed during ingestion because of missing or unparseable cells.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_at(&self, i: usize) -> &Column {
        &self.columns[i]
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.schema
            .position(name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| Error::Schema(format!("no column named {name:?}")))
    }

    /// Group index per row: 0 for x0, 1 for x1.
    pub fn x(&self) -> &[u32] {
        match &self.columns[self.schema.protected_index()] {
            Column::Categorical { codes, .. } => codes,
            Column::Continuous(_) => unreachable!("protected column is categorical"),
        }
    }

    pub fn group_sizes(&self) -> [usize; 2] {
        let ones = self.x().iter().filter(|&&c| c == 1).count();
        [self.n - ones, ones]
    }

    pub fn value(&self, row: usize, col: usize) -> Value<'_> {
        self.columns[col].value(row)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            columns: self.columns.iter().map(|c| c.select(rows)).collect(),
            n: rows.len(),
            dropped_rows: 0,
        }
    }

    /// A new dataset with column `i` replaced; kinds and row counts must match.
    pub fn with_column(&self, i: usize, column: Column) -> Result<Dataset> {
        let mut columns = self.columns.clone();
        columns[i] = column;
        Dataset::from_columns(self.schema.clone(), columns)
    }

    /// Appends a categorical column with role `ignored` (e.g. cluster labels).
    pub fn with_appended_categorical(&self, name: &str, column: Column) -> Result<Dataset> {
        if column.kind() != Kind::Categorical {
            return Err(Error::Data("appended column must be categorical".into()));
        }
        let mut schema = self.schema.clone();
        schema
            .columns
            .push(crate::data::schema::ColumnSpec::new(name, Role::Ignored, Kind::Categorical));
        let mut columns = self.columns.clone();
        columns.push(column);
        Dataset::from_columns(schema, columns)
    }

    /// The same data with x0 and x1 exchanged.
    pub fn swap_protected(&self) -> Dataset {
        let schema = self.schema.swapped();
        Dataset::from_columns(schema, self.columns.clone()).expect("swapping keeps validity")
    }
}

fn normalize_protected(schema: &SfmSchema, col: &Column) -> Result<Column> {
    let Column::Categorical { levels, codes } = col else {
        unreachable!("kind checked")
    };
    let mut observed = vec![false; levels.len()];
    for &c in codes {
        observed[c as usize] = true;
    }
    let seen: Vec<&str> = levels
        .iter()
        .zip(&observed)
        .filter(|(_, o)| **o)
        .map(|(l, _)| l.as_str())
        .collect();
    let name = &schema.protected().name;
    if codes.is_empty() {
        return Ok(Column::Categorical {
            levels: vec![schema.x0.clone(), schema.x1.clone()],
            codes: Vec::new(),
        });
    }
    if seen.len() != 2 {
        return Err(Error::Schema(format!(
            "protected column {name:?} must have exactly 2 observed levels, found {}: {seen:?}",
            seen.len()
        )));
    }
    for l in &seen {
        if *l != schema.x0 && *l != schema.x1 {
            return Err(Error::Schema(format!(
                "protected column {name:?} has level {l:?}, expected {:?} or {:?}",
                schema.x0, schema.x1
            )));
        }
    }
    let remap: Vec<u32> = levels.iter().map(|l| u32::from(*l == schema.x1)).collect();
    Ok(Column::Categorical {
        levels: vec![schema.x0.clone(), schema.x1.clone()],
        codes: codes.iter().map(|&c| remap[c as usize]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::ColumnSpec;

    fn schema() -> SfmSchema {
        SfmSchema::new(
            vec![
                ColumnSpec::new("x", Role::Protected, Kind::Categorical),
                ColumnSpec::new("z", Role::Confounder, Kind::Continuous),
            ],
            "b",
            "a",
        )
        .unwrap()
    }

    #[test]
    fn protected_codes_follow_schema_not_lexical_order() {
        let d = Dataset::from_columns(
            schema(),
            vec![Column::from_labels(&["a", "b", "a"]), Column::Continuous(vec![1.0, 2.0, 3.0])],
        )
        .unwrap();
        // x0 = "b", x1 = "a"
        assert_eq!(d.x(), &[1, 0, 1]);
        assert_eq!(d.group_sizes(), [1, 2]);
        let swapped = d.swap_protected();
        assert_eq!(swapped.x(), &[0, 1, 0]);
    }

    #[test]
    fn rejects_three_level_protected_and_nonfinite() {
        let err = Dataset::from_columns(
            schema(),
            vec![Column::from_labels(&["a", "b", "c"]), Column::Continuous(vec![1.0, 2.0, 3.0])],
        );
        assert!(matches!(err, Err(Error::Schema(_))));
        let err = Dataset::from_columns(
            schema(),
            vec![Column::from_labels(&["a", "b"]), Column::Continuous(vec![1.0, f64::NAN])],
        );
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn natural_order_sorts_numeric_labels_numerically() {
        let l = natural_level_order(["10", "2", "1"].into_iter());
        assert_eq!(l, vec!["1", "2", "10"]);
        let l = natural_level_order(["b", "a", "b"].into_iter());
        assert_eq!(l, vec!["a", "b"]);
    }
}
