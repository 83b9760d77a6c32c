//! Column roles of the standard fairness model.
//!
//! A schema projects every dataset column onto one of four roles: the binary
//! protected attribute X, confounders Z, mediators W, or ignored. The
//! baseline level x0 and comparison level x1 are always explicit.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Protected,
    Confounder,
    Mediator,
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Categorical,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub role: Role,
    pub kind: Kind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, role: Role, kind: Kind) -> Self {
        ColumnSpec {
            name: name.into(),
            role,
            kind,
        }
    }
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

/// Which effects the fair clustering pipeline removes, in (NDE, NIE, SE) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct EffectFlags {
    pub nde: bool,
    pub nie: bool,
    pub se: bool,
}

impl EffectFlags {
    pub const NONE: EffectFlags = EffectFlags::new(false, false, false);
    pub const ALL: EffectFlags = EffectFlags::new(true, true, true);

    pub const fn new(nde: bool, nie: bool, se: bool) -> Self {
        EffectFlags { nde, nie, se }
    }

    /// Parses `"1,1,0"` / `"110"` style strings in (NDE, NIE, SE) order.
    pub fn parse(s: &str) -> Result<Self> {
        let bits: Vec<char> = s.chars().filter(|c| !matches!(c, ',' | ' ' | '(' | ')')).collect();
        if bits.len() != 3 || bits.iter().any(|c| *c != '0' && *c != '1') {
            return Err(Error::Config(format!(
                "effect flags must be three 0/1 digits in (NDE, NIE, SE) order, got {s:?}"
            )));
        }
        Ok(EffectFlags::new(bits[0] == '1', bits[1] == '1', bits[2] == '1'))
    }

    pub fn all_combinations() -> impl Iterator<Item = EffectFlags> {
        (0..8u8).map(|b| EffectFlags::new(b & 4 != 0, b & 2 != 0, b & 1 != 0))
    }
}

impl std::fmt::Display for EffectFlags {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{},{},{}",
            u8::from(self.nde),
            u8::from(self.nie),
            u8::from(self.se)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SfmSchema {
    pub columns: Vec<ColumnSpec>,
    pub x0: String,
    pub x1: String,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

impl SfmSchema {
    pub fn new(columns: Vec<ColumnSpec>, x0: impl Into<String>, x1: impl Into<String>) -> Result<Self> {
        let schema = SfmSchema {
            columns,
            x0: x0.into(),
            x1: x1.into(),
            bins: DEFAULT_BINS,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn with_bins(mut self, bins: usize) -> Result<Self> {
        self.bins = bins;
        self.validate()?;
        Ok(self)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let schema: SfmSchema = serde_json::from_str(s)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for c in &self.columns {
            if c.name.is_empty() {
                return Err(Error::Schema("column with empty name".into()));
            }
            if !names.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column {:?}", c.name)));
            }
        }
        let protected: Vec<&ColumnSpec> = self.columns.iter().filter(|c| c.role == Role::Protected).collect();
        match protected.as_slice() {
            [p] if p.kind == Kind::Categorical => {}
            [p] => {
                return Err(Error::Schema(format!(
                    "protected column {:?} must be categorical",
                    p.name
                )))
            }
            [] => return Err(Error::Schema("no protected column".into())),
            _ => {
                return Err(Error::Schema(format!(
                    "exactly one protected column allowed, found {}",
                    protected.len()
                )))
            }
        }
        if self.x0 == self.x1 {
            return Err(Error::Schema(format!("x0 and x1 are both {:?}", self.x0)));
        }
        if self.bins == 0 {
            return Err(Error::Schema("bins must be at least 1".into()));
        }
        Ok(())
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn protected_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.role == Role::Protected)
            .expect("validated schema has a protected column")
    }

    pub fn protected(&self) -> &ColumnSpec {
        &self.columns[self.protected_index()]
    }

    pub fn indices_with_role(&self, role: Role) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.role == role)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn confounders(&self) -> Vec<usize> {
        self.indices_with_role(Role::Confounder)
    }

    pub fn mediators(&self) -> Vec<usize> {
        self.indices_with_role(Role::Mediator)
    }

    /// The same roles with x0 and x1 exchanged.
    pub fn swapped(&self) -> SfmSchema {
        SfmSchema {
            columns: self.columns.clone(),
            x0: self.x1.clone(),
            x1: self.x0.clone(),
            bins: self.bins,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cols() -> Vec<ColumnSpec> {
        vec![
            ColumnSpec::new("sex", Role::Protected, Kind::Categorical),
            ColumnSpec::new("age", Role::Confounder, Kind::Continuous),
            ColumnSpec::new("occupation", Role::Mediator, Kind::Categorical),
        ]
    }

    #[test]
    fn parses_json_and_defaults_bins() {
        let s = SfmSchema::from_json_str(
            r#"{"columns":[{"name":"sex","role":"protected","kind":"categorical"},
                {"name":"age","role":"confounder","kind":"continuous"}],
                "x0":"female","x1":"male"}"#,
        )
        .unwrap();
        assert_eq!(s.bins, DEFAULT_BINS);
        assert_eq!(s.confounders(), vec![1]);
        assert!(s.mediators().is_empty());
    }

    #[test]
    fn rejects_bad_protected_columns() {
        let mut c = cols();
        c[0].kind = Kind::Continuous;
        assert!(matches!(SfmSchema::new(c, "a", "b"), Err(Error::Schema(_))));

        let mut c = cols();
        c[1].role = Role::Protected;
        c[1].kind = Kind::Categorical;
        assert!(SfmSchema::new(c, "a", "b").is_err());

        let mut c = cols();
        c[0].role = Role::Ignored;
        assert!(SfmSchema::new(c, "a", "b").is_err());

        assert!(SfmSchema::new(cols(), "a", "a").is_err());
    }

    #[test]
    fn role_partition_is_total_and_disjoint() {
        let s = SfmSchema::new(cols(), "female", "male").unwrap();
        let mut all: Vec<usize> = [Role::Protected, Role::Confounder, Role::Mediator, Role::Ignored]
            .iter()
            .flat_map(|r| s.indices_with_role(*r))
            .collect();
        all.sort();
        assert_eq!(all, (0..s.columns.len()).collect::<Vec<_>>());
    }

    #[test]
    fn flags_parse_both_forms() {
        assert_eq!(EffectFlags::parse("1,1,0").unwrap(), EffectFlags::new(true, true, false));
        assert_eq!(EffectFlags::parse("(0,0,1)").unwrap(), EffectFlags::new(false, false, true));
        assert_eq!(EffectFlags::parse("111").unwrap(), EffectFlags::ALL);
        assert!(EffectFlags::parse("1,2,0").is_err());
        assert_eq!(EffectFlags::all_combinations().count(), 8);
        assert_eq!(EffectFlags::ALL.to_string(), "1,1,1");
    }
}
