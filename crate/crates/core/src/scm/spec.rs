//! Declarative structural causal models over the standard fairness model.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::dataset::{Column, Dataset};
use crate::data::schema::{ColumnSpec, Kind, Role, SfmSchema};
use crate::error::{Error, Result};
use crate::rng;
use crate::scm::expr::Expr;

/// A finite-support exogenous variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exogenous {
    pub name: String,
    pub values: Vec<f64>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtectedSpec {
    pub name: String,
    /// Must evaluate to 0 (x0) or 1 (x1).
    pub mechanism: String,
    #[serde(default = "default_x0")]
    pub x0: String,
    #[serde(default = "default_x1")]
    pub x1: String,
}

fn default_x0() -> String {
    "0".into()
}

fn default_x1() -> String {
    "1".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub mechanism: String,
    #[serde(default = "default_kind")]
    pub kind: Kind,
}

fn default_kind() -> Kind {
    Kind::Categorical
}

/// A named cluster mechanism over the endogenous variables, shipped with a
/// spec so fixtures can refer to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub k: usize,
    /// Must evaluate to a cluster index in `0..k`.
    pub expr: String,
}

/// An SCM whose graph is the standard fairness model: X and Z share
/// exogenous parents, W may depend on X and Z, nothing feeds back into X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmSpec {
    #[serde(default)]
    pub description: String,
    pub exogenous: Vec<Exogenous>,
    pub protected: ProtectedSpec,
    #[serde(default)]
    pub confounders: Vec<VariableSpec>,
    #[serde(default)]
    pub mediators: Vec<VariableSpec>,
    #[serde(default)]
    pub probes: BTreeMap<String, ProbeSpec>,
}

impl ScmSpec {
    pub fn from_json_str(s: &str) -> Result<ScmSpec> {
        let spec: ScmSpec = serde_json::from_str(s)?;
        spec.compile()?;
        Ok(spec)
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<ScmSpec> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Validates the spec and binds every mechanism to evaluation slots.
    pub fn compile(&self) -> Result<CompiledScm> {
        CompiledScm::new(self)
    }

    /// Dataset schema of sampled data: X protected, Z confounders, W mediators.
    pub fn schema(&self) -> SfmSchema {
        let mut cols = vec![ColumnSpec::new(&self.protected.name, Role::Protected, Kind::Categorical)];
        cols.extend(
            self.confounders
                .iter()
                .map(|v| ColumnSpec::new(&v.name, Role::Confounder, v.kind)),
        );
        cols.extend(self.mediators.iter().map(|v| ColumnSpec::new(&v.name, Role::Mediator, v.kind)));
        SfmSchema {
            columns: cols,
            x0: self.protected.x0.clone(),
            x1: self.protected.x1.clone(),
            bins: crate::data::schema::DEFAULT_BINS,
        }
    }
}

/// One realization of the exogenous variables, in spec order.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub u: Vec<f64>,
}

impl Unit {
    pub fn from_map(spec: &ScmSpec, values: &BTreeMap<String, f64>) -> Result<Unit> {
        let u = spec
            .exogenous
            .iter()
            .map(|e| {
                let v = *values
                    .get(&e.name)
                    .ok_or_else(|| Error::Scm(format!("unit has no value for {:?}", e.name)))?;
                if !e.values.contains(&v) {
                    return Err(Error::Scm(format!("{v} is outside the support of {:?}", e.name)));
                }
                Ok(v)
            })
            .collect::<Result<_>>()?;
        Ok(Unit { u })
    }
}

/// Interventions for a potential response: `do(X = x)` and/or fixed
/// mediator values, keyed by mediator name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Intervention {
    pub x: Option<usize>,
    pub w: BTreeMap<String, f64>,
}

impl Intervention {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn on_x(x: usize) -> Self {
        Intervention {
            x: Some(x),
            w: BTreeMap::new(),
        }
    }
}

/// Values of the endogenous variables for one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Endogenous {
    pub x: usize,
    pub z: Vec<f64>,
    pub w: Vec<f64>,
}

/// A validated spec with mechanisms bound to slots
/// `[u..., x, z..., w...]`.
#[derive(Debug, Clone)]
pub struct CompiledScm {
    spec: ScmSpec,
    f_x: Expr,
    f_z: Vec<Expr>,
    f_w: Vec<Expr>,
    probes: BTreeMap<String, (usize, Expr)>,
    cumulative: Vec<Vec<f64>>,
}

impl CompiledScm {
    fn new(spec: &ScmSpec) -> Result<Self> {
        let mut names: Vec<&str> = Vec::new();
        for e in &spec.exogenous {
            if e.values.is_empty() || e.values.len() != e.probs.len() {
                return Err(Error::Scm(format!(
                    "exogenous {:?} needs equally many values and probabilities",
                    e.name
                )));
            }
            if e.probs.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
                return Err(Error::Scm(format!("exogenous {:?} has a non-positive probability", e.name)));
            }
            let total: f64 = e.probs.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Scm(format!("probabilities of {:?} sum to {total}", e.name)));
            }
            if e.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Scm(format!("exogenous {:?} has a non-finite value", e.name)));
            }
            names.push(&e.name);
        }
        let n_u = names.len();
        names.push(&spec.protected.name);
        names.extend(spec.confounders.iter().map(|v| v.name.as_str()));
        names.extend(spec.mediators.iter().map(|v| v.name.as_str()));
        let mut slots: HashMap<String, usize> = HashMap::new();
        for (i, n) in names.iter().enumerate() {
            if slots.insert(n.to_string(), i).is_some() {
                return Err(Error::Scm(format!("variable {n:?} is declared twice")));
            }
        }
        if spec.protected.x0 == spec.protected.x1 {
            return Err(Error::Scm("x0 and x1 labels must differ".into()));
        }

        // Each mechanism may only see variables in `allowed`.
        let compile = |what: &str, src: &str, allowed: usize, extra: &[usize]| -> Result<Expr> {
            let e = Expr::parse(src).map_err(|err| Error::Scm(format!("{what}: {err}")))?;
            for v in e.variables() {
                let ok = slots.get(v).is_some_and(|&s| s < allowed || extra.contains(&s));
                if !ok {
                    let reason = if slots.contains_key(v) {
                        "is not a permitted parent in the standard fairness model"
                    } else {
                        "is not declared"
                    };
                    return Err(Error::Scm(format!("{what}: variable {v:?} {reason}")));
                }
            }
            e.bind(&slots)
        };
        let x_slot = n_u;
        let z0 = n_u + 1;
        let w0 = z0 + spec.confounders.len();
        let f_x = compile(&format!("mechanism of {:?}", spec.protected.name), &spec.protected.mechanism, n_u, &[])?;
        // Z sees U and earlier Z, but not X.
        let f_z = spec
            .confounders
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let earlier: Vec<usize> = (z0..z0 + j).collect();
                compile(&format!("mechanism of {:?}", v.name), &v.mechanism, n_u, &earlier)
            })
            .collect::<Result<Vec<_>>>()?;
        let f_w = spec
            .mediators
            .iter()
            .enumerate()
            .map(|(j, v)| compile(&format!("mechanism of {:?}", v.name), &v.mechanism, w0 + j, &[]))
            .collect::<Result<Vec<_>>>()?;
        let endo: Vec<usize> = (x_slot..w0 + spec.mediators.len()).collect();
        let probes = spec
            .probes
            .iter()
            .map(|(name, p)| {
                if p.k == 0 {
                    return Err(Error::Scm(format!("probe {name:?} needs k >= 1")));
                }
                Ok((name.clone(), (p.k, compile(&format!("probe {name:?}"), &p.expr, 0, &endo)?)))
            })
            .collect::<Result<_>>()?;
        let cumulative = spec
            .exogenous
            .iter()
            .map(|e| {
                let mut acc = 0.0;
                e.probs
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect()
            })
            .collect();
        Ok(CompiledScm {
            spec: spec.clone(),
            f_x,
            f_z,
            f_w,
            probes,
            cumulative,
        })
    }

    pub fn spec(&self) -> &ScmSpec {
        &self.spec
    }

    pub fn n_exogenous(&self) -> usize {
        self.spec.exogenous.len()
    }

    pub fn n_z(&self) -> usize {
        self.f_z.len()
    }

    pub fn n_w(&self) -> usize {
        self.f_w.len()
    }

    pub(crate) fn n_slots(&self) -> usize {
        self.n_exogenous() + 1 + self.n_z() + self.n_w()
    }

    /// Named probe mechanism: `(k, expression over x, z, w)`.
    pub fn probe(&self, name: &str) -> Option<(usize, &Expr)> {
        self.probes.get(name).map(|(k, e)| (*k, e))
    }

    /// Evaluates all mechanisms for the unit whose exogenous values occupy
    /// `slots[..n_u]`, writing X, Z, W into the rest. Interventions replace
    /// the corresponding mechanisms by constants.
    pub(crate) fn evaluate(&self, slots: &mut [f64], x: Option<usize>, w: &[Option<f64>]) -> Result<()> {
        let n_u = self.n_exogenous();
        let xv = match x {
            Some(x) => x as f64,
            None => {
                let v = self.f_x.eval(slots)?;
                if v != 0.0 && v != 1.0 {
                    return Err(Error::Scm(format!("protected mechanism returned {v}, expected 0 or 1")));
                }
                v
            }
        };
        slots[n_u] = xv;
        let z0 = n_u + 1;
        for (j, f) in self.f_z.iter().enumerate() {
            slots[z0 + j] = checked(f.eval(slots)?, &self.spec.confounders[j].name)?;
        }
        let w0 = z0 + self.f_z.len();
        for (j, f) in self.f_w.iter().enumerate() {
            slots[w0 + j] = match w.get(j).copied().flatten() {
                Some(v) => v,
                None => checked(f.eval(slots)?, &self.spec.mediators[j].name)?,
            };
        }
        Ok(())
    }

    pub(crate) fn read(&self, slots: &[f64]) -> Endogenous {
        let n_u = self.n_exogenous();
        let z0 = n_u + 1;
        let w0 = z0 + self.n_z();
        Endogenous {
            x: slots[n_u] as usize,
            z: slots[z0..w0].to_vec(),
            w: slots[w0..].to_vec(),
        }
    }

    /// Endogenous values of `unit` in the submodel where the intervened
    /// mechanisms are replaced by constants.
    pub fn potential_response(&self, unit: &Unit, iv: &Intervention) -> Result<Endogenous> {
        if unit.u.len() != self.n_exogenous() {
            return Err(Error::Scm(format!(
                "unit has {} exogenous values, spec declares {}",
                unit.u.len(),
                self.n_exogenous()
            )));
        }
        if let Some(x) = iv.x {
            if x > 1 {
                return Err(Error::Scm(format!("intervention X = {x} is not a level (0 or 1)")));
            }
        }
        let mut w = vec![None; self.n_w()];
        for (name, &v) in &iv.w {
            let j = self
                .spec
                .mediators
                .iter()
                .position(|m| &m.name == name)
                .ok_or_else(|| Error::Scm(format!("{name:?} is not a mediator; only X and W can be intervened on")))?;
            if !v.is_finite() {
                return Err(Error::Scm(format!("intervention value for {name:?} is not finite")));
            }
            w[j] = Some(v);
        }
        let mut slots = vec![0.0; self.n_slots()];
        slots[..unit.u.len()].copy_from_slice(&unit.u);
        self.evaluate(&mut slots, iv.x, &w)?;
        Ok(self.read(&slots))
    }

    pub(crate) fn draw_unit_into(&self, rng: &mut impl Rng, slots: &mut [f64]) {
        for (i, e) in self.spec.exogenous.iter().enumerate() {
            let r: f64 = rng.gen();
            let cum = &self.cumulative[i];
            let j = cum.partition_point(|&c| c <= r).min(cum.len() - 1);
            slots[i] = e.values[j];
        }
    }

    /// Draws `n` units and evaluates the observational model.
    ///
    /// Rows are generated in blocks with per-block seeded streams, so the
    /// output is identical for any thread count.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        const BLOCK: usize = 4096;
        let n_blocks = n.div_ceil(BLOCK);
        let blocks: Vec<Vec<Endogenous>> = (0..n_blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = rng::stream(seed, &[b as u64]);
                let rows = BLOCK.min(n - b * BLOCK);
                let mut slots = vec![0.0; self.n_slots()];
                let none = vec![None; self.n_w()];
                (0..rows)
                    .map(|_| {
                        self.draw_unit_into(&mut rng, &mut slots);
                        self.evaluate(&mut slots, None, &none)?;
                        Ok(self.read(&slots))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let rows: Vec<Endogenous> = blocks.into_iter().flatten().collect();
        self.to_dataset(&rows)
    }

    /// Assembles endogenous rows into a dataset with [`ScmSpec::schema`].
    pub fn to_dataset(&self, rows: &[Endogenous]) -> Result<Dataset> {
        let spec = &self.spec;
        let xs: Vec<&str> = rows
            .iter()
            .map(|r| if r.x == 0 { spec.protected.x0.as_str() } else { spec.protected.x1.as_str() })
            .collect();
        let mut columns = vec![if rows.is_empty() {
            Column::Categorical {
                levels: vec![spec.protected.x0.clone(), spec.protected.x1.clone()],
                codes: Vec::new(),
            }
        } else {
            Column::from_labels(&xs)
        }];
        let make = |kind: Kind, values: Vec<f64>| match kind {
            Kind::Continuous => Column::Continuous(values),
            Kind::Categorical => {
                let labels: Vec<String> = values.iter().map(|&v| format_level(v)).collect();
                Column::from_labels(&labels)
            }
        };
        for (j, v) in spec.confounders.iter().enumerate() {
            columns.push(make(v.kind, rows.iter().map(|r| r.z[j]).collect()));
        }
        for (j, v) in spec.mediators.iter().enumerate() {
            columns.push(make(v.kind, rows.iter().map(|r| r.w[j]).collect()));
        }
        if !rows.is_empty() && (xs.iter().all(|&x| x == xs[0])) {
            return Err(Error::Data(format!(
                "sample contains only the {:?} group; the protected attribute needs both levels",
                xs[0]
            )));
        }
        Dataset::from_columns(spec.schema(), columns)
    }
}

fn checked(v: f64, name: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Scm(format!("mechanism of {name:?} returned a non-finite value")))
    }
}

/// Label used for a numeric value stored in a categorical column: integers
/// without a decimal point, anything else in shortest round-trip form.
pub fn format_level(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScmSpec {
        serde_json::from_str(
            r#"{
              "exogenous": [
                {"name": "u", "values": [0, 1], "probs": [0.5, 0.5]},
                {"name": "v", "values": [0, 1], "probs": [0.3, 0.7]}
              ],
              "protected": {"name": "x", "mechanism": "u"},
              "confounders": [{"name": "z", "mechanism": "(u + v) % 2"}],
              "mediators": [{"name": "w", "mechanism": "x + z"}]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn potential_responses() {
        let m = tiny().compile().unwrap();
        let unit = Unit { u: vec![1.0, 1.0] };
        let obs = m.potential_response(&unit, &Intervention::none()).unwrap();
        assert_eq!(obs, Endogenous { x: 1, z: vec![0.0], w: vec![1.0] });
        assert_eq!(m.potential_response(&unit, &Intervention::on_x(1)).unwrap(), obs);
        let x0 = m.potential_response(&unit, &Intervention::on_x(0)).unwrap();
        assert_eq!(x0.w, vec![0.0]);
        assert_eq!(x0.z, obs.z);
        let mut iv = Intervention::on_x(0);
        iv.w.insert("w".into(), 2.0);
        assert_eq!(m.potential_response(&unit, &iv).unwrap().w, vec![2.0]);
        assert!(m.potential_response(&unit, &Intervention::on_x(2)).is_err());
        let mut bad = Intervention::none();
        bad.w.insert("z".into(), 1.0);
        assert!(m.potential_response(&unit, &bad).is_err());
    }

    #[test]
    fn sfm_violations_are_rejected() {
        let mut s = tiny();
        s.protected.mechanism = "z".into();
        assert!(s.compile().is_err());
        let mut s = tiny();
        s.confounders[0].mechanism = "x".into();
        assert!(s.compile().is_err());
        let mut s = tiny();
        s.confounders[0].mechanism = "w".into();
        assert!(s.compile().is_err());
        let mut s = tiny();
        s.exogenous[1].probs = vec![0.0, 1.0];
        assert!(s.compile().is_err());
        let mut s = tiny();
        s.mediators[0].mechanism = "nope".into();
        assert!(s.compile().is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = tiny().compile().unwrap();
        let a = m.sample(10_000, 3).unwrap();
        let b = m.sample(10_000, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, m.sample(10_000, 4).unwrap());
        assert_eq!(m.sample(0, 3).unwrap().n(), 0);
    }

    #[test]
    fn level_formatting() {
        assert_eq!(format_level(3.0), "3");
        assert_eq!(format_level(-0.0), "0");
        assert_eq!(format_level(0.25), "0.25");
    }
}
