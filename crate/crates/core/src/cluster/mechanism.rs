//! A fitted model as a cluster mechanism of an SCM, for oracle audits.

use crate::cluster::kproto::ClusterModel;
use crate::data::schema::Kind;
use crate::error::{Error, Result};
use crate::scm::mechanism::ClusterMechanism;
use crate::scm::spec::{format_level, ScmSpec};

#[derive(Debug, Clone, Copy)]
enum Source {
    X,
    Z(usize),
    W(usize),
}

/// Evaluates `model` on the endogenous values of `spec`, formatting
/// categorical values the way sampled datasets label them.
#[derive(Debug, Clone)]
pub struct ModelMechanism {
    model: ClusterModel,
    numeric: Vec<Source>,
    categorical: Vec<Source>,
    x_labels: [String; 2],
}

impl ModelMechanism {
    pub fn new(model: ClusterModel, spec: &ScmSpec) -> Result<Self> {
        let locate = |name: &str, want: Kind| -> Result<Source> {
            let (src, kind) = if name == spec.protected.name {
                (Source::X, Kind::Categorical)
            } else if let Some(j) = spec.confounders.iter().position(|v| v.name == name) {
                (Source::Z(j), spec.confounders[j].kind)
            } else if let Some(j) = spec.mediators.iter().position(|v| v.name == name) {
                (Source::W(j), spec.mediators[j].kind)
            } else {
                return Err(Error::Scm(format!("model feature {name:?} is not a variable of the SCM")));
            };
            if kind != want {
                return Err(Error::Scm(format!("model feature {name:?} has a different kind in the SCM")));
            }
            Ok(src)
        };
        let numeric = model
            .numeric_features
            .iter()
            .map(|n| locate(n, Kind::Continuous))
            .collect::<Result<_>>()?;
        let categorical = model
            .categorical_features
            .iter()
            .map(|n| locate(n, Kind::Categorical))
            .collect::<Result<_>>()?;
        Ok(ModelMechanism {
            model,
            numeric,
            categorical,
            x_labels: [spec.protected.x0.clone(), spec.protected.x1.clone()],
        })
    }

    /// True when the model reads the protected attribute.
    pub fn reads_x(&self) -> bool {
        self.categorical.iter().any(|s| matches!(s, Source::X))
    }
}

impl ClusterMechanism for ModelMechanism {
    fn n_clusters(&self) -> usize {
        self.model.k
    }

    fn assign(&self, x: usize, z: &[f64], w: &[f64]) -> Result<usize> {
        let value = |s: &Source| match *s {
            Source::X => f64::from(x as u32),
            Source::Z(j) => z[j],
            Source::W(j) => w[j],
        };
        let num: Vec<f64> = self.numeric.iter().map(value).collect();
        let labels: Vec<String> = self
            .categorical
            .iter()
            .map(|s| match s {
                Source::X => self.x_labels[x].clone(),
                other => format_level(value(other)),
            })
            .collect();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        Ok(self.model.assign_values(&num, &refs))
    }
}
