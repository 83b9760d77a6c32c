//! Random discrete SCMs in standard-fairness-model form, for property tests
//! that must hold on any spec.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::rng;
use crate::scm::spec::{Exogenous, ProtectedSpec, ScmSpec, VariableSpec};

#[derive(Debug, Clone, Copy)]
pub struct RandomScmOptions {
    pub n_z: usize,
    pub n_w: usize,
    /// Number of levels of every Z and W variable.
    pub levels: usize,
}

impl Default for RandomScmOptions {
    fn default() -> Self {
        RandomScmOptions {
            n_z: 1,
            n_w: 2,
            levels: 2,
        }
    }
}

/// A random spec plus the value sets of its Z and W variables.
#[derive(Debug, Clone)]
pub struct RandomScm {
    pub spec: ScmSpec,
    pub levels: usize,
}

fn random_probs(rng: &mut impl Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut p: Vec<f64> = raw.iter().map(|v| v / total).collect();
    // Make the sum exactly one so validation never trips on rounding.
    let head: f64 = p[..m - 1].iter().sum();
    p[m - 1] = 1.0 - head;
    p
}

fn table(rng: &mut impl Rng, size: usize, levels: usize) -> String {
    let entries: Vec<String> = (0..size).map(|_| rng.gen_range(0..levels).to_string()).collect();
    format!("[{}]", entries.join(", "))
}

/// `a * r^(n-1) + ... + z`: mixed-radix index of the named variables.
fn index_expr(vars: &[(String, usize)]) -> (String, usize) {
    let mut size = 1;
    let mut terms = Vec::new();
    for (name, radix) in vars.iter().rev() {
        terms.push(format!("{name} * {size}"));
        size *= radix;
    }
    terms.reverse();
    (terms.join(" + "), size)
}

pub fn random_scm(seed: u64, opts: RandomScmOptions) -> RandomScm {
    let mut rng = rng::stream(seed, &[0x5c3]);
    let lv = opts.levels.max(2);
    let mut exogenous = vec![
        Exogenous {
            name: "u_xz".into(),
            values: vec![0.0, 1.0],
            probs: random_probs(&mut rng, 2),
        },
        Exogenous {
            name: "u_x".into(),
            values: vec![0.0, 1.0],
            probs: random_probs(&mut rng, 2),
        },
    ];
    // X takes both values: the table over (u_xz, u_x) is a shuffled mix.
    let mut xt = vec![0, 1, rng.gen_range(0..2), rng.gen_range(0..2)];
    xt.shuffle(&mut rng);
    let x_mech = format!(
        "[{}][u_xz * 2 + u_x]",
        xt.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
    );

    let mut confounders = Vec::new();
    for j in 0..opts.n_z {
        let u = format!("u_z{j}");
        exogenous.push(Exogenous {
            name: u.clone(),
            values: (0..lv).map(|v| v as f64).collect(),
            probs: random_probs(&mut rng, lv),
        });
        let mut vars = vec![("u_xz".to_string(), 2), (u, lv)];
        vars.extend((0..j).map(|i| (format!("z{i}"), lv)));
        let (idx, size) = index_expr(&vars);
        confounders.push(VariableSpec {
            name: format!("z{j}"),
            mechanism: format!("{}[{idx}]", table(&mut rng, size, lv)),
            kind: crate::data::schema::Kind::Categorical,
        });
    }

    let mut mediators = Vec::new();
    for j in 0..opts.n_w {
        let u = format!("u_w{j}");
        exogenous.push(Exogenous {
            name: u.clone(),
            values: (0..lv).map(|v| v as f64).collect(),
            probs: random_probs(&mut rng, lv),
        });
        let mut vars = vec![("x".to_string(), 2)];
        vars.extend((0..opts.n_z).map(|i| (format!("z{i}"), lv)));
        vars.extend((0..j).map(|i| (format!("w{i}"), lv)));
        vars.push((u, lv));
        let (idx, size) = index_expr(&vars);
        mediators.push(VariableSpec {
            name: format!("w{j}"),
            mechanism: format!("{}[{idx}]", table(&mut rng, size, lv)),
            kind: crate::data::schema::Kind::Categorical,
        });
    }

    RandomScm {
        spec: ScmSpec {
            description: format!("random SFM spec, seed {seed}"),
            exogenous,
            protected: ProtectedSpec {
                name: "x".into(),
                mechanism: x_mech,
                x0: "0".into(),
                x1: "1".into(),
            },
            confounders,
            mediators,
            probes: Default::default(),
        },
        levels: lv,
    }
}

/// A random table-lookup cluster expression over (x,) z, w with `k` clusters.
pub fn random_mechanism_expr(r: &RandomScm, k: usize, use_x: bool, seed: u64) -> String {
    let mut rng = rng::stream(seed, &[0xc1]);
    let mut vars = Vec::new();
    if use_x {
        vars.push(("x".to_string(), 2));
    }
    vars.extend(r.spec.confounders.iter().map(|v| (v.name.clone(), r.levels)));
    vars.extend(r.spec.mediators.iter().map(|v| (v.name.clone(), r.levels)));
    if vars.is_empty() {
        return "0".into();
    }
    let (idx, size) = index_expr(&vars);
    format!("{}[{idx}]", table(&mut rng, size, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_specs_compile_and_sample_both_groups() {
        for seed in 0..10 {
            let r = random_scm(seed, RandomScmOptions::default());
            let m = r.spec.compile().unwrap();
            let d = m.sample(2000, seed).unwrap();
            let g = d.group_sizes();
            assert!(g[0] > 0 && g[1] > 0);
        }
    }
}
