//! Plug-in evaluation of the identification formulas on cell tables.
//!
//! Outcome tables `P(c | x, z, w)` come from one set of row counts and the
//! covariate weights `P(z)`, `P(z | x)`, `P(w | x, z)` from another. The
//! point estimate uses the same counts for both; the bootstrap resamples
//! them separately.

use crate::data::cells::{mediator_conditionals, CellCounts, CellIndex, Margins, Smoothing};
use crate::error::Result;

/// Point values of every effect for one cluster.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Effects {
    pub tv: f64,
    pub nde: f64,
    /// x0-conditioned form: `Σ P(c|x0,z,w) [P(w|x1,z) − P(w|x0,z)] P(z)`.
    pub nie: f64,
    /// `Σ P(c|x1,z,w) [P(w|x0,z) − P(w|x1,z)] P(z)`; with it
    /// `TV = NDE − NIE_{x1,x0} + Exp-SE` holds on unsmoothed tables.
    pub nie_x1x0: f64,
    pub exp_se: f64,
}

impl Effects {
    pub fn decomposition_residual(&self) -> f64 {
        self.tv - (self.nde - self.nie_x1x0 + self.exp_se)
    }
}

/// Smoothed outcome tables `P̃(c | x, cell)`, laid out `[(cell*2+x)*k + j]`.
///
/// A sparse (x, cell) table is pulled toward the x-pooled label frequency of
/// the cell, then of its Z-cell, then overall, then uniform. Pooling over x
/// keeps an X-blind assignment X-blind in every observed cell.
pub(crate) fn outcome_tables(index: &CellIndex, a: &CellCounts, smoothing: Smoothing) -> (Vec<f64>, usize) {
    let k = a.k();
    let kf = k as f64;
    let cells = index.n_cells();
    let mut nk_z = vec![0.0; index.n_z() * k];
    let mut n_z = vec![0.0; index.n_z()];
    let mut nk_all = vec![0.0; k];
    for c in 0..cells {
        let z = index.cell_z(c);
        for x in 0..2 {
            n_z[z] += a.n(c, x);
            for j in 0..k {
                nk_z[z * k + j] += a.nk(c, x, j);
                nk_all[j] += a.nk(c, x, j);
            }
        }
    }
    let n_all: f64 = n_z.iter().sum();
    let mut out = vec![0.0; cells * 2 * k];
    let mut flagged = 0;
    let mut prior = vec![0.0; k];
    for c in 0..cells {
        let z = index.cell_z(c);
        let pooled = a.n(c, 0) + a.n(c, 1);
        for (j, p) in prior.iter_mut().enumerate() {
            *p = if pooled > 0.0 {
                (a.nk(c, 0, j) + a.nk(c, 1, j)) / pooled
            } else if n_z[z] > 0.0 {
                nk_z[z * k + j] / n_z[z]
            } else if n_all > 0.0 {
                nk_all[j] / n_all
            } else {
                1.0 / kf
            };
        }
        for x in 0..2 {
            let n = a.n(c, x);
            if smoothing.applies(n) {
                flagged += 1;
            }
            for j in 0..k {
                out[(c * 2 + x) * k + j] = smoothing.estimate(a.nk(c, x, j), n, prior[j], kf);
            }
        }
    }
    (out, flagged)
}

/// Everything the estimators need, derived from outcome counts `a` and
/// weight counts `b`.
pub(crate) struct Tables {
    pub k: usize,
    pub p_k: Vec<f64>,
    pub p_w: Vec<[f64; 2]>,
    pub p_z: Vec<f64>,
    pub p_z_x: Vec<[f64; 2]>,
    /// `P(cell | x)` for the TV mixture.
    pub p_cell_x: Vec<[f64; 2]>,
    pub flagged: usize,
}

impl Tables {
    pub fn build(index: &CellIndex, a: &CellCounts, b: &CellCounts, smoothing: Smoothing) -> Result<Tables> {
        let (p_k, flagged_k) = outcome_tables(index, a, smoothing);
        let margins = Margins::of(index, b);
        margins.require_both_groups()?;
        let (p_w, flagged_w) = mediator_conditionals(index, b, &margins, smoothing);
        let p_z = margins.n_z.iter().map(|v| v / margins.total).collect();
        let p_z_x = margins
            .n_xz
            .chunks(2)
            .map(|p| [p[0] / margins.n_x[0], p[1] / margins.n_x[1]])
            .collect();
        let p_cell_x = (0..index.n_cells())
            .map(|c| [b.n(c, 0) / margins.n_x[0], b.n(c, 1) / margins.n_x[1]])
            .collect();
        Ok(Tables {
            k: a.k(),
            p_k,
            p_w,
            p_z,
            p_z_x,
            p_cell_x,
            flagged: flagged_k + flagged_w,
        })
    }

    #[inline]
    pub fn pk(&self, cell: usize, x: usize, j: usize) -> f64 {
        self.p_k[(cell * 2 + x) * self.k + j]
    }

    /// `P(c_j | x, z) = Σ_w P̃(c_j | x, z, w) P̃(w | x, z)`.
    pub fn pk_z(&self, index: &CellIndex, z: usize, x: usize, j: usize) -> f64 {
        index
            .z_members(z)
            .iter()
            .map(|&c| self.pk(c as usize, x, j) * self.p_w[c as usize][x])
            .sum()
    }

    /// All effects of cluster `j`. `tv_outcome` supplies the raw outcome
    /// frequencies used by the TV mixture.
    pub fn effects(&self, index: &CellIndex, j: usize, tv_outcome: &dyn Fn(usize, usize) -> f64) -> Effects {
        let mut e = Effects::default();
        for z in 0..index.n_z() {
            let pz = self.p_z[z];
            for &c in index.z_members(z) {
                let c = c as usize;
                let (k0, k1) = (self.pk(c, 0, j), self.pk(c, 1, j));
                let [w0, w1] = self.p_w[c];
                e.nde += (k1 - k0) * w0 * pz;
                e.nie += k0 * (w1 - w0) * pz;
                e.nie_x1x0 += k1 * (w0 - w1) * pz;
            }
            let (a0, a1) = (self.pk_z(index, z, 0, j), self.pk_z(index, z, 1, j));
            let [q0, q1] = self.p_z_x[z];
            e.exp_se += a1 * (q1 - pz) - a0 * (q0 - pz);
        }
        let mut tv = [0.0; 2];
        for (c, pcx) in self.p_cell_x.iter().enumerate() {
            for x in 0..2 {
                if pcx[x] > 0.0 {
                    tv[x] += tv_outcome(c, x) * pcx[x];
                }
            }
        }
        e.tv = tv[1] - tv[0];
        e
    }
}

/// Raw outcome frequency `n(c_j, x, cell) / n(x, cell)`, or the smoothed
/// table where the outcome counts have no rows for that (x, cell).
pub(crate) fn raw_outcome<'a>(a: &'a CellCounts, t: &'a Tables, j: usize) -> impl Fn(usize, usize) -> f64 + 'a {
    move |c, x| {
        let n = a.n(c, x);
        if n > 0.0 {
            a.nk(c, x, j) / n
        } else {
            t.pk(c, x, j)
        }
    }
}
