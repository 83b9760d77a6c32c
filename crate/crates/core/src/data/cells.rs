//! Frequency tables over discretized (Z, W) cells, split by protected group.
//!
//! These tables are shared by the effect estimators, the transport
//! residuals and the bounds, so all three see the same cells and the same
//! smoothing.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::dataset::Dataset;
use crate::data::discretize::Discretizer;
use crate::error::{Error, Result};

/// Additive smoothing for conditional tables built from few observations.
///
/// A conditional distribution over `m` levels estimated from `n` rows is
/// used as-is when `n >= threshold`; otherwise `alpha * m` pseudo-counts are
/// added, spread according to a prior distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Smoothing {
    pub threshold: f64,
    pub alpha: f64,
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing {
            threshold: 5.0,
            alpha: 1.0,
        }
    }
}

impl Smoothing {
    /// Never smooths non-empty cells; empty cells still fall back to the prior.
    pub const OFF: Smoothing = Smoothing {
        threshold: f64::MIN_POSITIVE,
        alpha: 1.0,
    };

    #[inline]
    pub fn applies(&self, n: f64) -> bool {
        n < self.threshold
    }

    #[inline]
    pub fn estimate(&self, count: f64, n: f64, prior: f64, m: f64) -> f64 {
        if n >= self.threshold && n > 0.0 {
            count / n
        } else {
            (count + self.alpha * m * prior) / (n + self.alpha * m)
        }
    }
}

/// Dense ids for the observed (Z, W) cells of a dataset.
#[derive(Debug, Clone)]
pub struct CellIndex {
    row_cell: Vec<u32>,
    cell_z: Vec<u32>,
    z_members: Vec<Vec<u32>>,
    z_keys: Vec<String>,
}

impl CellIndex {
    pub fn build(d: &Dataset, disc: &Discretizer) -> Self {
        let schema = d.schema();
        let z_cols = schema.confounders();
        let w_cols = schema.mediators();
        let z_codes: Vec<Vec<u32>> = z_cols.iter().map(|&c| disc.codes(d, c)).collect();
        let w_codes: Vec<Vec<u32>> = w_cols.iter().map(|&c| disc.codes(d, c)).collect();

        let n = d.n();
        let row_key = |r: usize| -> Vec<u32> {
            z_codes.iter().chain(w_codes.iter()).map(|col| col[r]).collect()
        };
        let nz = z_cols.len();

        let mut cells: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
        let mut interned: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut first_seen: Vec<u32> = Vec::with_capacity(n);
        for r in 0..n {
            let key = row_key(r);
            let next = interned.len() as u32;
            let id = *interned.entry(key).or_insert(next);
            first_seen.push(id);
        }
        for key in interned.keys() {
            cells.insert(key.clone(), 0);
        }
        let mut zs: BTreeMap<Vec<u32>, u32> = BTreeMap::new();
        for key in cells.keys() {
            zs.entry(key[..nz].to_vec()).or_insert(0);
        }
        for (i, v) in zs.values_mut().enumerate() {
            *v = i as u32;
        }
        let mut cell_z = Vec::with_capacity(cells.len());
        let mut z_members = vec![Vec::new(); zs.len()];
        for (i, (key, v)) in cells.iter_mut().enumerate() {
            *v = i as u32;
            let z = zs[&key[..nz]];
            cell_z.push(z);
            z_members[z as usize].push(i as u32);
        }
        let mut remap = vec![0u32; interned.len()];
        for (key, &tmp) in &interned {
            remap[tmp as usize] = cells[key];
        }
        let row_cell = first_seen.into_iter().map(|t| remap[t as usize]).collect();
        let z_keys = zs
            .keys()
            .map(|codes| {
                z_cols
                    .iter()
                    .zip(codes)
                    .map(|(&c, &code)| format!("{}={}", schema.columns[c].name, disc.label(c, code)))
                    .collect::<Vec<_>>()
                    .join("|")
            })
            .collect();
        CellIndex {
            row_cell,
            cell_z,
            z_members,
            z_keys,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.cell_z.len()
    }

    pub fn n_z(&self) -> usize {
        self.z_members.len()
    }

    pub fn row_cell(&self) -> &[u32] {
        &self.row_cell
    }

    pub fn cell_z(&self, cell: usize) -> usize {
        self.cell_z[cell] as usize
    }

    pub fn z_members(&self, z: usize) -> &[u32] {
        &self.z_members[z]
    }

    /// Human-readable key of a Z-cell, e.g. `age=[30,37)|region=north`.
    pub fn z_key(&self, z: usize) -> &str {
        &self.z_keys[z]
    }
}

/// Row counts per (cell, group) and, optionally, per cluster label.
///
/// Counts are `f64` so that bootstrap resamples can be tallied as row
/// multiplicities without materializing resampled datasets.
#[derive(Debug, Clone)]
pub struct CellCounts {
    k: usize,
    n: Vec<f64>,
    nk: Vec<f64>,
}

impl CellCounts {
    /// `labels` are 0-based cluster ids below `k`; `weights` are per-row
    /// multiplicities (all 1 when `None`).
    pub fn tally(index: &CellIndex, x: &[u32], labels: Option<(&[u32], usize)>, weights: Option<&[u32]>) -> Self {
        let cells = index.n_cells();
        let k = labels.map_or(0, |(_, k)| k);
        let mut n = vec![0.0; cells * 2];
        let mut nk = vec![0.0; cells * 2 * k];
        for (r, &cell) in index.row_cell().iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[r] as f64);
            if w == 0.0 {
                continue;
            }
            let slot = cell as usize * 2 + x[r] as usize;
            n[slot] += w;
            if let Some((lab, _)) = labels {
                nk[slot * k + lab[r] as usize] += w;
            }
        }
        CellCounts { k, n, nk }
    }

    /// Counts where every row enters both groups, with the label it gets
    /// under each: `labels[x][r]` is row r's cluster when X is set to x.
    pub fn tally_counterfactual(index: &CellIndex, labels: [&[u32]; 2], k: usize, weights: Option<&[u32]>) -> Self {
        let cells = index.n_cells();
        let mut n = vec![0.0; cells * 2];
        let mut nk = vec![0.0; cells * 2 * k];
        for (r, &cell) in index.row_cell().iter().enumerate() {
            let w = weights.map_or(1.0, |w| w[r] as f64);
            if w == 0.0 {
                continue;
            }
            for (x, lab) in labels.iter().enumerate() {
                let slot = cell as usize * 2 + x;
                n[slot] += w;
                nk[slot * k + lab[r] as usize] += w;
            }
        }
        CellCounts { k, n, nk }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn n(&self, cell: usize, x: usize) -> f64 {
        self.n[cell * 2 + x]
    }

    #[inline]
    pub fn nk(&self, cell: usize, x: usize, j: usize) -> f64 {
        self.nk[(cell * 2 + x) * self.k + j]
    }
}

/// Group-wise aggregates of [`CellCounts`] over Z-cells.
#[derive(Debug, Clone)]
pub struct Margins {
    pub n_x: [f64; 2],
    /// `[z * 2 + x]`
    pub n_xz: Vec<f64>,
    pub n_z: Vec<f64>,
    pub total: f64,
}

impl Margins {
    pub fn of(index: &CellIndex, counts: &CellCounts) -> Self {
        let mut n_xz = vec![0.0; index.n_z() * 2];
        for c in 0..index.n_cells() {
            let z = index.cell_z(c);
            n_xz[z * 2] += counts.n(c, 0);
            n_xz[z * 2 + 1] += counts.n(c, 1);
        }
        let n_z: Vec<f64> = n_xz.chunks(2).map(|p| p[0] + p[1]).collect();
        let n_x = [
            n_xz.iter().step_by(2).sum(),
            n_xz.iter().skip(1).step_by(2).sum(),
        ];
        Margins {
            total: n_x[0] + n_x[1],
            n_x,
            n_xz,
            n_z,
        }
    }

    pub fn require_both_groups(&self) -> Result<()> {
        if self.n_x[0] == 0.0 || self.n_x[1] == 0.0 {
            return Err(Error::Estimation(format!(
                "both protected groups must be non-empty (x0: {}, x1: {})",
                self.n_x[0], self.n_x[1]
            )));
        }
        Ok(())
    }
}

/// Smoothed `P(w | x, z)` for every cell, as `[x0, x1]` pairs, plus the
/// number of (group, Z-cell) tables that were smoothed.
///
/// The prior for a sparse group is the group-pooled `P(w | z)`.
pub fn mediator_conditionals(
    index: &CellIndex,
    counts: &CellCounts,
    margins: &Margins,
    smoothing: Smoothing,
) -> (Vec<[f64; 2]>, usize) {
    let mut out = vec![[0.0; 2]; index.n_cells()];
    let mut flagged = 0;
    for z in 0..index.n_z() {
        let members = index.z_members(z);
        let m = members.len() as f64;
        let n_z = margins.n_z[z];
        for x in 0..2 {
            let n_xz = margins.n_xz[z * 2 + x];
            if n_z > 0.0 && smoothing.applies(n_xz) {
                flagged += 1;
            }
            for &c in members {
                let c = c as usize;
                let prior = if n_z > 0.0 {
                    (counts.n(c, 0) + counts.n(c, 1)) / n_z
                } else {
                    1.0 / m
                };
                out[c][x] = smoothing.estimate(counts.n(c, x), n_xz, prior, m);
            }
        }
    }
    (out, flagged)
}

/// `‖P(W | x1, z) − P(W | x0, z)‖₁` per Z-cell, using the smoothed tables.
pub fn mediator_residuals(index: &CellIndex, p_w: &[[f64; 2]]) -> Vec<f64> {
    (0..index.n_z())
        .map(|z| {
            index
                .z_members(z)
                .iter()
                .map(|&c| (p_w[c as usize][1] - p_w[c as usize][0]).abs())
                .sum()
        })
        .collect()
}

/// `‖P(Z | x1) − P(Z | x0)‖₁`.
pub fn confounder_residual(margins: &Margins) -> Result<f64> {
    margins.require_both_groups()?;
    Ok(margins
        .n_xz
        .chunks(2)
        .map(|p| (p[1] / margins.n_x[1] - p[0] / margins.n_x[0]).abs())
        .sum())
}

/// Alignment residuals of a dataset under the shared discretization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub delta_z: f64,
    /// Keyed by Z-cell label.
    pub delta_w: BTreeMap<String, f64>,
}

pub fn residuals(d: &Dataset, smoothing: Smoothing) -> Result<Residuals> {
    let disc = Discretizer::for_dataset(d);
    let index = CellIndex::build(d, &disc);
    let counts = CellCounts::tally(&index, d.x(), None, None);
    let margins = Margins::of(&index, &counts);
    let delta_z = confounder_residual(&margins)?;
    let (p_w, _) = mediator_conditionals(&index, &counts, &margins, smoothing);
    let delta_w = mediator_residuals(&index, &p_w)
        .into_iter()
        .enumerate()
        .map(|(z, v)| (index.z_key(z).to_owned(), v))
        .collect();
    Ok(Residuals { delta_z, delta_w })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::Column;
    use crate::data::schema::{ColumnSpec, Kind, Role, SfmSchema};

    fn toy() -> Dataset {
        let schema = SfmSchema::new(
            vec![
                ColumnSpec::new("x", Role::Protected, Kind::Categorical),
                ColumnSpec::new("z", Role::Confounder, Kind::Categorical),
                ColumnSpec::new("w", Role::Mediator, Kind::Categorical),
            ],
            "0",
            "1",
        )
        .unwrap();
        Dataset::from_columns(
            schema,
            vec![
                Column::from_labels(&["0", "0", "1", "1", "0", "1"]),
                Column::from_labels(&["a", "b", "a", "b", "a", "a"]),
                Column::from_labels(&["p", "q", "q", "q", "p", "p"]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn cells_are_sorted_and_grouped_by_z() {
        let d = toy();
        let idx = CellIndex::build(&d, &Discretizer::for_dataset(&d));
        // cells: (a,p), (a,q), (b,q)
        assert_eq!(idx.n_cells(), 3);
        assert_eq!(idx.n_z(), 2);
        assert_eq!(idx.row_cell(), &[0, 2, 1, 2, 0, 0]);
        assert_eq!(idx.z_members(0), &[0, 1]);
        assert_eq!(idx.z_key(1), "z=b");
    }

    #[test]
    fn row_order_does_not_change_cell_ids() {
        let d = toy();
        let perm = [5, 3, 1, 0, 2, 4];
        let p = d.select_rows(&perm);
        let a = CellIndex::build(&d, &Discretizer::for_dataset(&d));
        let b = CellIndex::build(&p, &Discretizer::for_dataset(&p));
        for (i, &r) in perm.iter().enumerate() {
            assert_eq!(b.row_cell()[i], a.row_cell()[r]);
        }
    }

    #[test]
    fn smoothing_toward_prior() {
        let s = Smoothing::default();
        assert_eq!(s.estimate(3.0, 6.0, 0.9, 2.0), 0.5);
        // empty cell -> prior
        assert_eq!(s.estimate(0.0, 0.0, 0.25, 4.0), 0.25);
        // uniform prior gives Laplace: (1 + 1) / (2 + 3)
        assert!((s.estimate(1.0, 2.0, 1.0 / 3.0, 3.0) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn residuals_of_toy() {
        let d = toy();
        let r = residuals(&d, Smoothing::OFF).unwrap();
        // Z|x0 = {a:2/3, b:1/3}, Z|x1 = {a:2/3, b:1/3}
        assert!(r.delta_z.abs() < 1e-15);
        // z=a: W|x0 = {p:1}, W|x1 = {p:1/2, q:1/2}
        assert!((r.delta_w["z=a"] - 1.0).abs() < 1e-15);
        assert_eq!(r.delta_w["z=b"], 0.0);
    }
}
