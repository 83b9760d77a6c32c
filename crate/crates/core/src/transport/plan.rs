//! Fitting and applying the confounder and mediator transports.
//!
//! Columns are transported one at a time in schema order. A confounder is
//! conditioned on the bins of the confounders before it; a mediator on the
//! confounder cell plus the bins of the mediators before it. Source rows are
//! keyed by their already-adapted values, target rows by their original
//! values, so each step aligns the joint distribution built so far.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::data::cells::{self, Smoothing};
use crate::data::dataset::{Column, Dataset};
use crate::data::discretize::{ColumnBins, Discretizer};
use crate::data::schema::{EffectFlags, Kind};
use crate::error::{Error, Result};
use crate::rng;
use crate::transport::categorical::CategoricalMap;
use crate::transport::quantile::QuantileMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ColumnMap {
    Quantile(QuantileMap),
    Categorical(CategoricalMap),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conditioner {
    pub name: String,
    pub bins: ColumnBins,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMap {
    pub source_rows: usize,
    pub target_rows: usize,
    /// Conditioning variables used; fewer than all when the full target
    /// cell was empty.
    pub depth: usize,
    pub map: ColumnMap,
}

/// The transport of one column for one source group, keyed by conditioning
/// cell label (e.g. `age=[30,37)|region=north`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalMap {
    pub column: String,
    pub source_group: usize,
    pub target_group: usize,
    pub conditioning: Vec<Conditioner>,
    pub cells: BTreeMap<String, CellMap>,
    /// Used for rows whose cell was not seen during fitting.
    pub unconditional: ColumnMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub flags: EffectFlags,
    pub seed: u64,
    /// Confounder maps; empty means the identity (SE flag off).
    pub tau_z: Vec<ConditionalMap>,
    /// Mediator maps: x1 onto x0 when the NIE flag is on, each group onto
    /// itself otherwise.
    pub tau_w: Vec<ConditionalMap>,
    pub residual_delta_z: f64,
    pub residual_delta_w: BTreeMap<String, f64>,
    /// Cells fitted with fewer conditioning variables than requested.
    pub fallback_cells: usize,
    pub extrapolated_values: usize,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl TransportPlan {
    pub fn tau_z_is_identity(&self) -> bool {
        self.tau_z.is_empty()
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Counters gathered while applying maps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ApplyStats {
    pub extrapolated_values: usize,
    pub unseen_cells: usize,
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn key_label(cond: &[Conditioner], codes: &[Option<u32>]) -> String {
    cond.iter()
        .zip(codes)
        .map(|(c, code)| match code {
            Some(k) => format!("{}={}", c.name, c.bins.label(*k)),
            None => format!("{}=?", c.name),
        })
        .collect::<Vec<_>>()
        .join("|")
}

fn column_of(d: &Dataset, name: &str) -> Result<usize> {
    d.schema()
        .position(name)
        .ok_or_else(|| Error::Transport(format!("dataset has no column {name:?}")))
}

fn row_codes(d: &Dataset, cond_cols: &[usize], cond: &[Conditioner], r: usize) -> Vec<Option<u32>> {
    cond_cols
        .iter()
        .zip(cond)
        .map(|(&c, k)| k.bins.code(d.value(r, c)))
        .collect()
}

fn fit_map(src: &Column, src_rows: &[usize], tgt: &Column, tgt_rows: &[usize]) -> Result<ColumnMap> {
    match (src, tgt) {
        (Column::Continuous(s), Column::Continuous(t)) => {
            let sv: Vec<f64> = src_rows.iter().map(|&r| s[r]).collect();
            let tv: Vec<f64> = tgt_rows.iter().map(|&r| t[r]).collect();
            Ok(ColumnMap::Quantile(QuantileMap::fit(&sv, &tv)?))
        }
        (Column::Categorical { levels, codes: s }, Column::Categorical { levels: lt, codes: t }) => {
            if levels != lt {
                return Err(Error::Transport("source and target level sets differ".into()));
            }
            let dist = |codes: &[u32], rows: &[usize]| {
                let mut p = vec![0.0; levels.len()];
                for &r in rows {
                    p[codes[r] as usize] += 1.0;
                }
                let n = rows.len() as f64;
                p.iter_mut().for_each(|v| *v /= n);
                p
            };
            Ok(ColumnMap::Categorical(CategoricalMap::fit(
                levels.clone(),
                dist(s, src_rows),
                dist(t, tgt_rows),
            )?))
        }
        _ => Err(Error::Transport("column kinds differ between source and target".into())),
    }
}

/// Applies `cmap` to the source-group rows of `d`, returning the new column.
fn apply_conditional(d: &Dataset, cmap: &ConditionalMap, seed: u64, stats: &mut ApplyStats) -> Result<Column> {
    let col = column_of(d, &cmap.column)?;
    let cond_cols = cmap
        .conditioning
        .iter()
        .map(|c| column_of(d, &c.name))
        .collect::<Result<Vec<_>>>()?;
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (r, &x) in d.x().iter().enumerate() {
        if x as usize == cmap.source_group {
            let codes = row_codes(d, &cond_cols, &cmap.conditioning, r);
            groups.entry(key_label(&cmap.conditioning, &codes)).or_default().push(r);
        }
    }
    let mut column = d.column_at(col).clone();
    for (label, rows) in &groups {
        let map = match cmap.cells.get(label) {
            Some(cell) => &cell.map,
            None => {
                stats.unseen_cells += 1;
                &cmap.unconditional
            }
        };
        let cell_seed = rng::derive_seed(seed, &[cmap.source_group as u64, fnv1a(&cmap.column), fnv1a(label)]);
        apply_map(map, &mut column, rows, cell_seed, stats)?;
    }
    Ok(column)
}

fn apply_map(map: &ColumnMap, column: &mut Column, rows: &[usize], seed: u64, stats: &mut ApplyStats) -> Result<()> {
    match (map, column) {
        (ColumnMap::Quantile(q), Column::Continuous(v)) => {
            let vals: Vec<f64> = rows.iter().map(|&r| v[r]).collect();
            let (out, ext) = q.apply_batch(&vals);
            stats.extrapolated_values += ext;
            for (&r, o) in rows.iter().zip(out) {
                v[r] = o;
            }
        }
        (ColumnMap::Categorical(m), Column::Categorical { levels, codes }) => {
            // Translate to the map's level indices; unknown levels stay put.
            let to_map: Vec<Option<u32>> = levels
                .iter()
                .map(|l| m.levels.iter().position(|x| x == l).map(|p| p as u32))
                .collect();
            let from_map: Vec<Option<u32>> = m
                .levels
                .iter()
                .map(|l| levels.iter().position(|x| x == l).map(|p| p as u32))
                .collect();
            let movable: Vec<usize> = rows.iter().copied().filter(|&r| to_map[codes[r] as usize].is_some()).collect();
            let mapped: Vec<u32> = movable.iter().map(|&r| to_map[codes[r] as usize].unwrap()).collect();
            let out = m.apply_codes(&mapped, seed);
            for (&r, o) in movable.iter().zip(out) {
                match from_map[o as usize] {
                    Some(c) => codes[r] = c,
                    None => {
                        return Err(Error::Transport(format!(
                            "level {:?} of the plan is missing from the data",
                            m.levels[o as usize]
                        )))
                    }
                }
            }
        }
        _ => return Err(Error::Transport("map kind does not match column kind".into())),
    }
    Ok(())
}

struct Fitted {
    map: ConditionalMap,
    fallbacks: usize,
}

/// Fits the map of column `col` moving group `source_group` of `current`
/// onto group `target_group` of `original`.
fn fit_conditional(
    current: &Dataset,
    original: &Dataset,
    col: usize,
    cond_cols: &[usize],
    disc: &Discretizer,
    source_group: usize,
    target_group: usize,
) -> Result<Fitted> {
    let schema = current.schema();
    let conditioning: Vec<Conditioner> = cond_cols
        .iter()
        .map(|&c| Conditioner {
            name: schema.columns[c].name.clone(),
            bins: disc.column(c).clone(),
        })
        .collect();
    let depth = cond_cols.len();

    let src_rows: Vec<usize> = (0..current.n()).filter(|&r| current.x()[r] as usize == source_group).collect();
    let tgt_rows: Vec<usize> = (0..original.n()).filter(|&r| original.x()[r] as usize == target_group).collect();
    let name = &schema.columns[col].name;
    if src_rows.is_empty() {
        return Err(Error::Transport(format!("no rows in source group {source_group} for {name:?}")));
    }
    if tgt_rows.is_empty() {
        return Err(Error::Transport(format!("no rows in target group {target_group} for {name:?}")));
    }

    // Target rows grouped by every key prefix, for fallback.
    let mut tgt_prefix: Vec<HashMap<Vec<Option<u32>>, Vec<usize>>> = vec![HashMap::new(); depth + 1];
    for &r in &tgt_rows {
        let codes = row_codes(original, cond_cols, &conditioning, r);
        for (k, table) in tgt_prefix.iter_mut().enumerate() {
            table.entry(codes[..k].to_vec()).or_default().push(r);
        }
    }
    let mut src_groups: BTreeMap<Vec<Option<u32>>, Vec<usize>> = BTreeMap::new();
    for &r in &src_rows {
        src_groups
            .entry(row_codes(current, cond_cols, &conditioning, r))
            .or_default()
            .push(r);
    }

    let src_col = current.column_at(col);
    let tgt_col = original.column_at(col);
    let mut cells = BTreeMap::new();
    let mut fallbacks = 0;
    for (codes, rows) in &src_groups {
        let (used, targets) = (0..=depth)
            .rev()
            .find_map(|k| tgt_prefix[k].get(&codes[..k]).map(|t| (k, t)))
            .expect("the empty prefix holds every target row");
        if used < depth {
            fallbacks += 1;
        }
        cells.insert(
            key_label(&conditioning, codes),
            CellMap {
                source_rows: rows.len(),
                target_rows: targets.len(),
                depth: used,
                map: fit_map(src_col, rows, tgt_col, targets)?,
            },
        );
    }
    let unconditional = fit_map(src_col, &src_rows, tgt_col, &tgt_rows)?;
    Ok(Fitted {
        map: ConditionalMap {
            column: name.clone(),
            source_group,
            target_group,
            conditioning,
            cells,
            unconditional,
        },
        fallbacks,
    })
}

/// Fits the transport plan for `flags` and returns it with the adapted data.
///
/// With the SE flag, confounders of the x1 group are moved onto the x0
/// distribution. With the NIE flag, mediators of x1 given the adapted
/// confounders are moved onto the mediators of x0 given the confounders;
/// without it, each group's mediators given the adapted confounders are
/// moved onto the same group's mediators given the original confounders.
pub fn fit_and_apply(d: &Dataset, flags: EffectFlags, seed: u64) -> Result<(TransportPlan, Dataset)> {
    if d.is_empty() {
        return Err(Error::Transport("cannot fit a transport plan on an empty dataset".into()));
    }
    let [n0, n1] = d.group_sizes();
    if n0 == 0 || n1 == 0 {
        return Err(Error::Transport(format!(
            "both protected groups need rows (x0: {n0}, x1: {n1})"
        )));
    }
    let schema = d.schema();
    let z_cols = schema.confounders();
    let w_cols = schema.mediators();
    let mut warnings = Vec::new();
    let mut stats = ApplyStats::default();
    let mut fallback_cells = 0;
    let mut current = d.clone();

    let mut tau_z = Vec::new();
    if flags.se {
        if z_cols.is_empty() {
            let msg = "SE flag set but the schema has no confounders; confounder transport is the identity";
            log::warn!("{msg}");
            warnings.push(msg.to_string());
        }
        let disc = Discretizer::for_dataset(d);
        for (j, &c) in z_cols.iter().enumerate() {
            let f = fit_conditional(&current, d, c, &z_cols[..j], &disc, 1, 0)?;
            fallback_cells += f.fallbacks;
            let col = apply_conditional(&current, &f.map, rng::derive_seed(seed, &[0]), &mut stats)?;
            current = current.with_column(c, col)?;
            tau_z.push(f.map);
        }
    }

    // Mediator conditioning bins come from the confounder-adapted data, the
    // confounder values the final dataset will carry.
    let disc = Discretizer::for_dataset(&current);
    let reference = d.clone();
    let mut tau_w = Vec::new();
    let directions: &[(usize, usize)] = if flags.nie { &[(1, 0)] } else { &[(0, 0), (1, 1)] };
    for (j, &c) in w_cols.iter().enumerate() {
        let mut cond = z_cols.clone();
        cond.extend_from_slice(&w_cols[..j]);
        let mut next = current.clone();
        for &(src, tgt) in directions {
            let f = fit_conditional(&current, &reference, c, &cond, &disc, src, tgt)?;
            fallback_cells += f.fallbacks;
            let col = apply_conditional(&current, &f.map, rng::derive_seed(seed, &[1]), &mut stats)?;
            // Each direction only touches its own source group.
            let merged = merge_group(next.column_at(c), &col, current.x(), src);
            next = next.with_column(c, merged)?;
            tau_w.push(f.map);
        }
        current = next;
    }
    if fallback_cells > 0 {
        let msg = format!("{fallback_cells} transport cells had no target rows and used coarser conditioning");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    if stats.extrapolated_values > 0 {
        let msg = format!(
            "{} values fell outside a quantile map's support and were extrapolated",
            stats.extrapolated_values
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let res = cells::residuals(&current, Smoothing::default())?;
    let plan = TransportPlan {
        flags,
        seed,
        tau_z,
        tau_w,
        residual_delta_z: res.delta_z,
        residual_delta_w: res.delta_w,
        fallback_cells,
        extrapolated_values: stats.extrapolated_values,
        warnings,
    };
    Ok((plan, current))
}

fn merge_group(base: &Column, updated: &Column, x: &[u32], group: usize) -> Column {
    match (base, updated) {
        (Column::Continuous(b), Column::Continuous(u)) => Column::Continuous(
            b.iter()
                .zip(u)
                .zip(x)
                .map(|((&b, &u), &g)| if g as usize == group { u } else { b })
                .collect(),
        ),
        (Column::Categorical { levels, codes: b }, Column::Categorical { codes: u, .. }) => Column::Categorical {
            levels: levels.clone(),
            codes: b
                .iter()
                .zip(u)
                .zip(x)
                .map(|((&b, &u), &g)| if g as usize == group { u } else { b })
                .collect(),
        },
        _ => unreachable!("same column"),
    }
}

pub fn fit_plan(d: &Dataset, flags: EffectFlags, seed: u64) -> Result<TransportPlan> {
    fit_and_apply(d, flags, seed).map(|(p, _)| p)
}

/// Applies a fitted plan to a dataset with the same columns. On the
/// dataset the plan was fitted on, this reproduces [`fit_and_apply`].
pub fn apply_plan(d: &Dataset, plan: &TransportPlan) -> Result<(Dataset, ApplyStats)> {
    let mut stats = ApplyStats::default();
    for m in plan.tau_z.iter().chain(&plan.tau_w) {
        let c = column_of(d, &m.column)?;
        let expected = match m.unconditional {
            ColumnMap::Quantile(_) => Kind::Continuous,
            ColumnMap::Categorical(_) => Kind::Categorical,
        };
        if d.schema().columns[c].kind != expected {
            return Err(Error::Transport(format!("column {:?} has a different kind than in the plan", m.column)));
        }
    }
    let mut current = d.clone();
    for m in &plan.tau_z {
        let c = column_of(&current, &m.column)?;
        let col = apply_conditional(&current, m, rng::derive_seed(plan.seed, &[0]), &mut stats)?;
        current = current.with_column(c, col)?;
    }
    // Mediator maps of the same column are applied against the same input.
    let mut i = 0;
    while i < plan.tau_w.len() {
        let name = &plan.tau_w[i].column;
        let c = column_of(&current, name)?;
        let mut next = current.clone();
        while i < plan.tau_w.len() && &plan.tau_w[i].column == name {
            let m = &plan.tau_w[i];
            let col = apply_conditional(&current, m, rng::derive_seed(plan.seed, &[1]), &mut stats)?;
            next = next.with_column(c, merge_group(next.column_at(c), &col, current.x(), m.source_group))?;
            i += 1;
        }
        current = next;
    }
    if stats.unseen_cells > 0 {
        log::warn!(
            "{} conditioning cells were not seen when the plan was fitted; used unconditional maps",
            stats.unseen_cells
        );
    }
    if stats.extrapolated_values > 0 {
        log::warn!("{} values extrapolated outside quantile-map support", stats.extrapolated_values);
    }
    Ok((current, stats))
}
