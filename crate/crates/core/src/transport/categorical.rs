//! Minimum-movement couplings between level distributions.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A coupling of two distributions over the same levels under the cost
/// `1{levels differ}`: shared mass stays put, surplus mass is sent to
/// deficit levels in level order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalMap {
    pub levels: Vec<String>,
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    /// `coupling[i][j]`: mass moved from level i to level j.
    pub coupling: Vec<Vec<f64>>,
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Transport(format!("{what} distribution has invalid entries")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Transport(format!("{what} distribution sums to {total}")));
    }
    Ok(())
}

/// Northwest-corner fill of surplus into deficit after keeping the overlap.
fn min_movement<T>(source: &[T], target: &[T]) -> Vec<Vec<T>>
where
    T: Copy + PartialOrd + std::ops::Sub<Output = T> + std::ops::AddAssign + Default,
{
    let m = source.len();
    let mut plan = vec![vec![T::default(); m]; m];
    let mut surplus = Vec::with_capacity(m);
    let mut deficit = Vec::with_capacity(m);
    for i in 0..m {
        let keep = if source[i] < target[i] { source[i] } else { target[i] };
        plan[i][i] = keep;
        surplus.push(source[i] - keep);
        deficit.push(target[i] - keep);
    }
    let zero = T::default();
    let (mut i, mut j) = (0, 0);
    while i < m && j < m {
        if !(surplus[i] > zero) {
            i += 1;
            continue;
        }
        if !(deficit[j] > zero) {
            j += 1;
            continue;
        }
        let mv = if surplus[i] < deficit[j] { surplus[i] } else { deficit[j] };
        plan[i][j] += mv;
        surplus[i] = surplus[i] - mv;
        deficit[j] = deficit[j] - mv;
    }
    plan
}

/// Integer counts summing to `n` closest to `n * p` (largest remainder,
/// ties to the lower level).
pub fn largest_remainder(p: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = p.iter().map(|v| v * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|v| v.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

impl CategoricalMap {
    pub fn fit(levels: Vec<String>, source: Vec<f64>, target: Vec<f64>) -> Result<Self> {
        if source.len() != levels.len() || target.len() != levels.len() {
            return Err(Error::Transport("distributions and levels differ in length".into()));
        }
        check_distribution(&source, "source")?;
        check_distribution(&target, "target")?;
        let coupling = min_movement(&source, &target);
        Ok(CategoricalMap {
            levels,
            source,
            target,
            coupling,
        })
    }

    /// Total mass that changes level.
    pub fn moved_mass(&self) -> f64 {
        let mut moved = 0.0;
        for (i, row) in self.coupling.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i != j {
                    moved += v;
                }
            }
        }
        moved
    }

    /// Reassigns level codes so the result has the target distribution up
    /// to rounding: target counts are the largest-remainder rounding of
    /// `n * target`, and the integer coupling moves as few rows as possible.
    /// Which rows of a level move is decided by a seeded shuffle.
    pub fn apply_codes(&self, codes: &[u32], seed: u64) -> Vec<u32> {
        let m = self.levels.len();
        let mut rows_by_level: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (r, &c) in codes.iter().enumerate() {
            rows_by_level[c as usize].push(r);
        }
        let have: Vec<i64> = rows_by_level.iter().map(|v| v.len() as i64).collect();
        let want: Vec<i64> = largest_remainder(&self.target, codes.len())
            .into_iter()
            .map(|v| v as i64)
            .collect();
        let plan = min_movement(&have, &want);
        let mut out = codes.to_vec();
        for (i, rows) in rows_by_level.iter_mut().enumerate() {
            if rows.is_empty() {
                continue;
            }
            let mut rng = rng::stream(seed, &[i as u64]);
            rows.shuffle(&mut rng);
            let mut next = plan[i][i] as usize;
            for (j, &count) in plan[i].iter().enumerate() {
                if j == i {
                    continue;
                }
                for &r in &rows[next..next + count as usize] {
                    out[r] = j as u32;
                }
                next += count as usize;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn identical_distributions_move_nothing() {
        let m = CategoricalMap::fit(ab(), vec![0.3, 0.7], vec![0.3, 0.7]).unwrap();
        assert_eq!(m.moved_mass(), 0.0);
        let codes = vec![0, 1, 1, 0, 1, 1, 1, 0, 1, 1];
        assert_eq!(m.apply_codes(&codes, 1), codes);
    }

    #[test]
    fn point_masses_move_everything() {
        let m = CategoricalMap::fit(ab(), vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        assert_eq!(m.apply_codes(&[0, 0, 0], 5), vec![1, 1, 1]);
    }

    #[test]
    fn partial_move_matches_target_counts() {
        let m = CategoricalMap::fit(ab(), vec![0.6, 0.4], vec![0.4, 0.6]).unwrap();
        assert!((m.moved_mass() - 0.2).abs() < 1e-15);
        assert!((m.coupling[0][1] - 0.2).abs() < 1e-15);
        let codes: Vec<u32> = (0..1000).map(|i| u32::from(i % 5 >= 3)).collect();
        let out = m.apply_codes(&codes, 9);
        let b = out.iter().filter(|&&c| c == 1).count();
        assert_eq!(b, 600);
        // only a -> b moves
        assert!(codes.iter().zip(&out).all(|(&s, &t)| s == t || (s == 0 && t == 1)));
    }

    #[test]
    fn largest_remainder_sums_to_n() {
        assert_eq!(largest_remainder(&[1.0 / 3.0; 3], 10), vec![4, 3, 3]);
        assert_eq!(largest_remainder(&[0.5, 0.5], 3), vec![2, 1]);
    }
}
