//! One-dimensional monotone transport by empirical quantile matching.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sends the p-th empirical quantile of the source sample to the p-th
/// empirical quantile of the target sample, interpolating linearly between
/// order statistics. Values outside the source range are extrapolated along
/// the chord through the extreme knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileMap {
    source: Vec<f64>,
    target: Vec<f64>,
}

fn sorted_finite(v: &[f64], what: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Transport(format!("{what} sample is empty")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Transport(format!("{what} sample has non-finite values")));
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

impl QuantileMap {
    pub fn fit(source: &[f64], target: &[f64]) -> Result<Self> {
        Ok(QuantileMap {
            source: sorted_finite(source, "source")?,
            target: sorted_finite(target, "target")?,
        })
    }

    pub fn source_knots(&self) -> &[f64] {
        &self.source
    }

    pub fn target_knots(&self) -> &[f64] {
        &self.target
    }

    /// Target value at fractional source rank `r` in `[0, n-1]`.
    fn at_rank(&self, r: f64) -> f64 {
        let n = self.source.len();
        let m = self.target.len();
        let q = if n == 1 {
            (m - 1) as f64 / 2.0
        } else {
            r * (m - 1) as f64 / (n - 1) as f64
        };
        let lo = q.floor() as usize;
        if lo + 1 >= m {
            return self.target[m - 1];
        }
        let t = q - lo as f64;
        if t == 0.0 {
            self.target[lo]
        } else {
            self.target[lo] + t * (self.target[lo + 1] - self.target[lo])
        }
    }

    fn extrapolate(&self, v: f64) -> f64 {
        let (s0, s1) = (self.source[0], self.source[self.source.len() - 1]);
        let (t0, t1) = (self.target[0], self.target[self.target.len() - 1]);
        let slope = if s1 > s0 { (t1 - t0) / (s1 - s0) } else { 1.0 };
        if v < s0 {
            t0 + slope * (v - s0)
        } else {
            t1 + slope * (v - s1)
        }
    }

    /// Rank interval `[lo, hi]` of the source knots equal to `v`; `hi < lo`
    /// when no knot equals `v`.
    fn tie_range(&self, v: f64) -> (usize, usize) {
        let lo = self.source.partition_point(|&s| s < v);
        let end = self.source.partition_point(|&s| s <= v);
        (lo, end.wrapping_sub(1))
    }

    fn rank_between(&self, v: f64, lo: usize) -> f64 {
        // source[lo-1] < v < source[lo]
        let (a, b) = (self.source[lo - 1], self.source[lo]);
        (lo - 1) as f64 + (v - a) / (b - a)
    }

    /// Maps a single value; ties inside the source take their mid-rank.
    /// The flag reports extrapolation outside the source range.
    pub fn apply(&self, v: f64) -> (f64, bool) {
        let n = self.source.len();
        if v < self.source[0] || v > self.source[n - 1] {
            return (self.extrapolate(v), true);
        }
        let (lo, hi) = self.tie_range(v);
        let r = if hi != usize::MAX && hi >= lo {
            (lo + hi) as f64 / 2.0
        } else {
            self.rank_between(v, lo)
        };
        (self.at_rank(r), false)
    }

    /// Maps a batch of values, spreading rows that share a value evenly over
    /// that value's rank interval in row order. Applied to the fitted source
    /// sample itself this reproduces the target sample exactly when both
    /// have the same size. Returns the mapped values and the number of
    /// extrapolated ones.
    pub fn apply_batch(&self, values: &[f64]) -> (Vec<f64>, usize) {
        let mut occurrences: std::collections::HashMap<u64, (usize, usize)> = std::collections::HashMap::new();
        for &v in values {
            occurrences.entry(v.to_bits()).or_insert((0, 0)).0 += 1;
        }
        let n = self.source.len();
        let mut extrapolated = 0;
        let out = values
            .iter()
            .map(|&v| {
                if v < self.source[0] || v > self.source[n - 1] {
                    extrapolated += 1;
                    return self.extrapolate(v);
                }
                let (lo, hi) = self.tie_range(v);
                if hi == usize::MAX || hi < lo {
                    return self.at_rank(self.rank_between(v, lo));
                }
                let e = occurrences.get_mut(&v.to_bits()).expect("counted");
                let (count, j) = (e.0, e.1);
                e.1 += 1;
                let r = if count == 1 {
                    (lo + hi) as f64 / 2.0
                } else {
                    lo as f64 + j as f64 * (hi - lo) as f64 / (count - 1) as f64
                };
                self.at_rank(r)
            })
            .collect();
        (out, extrapolated)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_on_own_sample() {
        let s = [3.0, 1.0, 2.0, 2.0, 5.0];
        let m = QuantileMap::fit(&s, &s).unwrap();
        assert_eq!(m.apply_batch(&s).0, s.to_vec());
        assert_eq!(m.apply(2.0).0, 2.0);
        assert_eq!(m.apply(4.0).0, 4.0);
    }

    #[test]
    fn equal_size_supports_match_in_order() {
        let m = QuantileMap::fit(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m.apply(2.0), (1.0, false));
        assert_eq!(m.apply(4.0), (2.0, false));
        assert_eq!(m.apply(6.0), (3.0, false));
        assert_eq!(m.apply(5.0), (2.5, false));
    }

    #[test]
    fn extrapolation_is_linear_and_flagged() {
        let m = QuantileMap::fit(&[0.0, 1.0], &[10.0, 12.0]).unwrap();
        assert_eq!(m.apply(2.0), (14.0, true));
        assert_eq!(m.apply(-1.0), (8.0, true));
    }

    #[test]
    fn ties_spread_over_rank_interval() {
        let src = [0.0, 0.0, 1.0, 1.0];
        let tgt = [0.0, 1.0, 1.0, 1.0];
        let m = QuantileMap::fit(&src, &tgt).unwrap();
        let (out, _) = m.apply_batch(&src);
        assert_eq!(out, vec![0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn single_knot_source_uses_target_median() {
        let m = QuantileMap::fit(&[5.0], &[1.0, 2.0, 9.0]).unwrap();
        assert_eq!(m.apply(5.0).0, 2.0);
    }

    #[test]
    fn empty_samples_are_rejected() {
        assert!(QuantileMap::fit(&[], &[1.0]).is_err());
        assert!(QuantileMap::fit(&[1.0], &[]).is_err());
    }
}
