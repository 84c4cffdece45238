//! Empirical-quantile transform mapping numeric columns to standard-normal
//! scores. Fitted knots define a piecewise-linear CDF; scores are
//! `inv_norm_cdf(clamp(u, eps, 1-eps))` and the inverse walks the exact
//! pipeline back, clamping to the endpoints outside the fitted range.

use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::table::TableData;
use crate::error::{Error, Result};

/// CDF clamp applied before the normal quantile function, keeping scores finite.
pub const CLAMP_EPS: f64 = 1e-7;

pub const DEFAULT_N_QUANTILES: usize = 1000;

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnTransform {
    /// Non-decreasing reference quantiles. A single knot marks a constant
    /// column.
    pub knots: Vec<f64>,
}

impl ColumnTransform {
    pub fn is_constant(&self) -> bool {
        self.knots.len() == 1
    }

    /// Empirical CDF position of `x` in `[0, 1]`. Ties over equal knots are
    /// resolved to the midpoint of the flat range, which makes the map exact
    /// at every stored knot.
    fn cdf(&self, x: f64) -> f64 {
        let k = &self.knots;
        let m = k.len();
        if m == 1 {
            return 0.5;
        }
        if x <= k[0] {
            return 0.0;
        }
        if x >= k[m - 1] {
            return 1.0;
        }
        let lo = k.partition_point(|&v| v < x); // first knot >= x
        let hi = k.partition_point(|&v| v <= x); // one past last knot <= x
        let denom = (m - 1) as f64;
        if lo < hi {
            // x equals knots lo..hi
            (lo + hi - 1) as f64 / 2.0 / denom
        } else {
            let i = lo - 1;
            (i as f64 + (x - k[i]) / (k[i + 1] - k[i])) / denom
        }
    }

    /// Inverse of [`cdf`]: linear interpolation on the knot grid.
    fn inverse_cdf(&self, u: f64) -> f64 {
        let k = &self.knots;
        let m = k.len();
        if m == 1 {
            return k[0];
        }
        if u <= 0.0 {
            return k[0];
        }
        if u >= 1.0 {
            return k[m - 1];
        }
        let pos = u * (m - 1) as f64;
        let i = (pos.floor() as usize).min(m - 2);
        let frac = pos - i as f64;
        k[i] + frac * (k[i + 1] - k[i])
    }
}

/// Fitted quantile transforms, keyed by schema column index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QuantileTransform {
    cols: BTreeMap<usize, ColumnTransform>,
}

impl QuantileTransform {
    /// Fits reference quantiles on every numeric column of `data`. Stores
    /// `min(n_quantiles, N)` knots via linearly interpolated empirical
    /// quantiles; constant columns are flagged with a single knot.
    pub fn fit(data: &TableData, n_quantiles: usize) -> Result<Self> {
        if n_quantiles < 2 {
            return Err(Error::config("n_quantiles must be >= 2"));
        }
        let mut cols = BTreeMap::new();
        for idx in data.schema.numeric_indices() {
            let mut values = data.numeric_column(idx)?;
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite numeric cells"));
            let n = values.len();
            let constant = values[0] == values[n - 1];
            let knots = if constant {
                vec![values[0]]
            } else {
                let m = n_quantiles.min(n);
                (0..m)
                    .map(|i| {
                        let pos = i as f64 / (m - 1) as f64 * (n - 1) as f64;
                        let lo = pos.floor() as usize;
                        let hi = pos.ceil() as usize;
                        let frac = pos - lo as f64;
                        values[lo] + frac * (values[hi] - values[lo])
                    })
                    .collect()
            };
            cols.insert(idx, ColumnTransform { knots });
        }
        Ok(QuantileTransform { cols })
    }

    pub fn from_parts(cols: BTreeMap<usize, ColumnTransform>) -> Self {
        QuantileTransform { cols }
    }

    pub fn columns(&self) -> impl Iterator<Item = (usize, &ColumnTransform)> {
        self.cols.iter().map(|(&i, t)| (i, t))
    }

    pub fn column(&self, idx: usize) -> Result<&ColumnTransform> {
        self.cols
            .get(&idx)
            .ok_or_else(|| Error::UnknownColumn(format!("no fitted transform for column {idx}")))
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    /// Maps a raw value to its standard-normal score.
    pub fn apply(&self, idx: usize, value: f64) -> Result<f64> {
        let col = self.column(idx)?;
        if col.is_constant() {
            return Ok(0.0);
        }
        let u = col.cdf(value).clamp(CLAMP_EPS, 1.0 - CLAMP_EPS);
        Ok(std_normal().inverse_cdf(u))
    }

    /// Maps a standard-normal score back to a raw value; scores beyond the
    /// fitted range clamp to the endpoint knots.
    pub fn invert(&self, idx: usize, score: f64) -> Result<f64> {
        let col = self.column(idx)?;
        if col.is_constant() {
            return Ok(col.knots[0]);
        }
        let u = std_normal().cdf(score);
        // Scores at the clamp boundary map back to the exact endpoints.
        let u = if u <= CLAMP_EPS * (1.0 + 1e-6) {
            0.0
        } else if u >= 1.0 - CLAMP_EPS * (1.0 + 1e-6) {
            1.0
        } else {
            u
        };
        Ok(col.inverse_cdf(u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{Column, ColumnKind, TableSchema};
    use crate::data::table::Cell;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    fn table(values: &[f64]) -> TableData {
        let schema =
            TableSchema::new(vec![Column { name: "x".into(), kind: ColumnKind::Numeric }]);
        let rows = values.iter().map(|&v| vec![Cell::Num(v)]).collect();
        TableData::from_rows(schema, rows, vec![Vec::new()]).unwrap()
    }

    #[test]
    fn uniform_grid_keeps_its_own_knots() {
        let values: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let qt = QuantileTransform::fit(&table(&values), 10).unwrap();
        let knots = &qt.column(0).unwrap().knots;
        assert_eq!(knots, &values);
    }

    #[test]
    fn constant_column_maps_to_zero_and_back() {
        let qt = QuantileTransform::fit(&table(&[5.0, 5.0, 5.0]), 10).unwrap();
        assert!(qt.column(0).unwrap().is_constant());
        assert_eq!(qt.apply(0, 5.0).unwrap(), 0.0);
        assert_eq!(qt.invert(0, 1.7).unwrap(), 5.0);
    }

    #[test]
    fn minimum_clamps_to_finite_negative_score() {
        let qt = QuantileTransform::fit(&table(&[1.0, 2.0, 3.0, 4.0]), 10).unwrap();
        let z = qt.apply(0, 1.0).unwrap();
        assert!(z.is_finite());
        assert!(z < -5.0, "clamped score should be far negative, got {z}");
        // Round-trips to the exact minimum.
        assert_eq!(qt.invert(0, z).unwrap(), 1.0);
    }

    #[test]
    fn round_trip_at_all_stored_knots() {
        let values: Vec<f64> = (0..57).map(|i| (i as f64 * 0.37).sin() * 10.0).collect();
        let qt = QuantileTransform::fit(&table(&values), 20).unwrap();
        let knots = qt.column(0).unwrap().knots.clone();
        for &k in &knots {
            let z = qt.apply(0, k).unwrap();
            let back = qt.invert(0, z).unwrap();
            assert_abs_diff_eq!(back, k, epsilon = 1e-9);
        }
    }

    #[test]
    fn duplicated_knots_round_trip() {
        let values = vec![1.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 3.0];
        let qt = QuantileTransform::fit(&table(&values), 8).unwrap();
        let z = qt.apply(0, 2.0).unwrap();
        assert_abs_diff_eq!(qt.invert(0, z).unwrap(), 2.0, epsilon = 1e-9);
    }

    #[test]
    fn median_of_large_sample_scores_near_zero() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> =
            (0..1000).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = (sorted[499] + sorted[500]) / 2.0;
        let qt = QuantileTransform::fit(&table(&values), DEFAULT_N_QUANTILES).unwrap();
        let z = qt.apply(0, median).unwrap();
        assert!(z.abs() < 0.05, "median score {z}");
        let u = std_normal().cdf(z);
        assert!((u - 0.5).abs() < 0.05, "median cdf {u}");
    }

    #[test]
    fn apply_is_monotone() {
        let values = vec![3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0];
        let qt = QuantileTransform::fit(&table(&values), 5).unwrap();
        let mut prev = f64::NEG_INFINITY;
        let mut x = 0.0;
        while x <= 10.0 {
            let z = qt.apply(0, x).unwrap();
            assert!(z >= prev, "not monotone at {x}");
            prev = z;
            x += 0.1;
        }
    }

    #[test]
    fn unknown_column_is_an_error() {
        let qt = QuantileTransform::fit(&table(&[1.0, 2.0]), 5).unwrap();
        assert!(qt.apply(3, 1.0).is_err());
    }
}
