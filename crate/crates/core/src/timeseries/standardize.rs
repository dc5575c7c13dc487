use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound applied to every fitted standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-feature z-score transform fitted on training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Fits on column slices. Population standard deviation.
    pub fn fit_columns(columns: &[&[f64]]) -> Result<Self> {
        let mut mean = Vec::with_capacity(columns.len());
        let mut std = Vec::with_capacity(columns.len());
        for col in columns {
            if col.is_empty() {
                return Err(Error::Empty("standardizer training range"));
            }
            let n = col.len() as f64;
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            mean.push(m);
            std.push(var.sqrt().max(STD_FLOOR));
        }
        Ok(Self { mean, std })
    }

    /// Fits on row-major training rows.
    pub fn fit_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("standardizer training range"))?;
        let width = first.len();
        let mut cols = vec![Vec::with_capacity(rows.len()); width];
        for row in rows {
            if row.len() != width {
                return Err(Error::Shape {
                    expected: width,
                    actual: row.len(),
                });
            }
            for (c, v) in cols.iter_mut().zip(row) {
                c.push(*v);
            }
        }
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        Self::fit_columns(&refs)
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, feature: usize, x: f64) -> f64 {
        (x - self.mean[feature]) / self.std[feature]
    }

    pub fn invert(&self, feature: usize, z: f64) -> f64 {
        z * self.std[feature] + self.mean[feature]
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(i, x)| self.apply(i, *x)).collect()
    }

    pub fn invert_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(i, z)| self.invert(i, *z)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_column_hits_floor() {
        let s = Standardizer::fit_columns(&[&[3.0, 3.0, 3.0]]).unwrap();
        assert_eq!(s.mean[0], 3.0);
        assert_eq!(s.std[0], STD_FLOOR);
        assert_eq!(s.apply(0, 3.0), 0.0);
    }

    #[test]
    fn population_std() {
        let s = Standardizer::fit_columns(&[&[0.0, 2.0]]).unwrap();
        assert_eq!(s.mean[0], 1.0);
        assert_eq!(s.std[0], 1.0);
        assert_eq!(s.apply(0, 2.0), 1.0);
    }

    #[test]
    fn empty_range_is_an_error() {
        assert!(Standardizer::fit_columns(&[&[]]).is_err());
        assert!(Standardizer::fit_rows(&[]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(rows in prop::collection::vec(prop::collection::vec(-1e4f64..1e4, 3), 1..40),
                      probe in prop::collection::vec(-1e4f64..1e4, 3)) {
            let s = Standardizer::fit_rows(&rows).unwrap();
            let back = s.invert_row(&s.apply_row(&probe));
            for (a, b) in back.iter().zip(&probe) {
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
            }
        }
    }
}
