use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column affine scaling learned from training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics; zero-variance columns pass through with unit scale.
    pub fn fit(x: &Array2<f64>) -> Self {
        let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
        let std = x.std_axis(Axis(0), 0.0);
        Standardizer {
            mean: mean.to_vec(),
            std: std.iter().map(|&s| if s > 0.0 && s.is_finite() { s } else { 1.0 }).collect(),
        }
    }

    pub fn identity(cols: usize) -> Self {
        Standardizer { mean: vec![0.0; cols], std: vec![1.0; cols] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.dim() {
            return Err(Error::Dimension(format!("expected {} columns, got {}", self.dim(), x.ncols())));
        }
        Ok(())
    }

    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(x)?;
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, z: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(z)?;
        let mut out = z.clone();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v * self.std[j] + self.mean[j];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn zero_variance_passes_through() {
        let x = array![[1.0, 5.0], [3.0, 5.0]];
        let s = Standardizer::fit(&x);
        assert_eq!(s.std, vec![1.0, 1.0]);
        assert_eq!(s.transform(&x).unwrap(), array![[-1.0, 0.0], [1.0, 0.0]]);
    }

    #[test]
    fn statistics_come_from_training_rows_only() {
        let train = array![[0.0], [2.0], [4.0]];
        let test = array![[100.0]];
        let s = Standardizer::fit(&train);
        let both = ndarray::concatenate(Axis(0), &[train.view(), test.view()]).unwrap();
        let s2 = Standardizer::fit(&both);
        assert_eq!(s.mean, vec![2.0]);
        assert_ne!(s, s2);
        let z = s.transform(&test).unwrap();
        assert!((z[[0, 0]] - 98.0 / (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn wrong_width_rejected() {
        let s = Standardizer::identity(3);
        assert!(s.transform(&Array2::zeros((2, 4))).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(vals in prop::collection::vec(-200.0f64..50.0, 12)) {
            let x = Array2::from_shape_vec((4, 3), vals).unwrap();
            let s = Standardizer::fit(&x);
            let back = s.inverse_transform(&s.transform(&x).unwrap()).unwrap();
            for (a, b) in x.iter().zip(back.iter()) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
