//! Shape-parameter prediction from S11 vectors.

mod linear;
mod metrics;
mod mlp;
mod model;
mod standardize;

pub use linear::{fit_lasso, fit_linear, fit_ridge, lasso_solve, ridge_solve, LassoFit, LINEAR_ALPHA};
pub use metrics::{evaluate, Metrics};
pub use mlp::{fit_mlp, AdamParams, Dense, Mlp, MlpConfig};
pub use model::{predict_voting, ModelKind, Net, TrainedModel, MODEL_MAGIC};
pub use standardize::Standardizer;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Row-major sample matrix.
pub type Matrix = Array2<f64>;

/// Row-major matrix from nested rows.
pub fn to_matrix(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let cols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Dimension("ragged rows".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    if flat.iter().any(|v| v.is_nan()) {
        return Err(Error::Dimension("matrix contains NaN".into()));
    }
    Array2::from_shape_vec((rows.len(), cols), flat).map_err(|e| Error::Dimension(e.to_string()))
}

/// Training rows for an 8:1 train/test split of `n` records.
pub fn default_train_count(n: usize) -> usize {
    ((n as f64) * 8.0 / 9.0).round() as usize
}

/// Shuffled partition of `0..n` into `n_train` training and `n - n_train` test indices.
pub fn split(n: usize, n_train: usize, shuffle_seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_train >= n || n_train == 0 {
        return Err(Error::Config(format!("n_train must be in 1..{n}, got {n_train}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

pub fn select_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    m.select(Axis(0), rows)
}

pub(crate) fn check_pair(x: &Array2<f64>, y: &Array2<f64>) -> Result<()> {
    if x.nrows() != y.nrows() {
        return Err(Error::Dimension(format!("{} feature rows vs {} target rows", x.nrows(), y.nrows())));
    }
    if x.nrows() == 0 {
        return Err(Error::Dimension("empty training set".into()));
    }
    if x.iter().chain(y.iter()).any(|v| v.is_nan()) {
        return Err(Error::Dimension("NaN in training data".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sizes() {
        let (tr, te) = split(1800, 1600, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (1600, 200));
        assert_eq!(default_train_count(1800), 1600);
        let mut all: Vec<_> = tr.iter().chain(&te).copied().collect();
        all.sort();
        assert_eq!(all, (0..1800).collect::<Vec<_>>());
    }

    #[test]
    fn split_deterministic() {
        assert_eq!(split(300, 267, 9).unwrap(), split(300, 267, 9).unwrap());
        assert_ne!(split(300, 267, 9).unwrap(), split(300, 267, 10).unwrap());
    }

    #[test]
    fn split_rejects_full_train() {
        assert!(split(10, 10, 0).is_err());
        assert!(split(10, 11, 0).is_err());
    }
}
