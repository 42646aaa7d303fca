use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::model::TrainedModel;
use crate::error::{Error, Result};

/// Per-parameter errors in millimeters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub model: String,
    pub names: Vec<String>,
    pub rmse: Vec<f64>,
    pub mae: Vec<f64>,
    pub rmse_mean: f64,
    pub mae_mean: f64,
    pub samples: usize,
}

impl Metrics {
    pub fn from_predictions(pred: &Array2<f64>, truth: &Array2<f64>) -> Result<Self> {
        if pred.dim() != truth.dim() {
            return Err(Error::Dimension(format!("prediction {:?} vs truth {:?}", pred.dim(), truth.dim())));
        }
        if pred.nrows() == 0 {
            return Err(Error::Dimension("empty test set".into()));
        }
        let n = pred.nrows() as f64;
        let d = pred - truth;
        let rmse: Vec<f64> =
            d.columns().into_iter().map(|c| (c.iter().map(|v| v * v).sum::<f64>() / n).sqrt()).collect();
        let mae: Vec<f64> = d.columns().into_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>() / n).collect();
        let p = rmse.len() as f64;
        Ok(Metrics {
            model: String::new(),
            names: (0..rmse.len()).map(|i| format!("p{i}")).collect(),
            rmse_mean: rmse.iter().sum::<f64>() / p,
            mae_mean: mae.iter().sum::<f64>() / p,
            rmse,
            mae,
            samples: pred.nrows(),
        })
    }
}

/// Errors of `model` on a held-out set.
pub fn evaluate(model: &TrainedModel, x: &Array2<f64>, y: &Array2<f64>) -> Result<Metrics> {
    let mut m = Metrics::from_predictions(&model.predict(x)?, y)?;
    m.model = model.kind.name().to_string();
    if model.target_names.len() == m.rmse.len() {
        m.names = model.target_names.clone();
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn perfect_and_offset() {
        let t = array![[1.0, 2.0], [3.0, 4.0], [5.0, -6.0]];
        let m = Metrics::from_predictions(&t, &t).unwrap();
        assert_eq!((m.rmse_mean, m.mae_mean), (0.0, 0.0));
        let m = Metrics::from_predictions(&(&t - 0.75), &t).unwrap();
        for k in 0..2 {
            assert!((m.rmse[k] - 0.75).abs() < 1e-15 && (m.mae[k] - 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn hand_evaluated() {
        let m = Metrics::from_predictions(&array![[1.0], [2.0]], &array![[0.0], [0.0]]).unwrap();
        assert!((m.rmse[0] - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((m.rmse[0] - 1.5811).abs() < 1e-4);
        assert_eq!(m.mae[0], 1.5);
    }

    #[test]
    fn empty_rejected() {
        assert!(Metrics::from_predictions(&Array2::zeros((0, 2)), &Array2::zeros((0, 2))).is_err());
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(v in prop::collection::vec(-100.0f64..100.0, 2..40)) {
            let n = v.len() / 2;
            let p = Array2::from_shape_vec((n, 2), v[..2 * n].to_vec()).unwrap();
            let m = Metrics::from_predictions(&p, &Array2::zeros((n, 2))).unwrap();
            for k in 0..2 {
                prop_assert!(m.rmse[k] >= m.mae[k] * (1.0 - 1e-12) && m.mae[k] >= 0.0);
            }
        }
    }
}
