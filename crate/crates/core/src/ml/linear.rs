//! Linear, ridge and lasso regression on standardized features.

use ndarray::{Array1, Array2, Axis};

use super::check_pair;
use super::model::{ModelKind, Net, TrainedModel};
use super::standardize::Standardizer;
use crate::error::{Error, Result};

/// Stabilizing penalty used for ordinary least squares.
pub const LINEAR_ALPHA: f64 = 1e-10;

/// Solve `(AᵀA-like) SPD * X = B` by Cholesky factorization.
fn cholesky_solve(mut a: Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let max_diag = a.diag().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = n as f64 * f64::EPSILON * max_diag;
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= a[[j, k]] * a[[j, k]];
        }
        if !(d > tol) {
            return Err(Error::RankDeficient(format!(
                "normal equations are singular at column {j}; use a positive alpha"
            )));
        }
        let d = d.sqrt();
        a[[j, j]] = d;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = s / d;
        }
    }
    let mut x = b.clone();
    for mut col in x.columns_mut() {
        for i in 0..n {
            let mut s = col[i];
            for k in 0..i {
                s -= a[[i, k]] * col[k];
            }
            col[i] = s / a[[i, i]];
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for k in i + 1..n {
                s -= a[[k, i]] * col[k];
            }
            col[i] = s / a[[i, i]];
        }
    }
    Ok(x)
}

/// `W = (XᵀX + αI)⁻¹ XᵀY`, no intercept.
pub fn ridge_solve(x: &Array2<f64>, y: &Array2<f64>, alpha: f64) -> Result<Array2<f64>> {
    check_pair(x, y)?;
    if !(alpha >= 0.0) {
        return Err(Error::Config(format!("alpha must be non-negative, got {alpha}")));
    }
    let mut g = x.t().dot(x);
    for i in 0..g.nrows() {
        g[[i, i]] += alpha;
    }
    cholesky_solve(g, &x.t().dot(y))
}

fn centered(x: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let m = x.mean_axis(Axis(0)).expect("non-empty");
    (x - &m, m)
}

fn affine_model(kind: ModelKind, st: Standardizer, w: Array2<f64>, xm: &Array1<f64>, ym: &Array1<f64>) -> TrainedModel {
    let b = ym - &xm.dot(&w);
    TrainedModel::new(kind, st, Net::Affine { w, b })
}

/// Ridge regression with an unpenalized intercept.
pub fn fit_ridge(x: &Array2<f64>, y: &Array2<f64>, alpha: f64) -> Result<TrainedModel> {
    check_pair(x, y)?;
    let st = Standardizer::fit(x);
    let (xc, xm) = centered(&st.transform(x)?);
    let (yc, ym) = centered(y);
    let w = ridge_solve(&xc, &yc, alpha)?;
    Ok(affine_model(ModelKind::Ridge { alpha }, st, w, &xm, &ym))
}

/// Ordinary least squares, stabilized by a negligible ridge penalty.
pub fn fit_linear(x: &Array2<f64>, y: &Array2<f64>) -> Result<TrainedModel> {
    let mut m = fit_ridge(x, y, LINEAR_ALPHA)?;
    m.kind = ModelKind::Linear;
    Ok(m)
}

/// Coordinate-descent result.
#[derive(Debug, Clone)]
pub struct LassoFit {
    pub w: Array2<f64>,
    pub converged: bool,
    pub iterations: usize,
}

fn soft(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Minimize `‖y − Xw‖²/(2N) + α‖w‖₁` per target column by cyclic coordinate descent.
pub fn lasso_solve(x: &Array2<f64>, y: &Array2<f64>, alpha: f64, tol: f64, max_iter: usize) -> Result<LassoFit> {
    check_pair(x, y)?;
    if !(alpha >= 0.0) {
        return Err(Error::Config(format!("alpha must be non-negative, got {alpha}")));
    }
    let n = x.nrows() as f64;
    let f = x.ncols();
    let cols: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
    let norm: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / n).collect();
    let mut w = Array2::zeros((f, y.ncols()));
    let mut converged = true;
    let mut iterations = 0;
    for t in 0..y.ncols() {
        let mut r: Vec<f64> = y.column(t).to_vec();
        let mut done = false;
        let mut it = 0;
        while it < max_iter {
            it += 1;
            let mut max_change = 0.0f64;
            for j in 0..f {
                if norm[j] == 0.0 {
                    continue;
                }
                let old = w[[j, t]];
                let c = &cols[j];
                let rho = c.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / n + norm[j] * old;
                let new = soft(rho, alpha) / norm[j];
                let delta = new - old;
                if delta != 0.0 {
                    for (ri, ci) in r.iter_mut().zip(c) {
                        *ri -= ci * delta;
                    }
                    w[[j, t]] = new;
                }
                max_change = max_change.max(delta.abs());
            }
            if max_change < tol {
                done = true;
                break;
            }
        }
        converged &= done;
        iterations = iterations.max(it);
    }
    Ok(LassoFit { w, converged, iterations })
}

/// Lasso regression with an unpenalized intercept. Non-convergence is
/// flagged in the model kind rather than treated as an error.
pub fn fit_lasso(x: &Array2<f64>, y: &Array2<f64>, alpha: f64, tol: f64, max_iter: usize) -> Result<TrainedModel> {
    check_pair(x, y)?;
    let st = Standardizer::fit(x);
    let (xc, xm) = centered(&st.transform(x)?);
    let (yc, ym) = centered(y);
    let fit = lasso_solve(&xc, &yc, alpha, tol, max_iter)?;
    let kind = ModelKind::Lasso { alpha, tol, max_iter, converged: fit.converged, iterations: fit.iterations };
    Ok(affine_model(kind, st, fit.w, &xm, &ym))
}
