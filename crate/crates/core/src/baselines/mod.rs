//! Static last-point classifiers: elastic-net logistic regression and
//! gradient-boosted trees on logistic loss.

mod enet;
mod gbm;

pub use enet::{fit_enet, fit_enet_traced, predict_enet, select_lambda_cv, EnetModel, EnetParams};
pub use gbm::{fit_gbm, fit_gbm_traced, predict_gbm, GbmModel, GbmParams, Tree};

use crate::error::{Error, Result};
use crate::features::Matrix;
use crate::scalar::{sigmoid, softplus, Scalar};

fn check_training_input<T: Scalar>(x: &Matrix<T>, y: &[bool]) -> Result<()> {
    if x.rows != y.len() {
        return Err(Error::DimensionMismatch { expected: x.rows, got: y.len() });
    }
    if x.rows < 2 || y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(Error::SingleClassInput);
    }
    if let Some(pos) = x.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFeature(pos % x.cols.max(1)));
    }
    Ok(())
}

/// Mean logistic loss of linear predictors `eta` against labels.
pub fn mean_log_loss<T: Scalar>(eta: &[T], y: &[bool]) -> T {
    let total: T = eta.iter().zip(y).map(|(&e, &yi)| if yi { softplus(-e) } else { softplus(e) }).sum();
    total / T::from_usize_lossy(eta.len())
}

pub fn prior_log_odds<T: Scalar>(y: &[bool]) -> T {
    let pos = y.iter().filter(|&&v| v).count();
    let p = T::from_usize_lossy(pos) / T::from_usize_lossy(y.len());
    (p / (T::one() - p)).ln()
}

fn probabilities<T: Scalar>(eta: &[T]) -> Vec<T> {
    eta.iter().map(|&e| sigmoid(e)).collect()
}

pub(crate) use crate::checkpoint::{fmt_num, parse_num};
