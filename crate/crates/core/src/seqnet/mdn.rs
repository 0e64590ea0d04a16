//! Mixture of three diagonal-covariance trivariate Gaussians over the next
//! ball position.

use std::f64::consts::PI;

use super::params::{MDN_DIM, MDN_OUTPUTS, MIXTURES};
use crate::scalar::{log_sum_exp, Scalar};

/// Lower bound added to every component scale.
pub const SIGMA_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdnMixture<T> {
    pub weights: [T; MIXTURES],
    pub means: [[T; MDN_DIM]; MIXTURES],
    pub scales: [[T; MDN_DIM]; MIXTURES],
}

const MEAN_OFFSET: usize = MIXTURES;
const SCALE_OFFSET: usize = MIXTURES + MIXTURES * MDN_DIM;

impl<T: Scalar> MdnMixture<T> {
    /// Softmax over the logits, identity means, `σ_min + exp(s)` scales.
    pub fn from_raw(raw: &[T]) -> Self {
        debug_assert_eq!(raw.len(), MDN_OUTPUTS);
        let lse = log_sum_exp(&raw[..MIXTURES]);
        let mut m = Self {
            weights: [T::zero(); MIXTURES],
            means: [[T::zero(); MDN_DIM]; MIXTURES],
            scales: [[T::zero(); MDN_DIM]; MIXTURES],
        };
        for k in 0..MIXTURES {
            m.weights[k] = (raw[k] - lse).exp();
            for d in 0..MDN_DIM {
                m.means[k][d] = raw[MEAN_OFFSET + k * MDN_DIM + d];
                m.scales[k][d] = T::lit(SIGMA_MIN) + raw[SCALE_OFFSET + k * MDN_DIM + d].exp();
            }
        }
        m
    }

    fn log_components(&self, log_weights: &[T; MIXTURES], y: &[T; MDN_DIM]) -> [T; MIXTURES] {
        let half_log_2pi = T::lit(0.5 * (2.0 * PI).ln());
        let half = T::lit(0.5);
        let mut out = [T::zero(); MIXTURES];
        for k in 0..MIXTURES {
            let mut lp = log_weights[k];
            for d in 0..MDN_DIM {
                let z = (y[d] - self.means[k][d]) / self.scales[k][d];
                lp -= self.scales[k][d].ln() + half_log_2pi + half * z * z;
            }
            out[k] = lp;
        }
        out
    }

    pub fn density(&self, y: &[T; MDN_DIM]) -> T {
        let logw = self.weights.map(|w| w.ln());
        log_sum_exp(&self.log_components(&logw, y)).exp()
    }

    /// `−log p(y)`.
    pub fn nll(&self, y: &[T; MDN_DIM]) -> T {
        let logw = self.weights.map(|w| w.ln());
        -log_sum_exp(&self.log_components(&logw, y))
    }
}

/// `−log p(y)` from raw head outputs and its gradient w.r.t. those outputs.
pub fn nll_and_grad<T: Scalar>(raw: &[T], y: &[T; MDN_DIM]) -> (T, [T; MDN_OUTPUTS]) {
    let mix = MdnMixture::from_raw(raw);
    let lse = log_sum_exp(&raw[..MIXTURES]);
    let mut logw = [T::zero(); MIXTURES];
    for k in 0..MIXTURES {
        logw[k] = raw[k] - lse;
    }
    let comps = mix.log_components(&logw, y);
    let total = log_sum_exp(&comps);
    let mut grad = [T::zero(); MDN_OUTPUTS];
    for k in 0..MIXTURES {
        let resp = (comps[k] - total).exp();
        grad[k] = mix.weights[k] - resp;
        for d in 0..MDN_DIM {
            let s = mix.scales[k][d];
            let diff = y[d] - mix.means[k][d];
            grad[MEAN_OFFSET + k * MDN_DIM + d] = -resp * diff / (s * s);
            let dsigma = resp * (T::one() / s - diff * diff / (s * s * s));
            grad[SCALE_OFFSET + k * MDN_DIM + d] = dsigma * (s - T::lit(SIGMA_MIN));
        }
    }
    (-total, grad)
}
