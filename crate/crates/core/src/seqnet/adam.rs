use super::params::ParamSet;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 0.005, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct AdamState<P> {
    pub m: P,
    pub v: P,
    /// Steps taken so far.
    pub t: u64,
}

impl<P> AdamState<P> {
    pub fn new<T: Scalar>(params: &P) -> Self
    where
        P: ParamSet<T>,
    {
        Self { m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<T: Scalar, P: ParamSet<T>>(params: &mut P, grads: &P, state: &mut AdamState<P>, cfg: &AdamConfig) {
    state.t += 1;
    let t = state.t as i32;
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let c1 = T::one() - b1.powi(t);
    let c2 = T::one() - b2.powi(t);
    let lr = T::lit(cfg.learning_rate);
    let eps = T::lit(cfg.epsilon);
    let (m_all, v_all) = (state.m.tensors_mut(), state.v.tensors_mut());
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(m_all).zip(v_all) {
        for j in 0..p.len() {
            m[j] = b1 * m[j] + (T::one() - b1) * g[j];
            v[j] = b2 * v[j] + (T::one() - b2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            p[j] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Rescales `grads` so its global L2 norm is at most `max_norm`; returns
/// the norm before clipping.
pub fn clip_global_norm<T: Scalar, P: ParamSet<T>>(grads: &mut P, max_norm: T) -> T {
    let norm = grads.global_norm();
    if max_norm > T::zero() && norm > max_norm {
        grads.scale(max_norm / norm);
    }
    norm
}
