//! Forward pass, losses and exact gradients of the make/miss sequence model.

use rand::Rng;

use super::lstm::{dense_backward, dense_forward, stack_backward, stack_forward, Mode, StackCache};
use super::mdn::{nll_and_grad, MdnMixture};
use super::params::{ParamSet, SeqNetParams, CLASSES, MDN_DIM};
use crate::dataset::CHANNELS;
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};

/// Class index of a made shot in the logits.
pub const MADE: usize = 1;

#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub inputs: Vec<[T; CHANNELS]>,
    pub stack: StackCache<T>,
    /// Per-step `[missed, made]` logits.
    pub logits: Vec<[T; CLASSES]>,
    pub mdn_raw: Vec<Vec<T>>,
    pub mixtures: Vec<MdnMixture<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig<T> {
    /// Weight of the next-position loss relative to classification.
    pub mdn_weight: T,
    /// Average classification loss over all steps instead of the last only.
    pub class_all_steps: bool,
}

impl<T: Scalar> Default for LossConfig<T> {
    fn default() -> Self {
        Self { mdn_weight: T::one(), class_all_steps: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossParts<T> {
    pub class: T,
    pub mdn: T,
    pub total: T,
}

pub fn forward<T: Scalar, R: Rng>(
    params: &SeqNetParams<T>,
    window: &[[T; CHANNELS]],
    dropout_rate: T,
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardCache<T>> {
    if params.input_size() != CHANNELS {
        return Err(Error::ShapeMismatch(format!(
            "network expects {} inputs, windows carry {CHANNELS}",
            params.input_size()
        )));
    }
    if window.is_empty() {
        return Err(Error::ShapeMismatch("empty window".into()));
    }
    let inputs: Vec<Vec<T>> = window.iter().map(|s| s.to_vec()).collect();
    let stack = stack_forward(&params.layers, &inputs, dropout_rate, mode, rng);
    let mut logits = Vec::with_capacity(window.len());
    let mut mdn_raw = Vec::with_capacity(window.len());
    let mut mixtures = Vec::with_capacity(window.len());
    for h in stack.top() {
        let l = dense_forward(&params.class_head, h);
        logits.push([l[0], l[1]]);
        let raw = dense_forward(&params.mdn_head, h);
        mixtures.push(MdnMixture::from_raw(&raw));
        mdn_raw.push(raw);
    }
    Ok(ForwardCache { inputs: window.to_vec(), stack, logits, mdn_raw, mixtures })
}

/// `−log softmax(logits)[label]`, computed in the log domain.
pub fn classification_loss<T: Scalar>(logits: &[T; CLASSES], label: usize) -> T {
    log_sum_exp(logits) - logits[label]
}

pub fn softmax2<T: Scalar>(logits: &[T; CLASSES]) -> [T; CLASSES] {
    let lse = log_sum_exp(logits);
    [(logits[0] - lse).exp(), (logits[1] - lse).exp()]
}

fn next_position<T: Scalar>(step: &[T; CHANNELS]) -> [T; MDN_DIM] {
    [step[0], step[1], step[2]]
}

/// Mean next-step NLL: the mixture at step `t` scores position `t + 1`.
pub fn mdn_loss<T: Scalar>(mixtures: &[MdnMixture<T>], window: &[[T; CHANNELS]]) -> T {
    let n = window.len().saturating_sub(1);
    if n == 0 {
        return T::zero();
    }
    let total: T = (0..n).map(|t| mixtures[t].nll(&next_position(&window[t + 1]))).sum();
    total / T::from_usize_lossy(n)
}

pub fn losses<T: Scalar>(cache: &ForwardCache<T>, label: usize, cfg: &LossConfig<T>) -> LossParts<T> {
    let steps = cache.logits.len();
    let class = if cfg.class_all_steps {
        cache.logits.iter().map(|l| classification_loss(l, label)).sum::<T>() / T::from_usize_lossy(steps)
    } else {
        classification_loss(&cache.logits[steps - 1], label)
    };
    let mdn = mdn_loss(&cache.mixtures, &cache.inputs);
    LossParts { class, mdn, total: class + cfg.mdn_weight * mdn }
}

/// Exact gradient of `losses(..).total` w.r.t. every parameter. The cache
/// must come from a training-mode forward pass.
pub fn backward<T: Scalar>(
    params: &SeqNetParams<T>,
    cache: &ForwardCache<T>,
    label: usize,
    cfg: &LossConfig<T>,
) -> Result<(SeqNetParams<T>, LossParts<T>)> {
    let mut grads = params.zeros_like();
    let parts = backward_into(params, cache, label, cfg, &mut grads)?;
    Ok((grads, parts))
}

/// As [`backward`], adding the gradient into `grads` in place.
pub fn backward_into<T: Scalar>(
    params: &SeqNetParams<T>,
    cache: &ForwardCache<T>,
    label: usize,
    cfg: &LossConfig<T>,
    grads: &mut SeqNetParams<T>,
) -> Result<LossParts<T>> {
    if cache.stack.mode != Mode::Train {
        return Err(Error::StaleCache);
    }
    let parts = losses(cache, label, cfg);
    let steps = cache.logits.len();
    let hidden = params.hidden();
    let mut dh_top = vec![vec![T::zero(); hidden]; steps];
    let tops: Vec<&Vec<T>> = cache.stack.top().collect();

    let class_steps: Vec<usize> = if cfg.class_all_steps { (0..steps).collect() } else { vec![steps - 1] };
    let class_scale = T::one() / T::from_usize_lossy(class_steps.len());
    for &t in &class_steps {
        let p = softmax2(&cache.logits[t]);
        let mut d = [p[0] * class_scale, p[1] * class_scale];
        d[label] -= class_scale;
        dense_backward(&params.class_head, tops[t], &d, &mut grads.class_head, &mut dh_top[t]);
    }

    if steps > 1 && cfg.mdn_weight != T::zero() {
        let scale = cfg.mdn_weight / T::from_usize_lossy(steps - 1);
        for t in 0..steps - 1 {
            let (_, g) = nll_and_grad(&cache.mdn_raw[t], &next_position(&cache.inputs[t + 1]));
            let d: Vec<T> = g.iter().map(|&v| v * scale).collect();
            dense_backward(&params.mdn_head, tops[t], &d, &mut grads.mdn_head, &mut dh_top[t]);
        }
    }

    stack_backward(&params.layers, &cache.stack, dh_top, &mut grads.layers);
    Ok(parts)
}

/// Probability of a make from the final step, evaluated without dropout.
pub fn predict_make_probability<T: Scalar>(params: &SeqNetParams<T>, window: &[[T; CHANNELS]]) -> Result<T> {
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let cache = forward(params, window, T::zero(), Mode::Eval, &mut rng)?;
    Ok(softmax2(cache.logits.last().expect("nonempty window"))[MADE])
}
