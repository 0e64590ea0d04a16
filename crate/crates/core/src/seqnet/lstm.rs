//! Peephole LSTM layers and stacks with exact reverse-mode gradients.
//!
//! Gate rows are stacked `i, f, o, g` in every `4H`-row tensor. The input
//! and forget peepholes read the previous cell, the output peephole reads
//! the new one.

use rand::Rng;

use super::params::{Dense, LstmLayer};
use crate::error::{Error, Result};
use crate::kernels::{matvec_add, matvec_t_add, outer_add};
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Activations of one cell step, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct StepCache<T> {
    pub x: Vec<T>,
    pub h_prev: Vec<T>,
    pub c_prev: Vec<T>,
    pub i: Vec<T>,
    pub f: Vec<T>,
    pub o: Vec<T>,
    pub g: Vec<T>,
    pub c: Vec<T>,
    pub tanh_c: Vec<T>,
    pub h: Vec<T>,
}

pub(crate) fn cell_forward<T: Scalar>(layer: &LstmLayer<T>, x: &[T], h_prev: &[T], c_prev: &[T]) -> StepCache<T> {
    let hs = layer.hidden;
    let mut z = layer.b.clone();
    matvec_add(&layer.w, x, &mut z);
    matvec_add(&layer.r, h_prev, &mut z);
    let mut i = vec![T::zero(); hs];
    let mut f = vec![T::zero(); hs];
    let mut o = vec![T::zero(); hs];
    let mut g = vec![T::zero(); hs];
    let mut c = vec![T::zero(); hs];
    let mut tanh_c = vec![T::zero(); hs];
    let mut h = vec![T::zero(); hs];
    for k in 0..hs {
        i[k] = sigmoid(z[k] + layer.peep_i[k] * c_prev[k]);
        f[k] = sigmoid(z[hs + k] + layer.peep_f[k] * c_prev[k]);
        g[k] = z[3 * hs + k].tanh();
        c[k] = f[k] * c_prev[k] + i[k] * g[k];
        o[k] = sigmoid(z[2 * hs + k] + layer.peep_o[k] * c[k]);
        tanh_c[k] = c[k].tanh();
        h[k] = o[k] * tanh_c[k];
    }
    StepCache { x: x.to_vec(), h_prev: h_prev.to_vec(), c_prev: c_prev.to_vec(), i, f, o, g, c, tanh_c, h }
}

/// One peephole LSTM step: returns `(h_t, c_t)`.
pub fn lstm_cell_step<T: Scalar>(
    layer: &LstmLayer<T>,
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
) -> Result<(Vec<T>, Vec<T>)> {
    if x.len() != layer.input_size || h_prev.len() != layer.hidden || c_prev.len() != layer.hidden {
        return Err(Error::ShapeMismatch(format!(
            "cell expects input {} and state {}, got {}, {}, {}",
            layer.input_size,
            layer.hidden,
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let s = cell_forward(layer, x, h_prev, c_prev);
    Ok((s.h, s.c))
}

pub(crate) fn layer_forward<T: Scalar>(layer: &LstmLayer<T>, xs: &[Vec<T>]) -> Vec<StepCache<T>> {
    let mut h = vec![T::zero(); layer.hidden];
    let mut c = vec![T::zero(); layer.hidden];
    let mut steps = Vec::with_capacity(xs.len());
    for x in xs {
        let s = cell_forward(layer, x, &h, &c);
        h.clone_from(&s.h);
        c.clone_from(&s.c);
        steps.push(s);
    }
    steps
}

/// Back-propagates `dh` (loss gradient w.r.t. each step's output, from
/// above) through time. Accumulates into `grad` and returns `dL/dx_t`.
pub(crate) fn layer_backward<T: Scalar>(
    layer: &LstmLayer<T>,
    steps: &[StepCache<T>],
    dh: &[Vec<T>],
    grad: &mut LstmLayer<T>,
) -> Vec<Vec<T>> {
    let hs = layer.hidden;
    let one = T::one();
    let mut dh_next = vec![T::zero(); hs];
    let mut dc_next = vec![T::zero(); hs];
    let mut dz = vec![T::zero(); 4 * hs];
    let mut dxs = vec![Vec::new(); steps.len()];
    for t in (0..steps.len()).rev() {
        let s = &steps[t];
        let mut dc_prev = vec![T::zero(); hs];
        for k in 0..hs {
            let dh_k = dh[t][k] + dh_next[k];
            let do_pre = dh_k * s.tanh_c[k] * s.o[k] * (one - s.o[k]);
            let dc = dc_next[k] + dh_k * s.o[k] * (one - s.tanh_c[k] * s.tanh_c[k]) + do_pre * layer.peep_o[k];
            let di_pre = dc * s.g[k] * s.i[k] * (one - s.i[k]);
            let df_pre = dc * s.c_prev[k] * s.f[k] * (one - s.f[k]);
            let dg_pre = dc * s.i[k] * (one - s.g[k] * s.g[k]);
            dc_prev[k] = dc * s.f[k] + di_pre * layer.peep_i[k] + df_pre * layer.peep_f[k];
            grad.peep_i[k] += di_pre * s.c_prev[k];
            grad.peep_f[k] += df_pre * s.c_prev[k];
            grad.peep_o[k] += do_pre * s.c[k];
            dz[k] = di_pre;
            dz[hs + k] = df_pre;
            dz[2 * hs + k] = do_pre;
            dz[3 * hs + k] = dg_pre;
        }
        outer_add(&dz, &s.x, &mut grad.w);
        outer_add(&dz, &s.h_prev, &mut grad.r);
        for (gb, &d) in grad.b.iter_mut().zip(&dz) {
            *gb += d;
        }
        let mut dx = vec![T::zero(); layer.input_size];
        matvec_t_add(&layer.w, &dz, &mut dx);
        dh_next.iter_mut().for_each(|v| *v = T::zero());
        matvec_t_add(&layer.r, &dz, &mut dh_next);
        dc_next = dc_prev;
        dxs[t] = dx;
    }
    dxs
}

/// Forward activations of a stack of layers with inverted dropout between
/// consecutive layers.
#[derive(Debug, Clone)]
pub struct StackCache<T> {
    pub layers: Vec<Vec<StepCache<T>>>,
    /// Per boundary, per step: scaled keep mask (0 or 1/(1-rate)); `None` if
    /// no dropout was applied.
    pub masks: Vec<Option<Vec<Vec<T>>>>,
    pub mode: Mode,
}

impl<T: Scalar> StackCache<T> {
    pub fn top(&self) -> impl Iterator<Item = &Vec<T>> {
        self.layers.last().expect("nonempty stack").iter().map(|s| &s.h)
    }
}

pub(crate) fn stack_forward<T: Scalar, R: Rng>(
    layers: &[LstmLayer<T>],
    inputs: &[Vec<T>],
    dropout_rate: T,
    mode: Mode,
    rng: &mut R,
) -> StackCache<T> {
    let mut caches = Vec::with_capacity(layers.len());
    let mut masks = Vec::with_capacity(layers.len().saturating_sub(1));
    let mut xs: Vec<Vec<T>> = inputs.to_vec();
    for (li, layer) in layers.iter().enumerate() {
        let steps = layer_forward(layer, &xs);
        xs = steps.iter().map(|s| s.h.clone()).collect();
        if li + 1 < layers.len() {
            if mode == Mode::Train && dropout_rate > T::zero() {
                let keep = T::one() - dropout_rate;
                let scale = T::one() / keep;
                let p_drop = dropout_rate.as_f64();
                let mask: Vec<Vec<T>> = xs
                    .iter()
                    .map(|h| h.iter().map(|_| if rng.gen_bool(p_drop) { T::zero() } else { scale }).collect())
                    .collect();
                for (h, m) in xs.iter_mut().zip(&mask) {
                    for (v, &mk) in h.iter_mut().zip(m) {
                        *v *= mk;
                    }
                }
                masks.push(Some(mask));
            } else {
                masks.push(None);
            }
        }
        caches.push(steps);
    }
    StackCache { layers: caches, masks, mode }
}

pub(crate) fn stack_backward<T: Scalar>(
    layers: &[LstmLayer<T>],
    cache: &StackCache<T>,
    dh_top: Vec<Vec<T>>,
    grads: &mut [LstmLayer<T>],
) {
    let mut dh = dh_top;
    for li in (0..layers.len()).rev() {
        let dx = layer_backward(&layers[li], &cache.layers[li], &dh, &mut grads[li]);
        if li == 0 {
            break;
        }
        dh = dx;
        if let Some(mask) = &cache.masks[li - 1] {
            for (d, m) in dh.iter_mut().zip(mask) {
                for (v, &mk) in d.iter_mut().zip(m) {
                    *v *= mk;
                }
            }
        }
    }
}

/// `W h + b` into a fresh vector.
pub(crate) fn dense_forward<T: Scalar>(head: &Dense<T>, h: &[T]) -> Vec<T> {
    let mut out = head.b.clone();
    matvec_add(&head.w, h, &mut out);
    out
}

/// Accumulates head gradients for upstream `d` and adds `Wᵀ d` to `dh`.
pub(crate) fn dense_backward<T: Scalar>(head: &Dense<T>, h: &[T], d: &[T], grad: &mut Dense<T>, dh: &mut [T]) {
    outer_add(d, h, &mut grad.w);
    for (gb, &v) in grad.b.iter_mut().zip(d) {
        *gb += v;
    }
    matvec_t_add(&head.w, d, dh);
}
