//! Two small capability checks for the LSTM core: next-sample prediction on
//! sine waves and summing a sequence of single digits.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seqnet::lstm::{dense_backward, dense_forward, stack_backward, stack_forward, Mode};
use crate::seqnet::{adam_step, clip_global_norm, AdamConfig, AdamState, ParamSet, RegressionNetParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineConfig {
    /// Angular frequency range in rad/s.
    pub omega: (f64, f64),
    pub phase: (f64, f64),
    pub seq_len: usize,
    /// Sample spacing in seconds.
    pub dt: f64,
}

impl Default for SineConfig {
    fn default() -> Self {
        Self { omega: (0.5, 2.0), phase: (0.0, 2.0 * PI), seq_len: 20, dt: 0.25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdditionConfig {
    pub min_digits: usize,
    pub max_digits: usize,
}

impl Default for AdditionConfig {
    fn default() -> Self {
        Self { min_digits: 5, max_digits: 15 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TaskKind {
    Sine(SineConfig),
    Addition(AdditionConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SanityTask {
    pub kind: TaskKind,
    pub hidden: usize,
    pub layers: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub eval_size: usize,
}

impl SanityTask {
    pub fn sine() -> Self {
        Self {
            kind: TaskKind::Sine(SineConfig::default()),
            hidden: 32,
            layers: 2,
            batch_size: 32,
            learning_rate: 0.005,
            eval_size: 500,
        }
    }

    /// 2 layers of 100 units with batches of 50.
    pub fn addition() -> Self {
        Self {
            kind: TaskKind::Addition(AdditionConfig::default()),
            hidden: 100,
            layers: 2,
            batch_size: 50,
            learning_rate: 0.005,
            eval_size: 500,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            TaskKind::Sine(c) if c.seq_len < 2 => return Err(Error::Config("sine length must be >= 2".into())),
            TaskKind::Addition(c) if c.min_digits < 5 || c.max_digits > 15 || c.min_digits > c.max_digits => {
                return Err(Error::Config("addition digit count must lie within [5, 15]".into()))
            }
            _ => {}
        }
        if self.hidden == 0 || self.layers == 0 || self.batch_size == 0 || self.eval_size == 0 {
            return Err(Error::Config("hidden, layers, batch_size and eval_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SineBatch {
    /// One scalar per step.
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

/// Value of one wave at sample `k`.
pub fn sine_sample(omega: f64, phase: f64, dt: f64, k: usize) -> f64 {
    (omega * k as f64 * dt + phase).sin()
}

pub fn gen_sine_batch(cfg: &SineConfig, n: usize, seed: u64) -> SineBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for _ in 0..n {
        let omega = draw(&mut rng, cfg.omega);
        let phase = draw(&mut rng, cfg.phase);
        inputs.push((0..cfg.seq_len).map(|k| sine_sample(omega, phase, cfg.dt, k)).collect());
        targets.push(sine_sample(omega, phase, cfg.dt, cfg.seq_len));
    }
    SineBatch { inputs, targets }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdditionBatch {
    pub digits: Vec<Vec<u8>>,
    pub sums: Vec<u32>,
}

pub fn gen_addition_batch(cfg: &AdditionConfig, n: usize, seed: u64) -> AdditionBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut digits = Vec::with_capacity(n);
    let mut sums = Vec::with_capacity(n);
    for _ in 0..n {
        let len = rng.gen_range(cfg.min_digits..=cfg.max_digits);
        let seq: Vec<u8> = (0..len).map(|_| rng.gen_range(0..10u8)).collect();
        sums.push(seq.iter().map(|&d| u32::from(d)).sum());
        digits.push(seq);
    }
    AdditionBatch { digits, sums }
}

/// `(digit / 10, 1)` per digit, then `(0, 0)` padding up to `max_len`.
pub fn encode_digits<T: Scalar>(digits: &[u8], max_len: usize) -> Vec<Vec<T>> {
    (0..max_len.max(digits.len()))
        .map(|k| match digits.get(k) {
            Some(&d) => vec![T::lit(f64::from(d) / 10.0), T::one()],
            None => vec![T::zero(), T::zero()],
        })
        .collect()
}

/// Regression targets are scaled by this before training.
const SUM_SCALE: f64 = 50.0;

struct Prepared<T> {
    inputs: Vec<Vec<Vec<T>>>,
    targets: Vec<T>,
}

fn prepare<T: Scalar>(task: &SanityTask, n: usize, seed: u64) -> Prepared<T> {
    match task.kind {
        TaskKind::Sine(c) => {
            let b = gen_sine_batch(&c, n, seed);
            Prepared {
                inputs: b.inputs.iter().map(|s| s.iter().map(|&v| vec![T::lit(v)]).collect()).collect(),
                targets: b.targets.iter().map(|&v| T::lit(v)).collect(),
            }
        }
        TaskKind::Addition(c) => {
            let b = gen_addition_batch(&c, n, seed);
            Prepared {
                inputs: b.digits.iter().map(|d| encode_digits(d, c.max_digits)).collect(),
                targets: b.sums.iter().map(|&s| T::lit(f64::from(s) / SUM_SCALE)).collect(),
            }
        }
    }
}

fn input_width(task: &SanityTask) -> usize {
    match task.kind {
        TaskKind::Sine(_) => 1,
        TaskKind::Addition(_) => 2,
    }
}

/// Final-step output of the regression net.
pub fn regress<T: Scalar>(params: &RegressionNetParams<T>, inputs: &[Vec<T>]) -> T {
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let cache = stack_forward(&params.layers, inputs, T::zero(), Mode::Eval, &mut rng);
    dense_forward(&params.head, cache.top().last().expect("nonempty sequence"))[0]
}

/// Squared-error loss and its gradient for one sequence.
fn loss_and_grad<T: Scalar>(
    params: &RegressionNetParams<T>,
    inputs: &[Vec<T>],
    target: T,
) -> (T, RegressionNetParams<T>) {
    let mut rng = rand::rngs::mock::StepRng::new(0, 0);
    let cache = stack_forward(&params.layers, inputs, T::zero(), Mode::Train, &mut rng);
    let tops: Vec<&Vec<T>> = cache.top().collect();
    let last = tops.len() - 1;
    let y = dense_forward(&params.head, tops[last])[0];
    let err = y - target;
    let mut grads = params.zeros_like();
    let mut dh_top = vec![vec![T::zero(); params.head.inputs]; tops.len()];
    dense_backward(&params.head, tops[last], &[err + err], &mut grads.head, &mut dh_top[last]);
    stack_backward(&params.layers, &cache, dh_top, &mut grads.layers);
    (err * err, grads)
}

/// Held-out metric in task units: MSE for sine, MAE for addition.
pub fn evaluate<T: Scalar>(task: &SanityTask, params: &RegressionNetParams<T>, seed: u64) -> f64 {
    let data = prepare::<T>(task, task.eval_size, seed ^ 0x5eed_e7a1);
    let n = data.targets.len() as f64;
    match task.kind {
        TaskKind::Sine(_) => {
            data.inputs.iter().zip(&data.targets).map(|(x, &t)| (regress(params, x) - t).as_f64().powi(2)).sum::<f64>()
                / n
        }
        TaskKind::Addition(_) => {
            data.inputs
                .iter()
                .zip(&data.targets)
                .map(|(x, &t)| ((regress(params, x) - t).as_f64() * SUM_SCALE).abs())
                .sum::<f64>()
                / n
        }
    }
}

/// Trains a fresh two-layer LSTM for `steps` Adam updates and returns the
/// held-out metric along with the trained weights.
pub fn run_sanity<T: Scalar>(task: &SanityTask, steps: usize, seed: u64) -> Result<(f64, RegressionNetParams<T>)> {
    task.validate()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params =
        RegressionNetParams::<T>::init(input_width(task), task.hidden, task.layers, 0.08, 1.0, &mut init_rng);
    let mut state = AdamState::new(&params);
    let adam = AdamConfig { learning_rate: task.learning_rate, ..AdamConfig::default() };
    let clip = T::lit(5.0);
    for step in 0..steps {
        let batch = prepare::<T>(task, task.batch_size, seed.wrapping_add(1 + step as u64));
        let mut grads = params.zeros_like();
        for (x, &t) in batch.inputs.iter().zip(&batch.targets) {
            let (_, g) = loss_and_grad(&params, x, t);
            grads.add_assign(&g);
        }
        grads.scale(T::one() / T::from_usize_lossy(task.batch_size));
        let norm = clip_global_norm(&mut grads, clip);
        if !norm.is_finite() {
            return Err(Error::Divergence(format!("sanity step {step}")));
        }
        adam_step(&mut params, &grads, &mut state, &adam);
    }
    Ok((evaluate(task, &params, seed), params))
}
