//! Mini-batch Adam training of the sequence model and its checkpoint format.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{adam_step, clip_global_norm, AdamConfig, AdamState};
use super::lstm::Mode;
use super::net::{backward_into, forward, LossConfig, MADE};
use super::params::{Dense, LstmLayer, ParamSet, SeqNetParams, CLASSES, MDN_OUTPUTS};
use crate::checkpoint::{fmt_num, parse_num, CheckpointFile, Section};
use crate::dataset::{CenteringStats, Label, SequenceWindow, CHANNELS};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Probability of dropping a unit between the LSTM layers.
    pub dropout_rate: f64,
    /// Read `dropout_rate` as the keep probability instead.
    pub dropout_as_keep: bool,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub mdn_loss_weight: f64,
    pub class_all_steps: bool,
    pub epochs: usize,
    pub seed: u64,
    pub hidden: usize,
    pub layers: usize,
    /// Global gradient-norm ceiling; 0 disables clipping.
    pub clip_norm: f64,
    pub init_scale: f64,
    pub forget_bias: f64,
    /// Train in f32; the stored weights are widened back to f64.
    pub single_precision: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            dropout_rate: 0.6,
            dropout_as_keep: false,
            batch_size: 64,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            mdn_loss_weight: 1.0,
            class_all_steps: false,
            epochs: 40,
            seed: 0,
            hidden: 64,
            layers: 2,
            clip_norm: 5.0,
            init_scale: 0.08,
            forget_bias: 1.0,
            single_precision: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if self.dropout_as_keep && self.dropout_rate == 0.0 {
            return bad("keep probability must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.hidden == 0 || self.layers == 0 {
            return bad("batch_size, hidden and layers must be >= 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return bad("Adam betas must lie in [0, 1) and epsilon must be positive");
        }
        if self.mdn_loss_weight < 0.0 || self.clip_norm < 0.0 || self.init_scale < 0.0 {
            return bad("mdn_loss_weight, clip_norm and init_scale must be non-negative");
        }
        Ok(())
    }

    /// Drop probability actually applied in training.
    pub fn drop_probability(&self) -> f64 {
        if self.dropout_as_keep {
            1.0 - self.dropout_rate
        } else {
            self.dropout_rate
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, beta1: self.beta1, beta2: self.beta2, epsilon: self.epsilon }
    }

    pub fn loss<T: Scalar>(&self) -> LossConfig<T> {
        LossConfig { mdn_weight: T::lit(self.mdn_loss_weight), class_all_steps: self.class_all_steps }
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("learning_rate", self.learning_rate.to_string()),
            ("dropout_rate", self.dropout_rate.to_string()),
            ("dropout_as_keep", self.dropout_as_keep.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("beta1", self.beta1.to_string()),
            ("beta2", self.beta2.to_string()),
            ("epsilon", self.epsilon.to_string()),
            ("mdn_loss_weight", self.mdn_loss_weight.to_string()),
            ("class_all_steps", self.class_all_steps.to_string()),
            ("epochs", self.epochs.to_string()),
            ("seed", self.seed.to_string()),
            ("hidden", self.hidden.to_string()),
            ("layers", self.layers.to_string()),
            ("clip_norm", self.clip_norm.to_string()),
            ("init_scale", self.init_scale.to_string()),
            ("forget_bias", self.forget_bias.to_string()),
            ("single_precision", self.single_precision.to_string()),
        ]
    }

    fn from_section(s: &Section) -> Result<Self> {
        Ok(Self {
            learning_rate: s.parse("learning_rate")?,
            dropout_rate: s.parse("dropout_rate")?,
            dropout_as_keep: s.parse("dropout_as_keep")?,
            batch_size: s.parse("batch_size")?,
            beta1: s.parse("beta1")?,
            beta2: s.parse("beta2")?,
            epsilon: s.parse("epsilon")?,
            mdn_loss_weight: s.parse("mdn_loss_weight")?,
            class_all_steps: s.parse("class_all_steps")?,
            epochs: s.parse("epochs")?,
            seed: s.parse("seed")?,
            hidden: s.parse("hidden")?,
            layers: s.parse("layers")?,
            clip_norm: s.parse("clip_norm")?,
            init_scale: s.parse("init_scale")?,
            forget_bias: s.parse("forget_bias")?,
            single_precision: s.parse("single_precision")?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub step: usize,
    pub class_loss: f64,
    pub mdn_loss: f64,
    pub total_loss: f64,
    pub grad_norm: f64,
}

pub const TRAIN_LOG_HEADER: &str = "epoch,step,class_loss,mdn_loss,total_loss,grad_norm";

pub fn render_train_log(rows: &[TrainLogRow]) -> String {
    let mut out = format!("{TRAIN_LOG_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.epoch, r.step, r.class_loss, r.mdn_loss, r.total_loss, r.grad_norm
        ));
    }
    out
}

pub fn label_index(label: Label) -> Option<usize> {
    match label {
        Label::Made => Some(MADE),
        Label::Missed => Some(1 - MADE),
        Label::Unlabeled => None,
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub params: SeqNetParams<T>,
    pub log: Vec<TrainLogRow>,
}

/// Trains a fresh network on centered, labeled windows. Batches are drawn
/// from a per-epoch shuffle and gradients are summed in batch order.
pub fn train_seqnet<T: Scalar>(cfg: &TrainConfig, windows: &[SequenceWindow<T>]) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if windows.is_empty() {
        return Err(Error::EmptyInput("training windows"));
    }
    let labels: Vec<usize> = windows
        .iter()
        .map(|w| label_index(w.label).ok_or_else(|| Error::IneligibleShot(w.shot_id.clone())))
        .collect::<Result<_>>()?;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params =
        SeqNetParams::<T>::init(CHANNELS, cfg.hidden, cfg.layers, cfg.init_scale, cfg.forget_bias, &mut init_rng);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(2);

    let adam = cfg.adam();
    let loss_cfg = cfg.loss::<T>();
    let drop = T::lit(cfg.drop_probability());
    let clip = T::lit(cfg.clip_norm);
    let mut state = AdamState::new(&params);
    let mut order: Vec<usize> = (0..windows.len()).collect();
    let mut log = Vec::new();
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = params.zeros_like();
            let (mut class_sum, mut mdn_sum, mut total_sum) = (T::zero(), T::zero(), T::zero());
            for &k in batch {
                let cache = forward(&params, &windows[k].steps, drop, Mode::Train, &mut dropout_rng)?;
                let parts = backward_into(&params, &cache, labels[k], &loss_cfg, &mut grads)?;
                class_sum += parts.class;
                mdn_sum += parts.mdn;
                total_sum += parts.total;
            }
            let n = T::from_usize_lossy(batch.len());
            grads.scale(T::one() / n);
            let norm = clip_global_norm(&mut grads, clip);
            if !(norm.is_finite() && total_sum.is_finite()) {
                return Err(Error::Divergence(format!("non-finite loss or gradient at epoch {epoch}, step {step}")));
            }
            adam_step(&mut params, &grads, &mut state, &adam);
            log.push(TrainLogRow {
                epoch,
                step,
                class_loss: (class_sum / n).as_f64(),
                mdn_loss: (mdn_sum / n).as_f64(),
                total_loss: (total_sum / n).as_f64(),
                grad_norm: norm.as_f64(),
            });
            step += 1;
        }
    }
    Ok(TrainOutcome { params, log })
}

/// A trained network with everything needed to score raw windows.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqNetModel<T> {
    pub params: SeqNetParams<T>,
    pub config: TrainConfig,
    pub window_len: usize,
    pub centering: CenteringStats<T>,
}

impl<T: Scalar> SeqNetModel<T> {
    /// Make probability for an uncentered window.
    pub fn score(&self, raw: &SequenceWindow<T>) -> Result<T> {
        if raw.steps.len() != self.window_len {
            return Err(Error::ShapeMismatch(format!(
                "window has {} steps, model expects {}",
                raw.steps.len(),
                self.window_len
            )));
        }
        let centered: Vec<[T; CHANNELS]> =
            raw.steps.iter().map(|s| std::array::from_fn(|c| s[c] - self.centering.means[c])).collect();
        super::net::predict_make_probability(&self.params, &centered)
    }

    pub fn to_sections(&self) -> Vec<Section> {
        let mut meta = Section::new("seqnet")
            .with("hidden", self.params.hidden().to_string())
            .with("layers", self.params.layers.len().to_string())
            .with("window_len", self.window_len.to_string())
            .with("seed", self.config.seed.to_string());
        for (k, v) in self.config.entries() {
            meta.push(&format!("config.{k}"), v);
        }
        meta.push("centering", self.centering.means.iter().map(|&m| fmt_num(m)).collect::<Vec<_>>().join(" "));
        let mut tensors = Section::new("tensors");
        for ((name, rows, cols), data) in self.params.tensor_shapes().into_iter().zip(self.params.tensors()) {
            let values: Vec<String> = data.iter().map(|&v| fmt_num(v)).collect();
            tensors.push(&name, format!("{rows} {cols} {}", values.join(" ")));
        }
        vec![meta, tensors]
    }

    pub fn to_checkpoint(&self) -> CheckpointFile {
        let mut sections = vec![Section::new("model").with("kind", "rnn")];
        sections.extend(self.to_sections());
        CheckpointFile { sections }
    }

    pub fn from_checkpoint(file: &CheckpointFile) -> Result<Self> {
        Self::from_sections(file.section("seqnet")?, file.section("tensors")?)
    }

    pub fn from_sections(meta: &Section, tensors: &Section) -> Result<Self> {
        let hidden: usize = meta.parse("hidden")?;
        let layers: usize = meta.parse("layers")?;
        let window_len: usize = meta.parse("window_len")?;
        let stripped = Section {
            name: meta.name.clone(),
            entries: meta
                .entries
                .iter()
                .filter_map(|(k, v)| k.strip_prefix("config.").map(|k| (k.to_string(), v.clone())))
                .collect(),
        };
        let config = TrainConfig::from_section(&stripped)?;
        let means: Vec<T> = meta.get("centering")?.split_whitespace().map(parse_num).collect::<Result<_>>()?;
        let means: [T; CHANNELS] =
            means.try_into().map_err(|_| Error::Checkpoint(format!("centering needs {CHANNELS} values")))?;
        if hidden == 0 || layers == 0 {
            return Err(Error::Checkpoint("hidden and layers must be >= 1".into()));
        }
        let mut params = SeqNetParams {
            layers: (0..layers).map(|l| LstmLayer::zeros(if l == 0 { CHANNELS } else { hidden }, hidden)).collect(),
            class_head: Dense::zeros(hidden, CLASSES),
            mdn_head: Dense::zeros(hidden, MDN_OUTPUTS),
        };
        let shapes = params.tensor_shapes();
        for ((name, rows, cols), slot) in shapes.into_iter().zip(params.tensors_mut()) {
            let raw = tensors.get(&name)?;
            let mut parts = raw.split_whitespace();
            let r: usize = parts.next().and_then(|v| v.parse().ok()).unwrap_or(usize::MAX);
            let c: usize = parts.next().and_then(|v| v.parse().ok()).unwrap_or(usize::MAX);
            if (r, c) != (rows, cols) {
                return Err(Error::Checkpoint(format!("tensor {name} has shape {r}x{c}, expected {rows}x{cols}")));
            }
            let values: Vec<T> = parts.map(parse_num).collect::<Result<_>>()?;
            if values.len() != slot.len() {
                return Err(Error::Checkpoint(format!("tensor {name} has {} values", values.len())));
            }
            slot.copy_from_slice(&values);
        }
        params.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;
        Ok(Self { params, config, window_len, centering: CenteringStats { means } })
    }
}
