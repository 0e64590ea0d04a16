//! Two-layer peephole LSTM with a make/miss softmax head and a
//! mixture-density head over the next position.

pub mod adam;
pub mod lstm;
pub mod mdn;
pub mod net;
pub mod params;
pub mod train;

pub use adam::{adam_step, clip_global_norm, AdamConfig, AdamState};
pub use lstm::{lstm_cell_step, Mode, StackCache, StepCache};
pub use mdn::{nll_and_grad, MdnMixture, SIGMA_MIN};
pub use net::{
    backward, backward_into, classification_loss, forward, losses, mdn_loss, predict_make_probability, softmax2,
    ForwardCache, LossConfig, LossParts, MADE,
};
pub use params::{
    Dense, LstmLayer, ParamSet, RegressionNetParams, SeqNetParams, CLASSES, MDN_DIM, MDN_OUTPUTS, MIXTURES,
};
pub use train::{
    label_index, render_train_log, train_seqnet, SeqNetModel, TrainConfig, TrainLogRow, TrainOutcome, TRAIN_LOG_HEADER,
};
