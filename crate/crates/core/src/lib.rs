//! Make/miss classification of three-point shot trajectories.
//!
//! The crate covers the whole pipeline: a four-force ball-flight simulator
//! that produces labeled 25 Hz tracks, ingest and windowing of tracking CSVs,
//! engineered-feature baselines (elastic-net logistic regression and
//! gradient-boosted trees), a two-layer peephole LSTM with a softmax
//! make/miss head and a mixture-density next-position head, and AUC
//! evaluation over rim-distance slices.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the `f64` instantiation used by the CLI.

pub mod baselines;
pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod features;
pub mod geometry;
pub mod kernels;
pub mod metrics;
pub mod pipeline;
pub mod sanity;
pub mod scalar;
pub mod seqnet;
pub mod simulator;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Scalar;

pub type Point = geometry::Point3<f64>;
pub type Geometry = geometry::CourtGeometry<f64>;
pub type Forces = simulator::ForceConfig<f64>;
pub type Track = dataset::Trajectory<f64>;
pub type Window = dataset::SequenceWindow<f64>;
pub type Features = features::FeatureRow<f64>;
pub type Enet = baselines::EnetModel<f64>;
pub type Gbm = baselines::GbmModel<f64>;
pub type SeqNet = seqnet::SeqNetParams<f64>;
pub type SeqNet32 = seqnet::SeqNetParams<f32>;
pub type Report = metrics::EvalReport;
