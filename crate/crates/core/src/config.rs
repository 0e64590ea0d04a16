//! Flat `section.key = value` run configuration.
//!
//! Every default named elsewhere in the crate is reachable from here. The
//! canonical echo (all keys, sorted by declaration, defaults filled in) is
//! hashed and stamped into every artifact.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::baselines::{EnetParams, GbmParams};
use crate::dataset::{SliceMode, DEFAULT_WINDOW_LEN};
use crate::error::{Error, Result};
use crate::geometry::CourtGeometry;
use crate::seqnet::TrainConfig;
use crate::simulator::{ForceConfig, ShooterDistribution};

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub window_len: usize,
    pub train_ratio: f64,
    pub slice_mode: SliceMode,
    pub distances: Vec<f64>,
    /// Share of the training split used for fitting.
    pub train_fraction: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            window_len: DEFAULT_WINDOW_LEN,
            train_ratio: 0.8,
            slice_mode: SliceMode::Distance,
            distances: (2..=8).map(f64::from).collect(),
            train_fraction: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnetConfig {
    pub params: EnetParams,
    /// Choose λ by cross-validation over `lambda_grid` instead of `lambda`.
    pub select_lambda: bool,
    pub lambda_grid: Vec<f64>,
    pub cv_folds: usize,
}

impl Default for EnetConfig {
    fn default() -> Self {
        Self {
            params: EnetParams::default(),
            select_lambda: true,
            lambda_grid: vec![1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            cv_folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Drives the split, cross-validation and network initialization.
    pub seed: u64,
    pub sim_shots: usize,
    pub sim_seed: u64,
    pub geometry: CourtGeometry<f64>,
    pub forces: ForceConfig<f64>,
    pub shooter: ShooterDistribution,
    pub data: DataConfig,
    pub enet: EnetConfig,
    pub gbm: GbmParams,
    pub rnn: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            sim_shots: 20_000,
            sim_seed: 0,
            geometry: CourtGeometry::default(),
            forces: ForceConfig::default(),
            shooter: ShooterDistribution::default(),
            data: DataConfig::default(),
            enet: EnetConfig::default(),
            gbm: GbmParams::default(),
            rnn: TrainConfig::default(),
        }
    }
}

fn parse<V: FromStr>(key: &str, raw: &str) -> Result<V> {
    raw.parse().map_err(|_| Error::Config(format!("bad value for {key}: {raw:?}")))
}

fn parse_list(key: &str, raw: &str) -> Result<Vec<f64>> {
    raw.split(',').map(|s| parse(key, s.trim())).collect()
}

fn list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn deg(rad: f64) -> String {
    rad.to_degrees().to_string()
}

fn show(v: impl Display) -> String {
    v.to_string()
}

impl RunConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let raw = raw.trim();
        let p = |k: &str| -> Result<f64> { parse(k, raw) };
        match key {
            "run.seed" => self.seed = parse(key, raw)?,
            "sim.shots" => self.sim_shots = parse(key, raw)?,
            "sim.seed" => self.sim_seed = parse(key, raw)?,

            "geometry.court_length" => self.geometry.court_length = p(key)?,
            "geometry.court_width" => self.geometry.court_width = p(key)?,
            "geometry.rim_height" => self.geometry.rim_height = p(key)?,
            "geometry.rim_radius" => self.geometry.rim_radius = p(key)?,
            "geometry.rim_center_x_left" => self.geometry.rim_center_x_left = p(key)?,
            "geometry.rim_center_y" => self.geometry.rim_center_y = p(key)?,

            "forces.gravity" => self.forces.gravity = p(key)?,
            "forces.drag_coeff" => self.forces.drag_coeff = p(key)?,
            "forces.air_density" => self.forces.air_density = p(key)?,
            "forces.ball_mass" => self.forces.ball_mass = p(key)?,
            "forces.ball_radius" => self.forces.ball_radius = p(key)?,
            "forces.magnus_coeff" => self.forces.magnus_coeff = p(key)?,
            "forces.buoyancy" => self.forces.buoyancy_enabled = parse(key, raw)?,

            "shooter.arc_min_deg" => self.shooter.arc_min = p(key)?.to_radians(),
            "shooter.arc_max_deg" => self.shooter.arc_max = p(key)?.to_radians(),
            "shooter.distance_min" => self.shooter.distance_min = p(key)?,
            "shooter.distance_max" => self.shooter.distance_max = p(key)?,
            "shooter.release_height_mean" => self.shooter.release_height_mean = p(key)?,
            "shooter.release_height_sigma" => self.shooter.release_height_sigma = p(key)?,
            "shooter.speed_sigma" => self.shooter.speed_sigma = p(key)?,
            "shooter.elevation_mean_deg" => self.shooter.elevation_mean = p(key)?.to_radians(),
            "shooter.elevation_sigma_deg" => self.shooter.elevation_sigma = p(key)?.to_radians(),
            "shooter.aim_sigma" => self.shooter.aim_sigma = p(key)?,
            "shooter.backspin_mean" => self.shooter.backspin_mean = p(key)?,
            "shooter.backspin_sigma" => self.shooter.backspin_sigma = p(key)?,
            "shooter.track_sigma" => self.shooter.track_sigma = p(key)?,
            "shooter.right_fraction" => self.shooter.right_fraction = p(key)?,
            "shooter.clock_start_min" => self.shooter.clock_start_min = p(key)?,
            "shooter.clock_start_max" => self.shooter.clock_start_max = p(key)?,

            "data.window_len" => self.data.window_len = parse(key, raw)?,
            "data.train_ratio" => self.data.train_ratio = p(key)?,
            "data.slice_mode" => self.data.slice_mode = raw.parse().map_err(Error::Config)?,
            "data.distances" => self.data.distances = parse_list(key, raw)?,
            "data.train_fraction" => self.data.train_fraction = p(key)?,

            "enet.alpha" => self.enet.params.alpha = p(key)?,
            "enet.lambda" => self.enet.params.lambda = p(key)?,
            "enet.max_sweeps" => self.enet.params.max_sweeps = parse(key, raw)?,
            "enet.tol" => self.enet.params.tol = p(key)?,
            "enet.standardize" => self.enet.params.standardize = parse(key, raw)?,
            "enet.select_lambda" => self.enet.select_lambda = parse(key, raw)?,
            "enet.lambda_grid" => self.enet.lambda_grid = parse_list(key, raw)?,
            "enet.cv_folds" => self.enet.cv_folds = parse(key, raw)?,

            "gbm.n_trees" => self.gbm.n_trees = parse(key, raw)?,
            "gbm.max_depth" => self.gbm.max_depth = parse(key, raw)?,
            "gbm.learning_rate" => self.gbm.learning_rate = p(key)?,
            "gbm.min_leaf" => self.gbm.min_leaf = parse(key, raw)?,

            "rnn.learning_rate" => self.rnn.learning_rate = p(key)?,
            "rnn.dropout_rate" => self.rnn.dropout_rate = p(key)?,
            "rnn.dropout_as_keep" => self.rnn.dropout_as_keep = parse(key, raw)?,
            "rnn.batch_size" => self.rnn.batch_size = parse(key, raw)?,
            "rnn.beta1" => self.rnn.beta1 = p(key)?,
            "rnn.beta2" => self.rnn.beta2 = p(key)?,
            "rnn.epsilon" => self.rnn.epsilon = p(key)?,
            "rnn.mdn_loss_weight" => self.rnn.mdn_loss_weight = p(key)?,
            "rnn.class_all_steps" => self.rnn.class_all_steps = parse(key, raw)?,
            "rnn.epochs" => self.rnn.epochs = parse(key, raw)?,
            "rnn.hidden" => self.rnn.hidden = parse(key, raw)?,
            "rnn.layers" => self.rnn.layers = parse(key, raw)?,
            "rnn.clip_norm" => self.rnn.clip_norm = p(key)?,
            "rnn.init_scale" => self.rnn.init_scale = p(key)?,
            "rnn.forget_bias" => self.rnn.forget_bias = p(key)?,
            "rnn.single_precision" => self.rnn.single_precision = parse(key, raw)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let (g, f, s, d, e, b, r) =
            (&self.geometry, &self.forces, &self.shooter, &self.data, &self.enet, &self.gbm, &self.rnn);
        vec![
            ("run.seed", show(self.seed)),
            ("sim.shots", show(self.sim_shots)),
            ("sim.seed", show(self.sim_seed)),
            ("geometry.court_length", show(g.court_length)),
            ("geometry.court_width", show(g.court_width)),
            ("geometry.rim_height", show(g.rim_height)),
            ("geometry.rim_radius", show(g.rim_radius)),
            ("geometry.rim_center_x_left", show(g.rim_center_x_left)),
            ("geometry.rim_center_y", show(g.rim_center_y)),
            ("forces.gravity", show(f.gravity)),
            ("forces.drag_coeff", show(f.drag_coeff)),
            ("forces.air_density", show(f.air_density)),
            ("forces.ball_mass", show(f.ball_mass)),
            ("forces.ball_radius", show(f.ball_radius)),
            ("forces.magnus_coeff", show(f.magnus_coeff)),
            ("forces.buoyancy", show(f.buoyancy_enabled)),
            ("shooter.arc_min_deg", deg(s.arc_min)),
            ("shooter.arc_max_deg", deg(s.arc_max)),
            ("shooter.distance_min", show(s.distance_min)),
            ("shooter.distance_max", show(s.distance_max)),
            ("shooter.release_height_mean", show(s.release_height_mean)),
            ("shooter.release_height_sigma", show(s.release_height_sigma)),
            ("shooter.speed_sigma", show(s.speed_sigma)),
            ("shooter.elevation_mean_deg", deg(s.elevation_mean)),
            ("shooter.elevation_sigma_deg", deg(s.elevation_sigma)),
            ("shooter.aim_sigma", show(s.aim_sigma)),
            ("shooter.backspin_mean", show(s.backspin_mean)),
            ("shooter.backspin_sigma", show(s.backspin_sigma)),
            ("shooter.track_sigma", show(s.track_sigma)),
            ("shooter.right_fraction", show(s.right_fraction)),
            ("shooter.clock_start_min", show(s.clock_start_min)),
            ("shooter.clock_start_max", show(s.clock_start_max)),
            ("data.window_len", show(d.window_len)),
            ("data.train_ratio", show(d.train_ratio)),
            ("data.slice_mode", show(d.slice_mode)),
            ("data.distances", list(&d.distances)),
            ("data.train_fraction", show(d.train_fraction)),
            ("enet.alpha", show(e.params.alpha)),
            ("enet.lambda", show(e.params.lambda)),
            ("enet.max_sweeps", show(e.params.max_sweeps)),
            ("enet.tol", show(e.params.tol)),
            ("enet.standardize", show(e.params.standardize)),
            ("enet.select_lambda", show(e.select_lambda)),
            ("enet.lambda_grid", list(&e.lambda_grid)),
            ("enet.cv_folds", show(e.cv_folds)),
            ("gbm.n_trees", show(b.n_trees)),
            ("gbm.max_depth", show(b.max_depth)),
            ("gbm.learning_rate", show(b.learning_rate)),
            ("gbm.min_leaf", show(b.min_leaf)),
            ("rnn.learning_rate", show(r.learning_rate)),
            ("rnn.dropout_rate", show(r.dropout_rate)),
            ("rnn.dropout_as_keep", show(r.dropout_as_keep)),
            ("rnn.batch_size", show(r.batch_size)),
            ("rnn.beta1", show(r.beta1)),
            ("rnn.beta2", show(r.beta2)),
            ("rnn.epsilon", show(r.epsilon)),
            ("rnn.mdn_loss_weight", show(r.mdn_loss_weight)),
            ("rnn.class_all_steps", show(r.class_all_steps)),
            ("rnn.epochs", show(r.epochs)),
            ("rnn.hidden", show(r.hidden)),
            ("rnn.layers", show(r.layers)),
            ("rnn.clip_norm", show(r.clip_norm)),
            ("rnn.init_scale", show(r.init_scale)),
            ("rnn.forget_bias", show(r.forget_bias)),
            ("rnn.single_precision", show(r.single_precision)),
        ]
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_str(text)?;
        Ok(cfg)
    }

    /// Applies assignments from config text on top of the current values.
    pub fn apply_str(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k.trim(), v).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        self.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse_str(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Canonical text: one `key = value` line per key.
    pub fn render(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.render().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.forces.validate()?;
        self.shooter.validate()?;
        self.rnn.validate()?;
        let bad = |m: &str| Err(Error::Config(m.into()));
        let d = &self.data;
        if d.window_len < 2 {
            return bad("data.window_len must be >= 2");
        }
        if !(d.train_ratio > 0.0 && d.train_ratio < 1.0) {
            return bad("data.train_ratio must lie in (0, 1)");
        }
        if !(d.train_fraction > 0.0 && d.train_fraction <= 1.0) {
            return bad("data.train_fraction must lie in (0, 1]");
        }
        if d.distances.is_empty() || d.distances.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return bad("data.distances must be positive");
        }
        let e = &self.enet;
        if !(0.0..=1.0).contains(&e.params.alpha) || e.params.lambda < 0.0 || e.params.tol <= 0.0 {
            return bad("enet.alpha must lie in [0, 1], lambda >= 0, tol > 0");
        }
        if e.select_lambda && (e.cv_folds < 2 || e.lambda_grid.is_empty() || e.lambda_grid.iter().any(|&l| l < 0.0)) {
            return bad("enet cross-validation needs >= 2 folds and a non-negative grid");
        }
        let b = &self.gbm;
        if b.n_trees == 0 || b.max_depth == 0 || b.min_leaf == 0 || !(b.learning_rate > 0.0) {
            return bad("gbm.n_trees, max_depth, min_leaf and learning_rate must be positive");
        }
        if self.sim_shots == 0 {
            return bad("sim.shots must be >= 1");
        }
        Ok(())
    }
}
