//! End-to-end plumbing shared by the CLI and the acceptance suite:
//! simulate or ingest raw CSVs, prepare a split, train per-distance models
//! and evaluate them on the test split.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::baselines::{
    fit_enet_traced, fit_gbm_traced, predict_enet, predict_gbm, select_lambda_cv, EnetModel, GbmModel,
};
use crate::checkpoint::{fmt_num, CheckpointFile, Section};
use crate::config::RunConfig;
use crate::dataset::{
    apply_centering, by_id, extract_three_point_candidates, fit_centering, join_labels, parse_labels_csv,
    parse_tracking_csv, split_train_test, window_at, write_labels, write_tracking, write_windows, Label,
    SequenceWindow, SliceMode, SplitIndex, Trajectory,
};
use crate::error::{Error, Result};
use crate::features::{feature_matrix, FeatureMode};
use crate::geometry::mirror_to_canonical;
use crate::metrics::{distance_sweep, EvalReport, SliceScorer};
use crate::seqnet::{render_train_log, train_seqnet, SeqNetModel};
use crate::simulator::{sample_dataset, SampleStats};

pub const TRACKING_FILE: &str = "tracking.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const SPLIT_FILE: &str = "split.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    io(path, fs::write(path, bytes))
}

fn short_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn render_tracks(trajs: &[Trajectory<f64>]) -> (Vec<u8>, Vec<u8>) {
    let mut tracking = Vec::new();
    let mut labels = Vec::new();
    write_tracking(trajs, &mut tracking).expect("in-memory write");
    write_labels(trajs, &mut labels).expect("in-memory write");
    (tracking, labels)
}

fn render_manifest(entries: &[(&str, String)]) -> String {
    entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

pub fn read_manifest(dir: &Path) -> Result<HashMap<String, String>> {
    let path = dir.join(MANIFEST_FILE);
    let text = io(&path, fs::read_to_string(&path))?;
    Ok(text.lines().filter_map(|l| l.split_once(" = ")).map(|(k, v)| (k.to_string(), v.to_string())).collect())
}

/// Simulated shots for the configured shooter, forces and court.
pub fn simulate(cfg: &RunConfig) -> Result<(Vec<Trajectory<f64>>, SampleStats)> {
    sample_dataset(&cfg.shooter, cfg.sim_shots, cfg.sim_seed, &cfg.geometry, &cfg.forces)
}

/// Writes tracking and label CSVs plus a manifest into `dir`.
pub fn write_raw(dir: &Path, trajs: &[Trajectory<f64>], cfg: &RunConfig, extra: &[(&str, String)]) -> Result<()> {
    io(dir, fs::create_dir_all(dir))?;
    let (tracking, labels) = render_tracks(trajs);
    write_file(&dir.join(TRACKING_FILE), &tracking)?;
    write_file(&dir.join(LABELS_FILE), &labels)?;
    let mut manifest = vec![
        ("kind", "raw".to_string()),
        ("shots", trajs.len().to_string()),
        ("config_hash", cfg.hash()),
        ("dataset_id", short_hash(&[tracking, labels].concat())),
    ];
    manifest.extend(extra.iter().map(|(k, v)| (*k, v.clone())));
    write_file(&dir.join(MANIFEST_FILE), render_manifest(&manifest).as_bytes())
}

pub fn read_raw(dir: &Path) -> Result<(Vec<Trajectory<f64>>, HashMap<String, Label>)> {
    Ok((parse_tracking_csv(dir.join(TRACKING_FILE))?, parse_labels_csv(dir.join(LABELS_FILE))?))
}

/// Labeled, canonicalized three-point candidates and their train/test split.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub tracks: Vec<Trajectory<f64>>,
    pub split: SplitIndex,
    pub dataset_id: String,
}

impl Prepared {
    fn pick(&self, ids: &[String]) -> Vec<&Trajectory<f64>> {
        let index = by_id(&self.tracks);
        ids.iter().filter_map(|id| index.get(id.as_str()).copied()).collect()
    }

    /// The first `ceil(fraction * n)` ids of the shuffled training list.
    pub fn train(&self, fraction: f64) -> Vec<&Trajectory<f64>> {
        let n = self.split.train_ids.len();
        let keep = ((fraction * n as f64) - 1e-9).ceil().clamp(0.0, n as f64) as usize;
        self.pick(&self.split.train_ids[..keep])
    }

    pub fn test(&self) -> Vec<&Trajectory<f64>> {
        self.pick(&self.split.test_ids)
    }
}

/// Canonicalize, validate, filter to three-point candidates, join labels
/// and split.
pub fn prepare(tracks: Vec<Trajectory<f64>>, labels: &HashMap<String, Label>, cfg: &RunConfig) -> Result<Prepared> {
    let geom = &cfg.geometry;
    let mut canonical = Vec::with_capacity(tracks.len());
    for t in &tracks {
        let c = mirror_to_canonical(t, geom)?;
        c.check(geom)?;
        canonical.push(c);
    }
    let candidates = extract_three_point_candidates(canonical, geom);
    let mut joined = join_labels(candidates, labels);
    joined.sort_by(|a, b| a.shot_id.cmp(&b.shot_id));
    let split = split_train_test(&joined, cfg.data.train_ratio, cfg.seed)?;
    let (tracking, label_bytes) = render_tracks(&joined);
    let dataset_id = short_hash(&[tracking, label_bytes, render_split(&split).into_bytes()].concat());
    Ok(Prepared { tracks: joined, split, dataset_id })
}

fn render_split(split: &SplitIndex) -> String {
    let mut s = String::from("shot_id,split\n");
    for id in &split.train_ids {
        s.push_str(&format!("{id},train\n"));
    }
    for id in &split.test_ids {
        s.push_str(&format!("{id},test\n"));
    }
    s
}

/// Writes the prepared set plus per-distance window exports centered with
/// training statistics.
pub fn write_prepared(dir: &Path, prepared: &Prepared, cfg: &RunConfig) -> Result<()> {
    io(dir, fs::create_dir_all(dir))?;
    let (tracking, labels) = render_tracks(&prepared.tracks);
    write_file(&dir.join(TRACKING_FILE), &tracking)?;
    write_file(&dir.join(LABELS_FILE), &labels)?;
    write_file(&dir.join(SPLIT_FILE), render_split(&prepared.split).as_bytes())?;
    for &d in &cfg.data.distances {
        let train = windows_for(&prepared.train(1.0), d, cfg);
        let mut all = windows_for(&prepared.test(), d, cfg);
        if train.is_empty() {
            continue;
        }
        let stats = fit_centering(&train)?;
        all.splice(0..0, train);
        apply_centering(&mut all, &stats);
        let mut out = Vec::new();
        write_windows(&all, &mut out).expect("in-memory write");
        write_file(&dir.join(format!("windows_{}ft.csv", d)), &out)?;
    }
    let made = prepared.tracks.iter().filter(|t| t.label == Label::Made).count();
    let manifest = [
        ("kind", "prepared".to_string()),
        ("shots", prepared.tracks.len().to_string()),
        ("made", made.to_string()),
        ("train", prepared.split.train_ids.len().to_string()),
        ("test", prepared.split.test_ids.len().to_string()),
        ("split_seed", prepared.split.seed.to_string()),
        ("config_hash", cfg.hash()),
        ("dataset_id", prepared.dataset_id.clone()),
    ];
    write_file(&dir.join(MANIFEST_FILE), render_manifest(&manifest).as_bytes())
}

pub fn load_prepared(dir: &Path) -> Result<Prepared> {
    let (tracks, labels) = read_raw(dir)?;
    let tracks = join_labels(tracks, &labels);
    let path = dir.join(SPLIT_FILE);
    let text = io(&path, fs::read_to_string(&path))?;
    let mut lines = text.lines();
    if lines.next() != Some("shot_id,split") {
        return Err(Error::Schema { line: 1, msg: "expected header `shot_id,split`".into() });
    }
    let manifest = read_manifest(dir)?;
    let seed = manifest.get("split_seed").and_then(|s| s.parse().ok()).unwrap_or_default();
    let mut split = SplitIndex { train_ids: Vec::new(), test_ids: Vec::new(), seed };
    for (i, line) in lines.enumerate() {
        match line.split_once(',') {
            Some((id, "train")) => split.train_ids.push(id.to_string()),
            Some((id, "test")) => split.test_ids.push(id.to_string()),
            _ => return Err(Error::Schema { line: i as u64 + 2, msg: format!("bad split row {line:?}") }),
        }
    }
    let dataset_id = manifest.get("dataset_id").cloned().unwrap_or_default();
    Ok(Prepared { tracks, split, dataset_id })
}

/// Raw windows of the configured length at one slice target.
pub fn windows_for(tracks: &[&Trajectory<f64>], target: f64, cfg: &RunConfig) -> Vec<SequenceWindow<f64>> {
    tracks
        .iter()
        .filter_map(|t| window_at(t, target, cfg.data.window_len, &cfg.geometry, cfg.data.slice_mode))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Enet,
    Gbm,
    Rnn,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Enet => "enet",
            ModelKind::Gbm => "gbm",
            ModelKind::Rnn => "rnn",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "enet" => Ok(ModelKind::Enet),
            "gbm" => Ok(ModelKind::Gbm),
            "rnn" => Ok(ModelKind::Rnn),
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SliceModel {
    Enet(EnetModel<f64>),
    Gbm(GbmModel<f64>),
    Rnn(SeqNetModel<f64>),
}

/// One fitted model per slice target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub features: FeatureMode,
    pub slice_mode: SliceMode,
    pub window_len: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub config_hash: String,
    pub dataset_id: String,
    pub slices: Vec<(f64, SliceModel)>,
}

/// A training log for one slice, as CSV text.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceLog {
    pub distance: f64,
    pub csv: String,
}

fn slice_key(d: f64) -> String {
    format!("{d}")
}

impl TrainedModel {
    pub fn name(&self) -> String {
        self.kind.to_string()
    }

    pub fn to_checkpoint(&self) -> CheckpointFile {
        let distances: Vec<String> = self.slices.iter().map(|(d, _)| slice_key(*d)).collect();
        let mut sections = vec![Section::new("model")
            .with("kind", self.kind.to_string())
            .with("features", self.features.to_string())
            .with("slice_mode", self.slice_mode.to_string())
            .with("window_len", self.window_len.to_string())
            .with("seed", self.seed.to_string())
            .with("train_fraction", fmt_num(self.train_fraction))
            .with("config_hash", self.config_hash.clone())
            .with("dataset_id", self.dataset_id.clone())
            .with("distances", distances.join(","))];
        for (d, m) in &self.slices {
            let suffix = format!("@{}", slice_key(*d));
            let parts = match m {
                SliceModel::Enet(e) => vec![e.to_section()],
                SliceModel::Gbm(g) => vec![g.to_section()],
                SliceModel::Rnn(r) => r.to_sections(),
            };
            sections.extend(parts.into_iter().map(|mut s| {
                s.name.push_str(&suffix);
                s
            }));
        }
        CheckpointFile { sections }
    }

    pub fn from_checkpoint(file: &CheckpointFile) -> Result<Self> {
        let meta = file.section("model")?;
        let kind: ModelKind = meta.get("kind")?.parse().map_err(|e: Error| Error::Checkpoint(e.to_string()))?;
        let features: FeatureMode = meta.get("features")?.parse().map_err(Error::Checkpoint)?;
        let slice_mode: SliceMode = meta.get("slice_mode")?.parse().map_err(Error::Checkpoint)?;
        let mut slices = Vec::new();
        for key in meta.get("distances")?.split(',').filter(|s| !s.is_empty()) {
            let d: f64 = key.parse().map_err(|_| Error::Checkpoint(format!("bad distance {key:?}")))?;
            let sec = |name: &str| file.section(&format!("{name}@{key}"));
            let m = match kind {
                ModelKind::Enet => SliceModel::Enet(EnetModel::from_section(sec("enet")?)?),
                ModelKind::Gbm => SliceModel::Gbm(GbmModel::from_section(sec("gbm")?)?),
                ModelKind::Rnn => SliceModel::Rnn(SeqNetModel::from_sections(sec("seqnet")?, sec("tensors")?)?),
            };
            slices.push((d, m));
        }
        Ok(Self {
            kind,
            features,
            slice_mode,
            window_len: meta.parse("window_len")?,
            seed: meta.parse("seed")?,
            train_fraction: crate::checkpoint::parse_num(meta.get("train_fraction")?)?,
            config_hash: meta.get("config_hash")?.to_string(),
            dataset_id: meta.get("dataset_id")?.to_string(),
            slices,
        })
    }

    pub fn slice(&self, distance: f64) -> Option<&SliceModel> {
        self.slices.iter().find(|(d, _)| *d == distance).map(|(_, m)| m)
    }

    /// Make scores for raw windows at one slice target.
    pub fn score(&self, distance: f64, windows: &[SequenceWindow<f64>], cfg: &RunConfig) -> Result<Vec<f64>> {
        let model = self
            .slice(distance)
            .ok_or_else(|| Error::Config(format!("{} checkpoint has no model for {distance} ft", self.kind)))?;
        if windows.is_empty() {
            return Ok(Vec::new());
        }
        match model {
            SliceModel::Enet(m) => predict_enet(m, &feature_matrix(windows, &cfg.geometry, self.features)?.0),
            SliceModel::Gbm(m) => predict_gbm(m, &feature_matrix(windows, &cfg.geometry, self.features)?.0),
            SliceModel::Rnn(m) => windows.iter().map(|w| m.score(w)).collect(),
        }
    }
}

fn narrow_window(w: &SequenceWindow<f64>) -> SequenceWindow<f32> {
    SequenceWindow {
        shot_id: w.shot_id.clone(),
        steps: w.steps.iter().map(|s| s.map(|v| v as f32)).collect(),
        end_distance: w.end_distance as f32,
        end_frame: w.end_frame,
        label: w.label,
    }
}

fn log_csv<T: fmt::Display>(header: &str, rows: &[T]) -> String {
    let mut s = format!("{header}\n");
    for (i, v) in rows.iter().enumerate() {
        s.push_str(&format!("{i},{v}\n"));
    }
    s
}

/// Fits one model per configured distance on the (possibly subsampled)
/// training split.
pub fn train_model(
    prepared: &Prepared,
    cfg: &RunConfig,
    kind: ModelKind,
    features: FeatureMode,
) -> Result<(TrainedModel, Vec<SliceLog>)> {
    cfg.validate()?;
    if kind == ModelKind::Rnn && features != FeatureMode::PositionalOnly {
        return Err(Error::Config("the rnn model only takes positional (xyz) inputs".into()));
    }
    let train = prepared.train(cfg.data.train_fraction);
    let mut slices = Vec::new();
    let mut logs = Vec::new();
    for &d in &cfg.data.distances {
        let windows = windows_for(&train, d, cfg);
        if windows.is_empty() {
            return Err(Error::EmptyInput("training windows at a slice distance"));
        }
        let (model, csv) = match kind {
            ModelKind::Enet => {
                let (x, y) = feature_matrix(&windows, &cfg.geometry, features)?;
                let mut params = cfg.enet.params;
                if cfg.enet.select_lambda {
                    params.lambda =
                        select_lambda_cv(&x, &y, &params, &cfg.enet.lambda_grid, cfg.enet.cv_folds, cfg.seed)?;
                }
                let (m, trace) = fit_enet_traced(&x, &y, &params)?;
                (SliceModel::Enet(m), log_csv("sweep,objective", &trace))
            }
            ModelKind::Gbm => {
                let (x, y) = feature_matrix(&windows, &cfg.geometry, features)?;
                let (m, trace) = fit_gbm_traced(&x, &y, &cfg.gbm)?;
                (SliceModel::Gbm(m), log_csv("round,log_loss", &trace))
            }
            ModelKind::Rnn => {
                let stats = fit_centering(&windows)?;
                let mut centered = windows;
                apply_centering(&mut centered, &stats);
                let rnn_cfg = crate::seqnet::TrainConfig { seed: cfg.seed, ..cfg.rnn.clone() };
                let (params, log) = if rnn_cfg.single_precision {
                    let narrow: Vec<SequenceWindow<f32>> = centered.iter().map(narrow_window).collect();
                    let out = train_seqnet(&rnn_cfg, &narrow)?;
                    (out.params.cast::<f64>(), out.log)
                } else {
                    let out = train_seqnet(&rnn_cfg, &centered)?;
                    (out.params, out.log)
                };
                let model = SeqNetModel { params, config: rnn_cfg, window_len: cfg.data.window_len, centering: stats };
                (SliceModel::Rnn(model), render_train_log(&log))
            }
        };
        slices.push((d, model));
        logs.push(SliceLog { distance: d, csv });
    }
    let model = TrainedModel {
        kind,
        features,
        slice_mode: cfg.data.slice_mode,
        window_len: cfg.data.window_len,
        seed: cfg.seed,
        train_fraction: cfg.data.train_fraction,
        config_hash: cfg.hash(),
        dataset_id: prepared.dataset_id.clone(),
        slices,
    };
    Ok((model, logs))
}

struct Scored {
    name: String,
    features: String,
    slices: Vec<(f64, Vec<f64>, Vec<bool>)>,
}

impl SliceScorer for Scored {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn features(&self) -> String {
        self.features.clone()
    }

    fn score_slice(&self, distance: f64) -> Result<(Vec<f64>, Vec<bool>)> {
        self.slices
            .iter()
            .find(|(d, _, _)| *d == distance)
            .map(|(_, s, l)| (s.clone(), l.clone()))
            .ok_or_else(|| Error::Config(format!("no slice at {distance} ft")))
    }
}

/// AUC of every model at every configured distance on the test split.
pub fn evaluate(models: &[TrainedModel], prepared: &Prepared, cfg: &RunConfig) -> Result<EvalReport> {
    let test = prepared.test();
    let mut scored = Vec::with_capacity(models.len());
    for m in models {
        if m.window_len != cfg.data.window_len || m.slice_mode != cfg.data.slice_mode {
            return Err(Error::Config(format!(
                "{} checkpoint was trained with window_len {} and slice mode {}",
                m.kind, m.window_len, m.slice_mode
            )));
        }
        let mut slices = Vec::new();
        for &d in &cfg.data.distances {
            let windows = windows_for(&test, d, cfg);
            let labels = windows.iter().map(|w| w.label == Label::Made).collect();
            slices.push((d, m.score(d, &windows, cfg)?, labels));
        }
        scored.push(Scored { name: m.name(), features: m.features.to_string(), slices });
    }
    let refs: Vec<&dyn SliceScorer> = scored.iter().map(|s| s as &dyn SliceScorer).collect();
    let mut report = distance_sweep(&refs, &cfg.data.distances)?;
    report.seed = cfg.seed;
    report.dataset_id = prepared.dataset_id.clone();
    report.config_hash = cfg.hash();
    Ok(report)
}

/// Conventional checkpoint file name for a model.
pub fn checkpoint_name(kind: ModelKind, features: FeatureMode) -> String {
    format!("{kind}_{features}.ckpt")
}

/// Writes a trained model and its per-slice logs into `dir`.
pub fn write_model(dir: &Path, model: &TrainedModel, logs: &[SliceLog]) -> Result<PathBuf> {
    io(dir, fs::create_dir_all(dir))?;
    let path = dir.join(checkpoint_name(model.kind, model.features));
    model.to_checkpoint().write(&path)?;
    for l in logs {
        let log_path = dir.join(format!("{}_{}_{}ft.log.csv", model.kind, model.features, slice_key(l.distance)));
        write_file(&log_path, l.csv.as_bytes())?;
    }
    Ok(path)
}

pub fn read_model(path: &Path) -> Result<TrainedModel> {
    TrainedModel::from_checkpoint(&CheckpointFile::read(path)?)
}
