//! Tracking CSV ingest, three-point extraction, labels, split, centering and
//! fixed-length sequence windows.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{derive_features, FeatureRow};
use crate::geometry::{horizontal_distance, rim_center, CourtGeometry, Point3, Side};
use crate::scalar::Scalar;

/// Nominal SportVU sample period (25 Hz).
pub const FRAME_PERIOD: f64 = 0.04;
pub const DEFAULT_WINDOW_LEN: usize = 12;
/// Channels fed to the sequence model: x, y, z, game clock.
pub const CHANNELS: usize = 4;

pub const TRACKING_HEADER: &str = "shot_id,frame_idx,game_clock,x_ft,y_ft,z_ft";
pub const LABELS_HEADER: &str = "shot_id,label";
pub const WINDOWS_HEADER: &str = "shot_id,step,cx,cy,cz,cclock,end_distance,label";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Made,
    Missed,
    Unlabeled,
}

impl Label {
    pub fn is_made(self) -> bool {
        self == Label::Made
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Made => "made",
            Label::Missed => "missed",
            Label::Unlabeled => "unlabeled",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "made" => Ok(Label::Made),
            "missed" => Ok(Label::Missed),
            "unlabeled" => Ok(Label::Unlabeled),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<T> {
    /// Game clock in seconds; counts down.
    pub clock: T,
    pub pos: Point3<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub shot_id: String,
    pub samples: Vec<Sample<T>>,
    pub label: Label,
}

impl<T: Scalar> Trajectory<T> {
    /// Checks the ingest invariants: nonempty, strictly decreasing clock and
    /// every position inside the court box inflated by 5 ft (z in [0, 50]).
    pub fn check(&self, geom: &CourtGeometry<T>) -> Result<()> {
        let bad = |msg: String| Error::InvalidTrajectory { shot_id: self.shot_id.clone(), msg };
        if self.samples.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let margin = T::lit(5.0);
        for (i, s) in self.samples.iter().enumerate() {
            let p = s.pos;
            if !p.is_finite() || !s.clock.is_finite() {
                return Err(bad(format!("non-finite sample {i}")));
            }
            if p.x < -margin
                || p.x > geom.court_length + margin
                || p.y < -margin
                || p.y > geom.court_width + margin
                || p.z < T::zero()
                || p.z > T::lit(50.0)
            {
                return Err(bad(format!("sample {i} outside the court box")));
            }
            if i > 0 && s.clock >= self.samples[i - 1].clock {
                return Err(bad(format!("game clock not decreasing at sample {i}")));
            }
        }
        Ok(())
    }

    pub fn max_height(&self) -> T {
        self.samples.iter().map(|s| s.pos.z).fold(T::neg_infinity(), T::max)
    }

    /// Index of the first sample at maximum height.
    pub fn apex_index(&self) -> usize {
        let mut best = 0;
        for (i, s) in self.samples.iter().enumerate() {
            if s.pos.z > self.samples[best].pos.z {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceWindow<T> {
    pub shot_id: String,
    /// `(x, y, z, clock)` per step, raw or centered.
    pub steps: Vec<[T; CHANNELS]>,
    /// Realized rim distance at the final step.
    pub end_distance: T,
    /// Frame index of the final step in the source trajectory.
    pub end_frame: usize,
    pub label: Label,
}

impl<T: Scalar> SequenceWindow<T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenteringStats<T> {
    pub means: [T; CHANNELS],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndex {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
}

/// How the end frame of a window is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceMode {
    /// First post-apex frame within `target` ft (horizontally) of the rim.
    Distance,
    /// First post-apex frame at or below `target` ft above the rim.
    Height,
}

impl fmt::Display for SliceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SliceMode::Distance => "distance",
            SliceMode::Height => "height",
        })
    }
}

impl FromStr for SliceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "distance" => Ok(SliceMode::Distance),
            "height" => Ok(SliceMode::Height),
            other => Err(format!("unknown slice mode {other:?}")),
        }
    }
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(r)
}

fn schema(line: u64, msg: impl Into<String>) -> Error {
    Error::Schema { line, msg: msg.into() }
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &str) -> Result<()> {
    let header = rdr.headers().map_err(|e| schema(1, e.to_string()))?;
    let got: Vec<&str> = header.iter().collect();
    if got.join(",") != expected {
        return Err(schema(1, format!("expected header `{expected}`")));
    }
    Ok(())
}

fn parse_field<V: FromStr>(rec: &csv::StringRecord, idx: usize, line: u64, what: &str) -> Result<V> {
    rec.get(idx).and_then(|s| s.parse().ok()).ok_or_else(|| schema(line, format!("unparseable {what}")))
}

pub fn parse_tracking_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<Vec<Trajectory<T>>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_tracking(std::io::BufReader::new(f))
}

/// One trajectory per distinct `shot_id`, in order of first appearance.
pub fn parse_tracking<T: Scalar, R: Read>(reader: R) -> Result<Vec<Trajectory<T>>> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, TRACKING_HEADER)?;
    let mut order: Vec<String> = Vec::new();
    let mut shots: HashMap<String, (Option<u64>, Vec<Sample<T>>)> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| schema(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 6 {
            return Err(schema(line, format!("expected 6 columns, got {}", rec.len())));
        }
        let id = rec[0].to_string();
        let frame: u64 = parse_field(&rec, 1, line, "frame_idx")?;
        let mut vals = [0.0f64; 4];
        for (k, v) in vals.iter_mut().enumerate() {
            *v = parse_field(&rec, k + 2, line, "number")?;
            if !v.is_finite() {
                return Err(schema(line, "non-finite number"));
            }
        }
        let entry = shots.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            (None, Vec::new())
        });
        if entry.0.is_some_and(|prev| frame <= prev) {
            return Err(Error::Order(id));
        }
        entry.0 = Some(frame);
        entry.1.push(Sample {
            clock: T::lit(vals[0]),
            pos: Point3::new(T::lit(vals[1]), T::lit(vals[2]), T::lit(vals[3])),
        });
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let (_, samples) = shots.remove(&id).expect("id recorded");
            Trajectory { shot_id: id, samples, label: Label::Unlabeled }
        })
        .collect())
}

pub fn write_tracking<T: Scalar, W: Write>(trajs: &[Trajectory<T>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{TRACKING_HEADER}")?;
    for t in trajs {
        for (i, s) in t.samples.iter().enumerate() {
            writeln!(
                w,
                "{},{},{:.6},{:.6},{:.6},{:.6}",
                t.shot_id,
                i,
                s.clock.as_f64(),
                s.pos.x.as_f64(),
                s.pos.y.as_f64(),
                s.pos.z.as_f64()
            )?;
        }
    }
    Ok(())
}

pub fn write_labels<T: Scalar, W: Write>(trajs: &[Trajectory<T>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{LABELS_HEADER}")?;
    for t in trajs.iter().filter(|t| t.label != Label::Unlabeled) {
        writeln!(w, "{},{}", t.shot_id, t.label)?;
    }
    Ok(())
}

pub fn parse_labels_csv(path: impl AsRef<Path>) -> Result<HashMap<String, Label>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_labels(std::io::BufReader::new(f))
}

pub fn parse_labels<R: Read>(reader: R) -> Result<HashMap<String, Label>> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, LABELS_HEADER)?;
    let mut out = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| schema(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(schema(line, format!("expected 2 columns, got {}", rec.len())));
        }
        let label = match &rec[1] {
            "made" => Label::Made,
            "missed" => Label::Missed,
            other => return Err(schema(line, format!("label must be made|missed, got {other:?}"))),
        };
        if let Some(prev) = out.insert(rec[0].to_string(), label) {
            if prev != label {
                return Err(Error::DuplicateLabel(rec[0].to_string()));
            }
        }
    }
    Ok(out)
}

/// Keeps shots that rise to at least 8 ft and start at least 22 ft from the
/// (left) rim. Input must already be canonicalized.
pub fn extract_three_point_candidates<T: Scalar>(
    trajs: Vec<Trajectory<T>>,
    geom: &CourtGeometry<T>,
) -> Vec<Trajectory<T>> {
    let rim = rim_center(geom, Side::Left);
    let min_height = T::lit(8.0);
    let min_range = T::lit(22.0);
    trajs
        .into_iter()
        .filter(|t| {
            let far = t.samples.iter().map(|s| horizontal_distance(&s.pos, &rim)).fold(T::zero(), T::max);
            t.max_height() >= min_height && far >= min_range
        })
        .collect()
}

/// Inner join of trajectories with outcome labels.
pub fn join_labels<T: Scalar>(trajs: Vec<Trajectory<T>>, labels: &HashMap<String, Label>) -> Vec<Trajectory<T>> {
    trajs
        .into_iter()
        .filter_map(|mut t| {
            let label = *labels.get(&t.shot_id)?;
            t.label = label;
            Some(t)
        })
        .collect()
}

/// Seeded shuffle of the sorted shot ids; the first `ceil(ratio * n)` train.
pub fn split_train_test<T>(trajs: &[Trajectory<T>], ratio: f64, seed: u64) -> Result<SplitIndex> {
    if trajs.len() < 2 {
        return Err(Error::TooFewShots(trajs.len()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let mut ids: Vec<String> = trajs.iter().map(|t| t.shot_id.clone()).collect();
    ids.sort();
    ids.dedup();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_train = ((ratio * ids.len() as f64) - 1e-9).ceil() as usize;
    let test_ids = ids.split_off(n_train.min(ids.len()));
    Ok(SplitIndex { train_ids: ids, test_ids, seed })
}

pub fn fit_centering<T: Scalar>(train: &[SequenceWindow<T>]) -> Result<CenteringStats<T>> {
    let mut sums = [T::zero(); CHANNELS];
    let mut count = 0usize;
    for w in train {
        for step in &w.steps {
            for (s, &v) in sums.iter_mut().zip(step) {
                *s += v;
            }
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyInput("training windows"));
    }
    let n = T::from_usize_lossy(count);
    Ok(CenteringStats { means: sums.map(|s| s / n) })
}

pub fn apply_centering<T: Scalar>(windows: &mut [SequenceWindow<T>], stats: &CenteringStats<T>) {
    for w in windows {
        for step in &mut w.steps {
            for (v, m) in step.iter_mut().zip(stats.means) {
                *v -= m;
            }
        }
    }
}

/// End frame of the slice: first post-apex frame satisfying the target rule.
pub fn slice_end_frame<T: Scalar>(
    traj: &Trajectory<T>,
    target: T,
    geom: &CourtGeometry<T>,
    mode: SliceMode,
) -> Option<usize> {
    let rim = rim_center(geom, Side::Left);
    let apex = traj.apex_index();
    traj.samples.iter().enumerate().skip(apex).find_map(|(i, s)| {
        let hit = match mode {
            SliceMode::Distance => horizontal_distance(&s.pos, &rim) <= target,
            SliceMode::Height => s.pos.z <= geom.rim_height + target,
        };
        hit.then_some(i)
    })
}

/// The `len` raw samples ending at the first post-apex frame within
/// `target_distance` of the rim, or `None` when ineligible.
pub fn window_at_distance<T: Scalar>(
    traj: &Trajectory<T>,
    target_distance: T,
    len: usize,
    geom: &CourtGeometry<T>,
) -> Option<SequenceWindow<T>> {
    window_at(traj, target_distance, len, geom, SliceMode::Distance)
}

pub fn window_at<T: Scalar>(
    traj: &Trajectory<T>,
    target: T,
    len: usize,
    geom: &CourtGeometry<T>,
    mode: SliceMode,
) -> Option<SequenceWindow<T>> {
    if len == 0 {
        return None;
    }
    let end = slice_end_frame(traj, target, geom, mode)?;
    if end + 1 < len {
        return None;
    }
    let rim = rim_center(geom, Side::Left);
    let steps = traj.samples[end + 1 - len..=end].iter().map(|s| [s.pos.x, s.pos.y, s.pos.z, s.clock]).collect();
    Some(SequenceWindow {
        shot_id: traj.shot_id.clone(),
        steps,
        end_distance: horizontal_distance(&traj.samples[end].pos, &rim),
        end_frame: end,
        label: traj.label,
    })
}

/// Full feature row at the end frame of the shot's slice.
pub fn last_point_features<T: Scalar>(
    traj: &Trajectory<T>,
    target: T,
    geom: &CourtGeometry<T>,
    mode: SliceMode,
) -> Result<FeatureRow<T>> {
    let end = slice_end_frame(traj, target, geom, mode)
        .filter(|&k| k >= 1)
        .ok_or_else(|| Error::IneligibleShot(traj.shot_id.clone()))?;
    derive_features(&traj.samples[end - 1].pos, &traj.samples[end].pos, geom)
}

pub fn write_windows<T: Scalar, W: Write>(windows: &[SequenceWindow<T>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{WINDOWS_HEADER}")?;
    for win in windows {
        for (i, s) in win.steps.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                win.shot_id,
                i,
                s[0].as_f64(),
                s[1].as_f64(),
                s[2].as_f64(),
                s[3].as_f64(),
                win.end_distance.as_f64(),
                win.label
            )?;
        }
    }
    Ok(())
}

/// Groups trajectories by id for split lookups.
pub fn by_id<T>(trajs: &[Trajectory<T>]) -> BTreeMap<&str, &Trajectory<T>> {
    trajs.iter().map(|t| (t.shot_id.as_str(), t)).collect()
}
