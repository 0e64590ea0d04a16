//! Engineered per-point features for the static baselines.
//!
//! Differences are per frame (one 0.04 s sample period), not per second.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::dataset::{Label, SequenceWindow};
use crate::error::{Error, Result};
use crate::geometry::{approach_angle, horizontal_distance, rim_center, CourtGeometry, Point3, Side};
use crate::scalar::Scalar;

/// Column names in their frozen order. Bump [`FEATURE_FORMAT_VERSION`] if
/// this list ever changes.
pub const FEATURE_NAMES: [&str; 9] = ["x", "y", "z", "dx", "dy", "dz", "dist_rim", "d_dist_rim", "angle"];
pub const FEATURE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow<T> {
    pub x: T,
    pub y: T,
    pub z: T,
    pub dx: T,
    pub dy: T,
    pub dz: T,
    pub dist_rim: T,
    pub d_dist_rim: T,
    pub angle: T,
}

impl<T: Scalar> FeatureRow<T> {
    pub fn positional_only(&self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn to_array(&self) -> [T; 9] {
        [self.x, self.y, self.z, self.dx, self.dy, self.dz, self.dist_rim, self.d_dist_rim, self.angle]
    }

    pub fn project(&self, mode: FeatureMode) -> Vec<T> {
        match mode {
            FeatureMode::PositionalOnly => self.positional_only().to_vec(),
            FeatureMode::Full => self.to_array().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMode {
    PositionalOnly,
    Full,
}

impl FeatureMode {
    pub fn width(self) -> usize {
        match self {
            FeatureMode::PositionalOnly => 3,
            FeatureMode::Full => 9,
        }
    }

    pub fn names(self) -> &'static [&'static str] {
        &FEATURE_NAMES[..self.width()]
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::PositionalOnly => "xyz",
            FeatureMode::Full => "full",
        })
    }
}

impl FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "xyz" | "positional" => Ok(FeatureMode::PositionalOnly),
            "full" => Ok(FeatureMode::Full),
            other => Err(format!("unknown feature mode {other:?}")),
        }
    }
}

pub fn derive_features<T: Scalar>(
    prev: &Point3<T>,
    curr: &Point3<T>,
    geom: &CourtGeometry<T>,
) -> Result<FeatureRow<T>> {
    let rim = rim_center(geom, Side::Left);
    let dist_prev = horizontal_distance(prev, &rim);
    let dist_rim = horizontal_distance(curr, &rim);
    Ok(FeatureRow {
        x: curr.x,
        y: curr.y,
        z: curr.z,
        dx: curr.x - prev.x,
        dy: curr.y - prev.y,
        dz: curr.z - prev.z,
        dist_rim,
        d_dist_rim: dist_rim - dist_prev,
        angle: approach_angle(prev, curr, &rim)?,
    })
}

/// Dense row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn map_column(&mut self, j: usize, f: impl Fn(T) -> T) {
        for i in 0..self.rows {
            let v = &mut self.data[i * self.cols + j];
            *v = f(*v);
        }
    }
}

/// Features at the final step of each raw (uncentered) window, with the
/// penultimate step supplying the differences.
pub fn feature_matrix<T: Scalar>(
    windows: &[SequenceWindow<T>],
    geom: &CourtGeometry<T>,
    mode: FeatureMode,
) -> Result<(Matrix<T>, Vec<bool>)> {
    if windows.is_empty() {
        return Err(Error::EmptyInput("windows"));
    }
    let mut rows = Vec::with_capacity(windows.len());
    let mut labels = Vec::with_capacity(windows.len());
    for w in windows {
        let n = w.steps.len();
        if n < 2 {
            return Err(Error::ShapeMismatch("feature windows need at least 2 steps".into()));
        }
        let p = |s: &[T; 4]| Point3::new(s[0], s[1], s[2]);
        let row = derive_features(&p(&w.steps[n - 2]), &p(&w.steps[n - 1]), geom)?;
        rows.push(row.project(mode));
        labels.push(w.label == Label::Made);
    }
    Ok((Matrix::from_rows(&rows)?, labels))
}

pub fn write_feature_csv<T: Scalar, W: Write>(
    x: &Matrix<T>,
    labels: &[bool],
    mode: FeatureMode,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "# feature-format v{FEATURE_FORMAT_VERSION}")?;
    writeln!(w, "{},label", mode.names().join(","))?;
    for (i, &made) in labels.iter().enumerate() {
        let cells: Vec<String> = x.row(i).iter().map(|v| format!("{:.17e}", v.as_f64())).collect();
        writeln!(w, "{},{}", cells.join(","), u8::from(made))?;
    }
    Ok(())
}
