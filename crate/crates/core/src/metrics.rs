//! ROC AUC and rim-distance sweep reports.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const REPORT_HEADER: &str = "model,features,distance_ft,auc,n_eval";

/// AUC as an exact fraction `U / (n_pos · n_neg)`, where tied
/// positive/negative pairs count one half. One sort, midranks for ties.
pub fn roc_auc_exact<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<Ratio<u64>> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), got: scores.len() });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFiniteFeature(0));
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClassInput);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("NaN rejected above"));
    // Twice the positive rank sum: a tie block spanning 1-based ranks a..=b
    // gives each member midrank (a + b) / 2.
    let mut twice_rank_sum = 0u64;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let pos_in_block = order[start..end].iter().filter(|&&i| labels[i]).count() as u64;
        twice_rank_sum += pos_in_block * (start as u64 + 1 + end as u64);
        start = end;
    }
    let twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    Ok(Ratio::new(twice_u, 2 * n_pos * n_neg))
}

pub fn roc_auc<T: Scalar>(scores: &[T], labels: &[bool]) -> Result<T> {
    let r = roc_auc_exact(scores, labels)?;
    Ok(T::lit(*r.numer() as f64) / T::lit(*r.denom() as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub features: String,
    pub distance_ft: f64,
    pub auc: f64,
    pub n_eval: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
    pub seed: u64,
    pub dataset_id: String,
    pub config_hash: String,
    /// `(model, features, distance)` slices with a single class present.
    pub unavailable: Vec<(String, String, f64)>,
}

/// Something that scores a batch of evaluation items.
pub trait SliceScorer {
    fn name(&self) -> String;
    fn features(&self) -> String;
    /// Scores and labels for the test-split items at this distance.
    fn score_slice(&self, distance: f64) -> Result<(Vec<f64>, Vec<bool>)>;
}

/// One AUC per (model, distance). Single-class slices are recorded as
/// unavailable rather than dropped silently.
pub fn distance_sweep(models: &[&dyn SliceScorer], distances: &[f64]) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    for m in models {
        for &d in distances {
            let (scores, labels) = m.score_slice(d)?;
            match roc_auc(&scores, &labels) {
                Ok(auc) => report.rows.push(ReportRow {
                    model: m.name(),
                    features: m.features(),
                    distance_ft: d,
                    auc,
                    n_eval: scores.len(),
                }),
                Err(Error::SingleClassInput) => report.unavailable.push((m.name(), m.features(), d)),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl EvalReport {
    pub fn sorted(&self) -> Vec<&ReportRow> {
        let mut rows: Vec<&ReportRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            (a.model.as_str(), a.features.as_str())
                .cmp(&(b.model.as_str(), b.features.as_str()))
                .then(a.distance_ft.total_cmp(&b.distance_ft))
        });
        rows
    }

    pub fn auc(&self, model: &str, features: &str, distance: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.model == model && r.features == features && r.distance_ft == distance)
            .map(|r| r.auc)
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        if self.rows.is_empty() {
            return Err(Error::EmptyInput("report"));
        }
        let mut s = String::new();
        match format {
            ReportFormat::Csv => {
                let _ = writeln!(s, "# seed={} dataset={} config={}", self.seed, self.dataset_id, self.config_hash);
                let _ = writeln!(s, "{REPORT_HEADER}");
                for r in &self.rows {
                    let _ = writeln!(s, "{},{},{},{},{}", r.model, r.features, r.distance_ft, r.auc, r.n_eval);
                }
            }
            ReportFormat::Markdown => {
                let _ = writeln!(s, "| Model | Features | Distance to basket | AUC | n |");
                let _ = writeln!(s, "|---|---|---|---|---|");
                for r in self.sorted() {
                    let _ = writeln!(
                        s,
                        "| {} | {} | {} feet | {:.3} | {} |",
                        r.model, r.features, r.distance_ft, r.auc, r.n_eval
                    );
                }
                for (m, f, d) in &self.unavailable {
                    let _ = writeln!(s, "| {m} | {f} | {d} feet | n/a | 0 |");
                }
                let _ = writeln!(s, "\nseed {} · dataset {} · config {}", self.seed, self.dataset_id, self.config_hash);
            }
        }
        Ok(s)
    }

    /// Plot data: `distance_ft,model,auc`.
    pub fn render_plot_csv(&self) -> String {
        let mut s = String::from("distance_ft,model,auc\n");
        for r in self.sorted() {
            let _ = writeln!(s, "{},{}-{},{}", r.distance_ft, r.model, r.features, r.auc);
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut report = EvalReport::default();
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, msg: &str| Error::Schema { line: line as u64 + 1, msg: msg.into() };
        let (_, meta) = lines.next().ok_or_else(|| bad(0, "empty report"))?;
        let meta = meta.strip_prefix("# ").ok_or_else(|| bad(0, "missing metadata line"))?;
        for kv in meta.split(' ') {
            match kv.split_once('=') {
                Some(("seed", v)) => report.seed = v.parse().map_err(|_| bad(0, "bad seed"))?,
                Some(("dataset", v)) => report.dataset_id = v.to_string(),
                Some(("config", v)) => report.config_hash = v.to_string(),
                _ => return Err(bad(0, "bad metadata")),
            }
        }
        match lines.next() {
            Some((_, h)) if h == REPORT_HEADER => {}
            _ => return Err(bad(1, "bad header")),
        }
        for (i, line) in lines {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(i, "expected 5 columns"));
            }
            report.rows.push(ReportRow {
                model: f[0].into(),
                features: f[1].into(),
                distance_ft: f[2].parse().map_err(|_| bad(i, "bad distance"))?,
                auc: f[3].parse().map_err(|_| bad(i, "bad auc"))?,
                n_eval: f[4].parse().map_err(|_| bad(i, "bad n_eval"))?,
            });
        }
        Ok(report)
    }

    pub fn emit(&self, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
        let path = path.as_ref();
        let text = self.render(format)?;
        std::fs::File::create(path).and_then(|mut f| f.write_all(text.as_bytes())).map_err(|e| Error::io(path, e))
    }
}
