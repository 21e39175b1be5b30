//! Confusion counts, precision/recall/F1, threshold sweeps and the
//! validation split used when comparing models.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::preprocess::DiscreteDataset;

pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Predicts positive iff `prob >= threshold`.
pub fn confusion_at(probs: &[f64], labels: &[u8], threshold: f64) -> Result<Confusion> {
    if probs.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            actual: probs.len(),
        });
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside [0, 1]")));
    }
    let mut c = Confusion::default();
    for (i, (&p, &l)) in probs.iter().zip(labels).enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("probability {p} at index {i} outside [0, 1]")));
        }
        match (p >= threshold, l != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Precision, recall and F1, each 0 when its denominator is 0.
pub fn prf1(c: &Confusion) -> (f64, f64, f64) {
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    // Harmonic mean written over counts: 2PR/(P+R) = 2tp/(2tp+fp+fn).
    let f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
    (precision, recall, f1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRow {
    pub threshold: f64,
    pub counts: Confusion,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<ThresholdRow>,
    pub best: usize,
}

impl EvalReport {
    pub fn best_row(&self) -> &ThresholdRow {
        &self.rows[self.best]
    }

    pub fn best_f1(&self) -> f64 {
        self.best_row().f1
    }

    /// `(threshold, f1)` pairs for plotting.
    pub fn f1_series(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.threshold, r.f1)).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "threshold,tp,fp,tn,fn,precision,recall,f1")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.threshold, r.counts.tp, r.counts.fp, r.counts.tn, r.counts.fn_, r.precision, r.recall, r.f1
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

/// `0.00, 0.01, ..., 1.00`.
pub fn default_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Evaluates every grid threshold; the best row maximizes F1 with ties going
/// to the lower threshold.
pub fn sweep_best_f1(probs: &[f64], labels: &[u8], grid: &[f64]) -> Result<EvalReport> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("threshold grid is empty".into()));
    }
    if grid.iter().any(|t| t.is_nan()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("threshold grid must be strictly increasing".into()));
    }
    let mut rows = Vec::with_capacity(grid.len());
    let mut best = 0;
    for (i, &t) in grid.iter().enumerate() {
        let counts = confusion_at(probs, labels, t)?;
        let (precision, recall, f1) = prf1(&counts);
        if f1 > rows.get(best).map_or(f64::NEG_INFINITY, |r: &ThresholdRow| r.f1) {
            best = i;
        }
        rows.push(ThresholdRow {
            threshold: t,
            counts,
            precision,
            recall,
            f1,
        });
    }
    Ok(EvalReport { rows, best })
}

/// Parses a comma-separated threshold list such as `0.1,0.2,0.5`.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad threshold `{s}`")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    /// Set when all-positives mode was requested but the labels hold none.
    pub warning: Option<String>,
}

fn quota(fraction: f64, n: usize) -> usize {
    // Guard against 0.05 * 1000 landing a hair above 50.
    ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Validation gets every positive row plus uniformly drawn negatives until
/// it holds `ceil(fraction * n)` rows (never fewer than the positives).
/// Without positives, or with `keep_all_positives` off, it is a plain
/// uniform sample of that size. Both parts keep the original row order.
pub fn split_validation_indices(labels: &[u8], fraction: f64, keep_all_positives: bool, seed: u64) -> Result<SplitIndices> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("validation fraction {fraction} outside (0, 1)")));
    }
    let n = labels.len();
    let want = quota(fraction, n).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let positives: Vec<usize> = (0..n).filter(|&i| labels[i] != 0).collect();
    let mut warning = None;
    let mut in_val = vec![false; n];
    if keep_all_positives && !positives.is_empty() {
        let negatives: Vec<usize> = (0..n).filter(|&i| labels[i] == 0).collect();
        let extra = want.saturating_sub(positives.len()).min(negatives.len());
        for &i in &positives {
            in_val[i] = true;
        }
        for k in rand::seq::index::sample(&mut rng, negatives.len(), extra) {
            in_val[negatives[k]] = true;
        }
    } else {
        if keep_all_positives {
            let msg = "no positive rows; performing a plain random split".to_string();
            log::warn!("{msg}");
            warning = Some(msg);
        }
        for k in rand::seq::index::sample(&mut rng, n, want) {
            in_val[k] = true;
        }
    }
    let (validation, train): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_val[i]);
    Ok(SplitIndices {
        train,
        validation,
        warning,
    })
}

#[derive(Debug, Clone)]
pub struct ValidationSplit {
    pub train: DiscreteDataset,
    pub validation: DiscreteDataset,
    pub warning: Option<String>,
}

pub fn split_validation(ds: &DiscreteDataset, fraction: f64, keep_all_positives: bool, seed: u64) -> Result<ValidationSplit> {
    let idx = split_validation_indices(&ds.labels, fraction, keep_all_positives, seed)?;
    Ok(ValidationSplit {
        train: ds.select_rows(&idx.train),
        validation: ds.select_rows(&idx.validation),
        warning: idx.warning,
    })
}
