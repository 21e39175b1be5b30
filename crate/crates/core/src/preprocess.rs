//! Equal-width discretization and class rebalancing.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ingest::TimeSeriesTable;

pub const DEFAULT_BINS: usize = 10;
pub const DEFAULT_TARGET: &str = "outage";

/// Integer-coded samples. Variables are the factor `columns` followed by the
/// binary target, so variable index `columns.len()` addresses `labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDataset {
    pub columns: Vec<String>,
    pub cardinalities: Vec<usize>,
    pub rows: Vec<Vec<usize>>,
    pub labels: Vec<u8>,
    /// Cut-points per factor when the data came from continuous values.
    pub bin_edges: Option<Vec<Vec<f64>>>,
    pub target: String,
}

impl DiscreteDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_vars(&self) -> usize {
        self.columns.len() + 1
    }

    pub fn target_index(&self) -> usize {
        self.columns.len()
    }

    pub fn var_names(&self) -> Vec<String> {
        let mut names = self.columns.clone();
        names.push(self.target.clone());
        names
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        if name == self.target {
            Some(self.target_index())
        } else {
            self.columns.iter().position(|c| c == name)
        }
    }

    pub fn var_card(&self, v: usize) -> usize {
        if v == self.columns.len() {
            2
        } else {
            self.cardinalities[v]
        }
    }

    #[inline]
    pub fn value(&self, row: usize, v: usize) -> usize {
        if v == self.columns.len() {
            self.labels[row] as usize
        } else {
            self.rows[row][v]
        }
    }

    /// Row counts for label 0 and label 1.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    pub fn select_rows(&self, idx: &[usize]) -> DiscreteDataset {
        DiscreteDataset {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            ..self.shallow_clone()
        }
    }

    fn shallow_clone(&self) -> DiscreteDataset {
        DiscreteDataset {
            columns: self.columns.clone(),
            cardinalities: self.cardinalities.clone(),
            rows: Vec::new(),
            labels: Vec::new(),
            bin_edges: self.bin_edges.clone(),
            target: self.target.clone(),
        }
    }

    /// Checks the range, shape and edge invariants.
    pub fn validate(&self) -> Result<()> {
        if self.cardinalities.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                actual: self.cardinalities.len(),
            });
        }
        if self.rows.len() != self.labels.len() {
            return Err(Error::DimensionMismatch {
                expected: self.rows.len(),
                actual: self.labels.len(),
            });
        }
        for row in &self.rows {
            if row.len() != self.columns.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.columns.len(),
                    actual: row.len(),
                });
            }
            for (j, (&v, &card)) in row.iter().zip(&self.cardinalities).enumerate() {
                if v >= card {
                    return Err(Error::StateOutOfRange {
                        node: self.columns[j].clone(),
                        state: v,
                        cardinality: card,
                    });
                }
            }
        }
        if let Some(l) = self.labels.iter().find(|&&l| l > 1) {
            return Err(Error::StateOutOfRange {
                node: self.target.clone(),
                state: *l as usize,
                cardinality: 2,
            });
        }
        if let Some(edges) = &self.bin_edges {
            for (j, e) in edges.iter().enumerate() {
                let ok = e.len() + 1 == self.cardinalities[j] && e.windows(2).all(|w| w[0] < w[1]);
                if !ok {
                    return Err(Error::InvalidArgument(format!(
                        "bin edges for `{}` do not match its cardinality",
                        self.columns[j]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Equal-width cut-points over `[min, max]`. A constant column gets unit-width
/// cut-points above its value so every observation falls in bin 0.
pub fn equal_width_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut edges: Vec<f64> = (1..bins).map(|i| lo + width * i as f64).collect();
    // Floating-point collapse is only possible for spans near the ulp scale.
    for i in 1..edges.len() {
        if edges[i] <= edges[i - 1] {
            edges[i] = f64::from_bits(edges[i - 1].to_bits() + 1);
        }
    }
    edges
}

/// Bin index of `x`: bins are half-open `[lo, hi)` except the top one, and
/// out-of-range values clamp to the extreme bins.
#[inline]
pub fn bin_of(edges: &[f64], x: f64) -> usize {
    edges.partition_point(|&e| e <= x)
}

pub fn discretize(table: &TimeSeriesTable, bins_per_factor: usize) -> Result<DiscreteDataset> {
    if bins_per_factor == 0 {
        return Err(Error::InvalidArgument("bins_per_factor must be at least 1".into()));
    }
    let n = table.len();
    let bin_edges: Vec<Vec<f64>> = table
        .values
        .iter()
        .map(|col| equal_width_edges(col, bins_per_factor))
        .collect();
    let mut rows = vec![Vec::with_capacity(table.columns.len()); n];
    for (col, edges) in table.values.iter().zip(&bin_edges) {
        for (row, &x) in rows.iter_mut().zip(col) {
            row.push(bin_of(edges, x));
        }
    }
    Ok(DiscreteDataset {
        columns: table.columns.clone(),
        cardinalities: vec![bins_per_factor; table.columns.len()],
        rows,
        labels: table.label.clone(),
        bin_edges: Some(bin_edges),
        target: DEFAULT_TARGET.to_string(),
    })
}

pub fn apply_bins(edges: &[Vec<f64>], raw_row: &[f64]) -> Result<Vec<usize>> {
    if edges.len() != raw_row.len() {
        return Err(Error::DimensionMismatch {
            expected: edges.len(),
            actual: raw_row.len(),
        });
    }
    Ok(edges.iter().zip(raw_row).map(|(e, &x)| bin_of(e, x)).collect())
}

/// Label of the smaller class (label 1 on ties).
fn minority_label(counts: [usize; 2]) -> u8 {
    if counts[0] < counts[1] {
        0
    } else {
        1
    }
}

/// Keeps every minority row and a uniform sample (without replacement) of
/// `ceil(ratio * minority)` majority rows, capped at what is available.
/// Surviving rows keep their original order.
pub fn downsample_majority(ds: &DiscreteDataset, ratio: f64, seed: u64) -> Result<DiscreteDataset> {
    if !(ratio.is_finite() && ratio > 0.0) {
        return Err(Error::InvalidArgument(format!("downsample ratio must be positive, got {ratio}")));
    }
    let counts = ds.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass);
    }
    let minority = minority_label(counts);
    let majority_rows: Vec<usize> = (0..ds.len()).filter(|&r| ds.labels[r] != minority).collect();
    let wanted = ((ratio * counts[minority as usize] as f64).ceil() as usize).min(majority_rows.len());
    if wanted == majority_rows.len() {
        return Ok(ds.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<bool> = ds.labels.iter().map(|&l| l == minority).collect();
    for i in index::sample(&mut rng, majority_rows.len(), wanted) {
        keep[majority_rows[i]] = true;
    }
    let idx: Vec<usize> = (0..ds.len()).filter(|&r| keep[r]).collect();
    Ok(ds.select_rows(&idx))
}

/// A synthetic row together with the minority rows it was interpolated from.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct SyntheticRow {
    pub values: Vec<usize>,
    pub base: usize,
    pub neighbor: usize,
}

fn squared_distance(a: &[usize], b: &[usize]) -> u64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.abs_diff(y) as u64;
            d * d
        })
        .sum()
}

/// k nearest other rows of each row, ties broken by row index.
fn nearest_neighbors(rows: &[&[usize]], k: usize) -> Vec<Vec<usize>> {
    (0..rows.len())
        .map(|i| {
            let mut cand: Vec<(u64, usize)> = (0..rows.len())
                .filter(|&j| j != i)
                .map(|j| (squared_distance(rows[i], rows[j]), j))
                .collect();
            cand.sort_unstable();
            cand.truncate(k);
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

pub(crate) fn smote_synthesize(
    minority: &[&[usize]],
    cardinalities: &[usize],
    count: usize,
    k: usize,
    rng: &mut impl Rng,
) -> Vec<SyntheticRow> {
    let k = k.min(minority.len() - 1);
    let neighbors = nearest_neighbors(minority, k);
    (0..count)
        .map(|_| {
            let base = rng.random_range(0..minority.len());
            let neighbor = neighbors[base][rng.random_range(0..k)];
            let (x, z) = (minority[base], minority[neighbor]);
            let values = x
                .iter()
                .zip(z)
                .zip(cardinalities)
                .map(|((&a, &b), &card)| {
                    let u: f64 = rng.random();
                    let v = (a as f64 + u * (b as f64 - a as f64)).round();
                    (v.max(0.0) as usize).min(card - 1)
                })
                .collect();
            SyntheticRow {
                values,
                base,
                neighbor,
            }
        })
        .collect()
}

/// Appends SMOTE rows in bin-index space until the minority class holds
/// `target_minority_count` rows. Nothing is added when it already does.
pub fn smote_upsample(
    ds: &DiscreteDataset,
    target_minority_count: usize,
    k: usize,
    seed: u64,
) -> Result<DiscreteDataset> {
    if k == 0 {
        return Err(Error::InvalidArgument("SMOTE k must be at least 1".into()));
    }
    let counts = ds.class_counts();
    let minority = minority_label(counts);
    let have = counts[minority as usize];
    if have < 2 {
        return Err(Error::CannotSynthesize(have));
    }
    if target_minority_count <= have {
        return Ok(ds.clone());
    }
    let members: Vec<&[usize]> = (0..ds.len())
        .filter(|&r| ds.labels[r] == minority)
        .map(|r| ds.rows[r].as_slice())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let synthetic = smote_synthesize(
        &members,
        &ds.cardinalities,
        target_minority_count - have,
        k,
        &mut rng,
    );
    let mut out = ds.clone();
    out.rows.reserve(synthetic.len());
    for s in synthetic {
        out.rows.push(s.values);
        out.labels.push(minority);
    }
    Ok(out)
}
