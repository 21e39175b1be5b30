//! Conditional independence decisions: the G² likelihood-ratio test on
//! discrete data, Pearson's χ² as an alternative statistic, and an exact
//! d-separation oracle for known graphs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dag::LearnedDag;
use crate::error::{Error, Result};
use crate::preprocess::DiscreteDataset;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_MIN_SAMPLES_PER_DOF: f64 = 10.0;

/// Largest dense count array before switching to a sparse map.
const DENSE_LIMIT: u128 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiTestResult {
    pub statistic: f64,
    pub dof: u64,
    pub p_value: f64,
    pub independent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    #[default]
    GSquare,
    PearsonChiSquare,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiConfig {
    pub alpha: f64,
    pub statistic: Statistic,
    /// Tests with fewer than this many samples per degree of freedom report
    /// independence (p = 1). Zero disables the guard.
    pub min_samples_per_dof: f64,
}

impl Default for CiConfig {
    fn default() -> Self {
        CiConfig {
            alpha: DEFAULT_ALPHA,
            statistic: Statistic::GSquare,
            min_samples_per_dof: DEFAULT_MIN_SAMPLES_PER_DOF,
        }
    }
}

impl CiConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        CiConfig {
            alpha,
            ..Default::default()
        }
    }
}

/// Upper tail of the χ² distribution, `P[X >= statistic]`.
pub fn chi_square_sf(statistic: f64, dof: u64) -> f64 {
    if dof == 0 || statistic <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(dof as f64 / 2.0, statistic / 2.0).clamp(0.0, 1.0)
}

/// Source of independence decisions for structure learning.
pub trait CiTest {
    fn n_vars(&self) -> usize;
    fn is_independent(&self, i: usize, j: usize, cond: &[usize]) -> Result<bool>;
}

fn check_vars(n_vars: usize, i: usize, j: usize, cond: &[usize]) -> Result<()> {
    if i >= n_vars || j >= n_vars || cond.iter().any(|&c| c >= n_vars) {
        return Err(Error::InvalidVariables(format!(
            "variable index out of range for {n_vars} variables"
        )));
    }
    if i == j {
        return Err(Error::InvalidVariables(format!("tested variable {i} against itself")));
    }
    if cond.contains(&i) || cond.contains(&j) {
        return Err(Error::InvalidVariables(format!(
            "conditioning set {cond:?} overlaps tested pair ({i}, {j})"
        )));
    }
    let mut sorted = cond.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidVariables(format!("repeated variable in {cond:?}")));
    }
    Ok(())
}

/// G² test of `i ⟂ j | cond` at level `alpha` with the default sparse guard.
pub fn g_test_ci(
    ds: &DiscreteDataset,
    i: usize,
    j: usize,
    cond: &[usize],
    alpha: f64,
) -> Result<CiTestResult> {
    ci_test(ds, i, j, cond, &CiConfig::with_alpha(alpha))
}

pub fn ci_test(
    ds: &DiscreteDataset,
    i: usize,
    j: usize,
    cond: &[usize],
    config: &CiConfig,
) -> Result<CiTestResult> {
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0,1), got {}", config.alpha)));
    }
    check_vars(ds.n_vars(), i, j, cond)?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    // Canonical orientation keeps the statistic bit-identical under swapping.
    let (i, j) = (i.min(j), i.max(j));
    let (ri, rj) = (ds.var_card(i), ds.var_card(j));
    let cell_count = (ri * rj) as u128;

    let mut n_configs: u128 = 1;
    for &c in cond {
        n_configs = n_configs
            .checked_mul(ds.var_card(c) as u128)
            .ok_or_else(|| Error::InvalidArgument("conditioning set too large".into()))?;
    }
    let config_of = |row: usize| -> u128 {
        cond.iter()
            .fold(0u128, |acc, &c| acc * ds.var_card(c) as u128 + ds.value(row, c) as u128)
    };

    let (statistic, dof) = if n_configs * cell_count <= DENSE_LIMIT {
        let mut counts = vec![0u32; (n_configs * cell_count) as usize];
        for r in 0..ds.len() {
            let base = config_of(r) as usize * ri * rj;
            counts[base + ds.value(r, i) * rj + ds.value(r, j)] += 1;
        }
        counts
            .chunks(ri * rj)
            .map(|t| table_statistic(t, ri, rj, config.statistic))
            .fold((0.0, 0u64), |(s, d), (s1, d1)| (s + s1, d + d1))
    } else {
        let mut tables: BTreeMap<u128, Vec<u32>> = BTreeMap::new();
        for r in 0..ds.len() {
            let t = tables.entry(config_of(r)).or_insert_with(|| vec![0; ri * rj]);
            t[ds.value(r, i) * rj + ds.value(r, j)] += 1;
        }
        tables
            .values()
            .map(|t| table_statistic(t, ri, rj, config.statistic))
            .fold((0.0, 0u64), |(s, d), (s1, d1)| (s + s1, d + d1))
    };

    let guarded = (ds.len() as f64) < config.min_samples_per_dof * dof as f64;
    let p_value = if guarded { 1.0 } else { chi_square_sf(statistic, dof) };
    Ok(CiTestResult {
        statistic,
        dof,
        p_value,
        independent: p_value > config.alpha,
    })
}

/// Statistic and degrees of freedom of one `ri x rj` table. Empty tables and
/// all-zero rows/columns contribute nothing.
fn table_statistic(t: &[u32], ri: usize, rj: usize, kind: Statistic) -> (f64, u64) {
    let mut row_sums = vec![0u64; ri];
    let mut col_sums = vec![0u64; rj];
    for a in 0..ri {
        for b in 0..rj {
            let o = t[a * rj + b] as u64;
            row_sums[a] += o;
            col_sums[b] += o;
        }
    }
    let total: u64 = row_sums.iter().sum();
    if total == 0 {
        return (0.0, 0);
    }
    let nz_rows = row_sums.iter().filter(|&&s| s > 0).count() as u64;
    let nz_cols = col_sums.iter().filter(|&&s| s > 0).count() as u64;
    let dof = (nz_rows.saturating_sub(1)) * (nz_cols.saturating_sub(1));
    let total = total as f64;
    let mut stat = 0.0;
    for a in 0..ri {
        if row_sums[a] == 0 {
            continue;
        }
        for b in 0..rj {
            if col_sums[b] == 0 {
                continue;
            }
            let o = t[a * rj + b] as f64;
            let e = row_sums[a] as f64 * col_sums[b] as f64 / total;
            stat += match kind {
                Statistic::GSquare if o > 0.0 => 2.0 * o * (o / e).ln(),
                Statistic::GSquare => 0.0,
                Statistic::PearsonChiSquare => (o - e) * (o - e) / e,
            };
        }
    }
    (stat.max(0.0), dof)
}

/// Data-driven independence decisions for structure learning.
#[derive(Debug, Clone, Copy)]
pub struct DataCiTest<'a> {
    pub data: &'a DiscreteDataset,
    pub config: CiConfig,
}

impl<'a> DataCiTest<'a> {
    pub fn new(data: &'a DiscreteDataset, config: CiConfig) -> Self {
        DataCiTest { data, config }
    }
}

impl CiTest for DataCiTest<'_> {
    fn n_vars(&self) -> usize {
        self.data.n_vars()
    }

    fn is_independent(&self, i: usize, j: usize, cond: &[usize]) -> Result<bool> {
        Ok(ci_test(self.data, i, j, cond, &self.config)?.independent)
    }
}

/// True iff every path between `i` and `j` is blocked by `cond`.
///
/// Reachability over (node, direction) states: a trail may pass a
/// non-collider only if it is unobserved, and a collider only if it or one
/// of its descendants is observed.
pub fn d_separated(dag: &LearnedDag, i: usize, j: usize, cond: &[usize]) -> Result<bool> {
    let n = dag.len();
    if i >= n {
        return Err(Error::UnknownNode(format!("#{i}")));
    }
    if j >= n {
        return Err(Error::UnknownNode(format!("#{j}")));
    }
    if let Some(&c) = cond.iter().find(|&&c| c >= n) {
        return Err(Error::UnknownNode(format!("#{c}")));
    }
    check_vars(n, i, j, cond)?;

    let mut observed = vec![false; n];
    for &c in cond {
        observed[c] = true;
    }
    // Observed nodes and their ancestors: colliders there are open.
    let opens_collider = dag.ancestral_closure(cond);
    let children = dag.children();

    // Direction flag: true = arrived from a child (moving up).
    let mut visited = vec![[false; 2]; n];
    let mut stack = vec![(i, true)];
    while let Some((v, up)) = stack.pop() {
        if std::mem::replace(&mut visited[v][up as usize], true) {
            continue;
        }
        if v == j {
            return Ok(false);
        }
        if up {
            if !observed[v] {
                stack.extend(dag.parents[v].iter().map(|&p| (p, true)));
                stack.extend(children[v].iter().map(|&c| (c, false)));
            }
        } else {
            if !observed[v] {
                stack.extend(children[v].iter().map(|&c| (c, false)));
            }
            if opens_collider[v] {
                stack.extend(dag.parents[v].iter().map(|&p| (p, true)));
            }
        }
    }
    Ok(true)
}

/// Independence decisions read off a known DAG.
#[derive(Debug, Clone, Copy)]
pub struct DSeparationOracle<'a> {
    pub dag: &'a LearnedDag,
}

impl CiTest for DSeparationOracle<'_> {
    fn n_vars(&self) -> usize {
        self.dag.len()
    }

    fn is_independent(&self, i: usize, j: usize, cond: &[usize]) -> Result<bool> {
        d_separated(self.dag, i, j, cond)
    }
}
