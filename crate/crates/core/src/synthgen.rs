//! Ground-truth networks, ancestral sampling and a synthetic weather/outage
//! scenario that exercises the whole pipeline.

use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bayesnet::{fit_cpts, BayesianNetwork, Cpt, DEFAULT_STATE_CAP};
use crate::dag::LearnedDag;
use crate::error::{Error, Result};
use crate::ingest::{write_outage_csv, OutageEvent, TimeSeriesTable};
use crate::preprocess::{bin_of, equal_width_edges, DiscreteDataset, DEFAULT_BINS, DEFAULT_TARGET};

/// Random DAG on nodes `X0..X{n-1}`: a uniform permutation fixes the causal
/// order and each forward pair becomes an edge with probability `edge_prob`.
pub fn random_dag(n: usize, edge_prob: f64, seed: u64) -> Result<LearnedDag> {
    if n == 0 || !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidArgument(format!(
            "random_dag needs n >= 1 and edge_prob in [0, 1], got n={n}, edge_prob={edge_prob}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < edge_prob {
                edges.push((order[i], order[j]));
            }
        }
    }
    LearnedDag::from_edges((0..n).map(|i| format!("X{i}")).collect(), &edges)
}

/// Network over `dag` with strictly positive random CPT rows. Entries are
/// drawn from `[floor, 1)` before normalizing, so a larger `floor` gives
/// flatter distributions.
pub fn random_network(dag: &LearnedDag, cards: &[usize], target: usize, floor: f64, seed: u64) -> Result<BayesianNetwork> {
    if cards.len() != dag.len() {
        return Err(Error::DimensionMismatch {
            expected: dag.len(),
            actual: cards.len(),
        });
    }
    if target >= dag.len() || cards.contains(&0) || !(0.0..1.0).contains(&floor) {
        return Err(Error::InvalidArgument("bad target, cardinality or floor".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cpts = (0..dag.len())
        .map(|v| {
            let parent_cards: Vec<usize> = dag.parents[v].iter().map(|&p| cards[p]).collect();
            let configs: usize = parent_cards.iter().product();
            let table = (0..configs)
                .map(|_| {
                    let raw: Vec<f64> = (0..cards[v]).map(|_| rng.random_range(floor..1.0) + 1e-3).collect();
                    let z: f64 = raw.iter().sum();
                    raw.into_iter().map(|x| x / z).collect()
                })
                .collect();
            Cpt {
                node: v,
                parents: dag.parents[v].clone(),
                parent_cards,
                card: cards[v],
                table,
            }
        })
        .collect();
    Ok(BayesianNetwork {
        dag: dag.clone(),
        cardinalities: cards.to_vec(),
        cpts,
        bin_edges: vec![None; dag.len()],
        target,
        state_cap: DEFAULT_STATE_CAP,
    })
}

fn sample_categorical(row: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (s, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return s;
        }
    }
    // Rounding left `acc` a hair below one; take the last state with mass.
    row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Ancestral sampling in topological order. The network's target must be
/// binary; it becomes the dataset label and the other nodes its columns.
pub fn forward_sample(bn: &BayesianNetwork, n_rows: usize, seed: u64) -> Result<DiscreteDataset> {
    if bn.cardinalities[bn.target] != 2 {
        return Err(Error::InvalidArgument(format!(
            "target `{}` must be binary to become a label",
            bn.target_name()
        )));
    }
    let order = bn.dag.topological_order()?;
    let features: Vec<usize> = (0..bn.len()).filter(|&v| v != bn.target).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; bn.len()];
    let mut rows = Vec::with_capacity(n_rows);
    let mut labels = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        for &v in &order {
            let cpt = &bn.cpts[v];
            assignment[v] = sample_categorical(&cpt.table[cpt.config_of(&assignment)], &mut rng);
        }
        rows.push(features.iter().map(|&v| assignment[v]).collect());
        labels.push(assignment[bn.target] as u8);
    }
    let bin_edges = features
        .iter()
        .map(|&v| bn.bin_edges[v].clone())
        .collect::<Option<Vec<_>>>();
    Ok(DiscreteDataset {
        columns: features.iter().map(|&v| bn.dag.nodes[v].clone()).collect(),
        cardinalities: features.iter().map(|&v| bn.cardinalities[v]).collect(),
        rows,
        labels,
        bin_edges,
        target: bn.target_name().to_string(),
    })
}

/// Shape of a synthetic weather/outage data set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub n_factors: usize,
    pub hours: usize,
    /// Zero-based factor indices that directly drive outages.
    pub parents: Vec<usize>,
    /// Target marginal `P(outage)`.
    pub outage_rate: f64,
    pub seed: u64,
    pub bins: usize,
    pub start: DateTime<Utc>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            n_factors: 5,
            hours: 100_000,
            parents: vec![1, 4],
            outage_rate: 0.002,
            seed: 0,
            bins: DEFAULT_BINS,
            start: Utc.with_ymd_and_hms(2000, 1, 1, 0, 0, 0).unwrap(),
        }
    }
}

/// Moving-average window of the factor noise, in hours.
const SMOOTHING_WINDOW: usize = 8;
/// Correlation between a driver factor and the parent it feeds.
const DRIVER_COUPLING: f64 = 0.8;
const P_HIGH: f64 = 0.95;
const STEEPNESS: f64 = 30.0;
/// Non-weather outage records per weather-related one.
const NON_WEATHER_PER_WEATHER: f64 = 17.5;

impl ScenarioSpec {
    pub fn factor_name(i: usize) -> String {
        format!("F{}", i + 1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_factors == 0 || self.hours == 0 {
            return bad("scenario needs at least one factor and one hour".into());
        }
        if !(self.outage_rate > 0.0 && self.outage_rate < 0.5) {
            return bad(format!("outage rate {} outside (0, 0.5)", self.outage_rate));
        }
        if self.bins < 2 {
            return bad("scenario needs at least two bins".into());
        }
        let mut seen = vec![false; self.n_factors];
        for &p in &self.parents {
            if p >= self.n_factors || std::mem::replace(&mut seen[p], true) {
                return bad(format!("parent index {p} invalid or repeated"));
            }
        }
        Ok(())
    }

    /// Factor feeding each true parent: the factor just before it, when that
    /// one is not itself a parent or already used.
    pub fn drivers(&self) -> Vec<(usize, usize)> {
        let mut parents = self.parents.clone();
        parents.sort_unstable();
        let mut used = vec![false; self.n_factors];
        let mut out = Vec::new();
        for &p in &parents {
            if p > 0 && !parents.contains(&(p - 1)) && !used[p - 1] {
                used[p - 1] = true;
                out.push((p - 1, p));
            }
        }
        out
    }

    /// Generating DAG: factors `F1..Fn` followed by the outage node.
    pub fn true_dag(&self) -> Result<LearnedDag> {
        let mut nodes: Vec<String> = (0..self.n_factors).map(Self::factor_name).collect();
        nodes.push(DEFAULT_TARGET.to_string());
        let mut edges = self.drivers();
        edges.extend(self.parents.iter().map(|&p| (p, self.n_factors)));
        LearnedDag::from_edges(nodes, &edges)
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    /// Hourly factors with the sampled outage label.
    pub table: TimeSeriesTable,
    /// Generating network: exact outage CPT, factor CPTs fitted on the
    /// generated bins.
    pub network: BayesianNetwork,
    pub events: Vec<OutageEvent>,
}

impl Scenario {
    pub fn write_csvs(&self, weather: &Path, outages: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.table.to_raw().write_csv(&mut buf).map_err(|e| Error::io(weather, e))?;
        std::fs::write(weather, &buf).map_err(|e| Error::io(weather, e))?;
        buf.clear();
        write_outage_csv(&self.events, &mut buf).map_err(|e| Error::io(outages, e))?;
        std::fs::write(outages, &buf).map_err(|e| Error::io(outages, e))
    }
}

fn smoothed_noise(hours: usize, rng: &mut impl Rng) -> Vec<f64> {
    let white: Vec<f64> = (0..hours + SMOOTHING_WINDOW - 1)
        .map(|_| {
            // Box-Muller.
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        })
        .collect();
    let scale = (SMOOTHING_WINDOW as f64).sqrt().recip();
    white.windows(SMOOTHING_WINDOW).map(|w| w.iter().sum::<f64>() * scale).collect()
}

/// Concordant extremity of the parent bins: each bin maps to `[-1, 1]`,
/// and the score is the smallest magnitude when all share a sign, else 0.
fn extremity(bins: &[usize], card: usize) -> f64 {
    let u: Vec<f64> = bins
        .iter()
        .map(|&b| 2.0 * b as f64 / (card - 1) as f64 - 1.0)
        .collect();
    let all_pos = u.iter().all(|&x| x > 0.0);
    let all_neg = u.iter().all(|&x| x < 0.0);
    if all_pos || all_neg {
        u.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()))
    } else {
        0.0
    }
}

fn outage_prob(score: f64, cut: f64, p_low: f64) -> f64 {
    p_low + (P_HIGH - p_low) / (1.0 + (-STEEPNESS * (score - cut)).exp())
}

/// Generates factor series as smoothed Gaussian noise (drivers feed their
/// parent with a fixed correlation), then samples hourly outages from a
/// saturating function of the parents' concordant extremity, calibrated so
/// the expected outage rate matches the spec.
pub fn weather_outage_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let n = spec.hours;
    let k = spec.n_factors;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut z: Vec<Vec<f64>> = (0..k).map(|_| smoothed_noise(n, &mut rng)).collect();
    let own = (1.0 - DRIVER_COUPLING * DRIVER_COUPLING).sqrt();
    for (d, p) in spec.drivers() {
        let mixed: Vec<f64> = z[d].iter().zip(&z[p]).map(|(a, b)| DRIVER_COUPLING * a + own * b).collect();
        z[p] = mixed;
    }
    let values: Vec<Vec<f64>> = z
        .iter()
        .enumerate()
        .map(|(i, col)| {
            let (offset, scale) = (10.0 * (i + 1) as f64, 1.0 + (i % 3) as f64);
            col.iter().map(|x| ((offset + scale * x) * 1000.0).round() / 1000.0).collect()
        })
        .collect();
    let edges: Vec<Vec<f64>> = values.iter().map(|c| equal_width_edges(c, spec.bins)).collect();
    let bins: Vec<Vec<usize>> = values
        .iter()
        .zip(&edges)
        .map(|(c, e)| c.iter().map(|&x| bin_of(e, x)).collect())
        .collect();

    let mut parents = spec.parents.clone();
    parents.sort_unstable();
    let hour_score: Vec<f64> = (0..n)
        .map(|t| {
            let pb: Vec<usize> = parents.iter().map(|&p| bins[p][t]).collect();
            extremity(&pb, spec.bins)
        })
        .collect();
    let p_low = (spec.outage_rate * 1e-3).min(1e-5);
    let cut = if parents.is_empty() {
        None
    } else {
        let mean_at = |cut: f64| hour_score.iter().map(|&s| outage_prob(s, cut, p_low)).sum::<f64>() / n as f64;
        // The mean probability falls as the cut rises.
        let (mut lo, mut hi) = (-1.0, 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mean_at(mid) > spec.outage_rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let cut = 0.5 * (lo + hi);
        let achieved = mean_at(cut);
        if (achieved - spec.outage_rate).abs() > 0.2 * spec.outage_rate {
            return Err(Error::InvalidArgument(format!(
                "outage rate {} unreachable for this scenario (closest {achieved})",
                spec.outage_rate
            )));
        }
        Some(cut)
    };
    let prob_of = |score: f64| cut.map_or(spec.outage_rate, |c| outage_prob(score, c, p_low));
    let label: Vec<u8> = hour_score.iter().map(|&s| u8::from(rng.random::<f64>() < prob_of(s))).collect();

    let timestamps: Vec<DateTime<Utc>> = (0..n as i64).map(|h| spec.start + Duration::hours(h)).collect();
    let mut events: Vec<OutageEvent> = Vec::new();
    for (t, &l) in label.iter().enumerate() {
        if l == 1 {
            events.push(OutageEvent {
                timestamp: timestamps[t] + Duration::minutes(rng.random_range(0..60)),
                weather_related: true,
            });
        }
    }
    let extra = (events.len() as f64 * NON_WEATHER_PER_WEATHER).round() as usize;
    for _ in 0..extra {
        let t = rng.random_range(0..n);
        events.push(OutageEvent {
            timestamp: timestamps[t] + Duration::minutes(rng.random_range(0..60)),
            weather_related: false,
        });
    }
    events.sort_by_key(|e| (e.timestamp, e.weather_related));

    let table = TimeSeriesTable {
        timestamps,
        columns: (0..k).map(ScenarioSpec::factor_name).collect(),
        values,
        label,
    };
    let dag = spec.true_dag()?;
    let ds = DiscreteDataset {
        columns: table.columns.clone(),
        cardinalities: vec![spec.bins; k],
        rows: (0..n).map(|t| bins.iter().map(|b| b[t]).collect()).collect(),
        labels: table.label.clone(),
        bin_edges: Some(edges),
        target: DEFAULT_TARGET.to_string(),
    };
    let mut network = fit_cpts(&dag, &ds, 1.0)?;
    let target = network.target;
    let cpt = &mut network.cpts[target];
    let mut config = vec![0usize; cpt.parents.len()];
    for row in cpt.table.iter_mut() {
        let p = prob_of(extremity(&config, spec.bins));
        *row = vec![1.0 - p, p];
        for i in (0..config.len()).rev() {
            config[i] += 1;
            if config[i] < spec.bins {
                break;
            }
            config[i] = 0;
        }
    }
    Ok(Scenario {
        spec: spec.clone(),
        table,
        network,
        events,
    })
}
