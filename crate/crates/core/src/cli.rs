//! Pipeline commands behind the `pcoutage` binary: scenario generation,
//! learning, hourly prediction and evaluation against a baseline.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::bayesnet::{fit_cpts, fit_naive_bayes, nb_posterior, posterior_target, DEFAULT_LAPLACE};
use crate::citest::{CiConfig, DataCiTest, Statistic, DEFAULT_ALPHA, DEFAULT_MIN_SAMPLES_PER_DOF};
use crate::error::{Error, Result, StepExt};
use crate::evalmetrics::{default_grid, split_validation_indices, sweep_best_f1, EvalReport, DEFAULT_VALIDATION_FRACTION};
use crate::ingest::{format_timestamp, interpolate_missing, load_labeled, parse_weather_csv, TimeSeriesTable};
use crate::model::Model;
use crate::pcalg::{pc, PcOutcome, SkeletonOptions};
use crate::preprocess::{bin_of, discretize, downsample_majority, smote_upsample, DiscreteDataset, DEFAULT_BINS};
use crate::synthgen::{weather_outage_scenario, Scenario, ScenarioSpec};

pub const DEFAULT_DOWNSAMPLE_RATIO: f64 = 10.0;
pub const DEFAULT_SMOTE_RATIO: f64 = 1.0;
pub const DEFAULT_SMOTE_K: usize = 5;

/// Every tunable of the pipeline. Config files use this struct's JSON form;
/// absent keys take the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub weather: Option<PathBuf>,
    pub outages: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub dot: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub baseline_report: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    /// Factor columns to use; empty means every column in the weather file.
    pub factors: Vec<String>,
    pub bins: usize,
    pub alpha: f64,
    pub statistic: Statistic,
    pub min_samples_per_dof: f64,
    pub max_depth: Option<usize>,
    pub laplace: f64,
    pub downsample: bool,
    /// Majority rows kept per minority row.
    pub downsample_ratio: f64,
    pub smote: bool,
    /// Minority size after SMOTE as a multiple of the majority size.
    pub smote_ratio: f64,
    pub smote_k: usize,
    /// Fit CPTs on the unbalanced discretized data instead of the
    /// rebalanced set used for structure learning.
    pub fit_on_raw: bool,
    pub seed: Option<u64>,
    pub threshold_grid: Option<Vec<f64>>,
    pub validation_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            weather: None,
            outages: None,
            model: None,
            dot: None,
            report: None,
            baseline_report: None,
            predictions: None,
            factors: Vec::new(),
            bins: DEFAULT_BINS,
            alpha: DEFAULT_ALPHA,
            statistic: Statistic::GSquare,
            min_samples_per_dof: DEFAULT_MIN_SAMPLES_PER_DOF,
            max_depth: None,
            laplace: DEFAULT_LAPLACE,
            downsample: true,
            downsample_ratio: DEFAULT_DOWNSAMPLE_RATIO,
            smote: true,
            smote_ratio: DEFAULT_SMOTE_RATIO,
            smote_k: DEFAULT_SMOTE_K,
            fit_on_raw: false,
            seed: None,
            threshold_grid: None,
            validation_fraction: DEFAULT_VALIDATION_FRACTION,
        }
    }
}

fn config_err(msg: String) -> Error {
    Error::InvalidArgument(msg).in_step("config")
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e).in_step("config"))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.bins >= 1, "bins must be at least 1"),
            (self.alpha > 0.0 && self.alpha < 1.0, "alpha must lie in (0, 1)"),
            (self.min_samples_per_dof >= 0.0, "min_samples_per_dof must be non-negative"),
            (self.laplace > 0.0 && self.laplace.is_finite(), "laplace must be positive"),
            (self.downsample_ratio > 0.0 && self.downsample_ratio.is_finite(), "downsample_ratio must be positive"),
            (self.smote_ratio > 0.0 && self.smote_ratio.is_finite(), "smote_ratio must be positive"),
            (self.smote_k >= 1, "smote_k must be at least 1"),
            (
                self.validation_fraction > 0.0 && self.validation_fraction < 1.0,
                "validation_fraction must lie in (0, 1)",
            ),
        ];
        if let Some((_, msg)) = checks.iter().find(|(ok, _)| !ok) {
            return Err(config_err((*msg).to_string()));
        }
        if let Some(grid) = &self.threshold_grid {
            let ok = !grid.is_empty()
                && grid.iter().all(|t| (0.0..=1.0).contains(t))
                && grid.windows(2).all(|w| w[0] < w[1]);
            if !ok {
                return Err(config_err("threshold grid must be increasing values in [0, 1]".into()));
            }
        }
        Ok(())
    }

    fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| config_err("a seed is required for down-sampling, SMOTE and validation splits".into()))
    }

    fn path<'a>(&self, p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        p.as_deref().ok_or_else(|| config_err(format!("missing {what} path")))
    }

    fn grid(&self) -> Vec<f64> {
        self.threshold_grid.clone().unwrap_or_else(default_grid)
    }

    /// Settings recorded in the model file; paths are left out so that the
    /// file depends only on data and parameters.
    fn training_record(&self) -> BTreeMap<String, serde_json::Value> {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let map = v.as_object_mut().expect("config is an object");
        for key in ["weather", "outages", "model", "dot", "report", "baseline_report", "predictions", "threshold_grid", "validation_fraction"] {
            map.remove(key);
        }
        map.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}

// Offsets that give each stochastic step its own stream from one seed.
const SMOTE_STREAM: u64 = 1;
const SPLIT_STREAM: u64 = 2;

/// Datasets and results of one learning run.
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub discretized: DiscreteDataset,
    pub rebalanced: DiscreteDataset,
    pub pc: PcOutcome,
    pub model: Model,
}

impl LearnOutcome {
    /// One `from -> to [origin]` line per edge.
    pub fn edge_listing(&self) -> String {
        let dag = &self.model.network.dag;
        let mut s = String::new();
        for (a, b) in dag.edges() {
            let origin = dag.provenance.get(&(a, b)).map_or("given", |o| o.as_str());
            let _ = writeln!(s, "{} -> {} [{origin}]", dag.nodes[a], dag.nodes[b]);
        }
        s
    }
}

/// Discretize, rebalance, learn the structure and fit CPTs plus the Naive
/// Bayes baseline.
pub fn learn_from_table(table: &TimeSeriesTable, cfg: &PipelineConfig) -> Result<LearnOutcome> {
    cfg.validate()?;
    let discretized = discretize(table, cfg.bins).step("discretize")?;
    let counts = discretized.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::SingleClass.in_step("rebalance"));
    }
    let mut rebalanced = discretized.clone();
    if cfg.downsample || cfg.smote {
        let seed = cfg.seed()?;
        if cfg.downsample {
            rebalanced = downsample_majority(&rebalanced, cfg.downsample_ratio, seed).step("rebalance")?;
        }
        if cfg.smote {
            let majority = rebalanced.class_counts().into_iter().max().unwrap_or(0);
            let want = (cfg.smote_ratio * majority as f64 - 1e-9).ceil() as usize;
            rebalanced = smote_upsample(&rebalanced, want, cfg.smote_k, seed.wrapping_add(SMOTE_STREAM)).step("rebalance")?;
        }
    }
    log::info!(
        "rebalanced {} rows ({:?}) to {} rows ({:?})",
        discretized.len(),
        counts,
        rebalanced.len(),
        rebalanced.class_counts()
    );

    let ci = CiConfig {
        alpha: cfg.alpha,
        statistic: cfg.statistic,
        min_samples_per_dof: cfg.min_samples_per_dof,
    };
    let test = DataCiTest::new(&rebalanced, ci);
    let opts = SkeletonOptions { max_depth: cfg.max_depth };
    let pc_out = pc(rebalanced.var_names(), &test, &opts, rebalanced.target_index()).step("structure")?;
    log::info!("structure search ran {} CI tests", pc_out.stats.total_tests());

    let fit_data = if cfg.fit_on_raw { &discretized } else { &rebalanced };
    let network = fit_cpts(&pc_out.dag, fit_data, cfg.laplace).step("fit")?;
    let naive_bayes = fit_naive_bayes(fit_data, cfg.laplace).step("fit")?;
    let model = Model {
        network,
        naive_bayes: Some(naive_bayes),
        training: cfg.training_record(),
    };
    Ok(LearnOutcome {
        discretized,
        rebalanced,
        pc: pc_out,
        model,
    })
}

/// Learns from the configured weather and outage files and writes the model
/// JSON (and DOT graph when a path is set).
pub fn cmd_learn(cfg: &PipelineConfig) -> Result<LearnOutcome> {
    cfg.validate()?;
    let weather = cfg.path(&cfg.weather, "weather")?;
    let outages = cfg.path(&cfg.outages, "outage")?;
    let model_path = cfg.path(&cfg.model, "model")?;
    let table = load_labeled(weather, outages, &cfg.factors).step("ingest")?;
    let out = learn_from_table(&table, cfg)?;
    out.model.save(model_path).step("write")?;
    if let Some(dot) = &cfg.dot {
        std::fs::write(dot, out.model.network.dag.to_dot())
            .map_err(|e| Error::io(dot, e))
            .step("write")?;
    }
    Ok(out)
}

/// Bin indices of every model factor for every hour, by column name, using
/// the model's training-time edges.
fn evidence_rows(model: &Model, table: &TimeSeriesTable) -> Result<Vec<Vec<(usize, usize)>>> {
    let bn = &model.network;
    let mut cols = Vec::new();
    for v in (0..bn.len()).filter(|&v| v != bn.target) {
        let name = &bn.dag.nodes[v];
        let c = table.column_index(name).ok_or_else(|| Error::UnknownNode(name.clone()))?;
        let edges = bn.bin_edges[v]
            .as_ref()
            .ok_or_else(|| Error::Model(format!("node `{name}` has no bin edges")))?;
        cols.push((v, c, edges));
    }
    Ok((0..table.len())
        .map(|r| {
            cols.iter()
                .map(|&(v, c, edges)| (v, bin_of(edges, table.values[c][r])))
                .collect()
        })
        .collect())
}

/// `P(outage = 1 | factors)` for each requested hour.
pub fn predict_rows(model: &Model, table: &TimeSeriesTable, rows: &[usize]) -> Result<Vec<f64>> {
    let evidence = evidence_rows(model, &table.select_rows(rows))?;
    evidence
        .into_iter()
        .map(|ev| {
            let map: BTreeMap<usize, usize> = ev.into_iter().collect();
            Ok(posterior_target(&model.network, &map)?[1])
        })
        .collect()
}

/// Naive Bayes baseline probabilities for the requested hours.
pub fn baseline_rows(model: &Model, table: &TimeSeriesTable, rows: &[usize]) -> Result<Option<Vec<f64>>> {
    let Some(nb) = &model.naive_bayes else {
        return Ok(None);
    };
    let bn = &model.network;
    let mut cols = Vec::new();
    for name in &nb.features {
        let v = bn.dag.index_of(name).ok_or_else(|| Error::UnknownNode(name.clone()))?;
        let c = table.column_index(name).ok_or_else(|| Error::UnknownNode(name.clone()))?;
        let edges = bn.bin_edges[v]
            .as_ref()
            .ok_or_else(|| Error::Model(format!("node `{name}` has no bin edges")))?;
        cols.push((c, edges));
    }
    rows.iter()
        .map(|&r| {
            let x: Vec<usize> = cols.iter().map(|&(c, e)| bin_of(e, table.values[c][r])).collect();
            Ok(nb_posterior(nb, &x)?[1])
        })
        .collect::<Result<Vec<f64>>>()
        .map(Some)
}

fn load_model(cfg: &PipelineConfig) -> Result<Model> {
    Model::load(cfg.path(&cfg.model, "model")?).step("load model")
}

/// Reads weather restricted to the model's factors, aligned and filled.
fn model_weather(model: &Model, path: &Path) -> Result<TimeSeriesTable> {
    let raw = parse_weather_csv(path, &model.factor_names())?;
    interpolate_missing(&raw)
}

/// Hourly outage probabilities for the configured weather file, written as
/// `timestamp,p_outage` when a predictions path is set.
pub fn cmd_predict(cfg: &PipelineConfig) -> Result<Vec<(DateTime<Utc>, f64)>> {
    let model = load_model(cfg)?;
    let weather = cfg.path(&cfg.weather, "weather")?;
    let table = model_weather(&model, weather).step("ingest")?;
    let all: Vec<usize> = (0..table.len()).collect();
    let probs = predict_rows(&model, &table, &all).step("predict")?;
    let out: Vec<(DateTime<Utc>, f64)> = table.timestamps.iter().copied().zip(probs).collect();
    if let Some(path) = &cfg.predictions {
        let mut s = String::from("timestamp,p_outage\n");
        for (t, p) in &out {
            let _ = writeln!(s, "{},{p}", format_timestamp(t));
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e)).step("write")?;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub model: EvalReport,
    pub baseline: Option<EvalReport>,
    pub validation_rows: usize,
    pub validation_positives: usize,
}

impl EvalOutcome {
    pub fn summary(&self) -> String {
        let line = |name: &str, r: &EvalReport| {
            let b = r.best_row();
            format!(
                "{name}: best threshold {} precision {:.4} recall {:.4} f1 {:.4}\n",
                b.threshold, b.precision, b.recall, b.f1
            )
        };
        let mut s = format!(
            "validation rows {} (positives {})\n",
            self.validation_rows, self.validation_positives
        );
        s += &line("bayesian network", &self.model);
        if let Some(b) = &self.baseline {
            s += &line("naive bayes", b);
        }
        s
    }
}

/// Scores the model (and its stored Naive Bayes baseline) on the validation
/// split: all outage hours plus a random sample of the others.
pub fn eval_table(model: &Model, table: &TimeSeriesTable, cfg: &PipelineConfig) -> Result<EvalOutcome> {
    cfg.validate()?;
    let seed = cfg.seed()?;
    let split = split_validation_indices(&table.label, cfg.validation_fraction, true, seed.wrapping_add(SPLIT_STREAM))
        .step("evaluate")?;
    let labels: Vec<u8> = split.validation.iter().map(|&r| table.label[r]).collect();
    let grid = cfg.grid();
    let probs = predict_rows(model, table, &split.validation).step("predict")?;
    let report = sweep_best_f1(&probs, &labels, &grid).step("evaluate")?;
    let baseline = match baseline_rows(model, table, &split.validation).step("predict")? {
        Some(p) => Some(sweep_best_f1(&p, &labels, &grid).step("evaluate")?),
        None => None,
    };
    Ok(EvalOutcome {
        model: report,
        baseline,
        validation_rows: labels.len(),
        validation_positives: labels.iter().filter(|&&l| l == 1).count(),
    })
}

pub fn cmd_eval(cfg: &PipelineConfig) -> Result<EvalOutcome> {
    cfg.validate()?;
    let model = load_model(cfg)?;
    let weather = cfg.path(&cfg.weather, "weather")?;
    let outages = cfg.path(&cfg.outages, "outage")?;
    let table = load_labeled(weather, outages, &model.factor_names()).step("ingest")?;
    let out = eval_table(&model, &table, cfg)?;
    if let Some(path) = &cfg.report {
        out.model.save_csv(path).step("write")?;
    }
    if let (Some(path), Some(b)) = (&cfg.baseline_report, &out.baseline) {
        b.save_csv(path).step("write")?;
    }
    Ok(out)
}

/// Generates a scenario and writes its weather and outage CSVs, plus the
/// generating network as a model file when `truth` is set.
pub fn cmd_gen(spec: &ScenarioSpec, weather: &Path, outages: &Path, truth: Option<&Path>) -> Result<Scenario> {
    let scenario = weather_outage_scenario(spec).step("generate")?;
    scenario.write_csvs(weather, outages).step("write")?;
    if let Some(path) = truth {
        Model::new(scenario.network.clone()).save(path).step("write")?;
    }
    Ok(scenario)
}
