use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pcoutage::citest::Statistic;
use pcoutage::cli::{cmd_eval, cmd_gen, cmd_learn, cmd_predict, PipelineConfig};
use pcoutage::evalmetrics::parse_grid;
use pcoutage::ingest::format_timestamp;
use pcoutage::synthgen::ScenarioSpec;
use pcoutage::Error;

#[derive(Parser)]
#[command(name = "pcoutage", version, about = "Outage probability from weather via PC-learned Bayesian networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic weather/outage scenario as CSV files.
    Gen(GenArgs),
    /// Learn structure and CPTs; write the model JSON and DOT graph.
    Learn(PipelineArgs),
    /// Write hourly outage probabilities for a weather file.
    Predict(PipelineArgs),
    /// Score the model and the Naive Bayes baseline on the validation split.
    Eval(PipelineArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 5)]
    factors: usize,
    #[arg(long, default_value_t = 100_000)]
    hours: usize,
    /// Comma-separated factor names (F1, F2, ...) that drive outages.
    #[arg(long, default_value = "F2,F5")]
    parents: String,
    #[arg(long, default_value_t = 0.002)]
    rate: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = pcoutage::preprocess::DEFAULT_BINS)]
    bins: usize,
    #[arg(long)]
    weather: PathBuf,
    #[arg(long)]
    outages: PathBuf,
    /// Also write the generating network as a model file.
    #[arg(long)]
    truth_model: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatArg {
    G2,
    Pearson,
}

#[derive(Args)]
struct PipelineArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    weather: Option<PathBuf>,
    #[arg(long)]
    outages: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    dot: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    baseline_report: Option<PathBuf>,
    /// Output CSV for `predict`; stdout when absent.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Comma-separated factor columns to learn from.
    #[arg(long, value_delimiter = ',')]
    factors: Option<Vec<String>>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    statistic: Option<StatArg>,
    #[arg(long)]
    min_samples_per_dof: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    laplace: Option<f64>,
    #[arg(long)]
    downsample_ratio: Option<f64>,
    #[arg(long)]
    no_downsample: bool,
    #[arg(long)]
    smote_ratio: Option<f64>,
    #[arg(long)]
    smote_k: Option<usize>,
    #[arg(long)]
    no_smote: bool,
    #[arg(long)]
    fit_on_raw: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated thresholds, e.g. `0.1,0.5,0.9`.
    #[arg(long)]
    threshold_grid: Option<String>,
    #[arg(long)]
    validation_fraction: Option<f64>,
}

impl PipelineArgs {
    fn into_config(self) -> pcoutage::Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    c.$field = v.into();
                }
            )*};
        }
        set!(weather, outages, model, dot, report, baseline_report, predictions, factors, bins, alpha);
        set!(min_samples_per_dof, laplace, downsample_ratio, smote_ratio, smote_k, seed, validation_fraction);
        if let Some(d) = self.max_depth {
            c.max_depth = Some(d);
        }
        if let Some(s) = self.statistic {
            c.statistic = match s {
                StatArg::G2 => Statistic::GSquare,
                StatArg::Pearson => Statistic::PearsonChiSquare,
            };
        }
        if let Some(g) = &self.threshold_grid {
            c.threshold_grid = Some(parse_grid(g)?);
        }
        c.downsample &= !self.no_downsample;
        c.smote &= !self.no_smote;
        c.fit_on_raw |= self.fit_on_raw;
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> pcoutage::Result<()> {
    match cli.command {
        Command::Gen(a) => {
            let parents = a
                .parents
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|name| {
                    (0..a.factors)
                        .find(|&i| ScenarioSpec::factor_name(i) == name)
                        .ok_or_else(|| Error::UnknownNode(name.to_string()))
                })
                .collect::<pcoutage::Result<Vec<usize>>>()?;
            let spec = ScenarioSpec {
                n_factors: a.factors,
                hours: a.hours,
                parents,
                outage_rate: a.rate,
                seed: a.seed,
                bins: a.bins,
                ..Default::default()
            };
            let s = cmd_gen(&spec, &a.weather, &a.outages, a.truth_model.as_deref())?;
            let positives = s.table.label.iter().filter(|&&l| l == 1).count();
            println!("{} hours, {} outage hours, {} outage records", s.table.len(), positives, s.events.len());
        }
        Command::Learn(a) => {
            let out = cmd_learn(&a.into_config()?)?;
            print!("{}", out.edge_listing());
        }
        Command::Predict(a) => {
            let cfg = a.into_config()?;
            let rows = cmd_predict(&cfg)?;
            if cfg.predictions.is_none() {
                let stdout = std::io::stdout();
                let mut w = stdout.lock();
                let io = |e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                };
                writeln!(w, "timestamp,p_outage").map_err(io)?;
                for (t, p) in rows {
                    writeln!(w, "{},{p}", format_timestamp(&t)).map_err(io)?;
                }
            }
        }
        Command::Eval(a) => {
            let out = cmd_eval(&a.into_config()?)?;
            print!("{}", out.summary());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
