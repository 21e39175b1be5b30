use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pcoutage::cli::{eval_table, learn_from_table, PipelineConfig};
use pcoutage::dag::EdgeOrigin;
use pcoutage::model::Model;
use pcoutage::preprocess::bin_of;
use pcoutage::synthgen::{weather_outage_scenario, ScenarioSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pcoutage"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(out: &[u8]) -> String {
    String::from_utf8_lossy(out).into_owned()
}

struct Files {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Files {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        Files { _dir: dir, root }
    }

    fn p(&self, name: &str) -> String {
        self.root.join(name).to_string_lossy().into_owned()
    }
}

fn generate(f: &Files, hours: &str, rate: &str, seed: &str) {
    let out = run(&[
        "gen", "--seed", seed, "--hours", hours, "--rate", rate, "--weather", &f.p("w.csv"), "--outages",
        &f.p("o.csv"), "--truth-model", &f.p("truth.json"),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
}

#[test]
fn full_cli_round_trip() {
    let f = Files::new();
    generate(&f, "30000", "0.005", "4");
    let common = ["--weather", &f.p("w.csv"), "--outages", &f.p("o.csv"), "--model", &f.p("m.json"), "--seed", "4"];

    let learn = run(&[&["learn", "--dot", &f.p("m.dot")][..], &common].concat());
    assert!(learn.status.success(), "{}", text(&learn.stderr));
    let listing = text(&learn.stdout);
    assert!(listing.lines().all(|l| l.contains(" -> ") && l.ends_with(']')));
    assert!(listing.contains("-> outage"));

    let dot = std::fs::read_to_string(f.p("m.dot")).unwrap();
    assert!(dot.starts_with("digraph"));
    for line in dot.lines().filter(|l| l.contains("dashed")) {
        assert!(line.contains("-> \"outage\"") && line.contains("target-augmented"), "{line}");
    }

    let predict = run(&[&["predict", "--predictions", &f.p("p.csv")][..], &common].concat());
    assert!(predict.status.success(), "{}", text(&predict.stderr));
    let csv = std::fs::read_to_string(f.p("p.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("timestamp,p_outage"));
    let probs: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(probs.len(), 30000);
    assert!(probs.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p)));

    let eval = run(&[&["eval", "--report", &f.p("r.csv"), "--threshold-grid", "0.1,0.5,0.9"][..], &common].concat());
    assert!(eval.status.success(), "{}", text(&eval.stderr));
    assert!(text(&eval.stdout).contains("bayesian network: best threshold"));
    let report = std::fs::read_to_string(f.p("r.csv")).unwrap();
    assert_eq!(report.lines().count(), 4);
    assert!(report.starts_with("threshold,tp,fp,tn,fn,precision,recall,f1\n0.1,"));
}

#[test]
fn errors_exit_with_code_one_and_name_the_step() {
    let f = Files::new();
    generate(&f, "3000", "0.02", "1");
    std::fs::write(f.p("empty.csv"), "").unwrap();
    let out = run(&["learn", "--weather", &f.p("w.csv"), "--outages", &f.p("empty.csv"), "--model", &f.p("m.json"), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("rebalance") && err.contains("class"), "{err}");

    let out = run(&["learn", "--weather", &f.p("w.csv"), "--outages", &f.p("o.csv"), "--model", &f.p("m.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("seed"));

    let out = run(&["learn", "--weather", &f.p("missing.csv"), "--outages", &f.p("o.csv"), "--model", &f.p("m.json"), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("ingest"));

    // A model whose factors are absent from the weather file.
    std::fs::write(f.p("w2.csv"), "timestamp,other\n2020-01-01T00:00:00Z,1\n").unwrap();
    let out = run(&["predict", "--weather", &f.p("w2.csv"), "--model", &f.p("truth.json")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_then_flags() {
    let f = Files::new();
    generate(&f, "5000", "0.02", "2");
    let cfg = format!(
        r#"{{"weather": "{}", "outages": "{}", "model": "{}", "bins": 5, "seed": 2, "smote": false}}"#,
        f.p("w.csv"),
        f.p("o.csv"),
        f.p("m.json")
    );
    std::fs::write(f.p("cfg.json"), cfg).unwrap();
    let card = |f: &Files| Model::load(Path::new(&f.p("m.json"))).unwrap().network.cardinalities[0];

    assert!(run(&["learn", "--config", &f.p("cfg.json")]).status.success());
    assert_eq!(card(&f), 5);
    assert!(run(&["learn", "--config", &f.p("cfg.json"), "--bins", "4"]).status.success());
    assert_eq!(card(&f), 4);

    std::fs::write(f.p("bad.json"), r#"{"bins": 5, "colour": 1}"#).unwrap();
    assert_eq!(run(&["learn", "--config", &f.p("bad.json")]).status.code(), Some(1));
}

#[test]
fn truth_model_predictions_are_the_outage_cpt_rows() {
    let f = Files::new();
    generate(&f, "4000", "0.02", "8");
    let out = run(&["predict", "--weather", &f.p("w.csv"), "--model", &f.p("truth.json")]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let model = Model::load(Path::new(&f.p("truth.json"))).unwrap();
    let bn = &model.network;
    let cpt = &bn.cpts[bn.target];
    let weather = std::fs::read_to_string(f.p("w.csv")).unwrap();
    let stdout = text(&out.stdout);
    for (w, p) in weather.lines().skip(1).zip(stdout.lines().skip(1)).take(500) {
        let values: Vec<f64> = w.split(',').skip(1).map(|x| x.parse().unwrap()).collect();
        let parent_bins: Vec<usize> = cpt
            .parents
            .iter()
            .map(|&q| bin_of(bn.bin_edges[q].as_ref().unwrap(), values[q]))
            .collect();
        let want = cpt.row(&parent_bins)[1];
        let got: f64 = p.split(',').nth(1).unwrap().parse().unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn out_of_range_weather_clamps() {
    let f = Files::new();
    generate(&f, "3000", "0.02", "5");
    let header = std::fs::read_to_string(f.p("w.csv")).unwrap().lines().next().unwrap().to_string();
    let width = header.split(',').count() - 1;
    let row = |v: &str| format!("{},{}", "2030-01-01T00:00:00Z", vec![v; width].join(","));
    let second = |v: &str| row(v).replace("T00:", "T01:");
    std::fs::write(f.p("x.csv"), format!("{header}\n{}\n{}\n", row("-1e9"), second("1e9"))).unwrap();
    let out = run(&["predict", "--weather", &f.p("x.csv"), "--model", &f.p("truth.json")]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    let probs: Vec<f64> = stdout.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(probs.len(), 2);
    assert!(probs.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p)));
}

#[test]
fn shuffled_labels_score_near_the_trivial_baseline() {
    let spec = ScenarioSpec {
        hours: 40_000,
        outage_rate: 0.005,
        seed: 12,
        ..Default::default()
    };
    let mut table = weather_outage_scenario(&spec).unwrap().table;
    let cfg = PipelineConfig {
        seed: Some(12),
        ..Default::default()
    };
    let model = learn_from_table(&table, &cfg).unwrap().model;
    // Permutation null: scores stay, labels lose their link to the weather.
    table.label.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let out = eval_table(&model, &table, &cfg).unwrap();
    let rate = out.validation_positives as f64 / out.validation_rows as f64;
    let everything_positive = 2.0 * rate / (1.0 + rate);
    assert!(out.model.best_f1() < everything_positive + 0.05, "{} vs {}", out.model.best_f1(), everything_positive);
}

#[test]
fn scenario_parents_reach_the_outage_node() {
    let spec = ScenarioSpec {
        seed: 3,
        ..Default::default()
    };
    let table = weather_outage_scenario(&spec).unwrap().table;
    let cfg = PipelineConfig {
        seed: Some(3),
        ..Default::default()
    };
    let dag = learn_from_table(&table, &cfg).unwrap().model.network.dag;
    let target = dag.index_of("outage").unwrap();
    for name in ["F2", "F5"] {
        let v = dag.index_of(name).unwrap();
        assert!(dag.has_edge(v, target), "{name} is not a parent:\n{}", dag.to_dot());
    }
    for (&(a, b), o) in &dag.provenance {
        if *o == EdgeOrigin::TargetAugmented {
            assert_eq!(b, target);
            assert_eq!(dag.children()[a], vec![target]);
        }
    }
}
