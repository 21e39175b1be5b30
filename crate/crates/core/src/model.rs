//! JSON model file: the learned network with its CPTs, training-time bin
//! edges, edge provenance and the optional Naive Bayes baseline.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bayesnet::{BayesianNetwork, Cpt, NaiveBayesModel, DEFAULT_STATE_CAP};
use crate::dag::{EdgeOrigin, LearnedDag};
use crate::error::{Error, Result};

pub const FORMAT: &str = "pcoutage-model";
pub const VERSION: u32 = 1;

/// Tolerance on CPT row sums when reading a model back.
const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    name: String,
    cardinality: usize,
    parents: Vec<String>,
    bin_edges: Option<Vec<f64>>,
    cpt: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    from: String,
    to: String,
    origin: Option<EdgeOrigin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NaiveBayesRecord {
    features: Vec<String>,
    priors: [f64; 2],
    conditionals: Vec<[Vec<f64>; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    target: String,
    nodes: Vec<NodeRecord>,
    edges: Vec<EdgeRecord>,
    naive_bayes: Option<NaiveBayesRecord>,
    #[serde(default)]
    training: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub network: BayesianNetwork,
    pub naive_bayes: Option<NaiveBayesModel>,
    /// Settings that produced the model, kept for the record.
    pub training: BTreeMap<String, serde_json::Value>,
}

fn model_err(msg: impl Into<String>) -> Error {
    Error::Model(msg.into())
}

impl Model {
    pub fn new(network: BayesianNetwork) -> Self {
        Model {
            network,
            naive_bayes: None,
            training: BTreeMap::new(),
        }
    }

    /// Factor node names (every node but the target), in node order.
    pub fn factor_names(&self) -> Vec<String> {
        let bn = &self.network;
        (0..bn.len())
            .filter(|&v| v != bn.target)
            .map(|v| bn.dag.nodes[v].clone())
            .collect()
    }

    fn to_file(&self) -> ModelFile {
        let bn = &self.network;
        let name = |v: usize| bn.dag.nodes[v].clone();
        let nodes = (0..bn.len())
            .map(|v| NodeRecord {
                name: name(v),
                cardinality: bn.cardinalities[v],
                parents: bn.dag.parents[v].iter().map(|&p| name(p)).collect(),
                bin_edges: bn.bin_edges[v].clone(),
                cpt: bn.cpts[v].table.clone(),
            })
            .collect();
        let edges = bn
            .dag
            .edges()
            .into_iter()
            .map(|(a, b)| EdgeRecord {
                from: name(a),
                to: name(b),
                origin: bn.dag.provenance.get(&(a, b)).copied(),
            })
            .collect();
        ModelFile {
            format: FORMAT.to_string(),
            version: VERSION,
            target: name(bn.target),
            nodes,
            edges,
            naive_bayes: self.naive_bayes.as_ref().map(|m| NaiveBayesRecord {
                features: m.features.clone(),
                priors: m.priors,
                conditionals: m.conditionals.clone(),
            }),
            training: self.training.clone(),
        }
    }

    fn from_file(f: ModelFile) -> Result<Model> {
        if f.format != FORMAT || f.version != VERSION {
            return Err(model_err(format!(
                "unsupported model format `{}` version {}",
                f.format, f.version
            )));
        }
        let names: Vec<String> = f.nodes.iter().map(|n| n.name.clone()).collect();
        let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        if index.len() != names.len() {
            return Err(model_err("duplicate node names"));
        }
        let lookup = |n: &str| index.get(n).copied().ok_or_else(|| Error::UnknownNode(n.to_string()));
        let target = lookup(&f.target)?;

        let mut dag = LearnedDag::empty(names.clone());
        for (v, node) in f.nodes.iter().enumerate() {
            for p in &node.parents {
                dag.add_edge(lookup(p)?, v, None)?;
            }
        }
        dag.topological_order()?;
        for e in &f.edges {
            let (a, b) = (lookup(&e.from)?, lookup(&e.to)?);
            if !dag.has_edge(a, b) {
                return Err(model_err(format!("edge {} -> {} is not in any parent list", e.from, e.to)));
            }
            if let Some(o) = e.origin {
                dag.provenance.insert((a, b), o);
            }
        }
        if f.edges.len() != dag.edge_count() {
            return Err(model_err("edge list does not match the parent lists"));
        }

        let cards: Vec<usize> = f.nodes.iter().map(|n| n.cardinality).collect();
        if cards.contains(&0) {
            return Err(model_err("zero cardinality"));
        }
        if cards[target] != 2 {
            return Err(model_err("target must be binary"));
        }
        let mut cpts = Vec::with_capacity(f.nodes.len());
        let mut bin_edges = Vec::with_capacity(f.nodes.len());
        for (v, node) in f.nodes.into_iter().enumerate() {
            if let Some(e) = &node.bin_edges {
                let ok = e.len() + 1 == node.cardinality && e.windows(2).all(|w| w[0] < w[1]);
                if !ok {
                    return Err(model_err(format!("bad bin edges for `{}`", node.name)));
                }
            }
            bin_edges.push(node.bin_edges);
            cpts.push(Cpt {
                node: v,
                parents: dag.parents[v].clone(),
                parent_cards: dag.parents[v].iter().map(|&p| cards[p]).collect(),
                card: cards[v],
                table: node.cpt,
            });
        }
        let network = BayesianNetwork {
            dag,
            cardinalities: cards,
            cpts,
            bin_edges,
            target,
            state_cap: DEFAULT_STATE_CAP,
        };
        network.validate(ROW_SUM_TOL)?;

        let naive_bayes = match f.naive_bayes {
            None => None,
            Some(r) => {
                if r.features.len() != r.conditionals.len() {
                    return Err(model_err("Naive Bayes feature count mismatch"));
                }
                for (name, tables) in r.features.iter().zip(&r.conditionals) {
                    let ok = tables[0].len() == tables[1].len()
                        && tables
                            .iter()
                            .all(|t| t.iter().all(|&p| p > 0.0) && (t.iter().sum::<f64>() - 1.0).abs() <= ROW_SUM_TOL);
                    if !ok {
                        return Err(model_err(format!("invalid Naive Bayes table for `{name}`")));
                    }
                }
                Some(NaiveBayesModel {
                    features: r.features,
                    priors: r.priors,
                    conditionals: r.conditionals,
                })
            }
        };
        Ok(Model {
            network,
            naive_bayes,
            training: f.training,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_file()).map_err(|e| model_err(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| model_err(e.to_string()))?;
        Model::from_file(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayesnet::{fit_cpts, fit_naive_bayes};
    use crate::preprocess::DiscreteDataset;

    fn fitted() -> Model {
        let ds = DiscreteDataset {
            columns: vec!["a".into(), "b".into()],
            cardinalities: vec![3, 2],
            rows: vec![vec![0, 1], vec![2, 0], vec![1, 1], vec![2, 1]],
            labels: vec![0, 1, 0, 1],
            bin_edges: Some(vec![vec![0.1, 0.7], vec![1.0 / 3.0]]),
            target: "outage".into(),
        };
        let mut dag = LearnedDag::empty(ds.var_names());
        dag.add_edge(0, 2, Some(EdgeOrigin::VStructure)).unwrap();
        dag.add_edge(1, 2, Some(EdgeOrigin::TargetAugmented)).unwrap();
        let mut m = Model::new(fit_cpts(&dag, &ds, 0.3).unwrap());
        m.naive_bayes = Some(fit_naive_bayes(&ds, 0.3).unwrap());
        m.training.insert("alpha".into(), serde_json::json!(0.05));
        m
    }

    #[test]
    fn round_trip_is_exact() {
        let m = fitted();
        let text = m.to_json().unwrap();
        let back = Model::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json().unwrap(), text);
        assert_eq!(m.factor_names(), vec!["a", "b"]);
    }

    #[test]
    fn rejects_inconsistent_files() {
        let text = fitted().to_json().unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["nodes"][2]["cpt"][0] = serde_json::json!([0.9, 0.2]);
        assert!(Model::from_json(&v.to_string()).is_err());

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["nodes"][0]["parents"] = serde_json::json!(["outage"]);
        assert!(Model::from_json(&v.to_string()).is_err());

        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["target"] = serde_json::json!("missing");
        assert!(matches!(Model::from_json(&v.to_string()), Err(Error::UnknownNode(_))));

        assert!(Model::from_json("{").is_err());
    }
}
