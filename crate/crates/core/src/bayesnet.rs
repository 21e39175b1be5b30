//! Discrete Bayesian networks: smoothed CPT estimation, joint evaluation by
//! the Markov factorization, exact posterior inference by enumeration, and
//! the Naive Bayes baseline.

use std::collections::BTreeMap;

use crate::dag::LearnedDag;
use crate::error::{Error, Result};
use crate::preprocess::DiscreteDataset;

pub const DEFAULT_LAPLACE: f64 = 1.0;
/// Default bound on the joint states enumerated by [`posterior_target`] and
/// on the entries of a single CPT.
pub const DEFAULT_STATE_CAP: u128 = 10_000_000;

/// `P(node | parents)`; rows are parent configurations in mixed-radix order
/// with the last parent varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub node: usize,
    pub parents: Vec<usize>,
    pub parent_cards: Vec<usize>,
    pub card: usize,
    pub table: Vec<Vec<f64>>,
}

impl Cpt {
    pub fn config_count(&self) -> usize {
        self.parent_cards.iter().product()
    }

    /// Row index of the parent states found in a full assignment.
    #[inline]
    pub fn config_of(&self, assignment: &[usize]) -> usize {
        self.parents
            .iter()
            .zip(&self.parent_cards)
            .fold(0, |acc, (&p, &c)| acc * c + assignment[p])
    }

    pub fn row(&self, parent_states: &[usize]) -> &[f64] {
        let idx = parent_states
            .iter()
            .zip(&self.parent_cards)
            .fold(0, |acc, (&s, &c)| acc * c + s);
        &self.table[idx]
    }

    #[inline]
    pub fn prob(&self, assignment: &[usize]) -> f64 {
        self.table[self.config_of(assignment)][assignment[self.node]]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesianNetwork {
    pub dag: LearnedDag,
    pub cardinalities: Vec<usize>,
    pub cpts: Vec<Cpt>,
    /// Training-time cut-points for nodes that came from continuous factors.
    pub bin_edges: Vec<Option<Vec<f64>>>,
    pub target: usize,
    pub state_cap: u128,
}

fn cpt_entries(cards: &[usize], parents: &[usize], node: usize) -> u128 {
    parents
        .iter()
        .fold(cards[node] as u128, |acc, &p| acc.saturating_mul(cards[p] as u128))
}

/// Maximum-likelihood CPTs with add-`laplace_alpha` smoothing:
/// `P(X = s | pa = c) = (n(s, c) + a) / (n(c) + a * |X|)`. Parent
/// configurations never seen get the uniform row.
///
/// DAG nodes are matched to dataset variables by name; the dataset's target
/// variable must be one of them.
pub fn fit_cpts(dag: &LearnedDag, ds: &DiscreteDataset, laplace_alpha: f64) -> Result<BayesianNetwork> {
    if !(laplace_alpha.is_finite() && laplace_alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Laplace pseudo-count must be positive, got {laplace_alpha}"
        )));
    }
    let var_of: Vec<usize> = dag
        .nodes
        .iter()
        .map(|name| ds.var_index(name).ok_or_else(|| Error::UnknownNode(name.clone())))
        .collect::<Result<_>>()?;
    let target = dag
        .index_of(&ds.target)
        .ok_or_else(|| Error::UnknownNode(ds.target.clone()))?;
    let cards: Vec<usize> = var_of.iter().map(|&v| ds.var_card(v)).collect();

    let mut cpts = Vec::with_capacity(dag.len());
    for node in 0..dag.len() {
        let parents = dag.parents[node].clone();
        let entries = cpt_entries(&cards, &parents, node);
        if entries > DEFAULT_STATE_CAP {
            return Err(Error::StateSpaceTooLarge {
                required: entries,
                cap: DEFAULT_STATE_CAP,
            });
        }
        let parent_cards: Vec<usize> = parents.iter().map(|&p| cards[p]).collect();
        let card = cards[node];
        let configs: usize = parent_cards.iter().product();
        let mut counts = vec![0u64; configs * card];
        for r in 0..ds.len() {
            let cfg = parents
                .iter()
                .zip(&parent_cards)
                .fold(0, |acc, (&p, &c)| acc * c + ds.value(r, var_of[p]));
            counts[cfg * card + ds.value(r, var_of[node])] += 1;
        }
        let table = counts
            .chunks(card)
            .map(|row| {
                let total: u64 = row.iter().sum();
                let denom = total as f64 + laplace_alpha * card as f64;
                row.iter().map(|&n| (n as f64 + laplace_alpha) / denom).collect()
            })
            .collect();
        cpts.push(Cpt {
            node,
            parents,
            parent_cards,
            card,
            table,
        });
    }

    let bin_edges = var_of
        .iter()
        .map(|&v| {
            ds.bin_edges
                .as_ref()
                .and_then(|edges| (v < ds.columns.len()).then(|| edges[v].clone()))
        })
        .collect();
    Ok(BayesianNetwork {
        dag: dag.clone(),
        cardinalities: cards,
        cpts,
        bin_edges,
        target,
        state_cap: DEFAULT_STATE_CAP,
    })
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

impl BayesianNetwork {
    pub fn len(&self) -> usize {
        self.dag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dag.is_empty()
    }

    pub fn node_name(&self, v: usize) -> &str {
        &self.dag.nodes[v]
    }

    pub fn target_name(&self) -> &str {
        &self.dag.nodes[self.target]
    }

    /// Checks that CPTs line up with the DAG and that every row is a
    /// strictly positive distribution (within `tol` of summing to one).
    pub fn validate(&self, tol: f64) -> Result<()> {
        let n = self.dag.len();
        if self.cpts.len() != n || self.cardinalities.len() != n || self.bin_edges.len() != n {
            return Err(Error::Model("per-node arrays do not match the node count".into()));
        }
        if self.target >= n {
            return Err(Error::Model("target index out of range".into()));
        }
        self.dag.topological_order()?;
        for (v, cpt) in self.cpts.iter().enumerate() {
            let name = &self.dag.nodes[v];
            if cpt.node != v || cpt.parents != self.dag.parents[v] {
                return Err(Error::Model(format!("CPT of `{name}` disagrees with the DAG parents")));
            }
            let expect: Vec<usize> = cpt.parents.iter().map(|&p| self.cardinalities[p]).collect();
            if cpt.parent_cards != expect || cpt.card != self.cardinalities[v] {
                return Err(Error::Model(format!("CPT of `{name}` has wrong cardinalities")));
            }
            if cpt.table.len() != cpt.config_count() {
                return Err(Error::Model(format!("CPT of `{name}` is missing parent configurations")));
            }
            for row in &cpt.table {
                let sum: f64 = row.iter().sum();
                if row.len() != cpt.card || (sum - 1.0).abs() > tol || row.iter().any(|&p| p.is_nan() || p <= 0.0) {
                    return Err(Error::Model(format!("CPT of `{name}` has an invalid row")));
                }
            }
        }
        Ok(())
    }

    fn check_state(&self, v: usize, s: usize) -> Result<()> {
        if v >= self.len() {
            return Err(Error::UnknownNode(format!("#{v}")));
        }
        if s >= self.cardinalities[v] {
            return Err(Error::StateOutOfRange {
                node: self.dag.nodes[v].clone(),
                state: s,
                cardinality: self.cardinalities[v],
            });
        }
        Ok(())
    }
}

/// `P(X_1..X_n) = prod_i P(X_i | Pa(X_i))` for a full assignment.
pub fn joint_probability(bn: &BayesianNetwork, assignment: &[usize]) -> Result<f64> {
    if assignment.len() != bn.len() {
        return Err(Error::DimensionMismatch {
            expected: bn.len(),
            actual: assignment.len(),
        });
    }
    for (v, &s) in assignment.iter().enumerate() {
        bn.check_state(v, s)?;
    }
    Ok(bn.cpts.iter().map(|cpt| cpt.prob(assignment)).product())
}

/// Exact `P(target | evidence)` by enumeration.
///
/// For each target state, sums the factorized joint over every completion
/// of the unobserved nodes and normalizes. Nodes that are not ancestors of
/// the target or of an evidence node sum out to one and are skipped.
pub fn posterior_target(bn: &BayesianNetwork, evidence: &BTreeMap<usize, usize>) -> Result<Vec<f64>> {
    for (&v, &s) in evidence {
        bn.check_state(v, s)?;
        if v == bn.target {
            return Err(Error::InvalidArgument(format!(
                "evidence may not include the target `{}`",
                bn.target_name()
            )));
        }
    }
    let mut seeds: Vec<usize> = evidence.keys().copied().collect();
    seeds.push(bn.target);
    let relevant = bn.dag.ancestral_closure(&seeds);
    let hidden: Vec<usize> = (0..bn.len())
        .filter(|&v| relevant[v] && v != bn.target && !evidence.contains_key(&v))
        .collect();
    let active: Vec<&Cpt> = bn.cpts.iter().filter(|c| relevant[c.node]).collect();

    let target_card = bn.cardinalities[bn.target];
    let required = hidden
        .iter()
        .fold(target_card as u128, |acc, &v| acc.saturating_mul(bn.cardinalities[v] as u128));
    if required > bn.state_cap {
        return Err(Error::StateSpaceTooLarge {
            required,
            cap: bn.state_cap,
        });
    }

    let mut assignment = vec![0usize; bn.len()];
    for (&v, &s) in evidence {
        assignment[v] = s;
    }
    let mut unnormalized = Vec::with_capacity(target_card);
    for t in 0..target_card {
        assignment[bn.target] = t;
        for &h in &hidden {
            assignment[h] = 0;
        }
        let mut acc = CompensatedSum::default();
        loop {
            acc.add(active.iter().map(|c| c.prob(&assignment)).product());
            // Odometer over hidden nodes, last one fastest.
            let mut k = hidden.len();
            let advanced = loop {
                if k == 0 {
                    break false;
                }
                k -= 1;
                let h = hidden[k];
                assignment[h] += 1;
                if assignment[h] < bn.cardinalities[h] {
                    break true;
                }
                assignment[h] = 0;
            };
            if !advanced {
                break;
            }
        }
        unnormalized.push(acc.value());
    }
    let mut total = CompensatedSum::default();
    for &p in &unnormalized {
        total.add(p);
    }
    let z = total.value();
    Ok(unnormalized.into_iter().map(|p| p / z).collect())
}

/// Posterior with evidence given by node name.
pub fn posterior_by_name(bn: &BayesianNetwork, evidence: &[(&str, usize)]) -> Result<Vec<f64>> {
    let mut map = BTreeMap::new();
    for &(name, s) in evidence {
        let v = bn
            .dag
            .index_of(name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))?;
        map.insert(v, s);
    }
    posterior_target(bn, &map)
}

/// Class prior plus per-feature class-conditional tables, all smoothed with
/// the same pseudo-count as [`fit_cpts`].
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayesModel {
    pub features: Vec<String>,
    pub priors: [f64; 2],
    /// `conditionals[j][class][state]`.
    pub conditionals: Vec<[Vec<f64>; 2]>,
}

pub fn fit_naive_bayes(ds: &DiscreteDataset, laplace_alpha: f64) -> Result<NaiveBayesModel> {
    if !(laplace_alpha.is_finite() && laplace_alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Laplace pseudo-count must be positive, got {laplace_alpha}"
        )));
    }
    let class_n = ds.class_counts();
    if class_n[0] == 0 || class_n[1] == 0 {
        return Err(Error::SingleClass);
    }
    let n = ds.len() as f64;
    let priors = [
        (class_n[0] as f64 + laplace_alpha) / (n + 2.0 * laplace_alpha),
        (class_n[1] as f64 + laplace_alpha) / (n + 2.0 * laplace_alpha),
    ];
    let conditionals = (0..ds.columns.len())
        .map(|j| {
            let card = ds.cardinalities[j];
            let mut counts = [vec![0u64; card], vec![0u64; card]];
            for (row, &l) in ds.rows.iter().zip(&ds.labels) {
                counts[l as usize][row[j]] += 1;
            }
            counts.map(|c| {
                let denom = c.iter().sum::<u64>() as f64 + laplace_alpha * card as f64;
                c.iter().map(|&k| (k as f64 + laplace_alpha) / denom).collect()
            })
        })
        .collect();
    Ok(NaiveBayesModel {
        features: ds.columns.clone(),
        priors,
        conditionals,
    })
}

/// `P(C | x)` proportional to `P(C) * prod_j P(x_j | C)`, computed in log space.
pub fn nb_posterior(m: &NaiveBayesModel, x: &[usize]) -> Result<[f64; 2]> {
    if x.len() != m.conditionals.len() {
        return Err(Error::DimensionMismatch {
            expected: m.conditionals.len(),
            actual: x.len(),
        });
    }
    let mut log = [m.priors[0].ln(), m.priors[1].ln()];
    for (j, (&s, tables)) in x.iter().zip(&m.conditionals).enumerate() {
        if s >= tables[0].len() {
            return Err(Error::StateOutOfRange {
                node: m.features[j].clone(),
                state: s,
                cardinality: tables[0].len(),
            });
        }
        log[0] += tables[0][s].ln();
        log[1] += tables[1][s].ln();
    }
    let top = log[0].max(log[1]);
    let w = [(log[0] - top).exp(), (log[1] - top).exp()];
    let z = w[0] + w[1];
    Ok([w[0] / z, w[1] / z])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::DEFAULT_TARGET;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ds(columns: &[&str], cards: &[usize], rows: Vec<Vec<usize>>, labels: Vec<u8>) -> DiscreteDataset {
        DiscreteDataset {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            cardinalities: cards.to_vec(),
            rows,
            labels,
            bin_edges: None,
            target: DEFAULT_TARGET.into(),
        }
    }

    fn dag(nodes: &[&str], edges: &[(usize, usize)]) -> LearnedDag {
        LearnedDag::from_edges(nodes.iter().map(|s| s.to_string()).collect(), edges).unwrap()
    }

    /// Network with hand-set CPT rows.
    fn manual(nodes: &[&str], cards: &[usize], edges: &[(usize, usize)], tables: Vec<Vec<Vec<f64>>>, target: usize) -> BayesianNetwork {
        let d = dag(nodes, edges);
        let cpts = tables
            .into_iter()
            .enumerate()
            .map(|(v, table)| Cpt {
                node: v,
                parents: d.parents[v].clone(),
                parent_cards: d.parents[v].iter().map(|&p| cards[p]).collect(),
                card: cards[v],
                table,
            })
            .collect();
        let bn = BayesianNetwork {
            cardinalities: cards.to_vec(),
            cpts,
            bin_edges: vec![None; nodes.len()],
            dag: d,
            target,
            state_cap: DEFAULT_STATE_CAP,
        };
        bn.validate(1e-12).unwrap();
        bn
    }

    #[test]
    fn smoothing_arithmetic() {
        let rows = vec![vec![0], vec![0], vec![0], vec![2]];
        let data = ds(&["x"], &[3], rows, vec![0, 1, 0, 1]);
        let bn = fit_cpts(&dag(&["x", "outage"], &[]), &data, 1.0).unwrap();
        let row = &bn.cpts[0].table[0];
        assert!((row[0] - 4.0 / 7.0).abs() < 1e-15);
        assert!((row[1] - 1.0 / 7.0).abs() < 1e-15);
        assert!((row[2] - 2.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn unseen_parent_configuration_is_uniform() {
        let data = ds(&["x"], &[3], vec![vec![0], vec![1]], vec![0, 1]);
        let bn = fit_cpts(&dag(&["x", "outage"], &[(0, 1)]), &data, 1.0).unwrap();
        assert_eq!(bn.cpts[1].row(&[2]), &[0.5, 0.5]);
    }

    #[test]
    fn tiny_alpha_approaches_mle() {
        let mut labels = vec![0u8; 9];
        labels.push(1);
        let data = ds(&["x"], &[2], vec![vec![0]; 10], labels);
        let bn = fit_cpts(&dag(&["x", "outage"], &[]), &data, 1e-9).unwrap();
        let row = &bn.cpts[1].table[0];
        assert!((row[0] - 0.9).abs() < 1e-9 && (row[1] - 0.1).abs() < 1e-9);
    }

    #[test]
    fn fit_errors() {
        let data = ds(&["x"], &[2], vec![vec![0]], vec![0]);
        assert!(matches!(
            fit_cpts(&dag(&["y", "outage"], &[]), &data, 1.0),
            Err(Error::UnknownNode(ref n)) if n == "y"
        ));
        assert!(fit_cpts(&dag(&["x", "outage"], &[]), &data, 0.0).is_err());
    }

    #[test]
    fn joint_of_two_node_chain() {
        let bn = manual(
            &["a", "b"],
            &[2, 2],
            &[(0, 1)],
            vec![vec![vec![0.5, 0.5]], vec![vec![0.7, 0.3], vec![0.2, 0.8]]],
            1,
        );
        assert!((joint_probability(&bn, &[1, 1]).unwrap() - 0.4).abs() < 1e-15);
        assert!(matches!(
            joint_probability(&bn, &[1, 2]),
            Err(Error::StateOutOfRange { state: 2, .. })
        ));
        let single = manual(&["a"], &[2], &[], vec![vec![vec![0.5, 0.5]]], 0);
        assert_eq!(joint_probability(&single, &[0]).unwrap(), 0.5);
        assert_eq!(joint_probability(&single, &[1]).unwrap(), 0.5);
    }

    #[test]
    fn posterior_reduces_to_cpt_row_for_childless_target() {
        let bn = manual(
            &["f1", "f2", "e"],
            &[2, 2, 2],
            &[(0, 2), (1, 2), (0, 1)],
            vec![
                vec![vec![0.6, 0.4]],
                vec![vec![0.3, 0.7], vec![0.8, 0.2]],
                vec![vec![0.99, 0.01], vec![0.95, 0.05], vec![0.7, 0.3], vec![0.9, 0.1]],
            ],
            2,
        );
        let post = posterior_by_name(&bn, &[("f1", 1), ("f2", 1)]).unwrap();
        assert!((post[0] - 0.9).abs() < 1e-15 && (post[1] - 0.1).abs() < 1e-15);
        assert!(posterior_by_name(&bn, &[("e", 1)]).is_err());
        assert!(posterior_by_name(&bn, &[("zz", 1)]).is_err());
        assert!(posterior_by_name(&bn, &[("f1", 5)]).is_err());
    }

    #[test]
    fn collider_posterior_matches_hand_sum() {
        // A -> E <- B, observe A only: P(E | A=1) = sum_B P(B) P(E | A=1, B).
        let pb = [0.35, 0.65];
        let e_rows = vec![vec![0.9, 0.1], vec![0.8, 0.2], vec![0.6, 0.4], vec![0.25, 0.75]];
        let bn = manual(
            &["a", "b", "e"],
            &[2, 2, 2],
            &[(0, 2), (1, 2)],
            vec![vec![vec![0.5, 0.5]], vec![pb.to_vec()], e_rows.clone()],
            2,
        );
        let post = posterior_by_name(&bn, &[("a", 1)]).unwrap();
        let hand = pb[0] * e_rows[2][1] + pb[1] * e_rows[3][1];
        assert!((post[1] - hand).abs() < 1e-12);
    }

    #[test]
    fn state_cap_enforced() {
        let mut bn = manual(
            &["a", "e"],
            &[2, 2],
            &[(0, 1)],
            vec![vec![vec![0.5, 0.5]], vec![vec![0.5, 0.5], vec![0.1, 0.9]]],
            1,
        );
        bn.state_cap = 3;
        assert!(matches!(
            posterior_target(&bn, &BTreeMap::new()),
            Err(Error::StateSpaceTooLarge { required: 4, cap: 3 })
        ));
        assert!(posterior_target(&bn, &BTreeMap::from([(0, 1)])).is_ok());
    }

    #[test]
    fn naive_bayes_arithmetic() {
        let m = NaiveBayesModel {
            features: vec!["x".into()],
            priors: [0.5, 0.5],
            conditionals: vec![[vec![0.8, 0.2], vec![0.2, 0.8]]],
        };
        let p = nb_posterior(&m, &[1]).unwrap();
        assert!((p[1] - 0.8).abs() < 1e-15);
        let uniform = NaiveBayesModel {
            features: vec!["x".into(), "y".into()],
            priors: [0.5, 0.5],
            conditionals: vec![[vec![0.5, 0.5], vec![0.5, 0.5]]; 2],
        };
        assert_eq!(nb_posterior(&uniform, &[0, 1]).unwrap(), [0.5, 0.5]);
        assert!(matches!(nb_posterior(&m, &[0, 0]), Err(Error::DimensionMismatch { .. })));
    }

    fn random_ds(seed: u64, n: usize, cards: &[usize]) -> DiscreteDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<usize>> = (0..n)
            .map(|_| cards.iter().map(|&c| rng.random_range(0..c)).collect())
            .collect();
        let labels = rows
            .iter()
            .map(|r| u8::from(r[0] + rng.random_range(0..2) >= cards[0]))
            .collect();
        let names: Vec<String> = (0..cards.len()).map(|i| format!("f{i}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let mut d = ds(&names, cards, rows, labels);
        d.labels[0] = 0;
        d.labels[1] = 1;
        d
    }

    #[test]
    fn naive_bayes_equals_star_network() {
        for seed in 0..20 {
            let cards = [3, 2, 4];
            let data = random_ds(seed, 200, &cards);
            let nb = fit_naive_bayes(&data, 1.0).unwrap();
            let star = dag(&["f0", "f1", "f2", "outage"], &[(3, 0), (3, 1), (3, 2)]);
            let bn = fit_cpts(&star, &data, 1.0).unwrap();
            for row in data.rows.iter().take(30) {
                let ev: BTreeMap<usize, usize> = row.iter().copied().enumerate().collect();
                let a = posterior_target(&bn, &ev).unwrap();
                let b = nb_posterior(&nb, row).unwrap();
                assert!((a[1] - b[1]).abs() < 1e-12, "{a:?} vs {b:?}");
            }
        }
    }

    proptest! {
        #[test]
        fn rows_normalized_and_smoothing_monotone(seed in any::<u64>(), a1 in 0.01f64..5.0, bump in 0.0f64..5.0) {
            let cards = [3, 2, 4];
            let data = random_ds(seed, 60, &cards);
            let d = dag(&["f0", "f1", "f2", "outage"], &[(0, 1), (0, 3), (1, 3), (2, 3)]);
            let lo = fit_cpts(&d, &data, a1).unwrap();
            let hi = fit_cpts(&d, &data, a1 + bump).unwrap();
            lo.validate(1e-12).unwrap();
            for (cl, ch) in lo.cpts.iter().zip(&hi.cpts) {
                let u = 1.0 / cl.card as f64;
                for (rl, rh) in cl.table.iter().zip(&ch.table) {
                    prop_assert!((rl.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    for (pl, ph) in rl.iter().zip(rh) {
                        prop_assert!((ph - u).abs() <= (pl - u).abs() + 1e-15);
                    }
                }
            }
            let post = posterior_target(&lo, &BTreeMap::from([(2, 1)])).unwrap();
            prop_assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
