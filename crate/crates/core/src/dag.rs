//! Directed acyclic graphs over named variables.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How an edge of a learned DAG got its direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeOrigin {
    VStructure,
    Propagation,
    CanonicalFill,
    TargetAugmented,
}

impl EdgeOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeOrigin::VStructure => "v-structure",
            EdgeOrigin::Propagation => "propagation",
            EdgeOrigin::CanonicalFill => "canonical-fill",
            EdgeOrigin::TargetAugmented => "target-augmented",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearnedDag {
    pub nodes: Vec<String>,
    /// Sorted parent indices per node.
    pub parents: Vec<Vec<usize>>,
    /// Keyed by `(from, to)`. Edges from generators carry no provenance.
    pub provenance: BTreeMap<(usize, usize), EdgeOrigin>,
}

impl LearnedDag {
    pub fn empty(nodes: Vec<String>) -> Self {
        let n = nodes.len();
        LearnedDag {
            nodes,
            parents: vec![Vec::new(); n],
            provenance: BTreeMap::new(),
        }
    }

    /// Builds a DAG from an edge list, rejecting cycles and self-loops.
    pub fn from_edges(nodes: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut dag = LearnedDag::empty(nodes);
        for &(a, b) in edges {
            dag.add_edge(a, b, None)?;
        }
        dag.topological_order()?;
        Ok(dag)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to].binary_search(&from).is_ok()
    }

    pub(crate) fn add_edge(&mut self, from: usize, to: usize, origin: Option<EdgeOrigin>) -> Result<()> {
        let n = self.nodes.len();
        if from >= n || to >= n {
            return Err(Error::Graph(format!("edge {from}->{to} out of range for {n} nodes")));
        }
        if from == to {
            return Err(Error::Graph(format!("self-loop on `{}`", self.nodes[from])));
        }
        let ps = &mut self.parents[to];
        if let Err(pos) = ps.binary_search(&from) {
            ps.insert(pos, from);
        }
        if let Some(o) = origin {
            self.provenance.insert((from, to), o);
        }
        Ok(())
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(child, ps)| ps.iter().map(move |&p| (p, child)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut ch = vec![Vec::new(); self.nodes.len()];
        for (c, ps) in self.parents.iter().enumerate() {
            for &p in ps {
                ch[p].push(c);
            }
        }
        ch
    }

    /// Kahn's algorithm, smallest available index first.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.nodes.len();
        let children = self.children();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: std::collections::BTreeSet<usize> =
            (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() != n {
            return Err(Error::Graph("graph contains a directed cycle".into()));
        }
        Ok(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_ok()
    }

    /// Whether `to` is reachable from `from` along directed edges.
    pub fn reaches(&self, from: usize, to: usize) -> bool {
        let children = self.children();
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            stack.extend(children[v].iter().copied());
        }
        false
    }

    /// Nodes in `seeds` plus all their ancestors.
    pub fn ancestral_closure(&self, seeds: &[usize]) -> Vec<bool> {
        let mut mark = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = seeds.to_vec();
        while let Some(v) = stack.pop() {
            if std::mem::replace(&mut mark[v], true) {
                continue;
            }
            stack.extend(self.parents[v].iter().copied());
        }
        mark
    }

    /// Undirected edge set as sorted `(min, max)` pairs.
    pub fn skeleton(&self) -> Vec<(usize, usize)> {
        let mut s: Vec<(usize, usize)> = self.edges().into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Unshielded colliders `(a, c, b)` with `a < b`, meaning `a -> c <- b`
    /// and `a`, `b` non-adjacent.
    pub fn v_structures(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for (c, ps) in self.parents.iter().enumerate() {
            for (i, &a) in ps.iter().enumerate() {
                for &b in &ps[i + 1..] {
                    if !self.has_edge(a, b) && !self.has_edge(b, a) {
                        out.push((a, c, b));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Graphviz rendering. Target-augmented edges are dashed, all others solid.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph learned {\n");
        for name in &self.nodes {
            let _ = writeln!(s, "  \"{}\";", escape(name));
        }
        for (a, b) in self.edges() {
            let origin = self.provenance.get(&(a, b));
            let style = if origin == Some(&EdgeOrigin::TargetAugmented) {
                "dashed"
            } else {
                "solid"
            };
            let label = origin.map_or("", |o| o.as_str());
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [style={style}, label=\"{label}\"];",
                escape(&self.nodes[a]),
                escape(&self.nodes[b])
            );
        }
        s.push_str("}\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("X{i}")).collect()
    }

    #[test]
    fn rejects_cycles() {
        assert!(LearnedDag::from_edges(names(3), &[(0, 1), (1, 2), (2, 0)]).is_err());
        assert!(LearnedDag::from_edges(names(2), &[(0, 0)]).is_err());
    }

    #[test]
    fn v_structures_and_skeleton() {
        let d = LearnedDag::from_edges(names(4), &[(0, 2), (1, 2), (2, 3), (0, 3)]).unwrap();
        assert_eq!(d.v_structures(), vec![(0, 2, 1)]);
        assert_eq!(d.skeleton(), vec![(0, 2), (0, 3), (1, 2), (2, 3)]);
        assert!(d.reaches(1, 3));
        assert!(!d.reaches(3, 1));
    }

    #[test]
    fn dot_marks_augmented_edges_dashed() {
        let mut d = LearnedDag::empty(names(3));
        d.add_edge(0, 1, Some(EdgeOrigin::VStructure)).unwrap();
        d.add_edge(2, 1, Some(EdgeOrigin::TargetAugmented)).unwrap();
        let dot = d.to_dot();
        assert!(dot.contains("\"X0\" -> \"X1\" [style=solid, label=\"v-structure\"]"));
        assert!(dot.contains("\"X2\" -> \"X1\" [style=dashed, label=\"target-augmented\"]"));
    }
}
