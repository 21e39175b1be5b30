//! PC structure learning: skeleton search, v-structure orientation,
//! orientation propagation, completion to a DAG and target augmentation.

use std::collections::{BTreeMap, BTreeSet};

use log::{debug, warn};

use crate::citest::CiTest;
use crate::dag::{EdgeOrigin, LearnedDag};
use crate::error::{Error, Result};

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Mixed graph during PC. Undirected pairs are stored as `(min, max)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialGraph {
    pub nodes: Vec<String>,
    pub undirected: BTreeSet<(usize, usize)>,
    pub directed: BTreeSet<(usize, usize)>,
    pub sepsets: BTreeMap<(usize, usize), Vec<usize>>,
    /// Rule that oriented each directed edge.
    pub origins: BTreeMap<(usize, usize), EdgeOrigin>,
}

impl PartialGraph {
    pub fn complete(nodes: Vec<String>) -> Self {
        let n = nodes.len();
        let undirected = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        PartialGraph {
            nodes,
            undirected,
            directed: BTreeSet::new(),
            sepsets: BTreeMap::new(),
            origins: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_undirected(&self, a: usize, b: usize) -> bool {
        self.undirected.contains(&key(a, b))
    }

    pub fn has_directed(&self, a: usize, b: usize) -> bool {
        self.directed.contains(&(a, b))
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.is_undirected(a, b) || self.has_directed(a, b) || self.has_directed(b, a)
    }

    /// All nodes adjacent to `a` by any edge, ascending.
    pub fn neighbors(&self, a: usize) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&b| b != a && self.adjacent(a, b)).collect()
    }

    pub fn skeleton(&self) -> Vec<(usize, usize)> {
        let mut s: Vec<(usize, usize)> = self
            .undirected
            .iter()
            .copied()
            .chain(self.directed.iter().map(|&(a, b)| key(a, b)))
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn sepset(&self, a: usize, b: usize) -> Option<&[usize]> {
        self.sepsets.get(&key(a, b)).map(Vec::as_slice)
    }

    fn remove_edge(&mut self, a: usize, b: usize) {
        self.undirected.remove(&key(a, b));
        self.directed.remove(&(a, b));
        self.directed.remove(&(b, a));
    }

    /// Whether `to` is reachable from `from` along directed edges.
    fn directed_path(&self, from: usize, to: usize) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            if std::mem::replace(&mut seen[v], true) {
                continue;
            }
            stack.extend(self.directed.range((v, 0)..(v + 1, 0)).map(|&(_, c)| c));
        }
        false
    }

    fn orient(&mut self, a: usize, b: usize, origin: EdgeOrigin) -> Orientation {
        if self.has_directed(a, b) {
            Orientation::AlreadyOriented
        } else if self.has_directed(b, a) {
            Orientation::Conflict
        } else if self.undirected.remove(&key(a, b)) {
            self.directed.insert((a, b));
            self.origins.insert((a, b), origin);
            Orientation::Oriented
        } else {
            Orientation::NotAdjacent
        }
    }

    /// Checks the edge-set invariants.
    pub fn validate(&self) -> Result<()> {
        for &(a, b) in &self.directed {
            if self.undirected.contains(&key(a, b)) || self.directed.contains(&(b, a)) {
                return Err(Error::Graph(format!("pair ({a}, {b}) carries two edge marks")));
            }
        }
        if let Some((&(a, b), _)) = self.sepsets.iter().find(|(&(a, b), _)| self.adjacent(a, b)) {
            return Err(Error::Graph(format!("sepset recorded for adjacent pair ({a}, {b})")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Orientation {
    Oriented,
    AlreadyOriented,
    Conflict,
    NotAdjacent,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SkeletonOptions {
    /// Largest conditioning-set size tried; `None` means unlimited.
    pub max_depth: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SkeletonStats {
    /// Number of CI tests run at each depth.
    pub tests_per_depth: Vec<usize>,
}

impl SkeletonStats {
    pub fn total_tests(&self) -> usize {
        self.tests_per_depth.iter().sum()
    }
}

/// Calls `f` with every `k`-subset of `items`, in lexicographic order, until
/// it returns `true`.
fn any_subset(items: &[usize], k: usize, mut f: impl FnMut(&[usize]) -> Result<bool>) -> Result<bool> {
    if k > items.len() {
        return Ok(false);
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf = vec![0; k];
    loop {
        for (slot, &i) in buf.iter_mut().zip(&idx) {
            *slot = items[i];
        }
        if f(&buf)? {
            return Ok(true);
        }
        // Rightmost position that can still move right.
        let Some(pos) = (0..k).rev().find(|&p| idx[p] < items.len() - k + p) else {
            return Ok(false);
        };
        idx[pos] += 1;
        for q in pos + 1..k {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

/// Skeleton search from the complete graph.
///
/// At depth `n` every remaining edge `x - y` is tested against each size-`n`
/// subset of `adj(x) \ {y}` and then of `adj(y) \ {x}`; the first
/// independence removes the edge and records the subset as its sepset.
/// Adjacencies are updated immediately. The search stops once no edge has an
/// endpoint with at least `n` other neighbours.
pub fn learn_skeleton(
    nodes: Vec<String>,
    test: &dyn CiTest,
    opts: &SkeletonOptions,
) -> Result<(PartialGraph, SkeletonStats)> {
    if nodes.len() < 2 {
        return Err(Error::InvalidArgument("structure learning needs at least two variables".into()));
    }
    if test.n_vars() != nodes.len() {
        return Err(Error::DimensionMismatch {
            expected: nodes.len(),
            actual: test.n_vars(),
        });
    }
    let mut g = PartialGraph::complete(nodes);
    let mut stats = SkeletonStats::default();
    let mut depth = 0usize;
    loop {
        if opts.max_depth.is_some_and(|m| depth > m) {
            break;
        }
        let eligible = g.skeleton().into_iter().any(|(a, b)| {
            g.neighbors(a).len() > depth || g.neighbors(b).len() > depth
        });
        if !eligible {
            break;
        }
        let mut tests = 0usize;
        for (a, b) in g.skeleton() {
            if !g.adjacent(a, b) {
                continue;
            }
            let mut tried: BTreeSet<Vec<usize>> = BTreeSet::new();
            for (x, y) in [(a, b), (b, a)] {
                let adj: Vec<usize> = g.neighbors(x).into_iter().filter(|&v| v != y).collect();
                let mut found: Option<Vec<usize>> = None;
                any_subset(&adj, depth, |s| {
                    if !tried.insert(s.to_vec()) {
                        return Ok(false);
                    }
                    tests += 1;
                    if test.is_independent(a, b, s)? {
                        found = Some(s.to_vec());
                        return Ok(true);
                    }
                    Ok(false)
                })?;
                if let Some(s) = found {
                    debug!("removed {}-{} given {:?}", g.nodes[a], g.nodes[b], s);
                    g.remove_edge(a, b);
                    g.sepsets.insert(key(a, b), s);
                    break;
                }
            }
        }
        stats.tests_per_depth.push(tests);
        depth += 1;
    }
    Ok((g, stats))
}

/// Orients every unshielded triple `x - z - y` whose sepset lacks `z` as
/// `x -> z <- y`. Triples are visited by middle node then by `(x, y)`; when
/// two triples demand opposite directions the first one stands.
pub fn orient_v_structures(g: &PartialGraph) -> Result<PartialGraph> {
    let mut out = g.clone();
    for z in 0..g.len() {
        let adj = g.neighbors(z);
        for (p, &x) in adj.iter().enumerate() {
            for &y in &adj[p + 1..] {
                if g.adjacent(x, y) {
                    continue;
                }
                let sep = g.sepset(x, y).ok_or_else(|| {
                    Error::Graph(format!(
                        "no sepset for non-adjacent pair ({}, {})",
                        g.nodes[x], g.nodes[y]
                    ))
                })?;
                if sep.contains(&z) {
                    continue;
                }
                for from in [x, y] {
                    if out.orient(from, z, EdgeOrigin::VStructure) == Orientation::Conflict {
                        warn!(
                            "v-structure conflict on {}-{}: keeping {} -> {}",
                            g.nodes[from], g.nodes[z], g.nodes[z], g.nodes[from]
                        );
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Applies, to a fixpoint and in ascending pair order:
/// - `w -> x`, `x - y`, `w` and `y` non-adjacent: orient `x -> y`;
/// - `x -> w -> y` with `x - y`: orient `x -> y`.
///
/// An orientation that would close a directed cycle is skipped.
pub fn propagate_orientations(g: &PartialGraph) -> PartialGraph {
    let mut out = g.clone();
    loop {
        let mut changed = false;
        let pending: Vec<(usize, usize)> = out.undirected.iter().copied().collect();
        for (a, b) in pending {
            if !out.is_undirected(a, b) {
                continue;
            }
            for (x, y) in [(a, b), (b, a)] {
                let into_x = (0..out.len()).any(|w| out.has_directed(w, x) && !out.adjacent(w, y));
                let through = (0..out.len()).any(|w| out.has_directed(x, w) && out.has_directed(w, y));
                if !(into_x || through) {
                    continue;
                }
                if out.directed_path(y, x) {
                    debug!("skipped {} -> {}: would close a cycle", out.nodes[x], out.nodes[y]);
                    continue;
                }
                out.orient(x, y, EdgeOrigin::Propagation);
                changed = true;
                break;
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Turns the partial graph into a DAG over the same nodes.
///
/// Directed edges are kept (reversed if they would close a cycle), leftover
/// undirected edges go from the earlier to the later node in input order
/// (again reversed on a cycle), and every childless non-target node that
/// is not adjacent to the target gains an edge into the target. A childless
/// node that descends from the target is left alone.
pub fn complete_to_dag(g: &PartialGraph, target: usize) -> Result<LearnedDag> {
    if target >= g.len() {
        return Err(Error::UnknownNode(format!("#{target}")));
    }
    let mut dag = LearnedDag::empty(g.nodes.clone());
    let place = |dag: &mut LearnedDag, a: usize, b: usize, origin: EdgeOrigin| -> Result<()> {
        if dag.reaches(b, a) {
            warn!("reversed {} -> {} to keep the graph acyclic", g.nodes[a], g.nodes[b]);
            dag.add_edge(b, a, Some(origin))
        } else {
            dag.add_edge(a, b, Some(origin))
        }
    };
    for &(a, b) in &g.directed {
        let origin = g.origins.get(&(a, b)).copied().unwrap_or(EdgeOrigin::Propagation);
        place(&mut dag, a, b, origin)?;
    }
    for &(a, b) in &g.undirected {
        place(&mut dag, a, b, EdgeOrigin::CanonicalFill)?;
    }

    let children = dag.children();
    for (v, kids) in children.iter().enumerate() {
        if v == target || !kids.is_empty() || dag.has_edge(target, v) {
            continue;
        }
        if dag.reaches(target, v) {
            debug!("{} descends from the target; not augmented", g.nodes[v]);
            continue;
        }
        dag.add_edge(v, target, Some(EdgeOrigin::TargetAugmented))?;
    }
    debug_assert!(dag.is_acyclic());
    Ok(dag)
}

#[derive(Debug, Clone)]
pub struct PcOutcome {
    /// Graph after v-structure orientation and propagation.
    pub pattern: PartialGraph,
    pub dag: LearnedDag,
    pub stats: SkeletonStats,
}

/// Full PC run followed by DAG completion towards `target`.
pub fn pc(
    nodes: Vec<String>,
    test: &dyn CiTest,
    opts: &SkeletonOptions,
    target: usize,
) -> Result<PcOutcome> {
    let (skeleton, stats) = learn_skeleton(nodes, test, opts)?;
    let pattern = propagate_orientations(&orient_v_structures(&skeleton)?);
    let dag = complete_to_dag(&pattern, target)?;
    Ok(PcOutcome { pattern, dag, stats })
}
