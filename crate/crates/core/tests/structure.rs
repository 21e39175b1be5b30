use std::collections::BTreeSet;

use pcoutage::citest::{d_separated, DSeparationOracle};
use pcoutage::dag::{EdgeOrigin, LearnedDag};
use pcoutage::pcalg::{learn_skeleton, pc, SkeletonOptions};
use pcoutage::synthgen::random_dag;

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("X{i}")).collect()
}

fn descendants_or_self(dag: &LearnedDag, v: usize) -> BTreeSet<usize> {
    let children = dag.children();
    let mut seen = BTreeSet::new();
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        if seen.insert(u) {
            stack.extend(children[u].iter().copied());
        }
    }
    seen
}

/// Path-enumeration definition of d-separation.
fn brute_d_separated(dag: &LearnedDag, i: usize, j: usize, z: &BTreeSet<usize>) -> bool {
    let n = dag.len();
    let adj = |a: usize, b: usize| dag.has_edge(a, b) || dag.has_edge(b, a);
    fn walk(
        path: &mut Vec<usize>,
        j: usize,
        n: usize,
        adj: &dyn Fn(usize, usize) -> bool,
        open: &mut dyn FnMut(&[usize]) -> bool,
    ) -> bool {
        let last = *path.last().unwrap();
        if last == j {
            return open(path);
        }
        for next in 0..n {
            if adj(last, next) && !path.contains(&next) {
                path.push(next);
                if walk(path, j, n, adj, open) {
                    return true;
                }
                path.pop();
            }
        }
        false
    }
    let mut open = |p: &[usize]| {
        p.windows(3).all(|w| {
            let (a, m, b) = (w[0], w[1], w[2]);
            let collider = dag.has_edge(a, m) && dag.has_edge(b, m);
            if collider {
                descendants_or_self(dag, m).iter().any(|d| z.contains(d))
            } else {
                !z.contains(&m)
            }
        })
    };
    !walk(&mut vec![i], j, n, &adj, &mut open)
}

#[test]
fn d_separation_matches_path_enumeration() {
    for seed in 0..120u64 {
        let n = 3 + (seed % 4) as usize;
        let dag = random_dag(n, 0.45, seed).unwrap();
        for i in 0..n {
            for j in i + 1..n {
                for mask in 0u32..(1 << n) {
                    if mask & (1 << i) != 0 || mask & (1 << j) != 0 {
                        continue;
                    }
                    let z: BTreeSet<usize> = (0..n).filter(|&k| mask & (1 << k) != 0).collect();
                    let zv: Vec<usize> = z.iter().copied().collect();
                    assert_eq!(
                        d_separated(&dag, i, j, &zv).unwrap(),
                        brute_d_separated(&dag, i, j, &z),
                        "seed {seed} pair ({i},{j}) cond {zv:?}"
                    );
                }
            }
        }
    }
}

#[test]
fn oracle_collider_and_chain() {
    let collider = LearnedDag::from_edges(names(3), &[(0, 2), (1, 2)]).unwrap();
    let (g, _) = learn_skeleton(names(3), &DSeparationOracle { dag: &collider }, &SkeletonOptions::default()).unwrap();
    assert_eq!(g.skeleton(), vec![(0, 2), (1, 2)]);
    assert_eq!(g.sepset(0, 1), Some(&[][..]));

    let chain = LearnedDag::from_edges(names(3), &[(0, 1), (1, 2)]).unwrap();
    let (g, _) = learn_skeleton(names(3), &DSeparationOracle { dag: &chain }, &SkeletonOptions::default()).unwrap();
    assert_eq!(g.skeleton(), vec![(0, 1), (1, 2)]);
    assert_eq!(g.sepset(0, 2), Some(&[1][..]));
}

#[test]
fn depth_zero_tests_every_pair_once() {
    for n in 2..7 {
        let dag = LearnedDag::empty(names(n));
        let (_, stats) = learn_skeleton(names(n), &DSeparationOracle { dag: &dag }, &SkeletonOptions::default()).unwrap();
        assert_eq!(stats.tests_per_depth[0], n * (n - 1) / 2);
    }
}

#[test]
fn max_depth_limits_conditioning() {
    // X0 -> X1 -> X2 needs a depth-1 test to drop X0 - X2.
    let chain = LearnedDag::from_edges(names(3), &[(0, 1), (1, 2)]).unwrap();
    let oracle = DSeparationOracle { dag: &chain };
    let opts = SkeletonOptions { max_depth: Some(0) };
    let (g, _) = learn_skeleton(names(3), &oracle, &opts).unwrap();
    assert_eq!(g.skeleton().len(), 3);
}

#[test]
fn completed_dags_are_acyclic_with_augmentation_only_from_childless_nodes() {
    for seed in 0..150u64 {
        let dag = random_dag(6, 0.35, seed).unwrap();
        let target = (seed % 6) as usize;
        let out = pc(dag.nodes.clone(), &DSeparationOracle { dag: &dag }, &SkeletonOptions::default(), target).unwrap();
        let learned = &out.dag;
        assert!(learned.is_acyclic());
        for (&(a, b), origin) in &learned.provenance {
            if *origin == EdgeOrigin::TargetAugmented {
                assert_eq!(b, target);
                // Augmented nodes had no children before augmentation.
                assert!(learned.children()[a] == vec![target]);
                assert!(!out.pattern.adjacent(a, target));
            }
        }
        // Every non-target node ends with a child unless it descends from the target.
        let children = learned.children();
        for v in (0..learned.len()).filter(|&v| v != target) {
            assert!(!children[v].is_empty() || learned.reaches(target, v) || learned.has_edge(target, v));
        }
    }
}
