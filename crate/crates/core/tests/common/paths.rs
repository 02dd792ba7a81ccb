//! Brute-force graph oracles: enumerate every simple path and test blocking
//! one path at a time. Deliberately independent of the library's
//! reachability-based implementation.

use cfdivae::graph::{Dag, NodeSet, Path, Step};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn simple_paths(dag: &Dag, from: &str, to: &str) -> Vec<Path> {
    fn dfs(
        dag: &Dag,
        to: &str,
        nodes: &mut Vec<String>,
        steps: &mut Vec<Step>,
        out: &mut Vec<Path>,
    ) {
        let cur = nodes.last().unwrap().clone();
        if cur == to {
            out.push(Path::new(dag, nodes.clone(), steps.clone()).unwrap());
            return;
        }
        let mut next: Vec<(String, Step)> = Vec::new();
        for c in dag.children(&cur).unwrap() {
            next.push((c.to_string(), Step::Forward));
        }
        for p in dag.parents(&cur).unwrap() {
            next.push((p.to_string(), Step::Backward));
        }
        for (n, s) in next {
            if nodes.contains(&n) {
                continue;
            }
            nodes.push(n);
            steps.push(s);
            dfs(dag, to, nodes, steps, out);
            nodes.pop();
            steps.pop();
        }
    }
    let mut out = Vec::new();
    dfs(dag, to, &mut vec![from.to_string()], &mut Vec::new(), &mut out);
    out
}

/// Blocking of a single path by `given`, straight from the definition: a
/// non-collider in `given`, or a collider that is neither in `given` nor has
/// a descendant in it.
pub fn path_blocked(dag: &Dag, path: &Path, given: &NodeSet) -> bool {
    let nodes = path.nodes();
    let steps = path.steps();
    for i in 1..nodes.len().saturating_sub(1) {
        let m = &nodes[i];
        let collider = steps[i - 1] == Step::Forward && steps[i] == Step::Backward;
        if collider {
            let desc = dag.descendants(m).unwrap();
            if !given.contains(m) && !given.iter().any(|g| desc.contains(g)) {
                return true;
            }
        } else if given.contains(m) {
            return true;
        }
    }
    false
}

pub fn d_separated_oracle(dag: &Dag, a: &NodeSet, b: &NodeSet, given: &NodeSet) -> bool {
    a.iter().all(|x| {
        b.iter().all(|y| {
            simple_paths(dag, x, y)
                .iter()
                .all(|p| path_blocked(dag, p, given))
        })
    })
}

fn backdoor_paths_blocked(dag: &Dag, from: &str, to: &str, given: &NodeSet) -> bool {
    simple_paths(dag, from, to)
        .iter()
        .filter(|p| p.starts_with_arrow_in())
        .all(|p| path_blocked(dag, p, given))
}

pub fn backdoor_oracle(dag: &Dag, t: &str, y: &str, z: &NodeSet) -> bool {
    let desc = dag.descendants(t).unwrap();
    z.iter().all(|n| !desc.contains(n)) && backdoor_paths_blocked(dag, t, y, z)
}

pub fn cfd_oracle(dag: &Dag, t: &str, y: &str, z: &NodeSet, w: &NodeSet) -> bool {
    let intercepts = simple_paths(dag, t, y)
        .iter()
        .filter(|p| p.is_directed())
        .all(|p| p.nodes().iter().any(|n| z.contains(n)));
    if !intercepts {
        return false;
    }
    let clause2 = z.iter().all(|m| backdoor_paths_blocked(dag, t, m, w));
    let mut tw = w.clone();
    tw.insert(t);
    let clause3 = z.iter().all(|m| backdoor_paths_blocked(dag, m, y, &tw));
    clause2 && clause3
}

/// Random DAG on `n` nodes named `V0..`: edges follow a random topological
/// order, each present with probability `p`.
pub fn random_dag<R: Rng>(rng: &mut R, n: usize, p: f64) -> Dag {
    let names: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((names[order[i]].clone(), names[order[j]].clone()));
            }
        }
    }
    Dag::new(names.clone(), edges).unwrap()
}
