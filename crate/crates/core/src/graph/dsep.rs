use super::{Dag, GraphError, NodeSet, Result};

fn check_disjoint(sets: &[&NodeSet]) -> Result<()> {
    for (i, a) in sets.iter().enumerate() {
        for b in &sets[i + 1..] {
            if let Some(n) = a.iter().find(|n| b.contains(n)) {
                return Err(GraphError::Overlap(n.to_string()));
            }
        }
    }
    Ok(())
}

/// Returns true iff every path between a node of `a` and a node of `b` is
/// blocked by `given`.
///
/// Uses the reachability ("Bayes-ball") formulation: a path is active iff it
/// can be walked while passing through colliders that are in `given` or have a
/// descendant in it, and through non-colliders that are not in `given`.
pub fn d_separated(dag: &Dag, a: &NodeSet, b: &NodeSet, given: &NodeSet) -> Result<bool> {
    if a.is_empty() {
        return Err(GraphError::EmptySet("first argument of d_separated"));
    }
    if b.is_empty() {
        return Err(GraphError::EmptySet("second argument of d_separated"));
    }
    check_disjoint(&[a, b, given])?;
    let src = dag.resolve(a)?;
    let dst = dag.resolve(b)?;
    let cond = dag.resolve(given)?;

    let n = dag.len();
    let mut in_cond = vec![false; n];
    for &c in &cond {
        in_cond[c] = true;
    }
    // Nodes in `given` or with a descendant in `given`: colliders there are open.
    let mut opens_collider = dag.ancestors_mask(&cond);
    for &c in &cond {
        opens_collider[c] = true;
    }

    // visited[v][0]: reached from a child (travelling up),
    // visited[v][1]: reached from a parent (travelling down)
    let mut visited = vec![[false; 2]; n];
    let mut reachable = vec![false; n];
    let mut stack: Vec<(usize, usize)> = src.iter().map(|&s| (s, 0)).collect();
    while let Some((v, dir)) = stack.pop() {
        if visited[v][dir] {
            continue;
        }
        visited[v][dir] = true;
        if !in_cond[v] {
            reachable[v] = true;
        }
        if dir == 0 {
            if !in_cond[v] {
                stack.extend(dag.parents_idx(v).iter().map(|&p| (p, 0)));
                stack.extend(dag.children_idx(v).iter().map(|&c| (c, 1)));
            }
        } else {
            if !in_cond[v] {
                stack.extend(dag.children_idx(v).iter().map(|&c| (c, 1)));
            }
            if opens_collider[v] {
                stack.extend(dag.parents_idx(v).iter().map(|&p| (p, 0)));
            }
        }
    }
    Ok(dst.iter().all(|&d| !reachable[d]))
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::cfd_graph;
    use super::super::parse_dag;
    use super::*;

    fn set(names: &[&str]) -> NodeSet {
        names.iter().copied().collect()
    }

    #[test]
    fn chain_blocked_by_middle() {
        let g = parse_dag("A -> B\nB -> C").unwrap();
        assert!(d_separated(&g, &set(&["A"]), &set(&["C"]), &set(&["B"])).unwrap());
        assert!(!d_separated(&g, &set(&["A"]), &set(&["C"]), &NodeSet::new()).unwrap());
    }

    #[test]
    fn collider_opened_by_descendant() {
        let g = parse_dag("A -> C\nB -> C\nC -> D").unwrap();
        let (a, b) = (set(&["A"]), set(&["B"]));
        assert!(d_separated(&g, &a, &b, &NodeSet::new()).unwrap());
        assert!(!d_separated(&g, &a, &b, &set(&["C"])).unwrap());
        assert!(!d_separated(&g, &a, &b, &set(&["D"])).unwrap());
    }

    #[test]
    fn cfd_graph_queries() {
        let g = cfd_graph();
        assert!(d_separated(&g, &set(&["Z"]), &set(&["U"]), &set(&["T", "W"])).unwrap());
        assert!(!d_separated(&g, &set(&["T"]), &set(&["Y"]), &set(&["Z", "W"])).unwrap());
    }

    #[test]
    fn argument_validation() {
        let g = cfd_graph();
        assert!(matches!(
            d_separated(&g, &set(&["T"]), &set(&["T"]), &NodeSet::new()),
            Err(GraphError::Overlap(_))
        ));
        assert!(matches!(
            d_separated(&g, &set(&["T"]), &set(&["Y"]), &set(&["Y"])),
            Err(GraphError::Overlap(_))
        ));
        assert!(matches!(
            d_separated(&g, &NodeSet::new(), &set(&["Y"]), &NodeSet::new()),
            Err(GraphError::EmptySet(_))
        ));
        assert!(matches!(
            d_separated(&g, &set(&["Q"]), &set(&["Y"]), &NodeSet::new()),
            Err(GraphError::UnknownNode(_))
        ));
    }
}
