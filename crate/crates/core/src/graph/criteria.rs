//! Back-door, front-door and conditional front-door (CFD) criteria.
//!
//! Each clause is checked on the full graph, latent nodes included. Which
//! nodes count as observed is left to the caller. A conditioning set `W`
//! is not required to be pre-treatment: the three CFD clauses are checked
//! exactly as stated, so a `W` containing descendants of the treatment is
//! accepted whenever the clauses hold.

use std::collections::VecDeque;

use super::{Dag, GraphError, NodeSet, Result};

pub(super) const MAX_SEARCH_CANDIDATES: usize = 20;

/// True if some path that starts with an edge into `source` reaches a node in
/// `targets` while unblocked by `given`. Colliders are open when they or one
/// of their descendants (in the unmodified graph) are in `given`.
fn open_backdoor_path(dag: &Dag, source: usize, targets: &[usize], given: &[usize]) -> bool {
    let n = dag.len();
    let mut in_given = vec![false; n];
    for &g in given {
        in_given[g] = true;
    }
    let mut opens_collider = dag.ancestors_mask(given);
    for &g in given {
        opens_collider[g] = true;
    }
    let mut is_target = vec![false; n];
    for &t in targets {
        is_target[t] = true;
    }

    let mut visited = vec![[false; 2]; n];
    visited[source] = [true, true];
    let mut stack: Vec<(usize, usize)> = dag.parents_idx(source).iter().map(|&p| (p, 0)).collect();
    while let Some((v, dir)) = stack.pop() {
        if visited[v][dir] {
            continue;
        }
        visited[v][dir] = true;
        if is_target[v] && !in_given[v] {
            return true;
        }
        if dir == 0 {
            if !in_given[v] {
                stack.extend(dag.parents_idx(v).iter().map(|&p| (p, 0)));
                stack.extend(dag.children_idx(v).iter().map(|&c| (c, 1)));
            }
        } else {
            if !in_given[v] {
                stack.extend(dag.children_idx(v).iter().map(|&c| (c, 1)));
            }
            if opens_collider[v] {
                stack.extend(dag.parents_idx(v).iter().map(|&p| (p, 0)));
            }
        }
    }
    false
}

/// True if every directed path from `t` to `y` passes through `mediators`.
fn intercepts_directed_paths(dag: &Dag, t: usize, y: usize, mediators: &[usize]) -> bool {
    let mut seen = vec![false; dag.len()];
    for &m in mediators {
        seen[m] = true;
    }
    seen[t] = true;
    let mut queue = VecDeque::from([t]);
    while let Some(v) = queue.pop_front() {
        for &c in dag.children_idx(v) {
            if c == y {
                return false;
            }
            if !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    true
}

struct Roles {
    t: usize,
    y: usize,
    z: Vec<usize>,
    w: Vec<usize>,
}

fn resolve_roles(dag: &Dag, t: &str, y: &str, z: &NodeSet, w: &NodeSet) -> Result<Roles> {
    let ti = dag.index_of(t)?;
    let yi = dag.index_of(y)?;
    let zi = dag.resolve(z)?;
    let wi = dag.resolve(w)?;
    if ti == yi {
        return Err(GraphError::Overlap(t.to_string()));
    }
    for name in [t, y] {
        if z.contains(name) || w.contains(name) {
            return Err(GraphError::Overlap(name.to_string()));
        }
    }
    if let Some(n) = z.iter().find(|n| w.contains(n)) {
        return Err(GraphError::Overlap(n.to_string()));
    }
    Ok(Roles {
        t: ti,
        y: yi,
        z: zi,
        w: wi,
    })
}

/// Back-door criterion: no node of `adjust` descends from `t`, and `adjust`
/// blocks every path between `t` and `y` that starts with an arrow into `t`.
pub fn is_backdoor_set(dag: &Dag, t: &str, y: &str, adjust: &NodeSet) -> Result<bool> {
    let r = resolve_roles(dag, t, y, adjust, &NodeSet::new())?;
    let desc = dag.descendants_mask(&[r.t]);
    if r.z.iter().any(|&z| desc[z]) {
        return Ok(false);
    }
    Ok(!open_backdoor_path(dag, r.t, &[r.y], &r.z))
}

/// Standard front-door criterion for mediator set `mediators`.
pub fn is_frontdoor_set(dag: &Dag, t: &str, y: &str, mediators: &NodeSet) -> Result<bool> {
    is_cfd_set(dag, t, y, mediators, &NodeSet::new())
}

/// Conditional front-door criterion:
///
/// 1. `mediators` intercepts every directed path from `t` to `y`;
/// 2. every back-door path from `t` to `mediators` is blocked by `conditioning`;
/// 3. every back-door path from `mediators` to `y` is blocked by
///    `{t} ∪ conditioning`.
///
/// With an empty conditioning set this is the standard front-door criterion.
pub fn is_cfd_set(
    dag: &Dag,
    t: &str,
    y: &str,
    mediators: &NodeSet,
    conditioning: &NodeSet,
) -> Result<bool> {
    let r = resolve_roles(dag, t, y, mediators, conditioning)?;
    Ok(cfd_holds(dag, &r))
}

fn cfd_holds(dag: &Dag, r: &Roles) -> bool {
    if !intercepts_directed_paths(dag, r.t, r.y, &r.z) {
        return false;
    }
    if !r.z.is_empty() && open_backdoor_path(dag, r.t, &r.z, &r.w) {
        return false;
    }
    let mut given = r.w.clone();
    given.push(r.t);
    r.z.iter()
        .all(|&z| !open_backdoor_path(dag, z, &[r.y], &given))
}

/// All minimal conditioning sets `W ⊆ observed` for which `mediators`
/// satisfies the CFD criterion, ordered by size and then lexicographically.
///
/// Members of `observed` that coincide with `t`, `y` or a mediator are not
/// candidates.
pub fn find_cfd_conditioning_sets(
    dag: &Dag,
    t: &str,
    y: &str,
    mediators: &NodeSet,
    observed: &NodeSet,
) -> Result<Vec<NodeSet>> {
    let base = resolve_roles(dag, t, y, mediators, &NodeSet::new())?;
    let candidates: Vec<&str> = observed
        .iter()
        .filter(|n| *n != t && *n != y && !mediators.contains(n))
        .collect();
    let idx = candidates
        .iter()
        .map(|n| dag.index_of(n))
        .collect::<Result<Vec<_>>>()?;
    dag.resolve(observed)?;
    if candidates.len() > MAX_SEARCH_CANDIDATES {
        return Err(GraphError::SearchTooLarge(candidates.len()));
    }

    let k = candidates.len();
    let mut found: Vec<u32> = Vec::new();
    let mut out = Vec::new();
    for size in 0..=k {
        // subsets of one size in lexicographic order of their sorted members
        let mut level: Vec<u32> = (0u32..(1u32 << k))
            .filter(|m| m.count_ones() as usize == size)
            .collect();
        level.sort_by_key(|m| (0..k).filter(|i| m & (1 << i) != 0).collect::<Vec<_>>());
        for mask in level {
            if found.iter().any(|f| f & mask == *f) {
                continue;
            }
            let roles = Roles {
                t: base.t,
                y: base.y,
                z: base.z.clone(),
                w: (0..k).filter(|i| mask & (1 << i) != 0).map(|i| idx[i]).collect(),
            };
            if cfd_holds(dag, &roles) {
                found.push(mask);
                out.push(
                    (0..k)
                        .filter(|i| mask & (1 << i) != 0)
                        .map(|i| candidates[i])
                        .collect(),
                );
            }
        }
    }
    Ok(out)
}
