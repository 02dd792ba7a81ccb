//! Directed acyclic graphs over named variables, d-separation, graph
//! mutilation and the graphical adjustment criteria.

mod criteria;
mod dsep;
mod parse;

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

pub use criteria::{
    find_cfd_conditioning_sets, is_backdoor_set, is_cfd_set, is_frontdoor_set,
};
pub use dsep::d_separated;
pub use parse::parse_dag;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("graph contains a cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(String, String),
    #[error("self-loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("node sets must be pairwise disjoint; `{0}` appears twice")]
    Overlap(String),
    #[error("node set must not be empty: {0}")]
    EmptySet(&'static str),
    #[error("too many candidate nodes for exhaustive search ({0} > {max})", max = criteria::MAX_SEARCH_CANDIDATES)]
    SearchTooLarge(usize),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// A set of variable names. Iteration order is lexicographic.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeSet(BTreeSet<String>);

impl NodeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>) -> bool {
        self.0.insert(name.into())
    }

    pub fn remove(&mut self, name: &str) -> bool {
        self.0.remove(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains(name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        NodeSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn is_disjoint(&self, other: &NodeSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn is_subset(&self, other: &NodeSet) -> bool {
        self.0.is_subset(&other.0)
    }
}

impl<S: Into<String>> FromIterator<S> for NodeSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        NodeSet(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, n) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "}}")
    }
}

/// Direction in which an edge is traversed when walking along a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Step {
    /// `a -> b`
    Forward,
    /// `a <- b`
    Backward,
}

/// A simple path in the skeleton of a [`Dag`], with the orientation of every
/// edge it crosses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Path {
    nodes: Vec<String>,
    steps: Vec<Step>,
}

impl Path {
    /// Builds a path, checking that consecutive nodes are adjacent in `dag`
    /// with the stated orientation and that no node repeats.
    pub fn new(dag: &Dag, nodes: Vec<String>, steps: Vec<Step>) -> Result<Self> {
        if nodes.is_empty() || steps.len() + 1 != nodes.len() {
            return Err(GraphError::EmptySet("path"));
        }
        let mut seen = BTreeSet::new();
        for n in &nodes {
            dag.index_of(n)?;
            if !seen.insert(n.as_str()) {
                return Err(GraphError::Overlap(n.clone()));
            }
        }
        for (i, step) in steps.iter().enumerate() {
            let (a, b) = (&nodes[i], &nodes[i + 1]);
            let ok = match step {
                Step::Forward => dag.has_edge(a, b),
                Step::Backward => dag.has_edge(b, a),
            };
            if !ok {
                return Err(GraphError::UnknownNode(format!("{a}~{b}")));
            }
        }
        Ok(Self { nodes, steps })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// True when the path begins with an edge pointing into its first node.
    pub fn starts_with_arrow_in(&self) -> bool {
        matches!(self.steps.first(), Some(Step::Backward))
    }

    /// True when every edge points away from the first node.
    pub fn is_directed(&self) -> bool {
        self.steps.iter().all(|s| *s == Step::Forward)
    }
}

/// A directed acyclic graph over named variables.
///
/// Node order is declaration order; it is preserved by every operation that
/// returns a new graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl Dag {
    /// Builds a graph from declared nodes and `(parent, child)` edges.
    /// Nodes mentioned only in edges are appended in order of first mention.
    pub fn new<N, E, S>(nodes: N, edges: E) -> Result<Self>
    where
        N: IntoIterator<Item = S>,
        E: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut dag = Dag {
            names: Vec::new(),
            index: HashMap::new(),
            parents: Vec::new(),
            children: Vec::new(),
        };
        for n in nodes {
            let n = n.into();
            if dag.index.contains_key(&n) {
                return Err(GraphError::DuplicateNode(n));
            }
            dag.add_node(n);
        }
        for (a, b) in edges {
            let (a, b) = (a.into(), b.into());
            let ia = dag.intern(a);
            let ib = dag.intern(b);
            dag.add_edge_idx(ia, ib)?;
        }
        dag.check_acyclic()?;
        Ok(dag)
    }

    fn add_node(&mut self, name: String) -> usize {
        let i = self.names.len();
        self.index.insert(name.clone(), i);
        self.names.push(name);
        self.parents.push(Vec::new());
        self.children.push(Vec::new());
        i
    }

    fn intern(&mut self, name: String) -> usize {
        match self.index.get(&name) {
            Some(&i) => i,
            None => self.add_node(name),
        }
    }

    fn add_edge_idx(&mut self, a: usize, b: usize) -> Result<()> {
        if a == b {
            return Err(GraphError::SelfLoop(self.names[a].clone()));
        }
        if self.children[a].contains(&b) {
            return Err(GraphError::DuplicateEdge(
                self.names[a].clone(),
                self.names[b].clone(),
            ));
        }
        self.children[a].push(b);
        self.parents[b].push(a);
        Ok(())
    }

    fn check_acyclic(&self) -> Result<()> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let n = self.names.len();
        let mut state = vec![0u8; n];
        for root in 0..n {
            if state[root] != 0 {
                continue;
            }
            let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
            state[root] = 1;
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                if let Some(&c) = self.children[v].get(*next) {
                    *next += 1;
                    match state[c] {
                        0 => {
                            state[c] = 1;
                            stack.push((c, 0));
                        }
                        1 => {
                            let start = stack.iter().position(|&(u, _)| u == c).unwrap();
                            let mut cycle: Vec<String> = stack[start..]
                                .iter()
                                .map(|&(u, _)| self.names[u].clone())
                                .collect();
                            cycle.push(self.names[c].clone());
                            return Err(GraphError::Cycle(cycle));
                        }
                        _ => {}
                    }
                } else {
                    state[v] = 2;
                    stack.pop();
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn nodes(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(name.to_string()))
    }

    pub(crate) fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub(crate) fn parents_idx(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub(crate) fn children_idx(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    /// Edges as `(parent, child)` pairs, grouped by parent in node order.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (a, cs) in self.children.iter().enumerate() {
            for &b in cs {
                out.push((self.names[a].clone(), self.names[b].clone()));
            }
        }
        out
    }

    pub fn has_edge(&self, parent: &str, child: &str) -> bool {
        match (self.index.get(parent), self.index.get(child)) {
            (Some(&a), Some(&b)) => self.children[a].contains(&b),
            _ => false,
        }
    }

    /// Parents of `node` in declaration order of the edges.
    pub fn parents(&self, node: &str) -> Result<Vec<&str>> {
        let i = self.index_of(node)?;
        Ok(self.parents[i].iter().map(|&p| self.name(p)).collect())
    }

    pub fn children(&self, node: &str) -> Result<Vec<&str>> {
        let i = self.index_of(node)?;
        Ok(self.children[i].iter().map(|&c| self.name(c)).collect())
    }

    /// Nodes in a topological order (stable with respect to declaration order).
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        order
    }

    pub(crate) fn resolve(&self, set: &NodeSet) -> Result<Vec<usize>> {
        set.iter().map(|n| self.index_of(n)).collect()
    }

    fn reach(&self, seeds: &[usize], forward: bool) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut queue: VecDeque<usize> = seeds.iter().copied().collect();
        while let Some(v) = queue.pop_front() {
            let next = if forward { &self.children[v] } else { &self.parents[v] };
            for &u in next {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen
    }

    pub(crate) fn descendants_mask(&self, seeds: &[usize]) -> Vec<bool> {
        self.reach(seeds, true)
    }

    pub(crate) fn ancestors_mask(&self, seeds: &[usize]) -> Vec<bool> {
        self.reach(seeds, false)
    }

    fn mask_to_set(&self, mask: &[bool]) -> NodeSet {
        mask.iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| self.names[i].clone())
            .collect()
    }

    /// All nodes reachable from `node` along directed edges, excluding `node`.
    pub fn descendants(&self, node: &str) -> Result<NodeSet> {
        let i = self.index_of(node)?;
        Ok(self.mask_to_set(&self.descendants_mask(&[i])))
    }

    /// All nodes with a directed path into `node`, excluding `node`.
    pub fn ancestors(&self, node: &str) -> Result<NodeSet> {
        let i = self.index_of(node)?;
        Ok(self.mask_to_set(&self.ancestors_mask(&[i])))
    }

    /// Copy of the graph with every edge into `remove_incoming` and every edge
    /// out of `remove_outgoing` deleted.
    pub fn mutilate(&self, remove_incoming: &NodeSet, remove_outgoing: &NodeSet) -> Result<Dag> {
        let inc = self.resolve(remove_incoming)?;
        let out = self.resolve(remove_outgoing)?;
        let mut g = self.clone();
        for v in 0..g.len() {
            if inc.contains(&v) {
                g.parents[v].clear();
            } else {
                g.parents[v].retain(|p| !out.contains(p));
            }
            if out.contains(&v) {
                g.children[v].clear();
            } else {
                g.children[v].retain(|c| !inc.contains(c));
            }
        }
        Ok(g)
    }

    /// Renders the graph in the edge-list text format accepted by [`parse_dag`].
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.names.iter().enumerate() {
            if self.parents[i].is_empty() && self.children[i].is_empty() {
                out.push_str(&format!("node {name}\n"));
            }
        }
        for (a, b) in self.edges() {
            out.push_str(&format!("{a} -> {b}\n"));
        }
        out
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn set(names: &[&str]) -> NodeSet {
        names.iter().copied().collect()
    }

    #[test]
    fn descendants_in_cfd_graph() {
        let g = cfd_graph();
        assert_eq!(g.descendants("T").unwrap(), set(&["Z", "Y", "X"]));
        assert_eq!(g.descendants("X").unwrap(), NodeSet::new());
        assert_eq!(g.descendants("W").unwrap(), set(&["T", "Z", "Y", "X"]));
        assert!(matches!(g.descendants("Q"), Err(GraphError::UnknownNode(_))));
    }

    #[test]
    fn mutilation_drops_only_the_requested_edges() {
        let g = cfd_graph();
        let bar_t = g.mutilate(&set(&["T"]), &NodeSet::new()).unwrap();
        assert!(!bar_t.has_edge("W", "T") && !bar_t.has_edge("U", "T"));
        assert_eq!(bar_t.edges().len(), g.edges().len() - 2);

        let under_z = g.mutilate(&NodeSet::new(), &set(&["Z"])).unwrap();
        assert!(!under_z.has_edge("Z", "Y") && !under_z.has_edge("Z", "X"));
        assert_eq!(under_z.edges().len(), g.edges().len() - 2);

        let both = g.mutilate(&set(&["T"]), &set(&["Z"])).unwrap();
        assert_eq!(both.edges().len(), g.edges().len() - 4);
        assert!(both.has_edge("T", "Z"));
        // parent and child lists stay in sync
        for (a, b) in both.edges() {
            assert!(both.parents(&b).unwrap().contains(&a.as_str()));
        }
        assert_eq!(both.parents("Y").unwrap(), vec!["W", "U"]);
    }

    #[test]
    fn cycles_are_rejected_with_a_witness() {
        let err = Dag::new(["A", "B"], [("A", "B"), ("B", "A")]).unwrap_err();
        match err {
            GraphError::Cycle(c) => {
                assert_eq!(c.first(), c.last());
                assert_eq!(c.len(), 3);
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(matches!(
            Dag::new(["A"], [("A", "A")]),
            Err(GraphError::SelfLoop(_))
        ));
        assert!(matches!(
            Dag::new(["A", "B"], [("A", "B"), ("A", "B")]),
            Err(GraphError::DuplicateEdge(..))
        ));
    }

    #[test]
    fn path_validation() {
        let g = cfd_graph();
        let p = Path::new(
            &g,
            vec!["T".into(), "U".into(), "Y".into()],
            vec![Step::Backward, Step::Forward],
        )
        .unwrap();
        assert!(p.starts_with_arrow_in());
        assert!(!p.is_directed());
        assert!(Path::new(&g, vec!["T".into(), "Y".into()], vec![Step::Forward]).is_err());
    }

    #[test]
    fn topological_order_respects_edges() {
        let g = cfd_graph();
        let order = g.topological_order();
        let pos: Vec<usize> = (0..g.len())
            .map(|i| order.iter().position(|&o| o == i).unwrap())
            .collect();
        for (a, b) in g.edges() {
            assert!(pos[g.index_of(&a).unwrap()] < pos[g.index_of(&b).unwrap()]);
        }
    }
}
