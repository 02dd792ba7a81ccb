//! Exact finite-distribution engine: dense joint tables, discrete SCMs, the
//! truncated-factorization interventional oracle and the three adjustment
//! formulas.

mod adjust;
mod proof;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Dag, GraphError};

pub use adjust::{ate_discrete, backdoor_adjust, cfd_adjust, frontdoor_adjust};
pub use proof::{verify_proof_chain, ChainRoles, PreconditionCheck, ProofChainReport, StepCheck};

/// Largest dense state space a table may span.
pub const MAX_STATES: usize = 10_000_000;
/// Cells at or below this value count as zero for positivity checks.
pub const POSITIVITY_FLOOR: f64 = 1e-15;

const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DiscreteError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("value {value} out of range for `{var}` (cardinality {card})")]
    ValueOutOfRange { var: String, value: usize, card: usize },
    #[error("state space of {0} cells exceeds the dense limit")]
    TooLarge(usize),
    #[error("table has {got} entries, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid probabilities: {0}")]
    NotADistribution(String),
    #[error("positivity violated: P({cell}) = {value:e}")]
    Positivity { cell: String, value: f64 },
    #[error("treatment `{0}` must be binary")]
    NonBinaryTreatment(String),
    #[error("{0}")]
    Structure(String),
    #[error("invalid SCM document: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DiscreteError>;

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum, accumulated in iteration order.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut acc = Compensated::default();
    for x in terms {
        acc.add(x);
    }
    acc.value()
}

fn state_count(cards: &[usize]) -> Result<usize> {
    let mut total: usize = 1;
    for &c in cards {
        total = total
            .checked_mul(c)
            .filter(|&t| t <= MAX_STATES)
            .ok_or(DiscreteError::TooLarge(usize::MAX))?;
    }
    Ok(total)
}

/// Calls `f` with every assignment of `cards` in row-major order (last
/// variable varies fastest).
pub(crate) fn for_each_assignment(cards: &[usize], mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; cards.len()];
    if cards.contains(&0) {
        return;
    }
    loop {
        f(&idx);
        let mut k = cards.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < cards[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Dense joint distribution over named finite variables, stored row-major
/// (last variable varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    vars: Vec<(String, usize)>,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn new(vars: Vec<(String, usize)>, probs: Vec<f64>) -> Result<Self> {
        for (i, (name, card)) in vars.iter().enumerate() {
            if vars[..i].iter().any(|(n, _)| n == name) {
                return Err(DiscreteError::DuplicateVariable(name.clone()));
            }
            if *card == 0 {
                return Err(DiscreteError::NotADistribution(format!(
                    "`{name}` has cardinality 0"
                )));
            }
        }
        let cards: Vec<usize> = vars.iter().map(|v| v.1).collect();
        let expected = state_count(&cards)?;
        if probs.len() != expected {
            return Err(DiscreteError::ShapeMismatch {
                expected,
                got: probs.len(),
            });
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(DiscreteError::NotADistribution(format!("entry {p}")));
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(DiscreteError::NotADistribution(format!(
                "entries sum to {total}"
            )));
        }
        Ok(Self { vars, probs })
    }

    pub fn variables(&self) -> &[(String, usize)] {
        &self.vars
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn axis(&self, name: &str) -> Result<usize> {
        self.vars
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| DiscreteError::UnknownVariable(name.to_string()))
    }

    pub fn cardinality(&self, name: &str) -> Result<usize> {
        Ok(self.vars[self.axis(name)?].1)
    }

    fn cards(&self) -> Vec<usize> {
        self.vars.iter().map(|v| v.1).collect()
    }

    /// Probability of a full assignment given in table order.
    pub fn get(&self, values: &[usize]) -> f64 {
        let mut flat = 0;
        for ((_, card), &v) in self.vars.iter().zip(values) {
            flat = flat * card + v;
        }
        self.probs[flat]
    }

    /// Sums out every variable not in `keep`. The result lists the kept
    /// variables in the order given by `keep`. Keeping nothing yields the
    /// empty table whose single cell is exactly 1.
    pub fn marginalize(&self, keep: &[&str]) -> Result<JointTable> {
        let axes = keep
            .iter()
            .map(|k| self.axis(k))
            .collect::<Result<Vec<_>>>()?;
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(DiscreteError::DuplicateVariable(keep[i].to_string()));
            }
        }
        let vars: Vec<(String, usize)> = axes.iter().map(|&a| self.vars[a].clone()).collect();
        if axes.is_empty() {
            return Ok(JointTable {
                vars,
                probs: vec![1.0],
            });
        }
        let out_cards: Vec<usize> = vars.iter().map(|v| v.1).collect();
        let mut acc: Vec<Compensated> = vec![Compensated::default(); out_cards.iter().product()];
        let mut flat_in = 0usize;
        for_each_assignment(&self.cards(), |assign| {
            let mut flat_out = 0;
            for (&a, &c) in axes.iter().zip(&out_cards) {
                flat_out = flat_out * c + assign[a];
            }
            acc[flat_out].add(self.probs[flat_in]);
            flat_in += 1;
        });
        let probs = acc.iter().map(Compensated::value).collect();
        Ok(JointTable { vars, probs })
    }

    /// Distribution of `target` (joint, row-major in the given order) given
    /// the partial assignment `given`.
    pub fn conditional(&self, target: &[&str], given: &[(&str, usize)]) -> Result<Vec<f64>> {
        for (name, value) in given {
            let card = self.cardinality(name)?;
            if *value >= card {
                return Err(DiscreteError::ValueOutOfRange {
                    var: name.to_string(),
                    value: *value,
                    card,
                });
            }
        }
        let mut keep: Vec<&str> = given.iter().map(|g| g.0).collect();
        keep.extend_from_slice(target);
        let m = self.marginalize(&keep)?;
        let target_cards: Vec<usize> = target
            .iter()
            .map(|t| self.cardinality(t))
            .collect::<Result<_>>()?;
        let block: usize = target_cards.iter().product();
        let mut offset = 0;
        for (i, (_, v)) in given.iter().enumerate() {
            offset = offset * m.vars[i].1 + v;
        }
        let slice = &m.probs[offset * block..(offset + 1) * block];
        let mass = compensated_sum(slice.iter().copied());
        if !(mass > POSITIVITY_FLOOR) {
            return Err(DiscreteError::Positivity {
                cell: describe(given),
                value: mass,
            });
        }
        Ok(slice.iter().map(|p| p / mass).collect())
    }

    /// Fails unless every cell of the marginal over `vars` exceeds the
    /// positivity floor.
    pub fn check_positive(&self, vars: &[&str]) -> Result<()> {
        let m = self.marginalize(vars)?;
        let cards = m.cards();
        let mut bad = None;
        let mut flat = 0;
        for_each_assignment(&cards, |assign| {
            if bad.is_none() && !(m.probs[flat] > POSITIVITY_FLOOR) {
                let cell: Vec<(&str, usize)> =
                    vars.iter().copied().zip(assign.iter().copied()).collect();
                bad = Some((describe(&cell), m.probs[flat]));
            }
            flat += 1;
        });
        match bad {
            Some((cell, value)) => Err(DiscreteError::Positivity { cell, value }),
            None => Ok(()),
        }
    }
}

fn describe(cell: &[(&str, usize)]) -> String {
    cell.iter()
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Per-treatment-value outcome distributions `P(y | do(t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionalDist {
    pub treatment: String,
    pub outcome: String,
    /// `rows[t][y]`
    pub rows: Vec<Vec<f64>>,
}

impl InterventionalDist {
    pub fn max_abs_diff(&self, other: &InterventionalDist) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Discrete structural causal model: a DAG with one conditional probability
/// table per node.
///
/// `cpts[i]` is row-major over the parents' values (in the DAG's parent order,
/// last parent fastest), each row a distribution over node `i`'s values.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteScm {
    dag: Dag,
    cards: Vec<usize>,
    cpts: Vec<Vec<f64>>,
}

impl DiscreteScm {
    pub fn new(dag: Dag, cards: Vec<usize>, cpts: Vec<Vec<f64>>) -> Result<Self> {
        if cards.len() != dag.len() || cpts.len() != dag.len() {
            return Err(DiscreteError::Structure(format!(
                "expected {} cardinalities and CPTs",
                dag.len()
            )));
        }
        state_count(&cards)?;
        for i in 0..dag.len() {
            let name = dag.name(i);
            if cards[i] == 0 {
                return Err(DiscreteError::NotADistribution(format!(
                    "`{name}` has cardinality 0"
                )));
            }
            let rows: usize = dag.parents_idx(i).iter().map(|&p| cards[p]).product();
            let expected = rows * cards[i];
            if cpts[i].len() != expected {
                return Err(DiscreteError::ShapeMismatch {
                    expected,
                    got: cpts[i].len(),
                });
            }
            for (r, row) in cpts[i].chunks(cards[i]).enumerate() {
                if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                    return Err(DiscreteError::NotADistribution(format!(
                        "CPT of `{name}` row {r} has an invalid entry"
                    )));
                }
                let s = compensated_sum(row.iter().copied());
                if (s - 1.0).abs() > NORMALIZATION_TOL {
                    return Err(DiscreteError::NotADistribution(format!(
                        "CPT of `{name}` row {r} sums to {s}"
                    )));
                }
            }
        }
        Ok(Self { dag, cards, cpts })
    }

    /// Random SCM with strictly positive CPTs: each row normalizes weights
    /// `floor + Uniform(0, 1)`.
    pub fn random_positive<R: Rng>(dag: Dag, cards: Vec<usize>, floor: f64, rng: &mut R) -> Result<Self> {
        let mut cpts = Vec::with_capacity(dag.len());
        for i in 0..dag.len() {
            let rows: usize = dag.parents_idx(i).iter().map(|&p| cards[p]).product();
            let mut cpt = Vec::with_capacity(rows * cards[i]);
            for _ in 0..rows {
                let w: Vec<f64> = (0..cards[i]).map(|_| floor + rng.random::<f64>()).collect();
                let s: f64 = w.iter().sum();
                let mut row: Vec<f64> = w.iter().map(|x| x / s).collect();
                // make the row sum as close to 1 as the format allows
                let last = cards[i] - 1;
                row[last] = 1.0 - row[..last].iter().sum::<f64>();
                cpt.extend(row);
            }
            cpts.push(cpt);
        }
        Self::new(dag, cards, cpts)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn cardinality(&self, name: &str) -> Result<usize> {
        Ok(self.cards[self.dag.index_of(name)?])
    }

    pub fn cpt(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.cpts[self.dag.index_of(name)?])
    }

    /// `P(node = value | parents = assignment)` where `assign` holds every
    /// node's value in DAG order.
    fn factor(&self, node: usize, assign: &[usize]) -> f64 {
        let mut row = 0;
        for &p in self.dag.parents_idx(node) {
            row = row * self.cards[p] + assign[p];
        }
        self.cpts[node][row * self.cards[node] + assign[node]]
    }

    /// Joint distribution implied by the Markov factorization.
    pub fn joint(&self) -> Result<JointTable> {
        self.truncated_factorization(&[])
    }

    /// Interventional joint over the non-intervened nodes: intervened nodes
    /// lose their factor and are fixed to the assigned value.
    pub fn truncated_factorization(&self, intervention: &[(&str, usize)]) -> Result<JointTable> {
        let n = self.dag.len();
        let mut fixed: Vec<Option<usize>> = vec![None; n];
        for (name, value) in intervention {
            let i = self.dag.index_of(name)?;
            if *value >= self.cards[i] {
                return Err(DiscreteError::ValueOutOfRange {
                    var: name.to_string(),
                    value: *value,
                    card: self.cards[i],
                });
            }
            fixed[i] = Some(*value);
        }
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i].is_none()).collect();
        let free_cards: Vec<usize> = free.iter().map(|&i| self.cards[i]).collect();
        let mut full: Vec<usize> = fixed.iter().map(|f| f.unwrap_or(0)).collect();
        let mut probs = Vec::with_capacity(state_count(&free_cards)?);
        for_each_assignment(&free_cards, |assign| {
            for (&i, &v) in free.iter().zip(assign) {
                full[i] = v;
            }
            probs.push(free.iter().map(|&i| self.factor(i, &full)).product::<f64>());
        });
        let vars = free
            .iter()
            .map(|&i| (self.dag.name(i).to_string(), self.cards[i]))
            .collect();
        JointTable::new(vars, probs)
    }

    /// `P(y | do(t))` for every value of `t`, by truncated factorization.
    pub fn interventional(&self, t: &str, y: &str) -> Result<InterventionalDist> {
        let rows = (0..self.cardinality(t)?)
            .map(|tv| Ok(self.truncated_factorization(&[(t, tv)])?.marginalize(&[y])?.probs().to_vec()))
            .collect::<Result<_>>()?;
        Ok(InterventionalDist {
            treatment: t.into(),
            outcome: y.into(),
            rows,
        })
    }

    pub fn to_json(&self) -> String {
        let doc = ScmDocument {
            nodes: (0..self.dag.len())
                .map(|i| NodeSpec {
                    name: self.dag.name(i).to_string(),
                    cardinality: self.cards[i],
                    parents: self
                        .dag
                        .parents_idx(i)
                        .iter()
                        .map(|&p| self.dag.name(p).to_string())
                        .collect(),
                    cpt: self.cpts[i].clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("SCM document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScmDocument = serde_json::from_str(text)?;
        let names: Vec<String> = doc.nodes.iter().map(|n| n.name.clone()).collect();
        let mut edges = Vec::new();
        for node in &doc.nodes {
            for p in &node.parents {
                if !names.contains(p) {
                    return Err(DiscreteError::UnknownVariable(p.clone()));
                }
                edges.push((p.clone(), node.name.clone()));
            }
        }
        let dag = Dag::new(names, edges)?;
        let cards = doc.nodes.iter().map(|n| n.cardinality).collect();
        let cpts = doc.nodes.into_iter().map(|n| n.cpt).collect();
        Self::new(dag, cards, cpts)
    }
}

/// JSON layout of a [`DiscreteScm`].
#[derive(Debug, Serialize, Deserialize)]
struct ScmDocument {
    nodes: Vec<NodeSpec>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeSpec {
    name: String,
    cardinality: usize,
    #[serde(default)]
    parents: Vec<String>,
    cpt: Vec<f64>,
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::graph::parse_dag;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub const CFD_EDGES: &str = "W -> T\nW -> Z\nW -> Y\nU -> T\nU -> Y\nT -> Z\nZ -> Y\nZ -> X\n";

    pub fn random_scm(edges: &str, card: usize, seed: u64) -> DiscreteScm {
        let dag = parse_dag(edges).unwrap();
        let cards = vec![card; dag.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DiscreteScm::random_positive(dag, cards, 0.1, &mut rng).unwrap()
    }
}
