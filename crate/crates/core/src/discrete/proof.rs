//! Step-by-step numerical check of the do-calculus derivation behind the
//! conditional front-door formula.
//!
//! Each identity of the derivation is evaluated on both sides from
//! independently computed interventional joints, and every do-calculus rule
//! used along the way has its graphical precondition tested by d-separation on
//! the corresponding mutilated graph.

use serde::Serialize;

use super::{cfd_adjust, compensated_sum, DiscreteError, DiscreteScm, JointTable, Result};
use crate::graph::{d_separated, Dag, NodeSet};

/// Node names playing each role of the conditional front-door graph.
#[derive(Debug, Clone)]
pub struct ChainRoles {
    pub treatment: String,
    pub outcome: String,
    pub mediator: String,
    pub conditioning: String,
    pub confounder: String,
}

impl Default for ChainRoles {
    fn default() -> Self {
        Self {
            treatment: "T".into(),
            outcome: "Y".into(),
            mediator: "Z".into(),
            conditioning: "W".into(),
            confounder: "U".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StepCheck {
    pub name: &'static str,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PreconditionCheck {
    pub rule: &'static str,
    pub statement: String,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProofChainReport {
    pub steps: Vec<StepCheck>,
    pub preconditions: Vec<PreconditionCheck>,
}

impl ProofChainReport {
    pub fn max_step_error(&self) -> f64 {
        self.steps.iter().map(|s| s.max_abs_error).fold(0.0, f64::max)
    }

    pub fn failed_preconditions(&self) -> impl Iterator<Item = &PreconditionCheck> {
        self.preconditions.iter().filter(|p| !p.holds)
    }

    pub fn passed(&self, tol: f64) -> bool {
        self.max_step_error() <= tol && self.preconditions.iter().all(|p| p.holds)
    }
}

/// `P(target = v | given)` from `table`.
fn prob(table: &JointTable, target: &str, value: usize, given: &[(&str, usize)]) -> Result<f64> {
    Ok(table.conditional(&[target], given)?[value])
}

struct Tracker {
    steps: Vec<StepCheck>,
}

impl Tracker {
    fn record(&mut self, name: &'static str, lhs: f64, rhs: f64) {
        let err = (lhs - rhs).abs();
        match self.steps.iter_mut().find(|s| s.name == name) {
            Some(s) => s.max_abs_error = s.max_abs_error.max(err),
            None => self.steps.push(StepCheck {
                name,
                max_abs_error: err,
            }),
        }
    }
}

fn set(names: &[&str]) -> NodeSet {
    names.iter().copied().collect()
}

fn preconditions(dag: &Dag, r: &ChainRoles) -> Result<Vec<PreconditionCheck>> {
    let (t, y, z, w) = (
        r.treatment.as_str(),
        r.outcome.as_str(),
        r.mediator.as_str(),
        r.conditioning.as_str(),
    );
    let none = NodeSet::new();
    let mut out = Vec::new();

    // P(y | do(t), z, w) = P(y | do(t), do(z), w)
    let g = dag.mutilate(&set(&[t]), &set(&[z]))?;
    out.push(PreconditionCheck {
        rule: "rule 2",
        statement: format!("({y} ⊥ {z} | {t}, {w}) with edges into {t} and out of {z} removed"),
        holds: d_separated(&g, &set(&[y]), &set(&[z]), &set(&[t, w]))?,
    });

    // P(y | do(t), do(z), w) = P(y | do(z), w)
    let g_bar_z = dag.mutilate(&set(&[z]), &none)?;
    let t_anc_w = g_bar_z.ancestors(w)?.contains(t);
    let remove_t = if t_anc_w { none.clone() } else { set(&[t]) };
    let g = dag.mutilate(&set(&[z]).union(&remove_t), &none)?;
    out.push(PreconditionCheck {
        rule: "rule 3",
        statement: format!(
            "({y} ⊥ {t} | {z}, {w}) with edges into {z}{} removed",
            if t_anc_w { String::new() } else { format!(" and {t}") }
        ),
        holds: d_separated(&g, &set(&[y]), &set(&[t]), &set(&[z, w]))?,
    });

    // P(y | do(z), t', w) = P(y | z, t', w)
    let g = dag.mutilate(&none, &set(&[z]))?;
    out.push(PreconditionCheck {
        rule: "rule 2",
        statement: format!("({y} ⊥ {z} | {t}, {w}) with edges out of {z} removed"),
        holds: d_separated(&g, &set(&[y]), &set(&[z]), &set(&[t, w]))?,
    });

    // P(t' | do(z), w) = P(t' | w)
    let z_anc_w = dag.ancestors(w)?.contains(z);
    let remove_z = if z_anc_w { none.clone() } else { set(&[z]) };
    let g = dag.mutilate(&remove_z, &none)?;
    out.push(PreconditionCheck {
        rule: "rule 3",
        statement: format!(
            "({t} ⊥ {z} | {w}){}",
            if z_anc_w { String::new() } else { format!(" with edges into {z} removed") }
        ),
        holds: d_separated(&g, &set(&[t]), &set(&[z]), &set(&[w]))?,
    });
    Ok(out)
}

/// Evaluates every intermediate identity of the conditional front-door
/// derivation on `scm` and checks each do-calculus precondition graphically.
///
/// Requires a strictly positive SCM containing the five role nodes; extra
/// nodes (such as proxies) are marginalized wherever they do not enter.
pub fn verify_proof_chain(scm: &DiscreteScm, roles: &ChainRoles) -> Result<ProofChainReport> {
    let r = roles;
    let names = [
        &r.treatment,
        &r.outcome,
        &r.mediator,
        &r.conditioning,
        &r.confounder,
    ];
    for (i, n) in names.iter().enumerate() {
        if !scm.dag().contains(n) {
            return Err(DiscreteError::Structure(format!("role node `{n}` missing")));
        }
        if names[..i].contains(n) {
            return Err(DiscreteError::Structure(format!("`{n}` assigned two roles")));
        }
    }
    let (t, y, z, w, u) = (
        r.treatment.as_str(),
        r.outcome.as_str(),
        r.mediator.as_str(),
        r.conditioning.as_str(),
        r.confounder.as_str(),
    );
    let (ct, cy, cz, cw) = (
        scm.cardinality(t)?,
        scm.cardinality(y)?,
        scm.cardinality(z)?,
        scm.cardinality(w)?,
    );

    let joint = scm.joint()?;
    joint.check_positive(&[t, y, z, w, u])?;
    let observed_vars: Vec<&str> = joint
        .variables()
        .iter()
        .map(|v| v.0.as_str())
        .filter(|n| *n != u)
        .collect();
    let observed = joint.marginalize(&observed_vars)?;

    let do_t: Vec<JointTable> = (0..ct)
        .map(|tv| scm.truncated_factorization(&[(t, tv)]))
        .collect::<Result<_>>()?;
    let do_z: Vec<JointTable> = (0..cz)
        .map(|zv| scm.truncated_factorization(&[(z, zv)]))
        .collect::<Result<_>>()?;
    let do_tz: Vec<Vec<JointTable>> = (0..ct)
        .map(|tv| {
            (0..cz)
                .map(|zv| scm.truncated_factorization(&[(t, tv), (z, zv)]))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let cfd = cfd_adjust(&observed, t, y, &set(&[z]), &set(&[w]))?;

    let mut tr = Tracker { steps: Vec::new() };
    for tv in 0..ct {
        let dt = &do_t[tv];
        for yv in 0..cy {
            let p_y_do_t = prob(dt, y, yv, &[])?;

            let mut mediator_expansion = Vec::new();
            let mut outer_cfd = Vec::new();
            for zv in 0..cz {
                let p_z_do_t = prob(dt, z, zv, &[])?;
                let p_y_z_do_t = prob(dt, y, yv, &[(z, zv)])?;
                mediator_expansion.push(p_z_do_t * p_y_z_do_t);

                let mut w_expansion = Vec::new();
                let mut substituted = Vec::new();
                for wv in 0..cw {
                    let p_y_do_t_zw = prob(dt, y, yv, &[(z, zv), (w, wv)])?;
                    let p_w_do_t_z = prob(dt, w, wv, &[(z, zv)])?;
                    w_expansion.push(p_y_do_t_zw * p_w_do_t_z);

                    let p_y_do_tz_w = prob(&do_tz[tv][zv], y, yv, &[(w, wv)])?;
                    tr.record("rule 2: condition on mediator = intervene on mediator", p_y_do_t_zw, p_y_do_tz_w);

                    let p_y_do_z_w = prob(&do_z[zv], y, yv, &[(w, wv)])?;
                    tr.record("rule 3: drop intervention on treatment", p_y_do_tz_w, p_y_do_z_w);

                    let mut t_expansion = Vec::new();
                    let mut observational = Vec::new();
                    for tp in 0..ct {
                        let p_y_do_z_tw = prob(&do_z[zv], y, yv, &[(t, tp), (w, wv)])?;
                        let p_t_do_z_w = prob(&do_z[zv], t, tp, &[(w, wv)])?;
                        t_expansion.push(p_y_do_z_tw * p_t_do_z_w);

                        let p_y_ztw = prob(&observed, y, yv, &[(t, tp), (z, zv), (w, wv)])?;
                        tr.record("rule 2: intervention on mediator = conditioning", p_y_do_z_tw, p_y_ztw);
                        let p_t_w = prob(&observed, t, tp, &[(w, wv)])?;
                        tr.record("rule 3: treatment unaffected by intervening on mediator", p_t_do_z_w, p_t_w);
                        observational.push(p_y_ztw * p_t_w);
                    }
                    tr.record("expansion over treatment under do(mediator)", p_y_do_z_w, compensated_sum(t_expansion));
                    let inner = compensated_sum(observational);
                    tr.record("P(y | do(t), z, w) in observational terms", p_y_do_t_zw, inner);

                    let p_wz_do_t = dt.marginalize(&[w, z])?.get(&[wv, zv]);
                    let p_z_tw = prob(&observed, z, zv, &[(t, tv), (w, wv)])?;
                    let p_w = prob(&observed, w, wv, &[])?;
                    tr.record("P(w, z | do(t)) = P(z | t, w) P(w)", p_wz_do_t, p_z_tw * p_w);
                    tr.record("P(w | do(t), z) ratio identity", p_w_do_t_z, p_z_tw * p_w / p_z_do_t);

                    substituted.push(inner * p_z_tw * p_w / p_z_do_t);
                    outer_cfd.push(p_z_do_t * inner * p_z_tw * p_w / p_z_do_t);
                }
                tr.record("expansion over conditioning set", p_y_z_do_t, compensated_sum(w_expansion));
                tr.record("P(y | z, do(t)) in observational terms", p_y_z_do_t, compensated_sum(substituted));
            }
            tr.record("expansion over mediator", p_y_do_t, compensated_sum(mediator_expansion));
            tr.record("substituted sum before cancellation", p_y_do_t, compensated_sum(outer_cfd));
            tr.record("conditional front-door formula", p_y_do_t, cfd.rows[tv][yv]);
        }
    }

    Ok(ProofChainReport {
        steps: tr.steps,
        preconditions: preconditions(scm.dag(), r)?,
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    const CFD_NO_WZ: &str = "W -> T\nW -> Y\nU -> T\nU -> Y\nT -> Z\nZ -> Y\nZ -> X\n";
    const CFD_UZ: &str = "W -> T\nW -> Z\nW -> Y\nU -> T\nU -> Y\nU -> Z\nT -> Z\nZ -> Y\nZ -> X\n";

    #[test]
    fn holds_on_random_cfd_models() {
        for seed in 0..20 {
            let report = verify_proof_chain(&random_scm(CFD_EDGES, 2, seed), &ChainRoles::default()).unwrap();
            assert_eq!(report.steps.len(), 13);
            assert_eq!(report.preconditions.len(), 4);
            assert!(report.passed(1e-10), "{report:?}");
        }
    }

    #[test]
    fn holds_without_w_to_z_edge() {
        let report = verify_proof_chain(&random_scm(CFD_NO_WZ, 3, 1), &ChainRoles::default()).unwrap();
        assert!(report.passed(1e-10), "{report:?}");
    }

    #[test]
    fn confounded_mediator_is_reported() {
        let report = verify_proof_chain(&random_scm(CFD_UZ, 2, 2), &ChainRoles::default()).unwrap();
        let failed: Vec<&str> = report.failed_preconditions().map(|p| p.rule).collect();
        assert_eq!(failed, vec!["rule 2", "rule 2"]);
        assert!(report.max_step_error() > 1e-6);
        assert!(!report.passed(1e-10));
    }

    #[test]
    fn missing_role_is_a_structure_error() {
        let scm = random_scm("T -> Z\nZ -> Y", 2, 0);
        assert!(matches!(
            verify_proof_chain(&scm, &ChainRoles::default()),
            Err(DiscreteError::Structure(_))
        ));
    }
}
