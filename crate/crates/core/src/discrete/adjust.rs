use super::{compensated_sum, for_each_assignment, DiscreteError, InterventionalDist, JointTable, Result};
use crate::graph::NodeSet;

fn cards(table: &JointTable, names: &[&str]) -> Result<Vec<usize>> {
    names.iter().map(|n| table.cardinality(n)).collect()
}

fn check_roles(t: &str, y: &str, sets: &[&NodeSet]) -> Result<()> {
    if t == y {
        return Err(DiscreteError::DuplicateVariable(t.to_string()));
    }
    for (i, s) in sets.iter().enumerate() {
        for n in s.iter() {
            if n == t || n == y || sets[i + 1..].iter().any(|o| o.contains(n)) {
                return Err(DiscreteError::DuplicateVariable(n.to_string()));
            }
        }
    }
    Ok(())
}

fn concat<'a>(parts: &[&[&'a str]]) -> Vec<&'a str> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

fn values(parts: &[&[usize]]) -> Vec<usize> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// `P(y | do(t)) = Σ_z P(y | t, z) P(z)`.
pub fn backdoor_adjust(table: &JointTable, t: &str, y: &str, adjust: &NodeSet) -> Result<InterventionalDist> {
    check_roles(t, y, &[adjust])?;
    let z: Vec<&str> = adjust.iter().collect();
    let all = concat(&[&[t], &z, &[y]]);
    table.check_positive(&all)?;

    let p_tzy = table.marginalize(&all)?;
    let p_tz = table.marginalize(&concat(&[&[t], &z]))?;
    let p_z = table.marginalize(&z)?;
    let (ct, cy) = (table.cardinality(t)?, table.cardinality(y)?);
    let zc = cards(table, &z)?;

    let mut rows = vec![vec![0.0; cy]; ct];
    for (tv, row) in rows.iter_mut().enumerate() {
        for (yv, cell) in row.iter_mut().enumerate() {
            let mut terms = Vec::new();
            for_each_assignment(&zc, |zv| {
                let p_y_given = p_tzy.get(&values(&[&[tv], zv, &[yv]])) / p_tz.get(&values(&[&[tv], zv]));
                terms.push(p_y_given * p_z.get(zv));
            });
            *cell = compensated_sum(terms);
        }
    }
    Ok(InterventionalDist {
        treatment: t.to_string(),
        outcome: y.to_string(),
        rows,
    })
}

/// `P(y | do(t)) = Σ_z Σ_t' P(y | t', z) P(t') P(z | t)`.
pub fn frontdoor_adjust(table: &JointTable, t: &str, y: &str, mediators: &NodeSet) -> Result<InterventionalDist> {
    check_roles(t, y, &[mediators])?;
    let z: Vec<&str> = mediators.iter().collect();
    let all = concat(&[&[t], &z, &[y]]);
    table.check_positive(&all)?;

    let p_tzy = table.marginalize(&all)?;
    let p_tz = table.marginalize(&concat(&[&[t], &z]))?;
    let p_t = table.marginalize(&[t])?;
    let (ct, cy) = (table.cardinality(t)?, table.cardinality(y)?);
    let zc = cards(table, &z)?;

    let mut rows = vec![vec![0.0; cy]; ct];
    for (tv, row) in rows.iter_mut().enumerate() {
        for (yv, cell) in row.iter_mut().enumerate() {
            let mut terms = Vec::new();
            for_each_assignment(&zc, |zv| {
                let p_z_given_t = p_tz.get(&values(&[&[tv], zv])) / p_t.get(&[tv]);
                for tp in 0..ct {
                    let p_y = p_tzy.get(&values(&[&[tp], zv, &[yv]])) / p_tz.get(&values(&[&[tp], zv]));
                    terms.push(p_y * p_t.get(&[tp]) * p_z_given_t);
                }
            });
            *cell = compensated_sum(terms);
        }
    }
    Ok(InterventionalDist {
        treatment: t.to_string(),
        outcome: y.to_string(),
        rows,
    })
}

/// Conditional front-door adjustment:
/// `P(y | do(t)) = Σ_z Σ_w Σ_t' P(y | t', z, w) P(t' | w) P(z | t, w) P(w)`.
///
/// With an empty `conditioning` set this evaluates the same terms, in the same
/// order, as [`frontdoor_adjust`].
pub fn cfd_adjust(
    table: &JointTable,
    t: &str,
    y: &str,
    mediators: &NodeSet,
    conditioning: &NodeSet,
) -> Result<InterventionalDist> {
    check_roles(t, y, &[mediators, conditioning])?;
    let z: Vec<&str> = mediators.iter().collect();
    let w: Vec<&str> = conditioning.iter().collect();
    let all = concat(&[&[t], &z, &w, &[y]]);
    table.check_positive(&all)?;

    let p_tzwy = table.marginalize(&all)?;
    let p_tzw = table.marginalize(&concat(&[&[t], &z, &w]))?;
    let p_tw = table.marginalize(&concat(&[&[t], &w]))?;
    let p_w = table.marginalize(&w)?;
    let (ct, cy) = (table.cardinality(t)?, table.cardinality(y)?);
    let zc = cards(table, &z)?;
    let wc = cards(table, &w)?;

    let mut rows = vec![vec![0.0; cy]; ct];
    for (tv, row) in rows.iter_mut().enumerate() {
        for (yv, cell) in row.iter_mut().enumerate() {
            let mut terms = Vec::new();
            for_each_assignment(&zc, |zv| {
                for_each_assignment(&wc, |wv| {
                    let pw = p_w.get(wv);
                    let p_z_given_tw =
                        p_tzw.get(&values(&[&[tv], zv, wv])) / p_tw.get(&values(&[&[tv], wv]));
                    for tp in 0..ct {
                        let p_y = p_tzwy.get(&values(&[&[tp], zv, wv, &[yv]]))
                            / p_tzw.get(&values(&[&[tp], zv, wv]));
                        let p_t_given_w = p_tw.get(&values(&[&[tp], wv])) / pw;
                        terms.push(p_y * p_t_given_w * p_z_given_tw * pw);
                    }
                });
            });
            *cell = compensated_sum(terms);
        }
    }
    Ok(InterventionalDist {
        treatment: t.to_string(),
        outcome: y.to_string(),
        rows,
    })
}

/// `E[Y | do(T=1)] − E[Y | do(T=0)]` with `y_values[k]` the numeric value of
/// outcome level `k`.
pub fn ate_discrete(dist: &InterventionalDist, y_values: &[f64]) -> Result<f64> {
    if dist.rows.len() != 2 {
        return Err(DiscreteError::NonBinaryTreatment(dist.treatment.clone()));
    }
    let mean = |row: &[f64]| -> Result<f64> {
        if row.len() != y_values.len() {
            return Err(DiscreteError::ShapeMismatch {
                expected: row.len(),
                got: y_values.len(),
            });
        }
        Ok(compensated_sum(row.iter().zip(y_values).map(|(p, v)| p * v)))
    };
    Ok(mean(&dist.rows[1])? - mean(&dist.rows[0])?)
}
