//! Independent numerical oracles: interventional distributions by direct
//! enumeration of the truncated product, and central finite differences.

use cfdivae::autodiff::Tape;
use cfdivae::cfdivae::{Batch, ModelParams};
use cfdivae::discrete::DiscreteScm;
use cfdivae::autodiff::Tensor;

pub const CFD_EDGES: &str = "W -> T\nW -> Z\nW -> Y\nU -> T\nU -> Y\nT -> Z\nZ -> Y\nZ -> X\n";

/// `P(outcome | do(treatment = value))` by summing the product of every CPT
/// except the treatment's over all joint assignments.
pub fn interventional_oracle(scm: &DiscreteScm, treatment: &str, value: usize, outcome: &str) -> Vec<f64> {
    let dag = scm.dag();
    let names: Vec<String> = dag.nodes().to_vec();
    let cards: Vec<usize> = names.iter().map(|n| scm.cardinality(n).unwrap()).collect();
    let pos = |n: &str| names.iter().position(|m| m == n).unwrap();
    let parents: Vec<Vec<usize>> = names
        .iter()
        .map(|n| dag.parents(n).unwrap().into_iter().map(pos).collect())
        .collect();
    let (ti, yi) = (pos(treatment), pos(outcome));
    let mut out = vec![0.0; cards[yi]];
    let mut assign = vec![0usize; names.len()];
    loop {
        if assign[ti] == value {
            let mut p = 1.0;
            for i in 0..names.len() {
                if i == ti {
                    continue;
                }
                let mut row = 0;
                for &q in &parents[i] {
                    row = row * cards[q] + assign[q];
                }
                p *= scm.cpt(&names[i]).unwrap()[row * cards[i] + assign[i]];
            }
            out[assign[yi]] += p;
        }
        let mut k = 0;
        loop {
            if k == assign.len() {
                return out;
            }
            assign[k] += 1;
            if assign[k] < cards[k] {
                break;
            }
            assign[k] = 0;
            k += 1;
        }
    }
}

/// Negative ELBO of `batch` under fixed noise.
pub fn neg_elbo(model: &ModelParams, batch: &Batch, eps: &[Tensor]) -> f64 {
    let mut tape = Tape::new();
    let (loss, _) = model.elbo_graph(&mut tape, batch, eps).unwrap();
    tape.value(loss).data()[0]
}

/// Largest relative error between the tape gradient of the negative ELBO and
/// central differences with step `h`, over every parameter scalar. The
/// denominator is floored at `floor`.
pub fn elbo_gradient_error(model: &mut ModelParams, batch: &Batch, eps: &[Tensor], h: f64, floor: f64) -> f64 {
    model.store_mut().zero_grad();
    let mut tape = Tape::new();
    let (loss, _) = model.elbo_graph(&mut tape, batch, eps).unwrap();
    tape.backward_into(loss, model.store_mut()).unwrap();
    let ids: Vec<_> = model.store().ids().collect();
    let mut worst: f64 = 0.0;
    for id in ids {
        let grad = model.store().get(id).grad();
        for k in 0..grad.len() {
            let orig = model.store().get(id).value.data()[k];
            model.store_mut().value_mut(id).data_mut()[k] = orig + h;
            let up = neg_elbo(model, batch, eps);
            model.store_mut().value_mut(id).data_mut()[k] = orig - h;
            let down = neg_elbo(model, batch, eps);
            model.store_mut().value_mut(id).data_mut()[k] = orig;
            let fd = (up - down) / (2.0 * h);
            let a = grad.data()[k];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(floor);
            worst = worst.max(rel);
        }
    }
    worst
}
