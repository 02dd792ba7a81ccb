use serde::{Deserialize, Serialize};

use crate::estimator::{ols, EstimatorError};

/// Least-squares affine map `truth ≈ matrix·learned + offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineAlignment {
    /// `d_z` rows, each of length `d_l`.
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

/// Sample mean and standard deviation (n − 1 denominator, 0 for one value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Two-sample Kolmogorov–Smirnov statistic `sup_x |F_a(x) − F_b(x)|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Fits the affine alignment from learned to true mediator columns and
/// returns it with the KS statistic of each aligned true dimension.
pub fn representation_fidelity(
    learned: &[Vec<f64>],
    truth: &[Vec<f64>],
) -> Result<(AffineAlignment, Vec<f64>), EstimatorError> {
    let names: Vec<String> = (0..learned.len()).map(|j| format!("learned_{j}")).collect();
    let design: Vec<(&str, &[f64])> = names
        .iter()
        .map(String::as_str)
        .zip(learned.iter().map(Vec::as_slice))
        .collect();
    let mut matrix = Vec::with_capacity(truth.len());
    let mut offset = Vec::with_capacity(truth.len());
    let mut ks = Vec::with_capacity(truth.len());
    for z in truth {
        let fit = ols(&design, z)?;
        let aligned: Vec<f64> = z.iter().zip(&fit.residuals).map(|(v, e)| v - e).collect();
        ks.push(ks_statistic(&aligned, z));
        matrix.push(fit.coefficients);
        offset.push(fit.intercept);
    }
    Ok((AffineAlignment { matrix, offset }, ks))
}
