//! Linear ATE estimators.
//!
//! The two-stage mediator estimator regresses each mediator column on
//! `(1, T, W)`, keeps the residuals `e_Z`, regresses `Y` on `(1, e_Z)` and
//! returns `Σ_j β̂_{T,Z_j}·β̂_{Y,Z_j}`. The residual carries no information
//! about the unobserved confounder, which is what makes the second stage
//! unbiased. The back-door baseline is the coefficient of `T` in `Y ~ 1 + T + W`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("design is rank deficient; dependent regressors: {0:?}")]
    RankDeficient(Vec<String>),
    #[error("need more rows than coefficients: n = {n}, p = {p}")]
    TooFewRows { n: usize, p: usize },
    #[error("column length {got} differs from target length {expected}")]
    Length { expected: usize, got: usize },
    #[error("no mediator columns supplied")]
    NoMediator,
    #[error("true effect is zero, relative bias is undefined")]
    ZeroTruth,
    #[error("non-finite value in regression input")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

/// Least-squares fit with an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    /// One coefficient per regressor, in input order.
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
}

/// Relative size below which an R diagonal entry marks a dependent column.
const RANK_TOL: f64 = 1e-10;

/// Ordinary least squares of `target` on `1` and the named regressors, via a
/// Householder QR factorization.
pub fn ols(regressors: &[(&str, &[f64])], target: &[f64]) -> Result<LinearFit> {
    let n = target.len();
    let p = regressors.len() + 1;
    if n <= p {
        return Err(EstimatorError::TooFewRows { n, p });
    }
    for (_, c) in regressors {
        if c.len() != n {
            return Err(EstimatorError::Length {
                expected: n,
                got: c.len(),
            });
        }
    }
    let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
    if !finite(target) || regressors.iter().any(|(_, c)| !finite(c)) {
        return Err(EstimatorError::NonFinite);
    }
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { regressors[j - 1].1[i] });
    let y = DVector::from_column_slice(target);
    let norms: Vec<f64> = (0..p).map(|j| x.column(j).norm()).collect();
    let qr = x.clone().qr();
    let r = qr.r();
    let dependent: Vec<String> = (0..p)
        .filter(|&j| r[(j, j)].abs() <= RANK_TOL * norms[j].max(f64::MIN_POSITIVE))
        .map(|j| if j == 0 { "intercept".to_string() } else { regressors[j - 1].0.to_string() })
        .collect();
    if !dependent.is_empty() {
        return Err(EstimatorError::RankDeficient(dependent));
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| EstimatorError::RankDeficient(vec!["unknown".into()]))?;
    let fitted = &x * &beta;
    let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let mean = target.iter().sum::<f64>() / n as f64;
    let tss: f64 = target.iter().map(|v| (v - mean).powi(2)).sum();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    Ok(LinearFit {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        residuals,
        r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 1.0 },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteEstimate {
    pub method: String,
    pub estimate: f64,
    pub n: usize,
}

fn tw_regressors(data: &Dataset) -> (Vec<String>, Vec<&[f64]>) {
    let mut names = vec!["t".to_string()];
    let mut cols: Vec<&[f64]> = vec![data.t()];
    for (j, w) in data.w().iter().enumerate() {
        names.push(format!("w_{j}"));
        cols.push(w);
    }
    (names, cols)
}

fn zip_named<'a>(names: &'a [String], cols: &[&'a [f64]]) -> Vec<(&'a str, &'a [f64])> {
    names.iter().map(String::as_str).zip(cols.iter().copied()).collect()
}

/// Two-stage estimate using mediator columns `z` (true or learned).
pub fn two_stage_ate(data: &Dataset, z: &[Vec<f64>]) -> Result<AteEstimate> {
    if z.is_empty() {
        return Err(EstimatorError::NoMediator);
    }
    let (names, cols) = tw_regressors(data);
    let design = zip_named(&names, &cols);
    let mut beta_tz = Vec::with_capacity(z.len());
    let mut resid = Vec::with_capacity(z.len());
    for zj in z {
        let fit = ols(&design, zj)?;
        beta_tz.push(fit.coefficients[0]);
        resid.push(fit.residuals);
    }
    let e_names: Vec<String> = (0..z.len()).map(|j| format!("e_z_{j}")).collect();
    let e_cols: Vec<&[f64]> = resid.iter().map(Vec::as_slice).collect();
    let stage2 = ols(&zip_named(&e_names, &e_cols), data.y())?;
    let estimate = beta_tz.iter().zip(&stage2.coefficients).map(|(a, b)| a * b).sum();
    Ok(AteEstimate {
        method: "two-stage".into(),
        estimate,
        n: data.len(),
    })
}

/// Coefficient of `T` in `Y ~ 1 + T + W`.
pub fn backdoor_baseline_ate(data: &Dataset) -> Result<AteEstimate> {
    let (names, cols) = tw_regressors(data);
    let fit = ols(&zip_named(&names, &cols), data.y())?;
    Ok(AteEstimate {
        method: "backdoor".into(),
        estimate: fit.coefficients[0],
        n: data.len(),
    })
}

/// `|(estimate − truth)/truth| × 100`.
pub fn estimation_bias(estimate: f64, truth: f64) -> Result<f64> {
    if truth == 0.0 {
        return Err(EstimatorError::ZeroTruth);
    }
    Ok(((estimate - truth) / truth).abs() * 100.0)
}
