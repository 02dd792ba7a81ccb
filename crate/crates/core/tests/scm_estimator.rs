//! Statistical properties of generated data and of the estimators, checked
//! against closed-form oracles computed from the structural coefficients.

use cfdivae::estimator::{backdoor_baseline_ate, estimation_bias, ols, two_stage_ate};
use cfdivae::scm::{LinearScmConfig, ScmDims};
use proptest::prelude::*;

const N: usize = 20_000;

fn default_scm(meta: u64) -> LinearScmConfig {
    LinearScmConfig::draw(ScmDims::default(), meta).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn corr(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Composite Simpson quadrature of `f` against the N(0, var) density.
fn gauss_expect(var: f64, f: impl Fn(f64) -> f64) -> f64 {
    let sd = var.sqrt();
    let (lo, hi, m) = (-12.0 * sd, 12.0 * sd, 20_000);
    let h = (hi - lo) / m as f64;
    let dens = |s: f64| (-0.5 * s * s / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
    let g = |s: f64| f(s) * dens(s);
    let mut acc = g(lo) + g(hi);
    for i in 1..m {
        acc += g(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn true_ate_sums_the_mediator_channels() {
    let mut c = default_scm(0);
    c.beta_tz = vec![2.0];
    c.beta_zy = vec![1.5];
    assert_eq!(c.true_ate(), 3.0);
    c.beta_tz = vec![0.0];
    assert_eq!(c.true_ate(), 0.0);

    let mut c = LinearScmConfig::draw(ScmDims { d_w: 2, d_z: 2, d_x: 3 }, 1).unwrap();
    c.beta_tz = vec![1.0, 2.0];
    c.beta_zy = vec![3.0, -1.0];
    assert_eq!(c.true_ate(), 1.0);
    let before = c.true_ate();
    c.u_scale = 2.0;
    c.noise_x = 0.7;
    c.beta_wy = vec![9.0, -9.0];
    c.beta_wt = vec![4.0, 4.0];
    c.beta_wz = vec![vec![3.0, 3.0], vec![-2.0, 1.0]];
    assert_eq!(c.true_ate(), before);
}

#[test]
fn mediator_noise_is_independent_of_the_confounder() {
    for meta in 0..10 {
        let data = default_scm(meta).generate(N, 100 + meta).unwrap();
        let z = &data.hidden_z().unwrap()[0];
        let u = data.hidden_u().unwrap();
        let cols = [("t", data.t()), ("w_0", data.w()[0].as_slice()), ("w_1", data.w()[1].as_slice())];
        let fit = ols(&cols, z).unwrap();
        let rho = corr(&fit.residuals, u);
        assert!(rho.abs() < 0.05, "meta {meta}: rho = {rho}");
    }
}

#[test]
fn treatment_prevalence_gives_overlap() {
    for meta in 0..20 {
        let data = default_scm(meta).generate(5_000, meta).unwrap();
        let p = mean(data.t());
        assert!(p > 0.2 && p < 0.8, "meta {meta}: P(T=1) = {p}");
    }
}

/// `Cov(T − L[T|W], Y)` from the coefficients: with `s = β_WT·W + U`,
/// Gaussian conditioning gives `E[U σ(s)] = E[s σ(s)] / Var(s)`.
fn analytic_cov_t_residual_y(c: &LinearScmConfig) -> f64 {
    let var_s = c.beta_wt.iter().map(|b| b * b).sum::<f64>() + c.beta_ut.powi(2);
    let sig = |s: f64| 1.0 / (1.0 + (-s).exp());
    let e_s_sig = gauss_expect(var_s, |s| s * sig(s));
    let p = gauss_expect(var_s, sig);
    let cov_tu = c.beta_ut * e_s_sig / var_s;
    let cov_tw: Vec<f64> = c.beta_wt.iter().map(|b| b * e_s_sig / var_s).collect();
    let var_t_resid = p * (1.0 - p) - cov_tw.iter().map(|v| v * v).sum::<f64>();
    c.true_ate() * var_t_resid + c.u_scale * c.beta_uy * cov_tu
}

#[test]
fn residualized_treatment_covariance_matches_analytic_value() {
    for meta in 0..5 {
        let c = default_scm(meta);
        let data = c.generate(N, 7 + meta).unwrap();
        let cols = [("w_0", data.w()[0].as_slice()), ("w_1", data.w()[1].as_slice())];
        let t_res = ols(&cols, data.t()).unwrap().residuals;
        let my = mean(data.y());
        let cov = t_res.iter().zip(data.y()).map(|(a, y)| a * (y - my)).sum::<f64>() / (N as f64 - 1.0);
        let want = analytic_cov_t_residual_y(&c);
        assert_eq!(cov.signum(), want.signum(), "meta {meta}: {cov} vs {want}");
        assert!((cov - want).abs() < 0.03, "meta {meta}: {cov} vs {want}");
    }
}

#[test]
fn oracle_two_stage_is_unbiased_and_ignores_confounding_strength() {
    let base = default_scm(0);
    let mut per_factor = Vec::new();
    for factor in [0.0, 1.0, 2.0] {
        let scm = base.scale_confounding(factor).unwrap();
        let est: Vec<f64> = (0..10)
            .map(|s| {
                let d = scm.generate(N, s).unwrap();
                two_stage_ate(&d, d.hidden_z().unwrap()).unwrap().estimate
            })
            .collect();
        let bias = estimation_bias(mean(&est), scm.true_ate()).unwrap();
        assert!(bias < 2.0, "factor {factor}: bias {bias}%");
        per_factor.push(est);
    }
    for (a, b) in [(0, 1), (1, 2), (0, 2)] {
        let (ma, mb) = (mean(&per_factor[a]), mean(&per_factor[b]));
        let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0);
        let se = ((var(&per_factor[a], ma) + var(&per_factor[b], mb)) / 10.0).sqrt();
        assert!((ma - mb).abs() < 2.0 * se, "{a} vs {b}: {ma} {mb} se {se}");
    }
}

#[test]
fn null_mediator_effect_is_recovered() {
    let mut c = default_scm(3);
    c.beta_tz = vec![0.0];
    let d = c.generate(N, 11).unwrap();
    let est = two_stage_ate(&d, d.hidden_z().unwrap()).unwrap().estimate;
    assert!(est.abs() < 0.02, "{est}");
}

#[test]
fn backdoor_bias_grows_with_confounding() {
    let base = default_scm(0);
    let mut biases = Vec::new();
    for factor in [0.0, 0.5, 1.0, 1.5, 2.0] {
        let scm = base.scale_confounding(factor).unwrap();
        let b: Vec<f64> = (0..10)
            .map(|s| {
                let d = scm.generate(N, 50 + s).unwrap();
                estimation_bias(backdoor_baseline_ate(&d).unwrap().estimate, scm.true_ate()).unwrap()
            })
            .collect();
        biases.push(mean(&b));
    }
    assert!(biases[0] < 3.0, "{biases:?}");
    assert!(biases[2] > 10.0, "{biases:?}");
    assert!(biases.windows(2).all(|w| w[1] >= w[0]), "{biases:?}");
}

#[test]
fn unconfounded_backdoor_agrees_with_oracle_two_stage() {
    let mut c = default_scm(5);
    c.beta_ut = 0.0;
    c.beta_uy = 0.0;
    let (mut bd, mut ts) = (Vec::new(), Vec::new());
    for s in 0..10 {
        let d = c.generate(N, s).unwrap();
        bd.push(backdoor_baseline_ate(&d).unwrap().estimate);
        ts.push(two_stage_ate(&d, d.hidden_z().unwrap()).unwrap().estimate);
    }
    let truth = c.true_ate();
    assert!(estimation_bias(mean(&bd), truth).unwrap() < 2.0);
    assert!((mean(&bd) - mean(&ts)).abs() < 0.02 * truth.abs().max(1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn two_stage_is_affine_invariant(seed in any::<u64>(), a in prop_oneof![-5.0..-0.1f64, 0.1..5.0f64], b in -10.0..10.0f64) {
        let d = default_scm(seed % 7).generate(2_000, seed).unwrap();
        let z = d.hidden_z().unwrap();
        let moved: Vec<Vec<f64>> = z.iter().map(|c| c.iter().map(|v| a * v + b).collect()).collect();
        let e0 = two_stage_ate(&d, z).unwrap().estimate;
        let e1 = two_stage_ate(&d, &moved).unwrap().estimate;
        prop_assert!((e0 - e1).abs() <= 1e-9 * e0.abs().max(1.0), "{} vs {}", e0, e1);
    }

    #[test]
    fn stage_one_residuals_are_orthogonal(seed in any::<u64>()) {
        let d = default_scm(seed % 5).generate(1_000, seed).unwrap();
        let z = &d.hidden_z().unwrap()[0];
        let cols = [("t", d.t()), ("w_0", d.w()[0].as_slice()), ("w_1", d.w()[1].as_slice())];
        let fit = ols(&cols, z).unwrap();
        for (_, c) in cols {
            let dot: f64 = c.iter().zip(&fit.residuals).map(|(x, e)| x * e).sum();
            prop_assert!(dot.abs() <= 1e-8 * (c.len() as f64), "{}", dot);
        }
        prop_assert!(fit.residuals.iter().sum::<f64>().abs() <= 1e-8 * 1_000.0);
    }

    #[test]
    fn generation_is_a_pure_function(seed in any::<u64>(), n in 1usize..200) {
        let c = default_scm(seed % 3);
        prop_assert_eq!(c.generate(n, seed).unwrap(), c.generate(n, seed).unwrap());
    }
}
