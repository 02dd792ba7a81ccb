use super::{AutodiffError, Result, Tape, Var};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

fn check_positive(tape: &Tape, v: Var, what: &'static str) -> Result<()> {
    match tape.value(v).data().iter().find(|x| !(**x > 0.0)) {
        Some(&bad) => Err(AutodiffError::NonPositiveVariance(what, bad)),
        None => Ok(()),
    }
}

/// Diagonal Gaussian log-density summed over columns: an `n×1` column of
/// `Σ_j −½[log(2π var) + (x − mu)²/var]`.
pub fn gaussian_log_pdf(tape: &mut Tape, x: Var, mu: Var, var: Var) -> Result<Var> {
    check_positive(tape, var, "gaussian_log_pdf")?;
    let diff = tape.sub(x, mu)?;
    let sq = tape.square(diff);
    let quad = tape.div(sq, var)?;
    let logv = tape.log(var);
    let inner = tape.add(logv, quad)?;
    let inner = tape.add_scalar(inner, LN_2PI);
    let inner = tape.scale(inner, -0.5);
    let [rows, cols] = tape.shape(inner);
    let full = if tape.shape(x) == [rows, cols] {
        inner
    } else {
        tape.broadcast_to(inner, rows, cols)?
    };
    Ok(tape.sum_cols(full))
}

/// `KL(N(mu_q, var_q) ‖ N(mu_p, var_p))` for diagonal Gaussians, one value per
/// row as an `n×1` column.
pub fn kl_diag_gaussians(tape: &mut Tape, mu_q: Var, var_q: Var, mu_p: Var, var_p: Var) -> Result<Var> {
    check_positive(tape, var_q, "kl_diag_gaussians")?;
    check_positive(tape, var_p, "kl_diag_gaussians")?;
    let log_p = tape.log(var_p);
    let log_q = tape.log(var_q);
    let log_ratio = tape.sub(log_p, log_q)?;
    let diff = tape.sub(mu_q, mu_p)?;
    let sq = tape.square(diff);
    let num = tape.add(var_q, sq)?;
    let frac = tape.div(num, var_p)?;
    let t = tape.add(log_ratio, frac)?;
    let t = tape.add_scalar(t, -1.0);
    let t = tape.scale(t, 0.5);
    Ok(tape.sum_cols(t))
}

#[cfg(test)]
mod tests {
    use super::super::Tensor;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn leaf(t: &mut Tape, v: &[f64]) -> Var {
        t.leaf(Tensor::new(1, v.len(), v.to_vec()).unwrap())
    }

    fn lpdf(x: &[f64], mu: &[f64], var: &[f64]) -> f64 {
        let mut t = Tape::new();
        let (a, b, c) = (leaf(&mut t, x), leaf(&mut t, mu), leaf(&mut t, var));
        let r = gaussian_log_pdf(&mut t, a, b, c).unwrap();
        t.value(r).item().unwrap()
    }

    fn kl(mq: &[f64], vq: &[f64], mp: &[f64], vp: &[f64]) -> f64 {
        let mut t = Tape::new();
        let vars = [mq, vq, mp, vp].map(|v| leaf(&mut t, v));
        let r = kl_diag_gaussians(&mut t, vars[0], vars[1], vars[2], vars[3]).unwrap();
        t.value(r).item().unwrap()
    }

    /// Composite Simpson rule on [lo, hi].
    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for k in 1..n {
            s += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn log_pdf_reference_values() {
        assert!((lpdf(&[0.0], &[0.0], &[1.0]) + 0.918_938_533_204_672_7).abs() < 1e-15);
        assert!((lpdf(&[0.0], &[1.0], &[1.0]) + 0.918_938_533_204_672_7 + 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_pdf_matches_quadrature() {
        // log p(x) = log of the derivative of the CDF; check the density
        // integrates to one around random parameters and that its first two
        // moments match
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let mu: f64 = rng.random_range(-2.0..2.0);
            let var: f64 = rng.random_range(0.1..3.0);
            let sd = var.sqrt();
            let (lo, hi) = (mu - 14.0 * sd, mu + 14.0 * sd);
            let dens = |x: f64| lpdf(&[x], &[mu], &[var]).exp();
            let mass = simpson(dens, lo, hi, 4000);
            let m1 = simpson(|x| x * dens(x), lo, hi, 4000);
            let m2 = simpson(|x| (x - mu).powi(2) * dens(x), lo, hi, 4000);
            assert!((mass - 1.0).abs() < 1e-8, "{mass}");
            assert!((m1 - mu).abs() < 1e-8, "{m1} vs {mu}");
            assert!((m2 - var).abs() < 1e-8, "{m2} vs {var}");
        }
    }

    #[test]
    fn log_pdf_sums_over_features() {
        let joint = lpdf(&[0.3, -1.0], &[0.1, 0.5], &[2.0, 0.5]);
        let parts = lpdf(&[0.3], &[0.1], &[2.0]) + lpdf(&[-1.0], &[0.5], &[0.5]);
        assert!((joint - parts).abs() < 1e-14);
    }

    #[test]
    fn non_positive_variance_is_rejected() {
        let mut t = Tape::new();
        let (a, b, c) = (leaf(&mut t, &[0.0]), leaf(&mut t, &[0.0]), leaf(&mut t, &[0.0]));
        assert!(matches!(
            gaussian_log_pdf(&mut t, a, b, c),
            Err(AutodiffError::NonPositiveVariance(..))
        ));
        assert!(kl_diag_gaussians(&mut t, a, c, b, c).is_err());
    }

    #[test]
    fn kl_reference_values() {
        assert_eq!(kl(&[0.3, 1.0], &[2.0, 0.5], &[0.3, 1.0], &[2.0, 0.5]), 0.0);
        assert!((kl(&[1.0], &[1.0], &[0.0], &[1.0]) - 0.5).abs() < 1e-15);
        let expected = 0.5 * (-(4.0f64).ln() + 4.0 - 1.0);
        assert!((kl(&[0.0], &[4.0], &[0.0], &[1.0]) - expected).abs() < 1e-15);
        assert!((expected - 0.8069).abs() < 1e-4);
    }

    #[test]
    fn kl_matches_quadrature_and_monte_carlo() {
        let log_n = |x: f64, m: f64, v: f64| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v);
        let quad = simpson(|x| log_n(x, 0.0, 4.0).exp() * (log_n(x, 0.0, 4.0) - log_n(x, 0.0, 1.0)), -40.0, 40.0, 8000);
        assert!((quad - kl(&[0.0], &[4.0], &[0.0], &[1.0])).abs() < 1e-9);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // per-sample sd is 1, so the standard error is 3.2e-4
        let n = 10_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let e: f64 = StandardNormal.sample(&mut rng);
            let x = 1.0 + e;
            acc += log_n(x, 1.0, 1.0) - log_n(x, 0.0, 1.0);
        }
        assert!((acc / n as f64 - 0.5).abs() < 1e-3);
    }

    #[test]
    fn kl_is_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let d = rng.random_range(1..4);
            let g = |rng: &mut ChaCha8Rng, pos: bool| -> Vec<f64> {
                (0..d)
                    .map(|_| if pos { rng.random_range(0.01..5.0) } else { rng.random_range(-3.0..3.0) })
                    .collect()
            };
            let (mq, vq, mp, vp) = (g(&mut rng, false), g(&mut rng, true), g(&mut rng, false), g(&mut rng, true));
            assert!(kl(&mq, &vq, &mp, &vp) >= 0.0);
        }
    }
}
