//! Linear-Gaussian structural causal model with a hidden mediator.
//!
//! ```text
//! W ~ N(0, I_dw)           U ~ N(0, 1)
//! T ~ Bernoulli(sigmoid(b_wt·W + b_ut·U))
//! Z = c_z + b_tz·T + B_wz·W + e_z,      e_z ~ N(0, s_z² I_dz)
//! Y = c_y + b_zy·Z + b_wy·W + u_scale·b_uy·U + e_y,   e_y ~ N(0, s_y²)
//! X = B_zx·Z + e_x,                     e_x ~ N(0, s_x² I_dx)
//! ```
//!
//! Z and U are hidden; X is a noisy proxy of Z. The interventional effect of
//! T on Y is `b_tz·b_zy` regardless of the confounding scale.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;

#[derive(Debug, Error)]
pub enum ScmError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ScmError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScmDims {
    pub d_w: usize,
    pub d_z: usize,
    pub d_x: usize,
}

impl Default for ScmDims {
    fn default() -> Self {
        Self {
            d_w: 2,
            d_z: 1,
            d_x: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearScmConfig {
    pub beta_wt: Vec<f64>,
    pub beta_ut: f64,
    pub c_z: Vec<f64>,
    pub beta_tz: Vec<f64>,
    /// `d_z` rows of length `d_w`.
    pub beta_wz: Vec<Vec<f64>>,
    pub c_y: f64,
    pub beta_zy: Vec<f64>,
    pub beta_wy: Vec<f64>,
    pub beta_uy: f64,
    /// `d_x` rows of length `d_z`.
    pub beta_zx: Vec<Vec<f64>>,
    pub noise_z: f64,
    pub noise_y: f64,
    pub noise_x: f64,
    pub u_scale: f64,
}

/// Uniform on `[-1.5, -0.5] ∪ [0.5, 1.5]`.
fn coef<R: Rng>(rng: &mut R) -> f64 {
    let mag = Uniform::new_inclusive(0.5, 1.5).unwrap().sample(rng);
    if rng.random::<bool>() {
        mag
    } else {
        -mag
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl LinearScmConfig {
    /// Draws every structural coefficient and intercept from
    /// `Uniform(±[0.5, 1.5])`, with `b_ut = b_uy = 1`, `s_z = s_y = 0.5`,
    /// `s_x = 0.1` and `u_scale = 1`.
    pub fn draw(dims: ScmDims, seed: u64) -> Result<Self> {
        if dims.d_w == 0 || dims.d_z == 0 || dims.d_x < dims.d_z {
            return Err(ScmError::Invalid(format!(
                "need d_w ≥ 1, d_z ≥ 1 and d_x ≥ d_z, got {dims:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = &mut rng;
        let vec = |n: usize, r: &mut ChaCha8Rng| (0..n).map(|_| coef(r)).collect::<Vec<_>>();
        let beta_wt = vec(dims.d_w, r);
        let c_z = vec(dims.d_z, r);
        let beta_tz = vec(dims.d_z, r);
        let beta_wz = (0..dims.d_z).map(|_| vec(dims.d_w, r)).collect();
        let c_y = coef(r);
        let beta_zy = vec(dims.d_z, r);
        let beta_wy = vec(dims.d_w, r);
        let beta_zx = (0..dims.d_x).map(|_| vec(dims.d_z, r)).collect();
        Ok(Self {
            beta_wt,
            beta_ut: 1.0,
            c_z,
            beta_tz,
            beta_wz,
            c_y,
            beta_zy,
            beta_wy,
            beta_uy: 1.0,
            beta_zx,
            noise_z: 0.5,
            noise_y: 0.5,
            noise_x: 0.1,
            u_scale: 1.0,
        })
    }

    pub fn dims(&self) -> ScmDims {
        ScmDims {
            d_w: self.beta_wt.len(),
            d_z: self.beta_tz.len(),
            d_x: self.beta_zx.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ScmDims { d_w, d_z, d_x } = self.dims();
        let bad = |m: String| Err(ScmError::Invalid(m));
        if d_w == 0 || d_z == 0 || d_x < d_z {
            return bad(format!("need d_w ≥ 1, d_z ≥ 1 and d_x ≥ d_z, got {d_w}/{d_z}/{d_x}"));
        }
        if self.c_z.len() != d_z || self.beta_zy.len() != d_z {
            return bad("c_z and beta_zy must have length d_z".into());
        }
        if self.beta_wy.len() != d_w {
            return bad("beta_wy must have length d_w".into());
        }
        if self.beta_wz.len() != d_z || self.beta_wz.iter().any(|r| r.len() != d_w) {
            return bad("beta_wz must be d_z × d_w".into());
        }
        if self.beta_zx.iter().any(|r| r.len() != d_z) {
            return bad("beta_zx must be d_x × d_z".into());
        }
        for (name, s) in [
            ("noise_z", self.noise_z),
            ("noise_y", self.noise_y),
            ("noise_x", self.noise_x),
        ] {
            if !(s.is_finite() && s > 0.0) {
                return bad(format!("{name} must be positive, got {s}"));
            }
        }
        if !(self.u_scale.is_finite() && self.u_scale >= 0.0) {
            return bad(format!("u_scale must be non-negative, got {}", self.u_scale));
        }
        let all = self
            .beta_wt
            .iter()
            .chain(&self.c_z)
            .chain(&self.beta_tz)
            .chain(self.beta_wz.iter().flatten())
            .chain(&self.beta_zy)
            .chain(&self.beta_wy)
            .chain(self.beta_zx.iter().flatten())
            .chain([&self.beta_ut, &self.c_y, &self.beta_uy]);
        if all.into_iter().any(|v| !v.is_finite()) {
            return bad("coefficients must be finite".into());
        }
        Ok(())
    }

    /// `E[Y | do(T=1)] − E[Y | do(T=0)] = b_tz·b_zy`.
    pub fn true_ate(&self) -> f64 {
        self.beta_tz
            .iter()
            .zip(&self.beta_zy)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Copy with `u_scale = factor`, so the U → Y effect is `factor·b_uy`.
    pub fn scale_confounding(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(ScmError::Invalid(format!(
                "confounding factor must be non-negative, got {factor}"
            )));
        }
        Ok(Self {
            u_scale: factor,
            ..self.clone()
        })
    }

    /// Samples `n` rows. Z and U are attached as hidden columns.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        self.sample(n, seed, None)
    }

    /// Samples from the model with T forced to `t`.
    pub fn generate_do(&self, n: usize, seed: u64, t: bool) -> Result<Dataset> {
        self.sample(n, seed, Some(t))
    }

    fn sample(&self, n: usize, seed: u64, forced: Option<bool>) -> Result<Dataset> {
        self.validate()?;
        if n == 0 {
            return Err(ScmError::Invalid("sample size must be positive".into()));
        }
        let ScmDims { d_w, d_z, d_x } = self.dims();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        let mut u = Vec::with_capacity(n);
        let mut w = vec![Vec::with_capacity(n); d_w];
        let mut z = vec![Vec::with_capacity(n); d_z];
        let mut x = vec![Vec::with_capacity(n); d_x];
        let mut wi = vec![0.0; d_w];
        let mut zi = vec![0.0; d_z];
        for _ in 0..n {
            for v in wi.iter_mut() {
                *v = normal(&mut rng);
            }
            let ui = normal(&mut rng);
            // always consumed so forced and observational draws share noise
            let coin: f64 = rng.random();
            let logit = dot(&self.beta_wt, &wi) + self.beta_ut * ui;
            let ti = match forced {
                Some(f) => f,
                None => coin < sigmoid(logit),
            };
            let tf = if ti { 1.0 } else { 0.0 };
            for j in 0..d_z {
                zi[j] = self.c_z[j]
                    + self.beta_tz[j] * tf
                    + dot(&self.beta_wz[j], &wi)
                    + self.noise_z * normal(&mut rng);
            }
            let yi = self.c_y
                + dot(&self.beta_zy, &zi)
                + dot(&self.beta_wy, &wi)
                + self.u_scale * self.beta_uy * ui
                + self.noise_y * normal(&mut rng);
            for (k, col) in x.iter_mut().enumerate() {
                col.push(dot(&self.beta_zx[k], &zi) + self.noise_x * normal(&mut rng));
            }
            t.push(tf);
            y.push(yi);
            u.push(ui);
            for j in 0..d_w {
                w[j].push(wi[j]);
            }
            for j in 0..d_z {
                z[j].push(zi[j]);
            }
        }
        Dataset::new(t, y, w, x)
            .and_then(|d| d.with_hidden(Some(z), Some(u)))
            .map_err(|e| ScmError::Invalid(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}
