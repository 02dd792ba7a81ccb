use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use super::{
    Activation, ModelConfig, ModelError, PriorMode, Result, CHECKPOINT_VERSION, VARIANCE_FLOOR,
};
use crate::autodiff::{gaussian_log_pdf, kl_diag_gaussians, ParamId, ParamStore, Tape, Tensor, Var};
use crate::dataset::Dataset;

/// Column means and standard deviations used to z-score W and X.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub w_mean: Vec<f64>,
    pub w_std: Vec<f64>,
    pub x_mean: Vec<f64>,
    pub x_std: Vec<f64>,
}

fn moments(cols: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    cols.iter()
        .map(|c| {
            let n = c.len() as f64;
            let m = c.iter().sum::<f64>() / n;
            let v = c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            let s = v.sqrt();
            (m, if s > 0.0 { s } else { 1.0 })
        })
        .unzip()
}

impl Normalization {
    pub fn fit(data: &Dataset) -> Self {
        let (w_mean, w_std) = moments(data.w());
        let (x_mean, x_std) = moments(data.x());
        Self {
            w_mean,
            w_std,
            x_mean,
            x_std,
        }
    }

    pub fn identity(d_w: usize, d_x: usize) -> Self {
        Self {
            w_mean: vec![0.0; d_w],
            w_std: vec![1.0; d_w],
            x_mean: vec![0.0; d_x],
            x_std: vec![1.0; d_x],
        }
    }
}

/// Standardized model inputs for a set of rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub t: Tensor,
    pub w: Tensor,
    pub x: Tensor,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.t.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.t.rows() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Batch {
        Batch {
            t: self.t.select_rows(idx),
            w: self.w.select_rows(idx),
            x: self.x.select_rows(idx),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElboTerms {
    pub elbo: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

fn refs(cols: &[Vec<f64>]) -> Vec<&[f64]> {
    cols.iter().map(Vec::as_slice).collect()
}

#[derive(Debug, Clone, PartialEq)]
struct Mlp {
    layers: Vec<(ParamId, ParamId)>,
}

impl Mlp {
    fn build(store: &mut ParamStore, prefix: &str, sizes: &[usize], rng: &mut ChaCha8Rng) -> Mlp {
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, io)| {
                let (fan_in, fan_out) = (io[0], io[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let u = Uniform::new_inclusive(-bound, bound).unwrap();
                let data = (0..fan_in * fan_out).map(|_| u.sample(rng)).collect();
                let w = store.add(format!("{prefix}.{k}.weight"), Tensor::new(fan_in, fan_out, data).unwrap());
                let b = store.add(format!("{prefix}.{k}.bias"), Tensor::zeros(1, fan_out));
                (w, b)
            })
            .collect();
        Mlp { layers }
    }

    fn locate(store: &ParamStore, prefix: &str, sizes: &[usize]) -> Result<Mlp> {
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(k, io)| {
                let find = |suffix: &str, shape: [usize; 2]| {
                    let name = format!("{prefix}.{k}.{suffix}");
                    let id = store
                        .find(&name)
                        .ok_or_else(|| ModelError::Checkpoint(format!("missing tensor `{name}`")))?;
                    if store.get(id).value.shape() != shape {
                        return Err(ModelError::Checkpoint(format!(
                            "tensor `{name}` has shape {:?}, expected {shape:?}",
                            store.get(id).value.shape()
                        )));
                    }
                    Ok(id)
                };
                Ok((find("weight", [io[0], io[1]])?, find("bias", [1, io[1]])?))
            })
            .collect::<Result<_>>()?;
        Ok(Mlp { layers })
    }

    fn forward(&self, tape: &mut Tape, store: &ParamStore, input: Var, act: Activation) -> Result<Var> {
        let mut h = input;
        let last = self.layers.len() - 1;
        for (k, &(w, b)) in self.layers.iter().enumerate() {
            let wv = tape.param(store, w);
            let bv = tape.param(store, b);
            h = tape.linear(h, wv, bv)?;
            if k < last {
                h = match act {
                    Activation::Elu => tape.elu(h),
                    Activation::Softplus => tape.softplus(h),
                    Activation::Sigmoid => tape.sigmoid(h),
                };
            }
        }
        Ok(h)
    }
}

/// Network weights, input normalization and configuration of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    norm: Normalization,
    store: ParamStore,
    encoder: Mlp,
    decoder: Mlp,
    prior: Option<Mlp>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    model_config: ModelConfig,
    normalization: Normalization,
    params: ParamStore,
}

fn layer_sizes(input: usize, width: usize, layers: usize, output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend(std::iter::repeat_n(width, layers));
    s.push(output);
    s
}

impl ModelParams {
    fn sizes(c: &ModelConfig) -> [Vec<usize>; 3] {
        let cond = c.conditioning_dim();
        let (h, l, k) = (c.hidden_width, c.num_layers, c.latent_dim);
        [
            layer_sizes(cond + c.d_x, h, l, 2 * k),
            layer_sizes(k, h, l, 2 * c.d_x),
            layer_sizes(cond, h, l, 2 * k),
        ]
    }

    /// Randomly initialized weights (Glorot-uniform, zero biases).
    pub fn init(config: ModelConfig, norm: Normalization, seed: u64) -> Result<Self> {
        config.validate()?;
        Self::check_norm(&config, &norm)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let [enc, dec, pri] = Self::sizes(&config);
        let encoder = Mlp::build(&mut store, "encoder", &enc, &mut rng);
        let decoder = Mlp::build(&mut store, "decoder", &dec, &mut rng);
        let prior = (config.prior_mode == PriorMode::LearnedConditional)
            .then(|| Mlp::build(&mut store, "prior", &pri, &mut rng));
        Ok(Self {
            config,
            norm,
            store,
            encoder,
            decoder,
            prior,
        })
    }

    /// All weights and biases zero.
    pub fn zeros(config: ModelConfig, norm: Normalization) -> Result<Self> {
        let mut p = Self::init(config, norm, 0)?;
        for id in p.store.ids().collect::<Vec<_>>() {
            p.store.value_mut(id).data_mut().fill(0.0);
        }
        Ok(p)
    }

    fn check_norm(c: &ModelConfig, n: &Normalization) -> Result<()> {
        if n.w_mean.len() != c.d_w || n.w_std.len() != c.d_w {
            return Err(ModelError::RoleMismatch {
                what: "normalization w",
                expected: c.d_w,
                got: n.w_mean.len(),
            });
        }
        if n.x_mean.len() != c.d_x || n.x_std.len() != c.d_x {
            return Err(ModelError::RoleMismatch {
                what: "normalization x",
                expected: c.d_x,
                got: n.x_mean.len(),
            });
        }
        Ok(())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn normalization(&self) -> &Normalization {
        &self.norm
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_scalars()
    }

    /// Standardized inputs of every row of `data`. Hidden columns are never
    /// read.
    pub fn batch(&self, data: &Dataset) -> Result<Batch> {
        let c = &self.config;
        if data.d_w() != c.d_w {
            return Err(ModelError::RoleMismatch {
                what: "w",
                expected: c.d_w,
                got: data.d_w(),
            });
        }
        if data.d_x() != c.d_x {
            return Err(ModelError::RoleMismatch {
                what: "x",
                expected: c.d_x,
                got: data.d_x(),
            });
        }
        let z = |cols: &[Vec<f64>], mean: &[f64], sd: &[f64]| -> Vec<Vec<f64>> {
            cols.iter()
                .zip(mean.iter().zip(sd))
                .map(|(c, (m, s))| c.iter().map(|v| (v - m) / s).collect())
                .collect()
        };
        let w = z(data.w(), &self.norm.w_mean, &self.norm.w_std);
        let x = z(data.x(), &self.norm.x_mean, &self.norm.x_std);
        let n = data.len();
        let w = if w.is_empty() { Tensor::zeros(n, 0) } else { Tensor::from_columns(&refs(&w))? };
        Ok(Batch {
            t: Tensor::from_columns(&[data.t()])?,
            w,
            x: Tensor::from_columns(&refs(&x))?,
        })
    }

    fn conditioning(&self, tape: &mut Tape, t: Var, w: Var) -> Result<Var> {
        let v = self.config.variant;
        let n = tape.shape(t)[0];
        let parts: Vec<Var> = [(v.uses_t(), t), (v.uses_w(), w)]
            .into_iter()
            .filter(|(on, _)| *on)
            .map(|(_, p)| p)
            .collect();
        if parts.is_empty() {
            Ok(tape.leaf(Tensor::zeros(n, 0)))
        } else {
            Ok(tape.concat_cols(&parts)?)
        }
    }

    fn gaussian_head(&self, tape: &mut Tape, out: Var, k: usize) -> Result<(Var, Var)> {
        let mu = tape.slice_cols(out, 0, k)?;
        let logvar = tape.slice_cols(out, k, 2 * k)?;
        let var = tape.exp(logvar);
        Ok((mu, tape.clamp_min(var, VARIANCE_FLOOR)))
    }

    /// Posterior `q(Z | T, W, X)` as (mean, variance), each `n × latent_dim`.
    pub fn encode(&self, tape: &mut Tape, t: Var, w: Var, x: Var) -> Result<(Var, Var)> {
        let cond = self.conditioning(tape, t, w)?;
        let input = tape.concat_cols(&[cond, x])?;
        let out = self.encoder.forward(tape, &self.store, input, self.config.activation)?;
        self.gaussian_head(tape, out, self.config.latent_dim)
    }

    /// Likelihood `p(X | Z)` as (mean, variance), each `n × d_x`.
    pub fn decode(&self, tape: &mut Tape, z: Var) -> Result<(Var, Var)> {
        let out = self.decoder.forward(tape, &self.store, z, self.config.activation)?;
        self.gaussian_head(tape, out, self.config.d_x)
    }

    /// Prior `p(Z | T, W)`. In fixed mode the result is `1 × latent_dim`
    /// zeros and ones, broadcast by the caller.
    pub fn prior(&self, tape: &mut Tape, t: Var, w: Var) -> Result<(Var, Var)> {
        let k = self.config.latent_dim;
        match &self.prior {
            None => Ok((tape.leaf(Tensor::zeros(1, k)), tape.leaf(Tensor::full(1, k, 1.0)))),
            Some(mlp) => {
                let cond = self.conditioning(tape, t, w)?;
                let out = mlp.forward(tape, &self.store, cond, self.config.activation)?;
                self.gaussian_head(tape, out, k)
            }
        }
    }

    /// Records the negative ELBO of `batch` on `tape`, using the supplied
    /// standard-normal draws (one `n × latent_dim` tensor per Monte-Carlo
    /// sample). Returns the loss variable and the batch-mean terms.
    pub fn elbo_graph(&self, tape: &mut Tape, batch: &Batch, eps: &[Tensor]) -> Result<(Var, ElboTerms)> {
        if batch.is_empty() || eps.is_empty() {
            return Err(ModelError::InvalidConfig("empty batch or no noise samples".into()));
        }
        let t = tape.leaf(batch.t.clone());
        let w = tape.leaf(batch.w.clone());
        let x = tape.leaf(batch.x.clone());
        let (mu_q, var_q) = self.encode(tape, t, w, x)?;
        let sd_q = tape.sqrt(var_q);
        let mut recon_sum: Option<Var> = None;
        for e in eps {
            let e = tape.leaf(e.clone());
            let noise = tape.mul(sd_q, e)?;
            let z = tape.add(mu_q, noise)?;
            let (mu_x, var_x) = self.decode(tape, z)?;
            let lp = gaussian_log_pdf(tape, x, mu_x, var_x)?;
            let m = tape.mean(lp);
            recon_sum = Some(match recon_sum {
                None => m,
                Some(acc) => tape.add(acc, m)?,
            });
        }
        let recon = tape.scale(recon_sum.expect("eps is nonempty"), 1.0 / eps.len() as f64);
        let (mu_p, var_p) = self.prior(tape, t, w)?;
        let kl = kl_diag_gaussians(tape, mu_q, var_q, mu_p, var_p)?;
        let kl = tape.mean(kl);
        let neg = tape.sub(kl, recon)?;
        let r = tape.value(recon).data()[0];
        let k = tape.value(kl).data()[0];
        Ok((
            neg,
            ElboTerms {
                elbo: r - k,
                reconstruction: r,
                kl: k,
            },
        ))
    }

    /// Draws the reparameterization noise for `n` rows.
    pub fn sample_noise<R: Rng>(&self, n: usize, samples: usize, rng: &mut R) -> Vec<Tensor> {
        let k = self.config.latent_dim;
        (0..samples)
            .map(|_| {
                let data = (0..n * k).map(|_| StandardNormal.sample(rng)).collect();
                Tensor::new(n, k, data).expect("n×k buffer")
            })
            .collect()
    }

    /// Evaluates the ELBO of `batch` with fresh noise and adds the gradient
    /// of the negative ELBO into the parameter store.
    pub fn elbo<R: Rng>(&mut self, batch: &Batch, rng: &mut R, mc_samples: usize) -> Result<ElboTerms> {
        let eps = self.sample_noise(batch.len(), mc_samples.max(1), rng);
        let mut tape = Tape::new();
        let (loss, terms) = self.elbo_graph(&mut tape, batch, &eps)?;
        tape.backward_into(loss, &mut self.store)?;
        Ok(terms)
    }

    /// Posterior means of every row, column-major (`latent_dim` columns).
    pub fn posterior_mean(&self, batch: &Batch) -> Result<Vec<Vec<f64>>> {
        let mut tape = Tape::new();
        let t = tape.leaf(batch.t.clone());
        let w = tape.leaf(batch.w.clone());
        let x = tape.leaf(batch.x.clone());
        let (mu, _) = self.encode(&mut tape, t, w, x)?;
        let mu = tape.value(mu);
        Ok((0..mu.cols()).map(|j| mu.column(j)).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Checkpoint {
            version: CHECKPOINT_VERSION,
            model_config: self.config.clone(),
            normalization: self.norm.clone(),
            params: self.store.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        ck.model_config.validate()?;
        Self::check_norm(&ck.model_config, &ck.normalization)?;
        let [enc, dec, pri] = Self::sizes(&ck.model_config);
        let encoder = Mlp::locate(&ck.params, "encoder", &enc)?;
        let decoder = Mlp::locate(&ck.params, "decoder", &dec)?;
        let prior = match ck.model_config.prior_mode {
            PriorMode::LearnedConditional => Some(Mlp::locate(&ck.params, "prior", &pri)?),
            PriorMode::FixedStandardNormal => None,
        };
        let expected = enc.len() + dec.len() - 2 + prior.as_ref().map_or(0, |_| pri.len() - 1);
        if ck.params.len() != 2 * expected {
            return Err(ModelError::Checkpoint("unexpected extra tensors".into()));
        }
        Ok(Self {
            config: ck.model_config,
            norm: ck.normalization,
            store: ck.params,
            encoder,
            decoder,
            prior,
        })
    }
}
