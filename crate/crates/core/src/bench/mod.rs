//! Experiment harness: bias sweeps over sample size, confounding-strength
//! sweeps, latent/mediator dimension grids, model ablations and
//! representation fidelity.
//!
//! Every experiment is a grid of cells `(n, factor, d_l, d_r, variant)`
//! evaluated over `reps` replications. Structural coefficients are drawn once
//! per mediator dimension from a seed derived from the master seed; each
//! replication draws a fresh dataset from them. A unit of work is one
//! `(n, d_r, d_l, variant, rep)` tuple: it trains one model and evaluates it
//! at every confounding factor, which is exact because the factor only
//! rescales the U → Y path and leaves the model inputs T, W and X untouched.
//!
//! Seeds: SCM coefficients use `derive_seed(seed, [label("scm"), d_w, d_r, d_x])`,
//! datasets `derive_seed(seed, [label("data"), n, d_r, rep])` and training
//! `derive_seed(seed, [label("train"), n, d_r, d_l, variant, rep])`, so results
//! do not depend on scheduling.

mod plot;
mod report;
mod stats;

pub use plot::{density_plot, kde, line_plot, Series};
pub use report::{emit_report, read_report_csv, write_report_csv};
pub use stats::{ks_statistic, mean_std, representation_fidelity, AffineAlignment};

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cfdivae::{infer_representation, train, ModelConfig, PriorMode, TrainConfig, Variant};
use crate::dataset::Dataset;
use crate::estimator::{backdoor_baseline_ate, estimation_bias, two_stage_ate};
use crate::scm::{LinearScmConfig, ScmDims};
use crate::seed::{derive_seed, label};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench spec: {0}")]
    InvalidSpec(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

pub type Result<T> = std::result::Result<T, BenchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    BiasSweep,
    StrengthSweep,
    DimGrid,
    Ablation,
    Fidelity,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::BiasSweep => "bias_sweep",
            Experiment::StrengthSweep => "strength_sweep",
            Experiment::DimGrid => "dim_grid",
            Experiment::Ablation => "ablation",
            Experiment::Fidelity => "fidelity",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bias_sweep" | "bias" => Ok(Experiment::BiasSweep),
            "strength_sweep" | "strength" => Ok(Experiment::StrengthSweep),
            "dim_grid" | "dim" => Ok(Experiment::DimGrid),
            "ablation" | "ablations" => Ok(Experiment::Ablation),
            "fidelity" => Ok(Experiment::Fidelity),
            _ => Err(format!("unknown experiment `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Cfdivae,
    Backdoor,
    OracleZ,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Cfdivae => "cfdivae",
            Method::Backdoor => "backdoor",
            Method::OracleZ => "oracle_z",
        }
    }
}

/// Model settings shared by every cell; latent dimension and variant come
/// from the cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelOverrides {
    pub hidden_width: usize,
    pub num_layers: usize,
    pub prior_mode: PriorMode,
}

impl Default for ModelOverrides {
    fn default() -> Self {
        let m = ModelConfig::new(1, 1, 1);
        Self {
            hidden_width: m.hidden_width,
            num_layers: m.num_layers,
            prior_mode: m.prior_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSpec {
    pub experiment: Experiment,
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    /// Values of `u_scale`.
    pub factors: Vec<f64>,
    /// `(d_l, d_r)` pairs.
    pub dims: Vec<(usize, usize)>,
    pub variants: Vec<Variant>,
    pub d_w: usize,
    /// Proxy dimension; `None` uses `max(3, d_r + 2)`.
    pub d_x: Option<usize>,
    /// Fixed SCM used instead of drawn coefficients (its dims must match
    /// every cell).
    pub scm: Option<LinearScmConfig>,
    pub model: ModelOverrides,
    pub train: TrainConfig,
    pub workers: usize,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self::for_experiment(Experiment::BiasSweep)
    }
}

pub const STRENGTH_GRID: [f64; 11] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0];
pub const DIM_GRID: [(usize, usize); 8] = [(1, 2), (2, 2), (1, 4), (2, 4), (4, 4), (1, 8), (4, 8), (8, 8)];

impl BenchSpec {
    /// Desk-scale defaults of each experiment: 10 replications, sizes
    /// {2k, 10k, 20k} for the bias sweep.
    pub fn for_experiment(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            sizes: vec![10_000],
            reps: 10,
            seed: 0,
            factors: vec![1.0],
            dims: vec![(1, 1)],
            variants: vec![Variant::Full],
            d_w: 2,
            d_x: None,
            scm: None,
            model: ModelOverrides::default(),
            train: TrainConfig::default(),
            workers: 1,
        };
        match experiment {
            Experiment::BiasSweep => Self {
                sizes: vec![2_000, 10_000, 20_000],
                ..base
            },
            Experiment::StrengthSweep => Self {
                factors: STRENGTH_GRID.to_vec(),
                ..base
            },
            Experiment::DimGrid => Self {
                sizes: vec![20_000],
                dims: DIM_GRID.to_vec(),
                ..base
            },
            Experiment::Ablation => Self {
                sizes: vec![10_000, 20_000],
                variants: Variant::ALL.to_vec(),
                ..base
            },
            Experiment::Fidelity => Self { reps: 1, ..base },
        }
    }

    /// Full-scale grid: 30 replications over sizes 0.5k to 20k.
    pub fn full_scale(mut self) -> Self {
        self.reps = 30;
        if self.experiment == Experiment::BiasSweep {
            self.sizes = vec![500, 1_000, 2_000, 5_000, 10_000, 20_000];
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(BenchError::InvalidSpec(m));
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return bad("sizes must be nonempty and positive".into());
        }
        if let Some(&n) = self.sizes.iter().find(|&&n| n < self.train.batch_size) {
            return bad(format!("size {n} is smaller than the batch size {}", self.train.batch_size));
        }
        if self.factors.is_empty() || self.factors.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return bad("factors must be nonempty and non-negative".into());
        }
        if self.dims.is_empty() || self.dims.iter().any(|&(l, r)| l == 0 || r == 0) {
            return bad("dims must be nonempty with positive entries".into());
        }
        if self.variants.is_empty() {
            return bad("at least one variant is required".into());
        }
        if self.d_w == 0 {
            return bad("d_w must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        for &(_, r) in &self.dims {
            let d_x = self.proxy_dim(r);
            if d_x < r {
                return bad(format!("d_x = {d_x} is smaller than d_r = {r}"));
            }
            if let Some(s) = &self.scm {
                let want = ScmDims { d_w: self.d_w, d_z: r, d_x };
                if s.dims() != want {
                    return bad(format!("fixed SCM has dims {:?}, cell needs {want:?}", s.dims()));
                }
            }
        }
        Ok(())
    }

    fn proxy_dim(&self, d_r: usize) -> usize {
        self.d_x.unwrap_or(3.max(d_r + 2))
    }

    /// Structural coefficients used for mediator dimension `d_r`, at the
    /// SCM's own `u_scale`.
    pub fn scm_for(&self, d_r: usize) -> Result<LinearScmConfig> {
        if let Some(s) = &self.scm {
            return Ok(s.clone());
        }
        let dims = ScmDims {
            d_w: self.d_w,
            d_z: d_r,
            d_x: self.proxy_dim(d_r),
        };
        let seed = derive_seed(self.seed, &[label("scm"), dims.d_w as u64, dims.d_z as u64, dims.d_x as u64]);
        LinearScmConfig::draw(dims, seed).map_err(|e| BenchError::InvalidSpec(e.to_string()))
    }

    pub fn data_seed(&self, n: usize, d_r: usize, rep: usize) -> u64 {
        derive_seed(self.seed, &[label("data"), n as u64, d_r as u64, rep as u64])
    }

    pub fn train_seed(&self, n: usize, d_r: usize, d_l: usize, variant: Variant, rep: usize) -> u64 {
        derive_seed(
            self.seed,
            &[label("train"), n as u64, d_r as u64, d_l as u64, label(variant.as_str()), rep as u64],
        )
    }

    pub fn model_config(&self, d_x: usize, d_l: usize, variant: Variant) -> ModelConfig {
        ModelConfig {
            hidden_width: self.model.hidden_width,
            num_layers: self.model.num_layers,
            prior_mode: self.model.prior_mode,
            variant,
            ..ModelConfig::new(d_x, self.d_w, d_l)
        }
    }
}

/// One CSV row: aggregated bias of one method in one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRow {
    pub experiment: Experiment,
    pub cell_id: String,
    pub n: usize,
    pub factor: f64,
    pub d_l: Option<usize>,
    pub d_r: usize,
    pub variant: Option<Variant>,
    pub method: Method,
    pub mean_bias_pct: f64,
    pub std_bias_pct: f64,
    pub reps: usize,
    pub seed: u64,
    pub config_hash: String,
}

/// Per-replication outcome behind a [`CellRow`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub cell_id: String,
    pub method: Method,
    pub rep: usize,
    pub estimate: f64,
    pub truth: f64,
    pub bias_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRecord {
    pub cell_id: String,
    pub rep: usize,
    pub alignment: AffineAlignment,
    pub ks: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub cell_id: String,
    pub rep: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub master_seed: u64,
    pub spec: BenchSpec,
    pub wall_clock_secs: f64,
}

/// Aligned learned mediator and true mediator of the first replication of
/// the first cell, for density plots.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DensitySample {
    pub aligned: Vec<f64>,
    pub truth: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub experiment: Experiment,
    pub rows: Vec<CellRow>,
    pub samples: Vec<Sample>,
    pub fidelity: Vec<FidelityRecord>,
    pub failures: Vec<Failure>,
    pub provenance: Provenance,
    #[serde(skip)]
    pub density: Option<DensitySample>,
}

impl BenchReport {
    pub fn empty(spec: &BenchSpec) -> Self {
        Self {
            experiment: spec.experiment,
            rows: Vec::new(),
            samples: Vec::new(),
            fidelity: Vec::new(),
            failures: Vec::new(),
            provenance: Provenance {
                tool: "cfdivae".into(),
                version: env!("CARGO_PKG_VERSION").into(),
                master_seed: spec.seed,
                spec: spec.clone(),
                wall_clock_secs: 0.0,
            },
            density: None,
        }
    }

    /// Rows matching a method, in report order.
    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &CellRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Per-replication biases of one row.
    pub fn biases(&self, row: &CellRow) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| s.cell_id == row.cell_id && s.method == row.method)
            .map(|s| s.bias_pct)
            .collect()
    }
}

/// Hex SHA-256 prefix of the canonical JSON of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("configs serialize");
    let digest = Sha256::digest(&json);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct CellKey {
    n: usize,
    factor_idx: usize,
    d_r: usize,
    model: Option<(usize, usize)>,
    method: Method,
}

struct CellMeta {
    row: CellRow,
    samples: Vec<Sample>,
}

#[derive(Clone, Copy)]
struct Unit {
    n: usize,
    d_l: usize,
    d_r: usize,
    variant_idx: usize,
    rep: usize,
}

fn cell_id(n: usize, factor: f64, d_r: usize, model: Option<(usize, Variant)>) -> String {
    match model {
        Some((d_l, v)) => format!("n={n}/factor={factor}/d_r={d_r}/d_l={d_l}/variant={}", v.as_str()),
        None => format!("n={n}/factor={factor}/d_r={d_r}"),
    }
}

struct UnitOutput {
    entries: Vec<(CellKey, CellRow, Sample)>,
    fidelity: Vec<FidelityRecord>,
    failures: Vec<Failure>,
    density: Option<DensitySample>,
}

fn run_unit(spec: &BenchSpec, u: Unit) -> UnitOutput {
    let mut out = UnitOutput {
        entries: Vec::new(),
        fidelity: Vec::new(),
        failures: Vec::new(),
        density: None,
    };
    let variant = spec.variants[u.variant_idx];
    let first_model = u.d_l == spec.dims.iter().find(|d| d.1 == u.d_r).map_or(0, |d| d.0) && u.variant_idx == 0;
    let base = match spec.scm_for(u.d_r) {
        Ok(s) => s,
        Err(e) => {
            out.failures.push(Failure {
                cell_id: cell_id(u.n, spec.factors[0], u.d_r, Some((u.d_l, variant))),
                rep: u.rep,
                message: e.to_string(),
            });
            return out;
        }
    };
    let d_x = base.dims().d_x;
    let model_cfg = spec.model_config(d_x, u.d_l, variant);
    let train_cfg = TrainConfig {
        seed: spec.train_seed(u.n, u.d_r, u.d_l, variant, u.rep),
        ..spec.train.clone()
    };
    let data_seed = spec.data_seed(u.n, u.d_r, u.rep);

    let mut trained: Option<(Vec<Vec<f64>>, Dataset)> = None;
    for (fi, &factor) in spec.factors.iter().enumerate() {
        let scm = match base.scale_confounding(factor) {
            Ok(s) => s,
            Err(e) => {
                out.failures.push(Failure {
                    cell_id: cell_id(u.n, factor, u.d_r, None),
                    rep: u.rep,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let truth = scm.true_ate();
        let model_id = cell_id(u.n, factor, u.d_r, Some((u.d_l, variant)));
        let data = match scm.generate(u.n, data_seed) {
            Ok(d) => d,
            Err(e) => {
                out.failures.push(Failure {
                    cell_id: model_id,
                    rep: u.rep,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let scm_hash = config_hash(&scm);
        let row = |method: Method, model: Option<(usize, Variant)>, hash: String| CellRow {
            experiment: spec.experiment,
            cell_id: cell_id(u.n, factor, u.d_r, model),
            n: u.n,
            factor,
            d_l: model.map(|m| m.0),
            d_r: u.d_r,
            variant: model.map(|m| m.1),
            method,
            mean_bias_pct: 0.0,
            std_bias_pct: 0.0,
            reps: 0,
            seed: spec.seed,
            config_hash: hash,
        };
        let push = |method: Method, model: Option<(usize, Variant)>, hash: String, est: std::result::Result<f64, String>, out: &mut UnitOutput| {
            let r = row(method, model, hash);
            let key = CellKey {
                n: u.n,
                factor_idx: fi,
                d_r: u.d_r,
                model: model.map(|(l, _)| (l, u.variant_idx)),
                method,
            };
            match est.and_then(|e| estimation_bias(e, truth).map(|b| (e, b)).map_err(|x| x.to_string())) {
                Ok((estimate, bias)) => {
                    let s = Sample {
                        cell_id: r.cell_id.clone(),
                        method,
                        rep: u.rep,
                        estimate,
                        truth,
                        bias_pct: bias,
                    };
                    out.entries.push((key, r, s));
                }
                Err(message) => out.failures.push(Failure {
                    cell_id: r.cell_id,
                    rep: u.rep,
                    message: format!("{}: {message}", method.as_str()),
                }),
            }
        };

        if first_model {
            let bd = backdoor_baseline_ate(&data).map(|a| a.estimate).map_err(|e| e.to_string());
            push(Method::Backdoor, None, scm_hash.clone(), bd, &mut out);
            let z = data.hidden_z().expect("generated data carries Z");
            let or = two_stage_ate(&data, z).map(|a| a.estimate).map_err(|e| e.to_string());
            push(Method::OracleZ, None, scm_hash.clone(), or, &mut out);
        }

        if trained.is_none() {
            let observed = data.observed_only();
            match train(&observed, model_cfg.clone(), &train_cfg)
                .and_then(|(p, _)| infer_representation(&p, &observed))
            {
                Ok(z) => trained = Some((z, observed)),
                Err(e) => {
                    out.failures.push(Failure {
                        cell_id: model_id.clone(),
                        rep: u.rep,
                        message: format!("training: {e}"),
                    });
                    break;
                }
            }
        }
        let (z_hat, inputs) = trained.as_ref().expect("trained above");
        if inputs.t() != data.t() || inputs.w() != data.w() || inputs.x() != data.x() {
            out.failures.push(Failure {
                cell_id: model_id,
                rep: u.rep,
                message: "model inputs changed with the confounding factor".into(),
            });
            continue;
        }
        let hash = config_hash(&(&scm, &model_cfg, &spec.train));
        let est = two_stage_ate(&data, z_hat).map(|a| a.estimate).map_err(|e| e.to_string());
        push(Method::Cfdivae, Some((u.d_l, variant)), hash, est, &mut out);

        if fi == 0 {
            let truth_z = data.hidden_z().expect("generated data carries Z");
            match representation_fidelity(z_hat, truth_z) {
                Ok((alignment, ks)) => {
                    if spec.experiment == Experiment::Fidelity && u.rep == 0 {
                        let aligned = (0..u.n)
                            .map(|i| {
                                alignment.offset[0]
                                    + alignment.matrix[0].iter().zip(z_hat).map(|(a, z)| a * z[i]).sum::<f64>()
                            })
                            .collect();
                        out.density = Some(DensitySample {
                            aligned,
                            truth: truth_z[0].clone(),
                        });
                    }
                    out.fidelity.push(FidelityRecord {
                        cell_id: cell_id(u.n, factor, u.d_r, Some((u.d_l, variant))),
                        rep: u.rep,
                        alignment,
                        ks,
                    })
                }
                Err(e) => out.failures.push(Failure {
                    cell_id: cell_id(u.n, factor, u.d_r, Some((u.d_l, variant))),
                    rep: u.rep,
                    message: format!("alignment: {e}"),
                }),
            }
        }
    }
    out
}

/// Runs any experiment described by `spec`.
pub fn run(spec: &BenchSpec) -> Result<BenchReport> {
    spec.validate()?;
    let started = Instant::now();
    let mut units = Vec::new();
    for &n in &spec.sizes {
        for &(d_l, d_r) in &spec.dims {
            for variant_idx in 0..spec.variants.len() {
                for rep in 0..spec.reps {
                    units.push(Unit {
                        n,
                        d_l,
                        d_r,
                        variant_idx,
                        rep,
                    });
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    let outputs: Vec<UnitOutput> = pool.install(|| units.par_iter().map(|&u| run_unit(spec, u)).collect());

    let mut report = BenchReport::empty(spec);
    let mut cells: BTreeMap<CellKey, CellMeta> = BTreeMap::new();
    for o in outputs {
        for (key, row, sample) in o.entries {
            let cell = cells.entry(key).or_insert_with(|| CellMeta {
                row,
                samples: Vec::new(),
            });
            cell.samples.push(sample);
        }
        report.fidelity.extend(o.fidelity);
        report.failures.extend(o.failures);
        if report.density.is_none() {
            report.density = o.density;
        }
    }
    for (_, mut cell) in cells {
        cell.samples.sort_by_key(|s| s.rep);
        let biases: Vec<f64> = cell.samples.iter().map(|s| s.bias_pct).collect();
        let (mean, std) = mean_std(&biases);
        cell.row.mean_bias_pct = mean;
        cell.row.std_bias_pct = std;
        cell.row.reps = biases.len();
        report.rows.push(cell.row);
        report.samples.extend(cell.samples);
    }
    report.provenance.wall_clock_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

pub fn run_bias_sweep(spec: &BenchSpec) -> Result<BenchReport> {
    run(&BenchSpec {
        experiment: Experiment::BiasSweep,
        ..spec.clone()
    })
}

pub fn run_strength_sweep(spec: &BenchSpec) -> Result<BenchReport> {
    run(&BenchSpec {
        experiment: Experiment::StrengthSweep,
        ..spec.clone()
    })
}

pub fn run_dim_grid(spec: &BenchSpec) -> Result<BenchReport> {
    run(&BenchSpec {
        experiment: Experiment::DimGrid,
        ..spec.clone()
    })
}

pub fn run_ablations(spec: &BenchSpec) -> Result<BenchReport> {
    run(&BenchSpec {
        experiment: Experiment::Ablation,
        ..spec.clone()
    })
}

pub fn run_fidelity(spec: &BenchSpec) -> Result<BenchReport> {
    run(&BenchSpec {
        experiment: Experiment::Fidelity,
        ..spec.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(experiment: Experiment) -> BenchSpec {
        BenchSpec {
            sizes: vec![400],
            reps: 2,
            train: TrainConfig {
                epochs: 2,
                batch_size: 100,
                ..TrainConfig::default()
            },
            model: ModelOverrides {
                hidden_width: 8,
                ..ModelOverrides::default()
            },
            ..BenchSpec::for_experiment(experiment)
        }
    }

    #[test]
    fn defaults_validate() {
        for e in [
            Experiment::BiasSweep,
            Experiment::StrengthSweep,
            Experiment::DimGrid,
            Experiment::Ablation,
            Experiment::Fidelity,
        ] {
            BenchSpec::for_experiment(e).validate().unwrap();
        }
        let bad = BenchSpec {
            reps: 0,
            ..BenchSpec::default()
        };
        assert!(bad.validate().is_err());
        let bad = BenchSpec {
            factors: vec![-1.0],
            ..BenchSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn strength_sweep_has_one_row_per_factor_and_method() {
        let spec = BenchSpec {
            factors: vec![0.0, 1.0, 2.0],
            ..tiny(Experiment::StrengthSweep)
        };
        let r = run(&spec).unwrap();
        assert!(r.failures.is_empty(), "{:?}", r.failures);
        for m in [Method::Cfdivae, Method::Backdoor, Method::OracleZ] {
            let rows: Vec<_> = r.rows_for(m).collect();
            assert_eq!(rows.len(), 3);
            assert!(rows.iter().all(|row| row.reps == 2 && row.std_bias_pct >= 0.0));
        }
        // the mediator path does not involve U, so the learned-Z estimate is
        // the same model at every factor
        let truths: Vec<f64> = r.samples.iter().map(|s| s.truth).collect();
        assert!(truths.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn reproducible_across_worker_counts() {
        let spec = tiny(Experiment::Ablation);
        let a = run(&spec).unwrap();
        let b = run(&BenchSpec { workers: 3, ..spec }).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.fidelity, b.fidelity);
        assert_eq!(a.rows_for(Method::Cfdivae).count(), 4);
    }

    #[test]
    fn single_rep_has_zero_std() {
        let spec = BenchSpec {
            reps: 1,
            ..tiny(Experiment::BiasSweep)
        };
        let r = run(&spec).unwrap();
        assert!(r.rows.iter().all(|row| row.std_bias_pct == 0.0 && row.reps == 1));
    }
}
