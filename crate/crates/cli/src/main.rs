//! Command-line front end: graphical checks, exact discrete adjustment,
//! data generation, model training, ATE estimation and benchmarks.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 numeric or runtime
//! error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use cfdivae::bench::{self, config_hash, BenchSpec, Experiment};
use cfdivae::cfdivae::{
    infer_representation, train, Activation, ModelConfig, ModelError, ModelParams, PriorMode, TrainConfig, Variant,
};
use cfdivae::dataset::Dataset;
use cfdivae::discrete::{ate_discrete, cfd_adjust, verify_proof_chain, ChainRoles, DiscreteError, DiscreteScm};
use cfdivae::estimator::{backdoor_baseline_ate, estimation_bias, two_stage_ate, AteEstimate};
use cfdivae::graph::{
    find_cfd_conditioning_sets, is_backdoor_set, is_cfd_set, is_frontdoor_set, parse_dag, NodeSet,
};
use cfdivae::scm::{LinearScmConfig, ScmDims};
use cfdivae::seed::{derive_seed, label};

const CFD_EDGES: &str = "W -> T\nW -> Z\nW -> Y\nU -> T\nU -> Y\nT -> Z\nZ -> Y\nZ -> X\n";

#[derive(Parser, Debug)]
#[command(name = "cfdivae", version, about = "Conditional front-door identification and effect estimation")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// JSON config document for the subcommand; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (bench only).
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Print per-epoch progress and extra diagnostics.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check back-door, front-door and conditional front-door criteria on a DAG.
    Check(CheckArgs),
    /// Evaluate the conditional front-door formula on a discrete SCM and
    /// compare it with the interventional ground truth.
    Adjust(AdjustArgs),
    /// Generate a dataset from the linear-Gaussian SCM.
    Generate(GenerateArgs),
    /// Train the representation model on a dataset.
    Train(TrainArgs),
    /// Estimate the ATE of a dataset.
    Estimate(EstimateArgs),
    /// Run a benchmark experiment and write its report.
    Bench(BenchArgs),
    /// Verify every step of the identification derivation on random SCMs.
    VerifyIdentification(VerifyArgs),
}

#[derive(Args, Debug)]
struct Roles {
    /// Treatment node.
    #[arg(long, default_value = "T")]
    t: String,
    /// Outcome node.
    #[arg(long, default_value = "Y")]
    y: String,
    /// Mediator set, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "Z")]
    z: Vec<String>,
    /// Conditioning set, comma separated (empty for none).
    #[arg(long, value_delimiter = ',', default_value = "")]
    w: Vec<String>,
}

impl Roles {
    fn sets(&self) -> (NodeSet, NodeSet) {
        let clean = |v: &[String]| v.iter().filter(|s| !s.is_empty()).cloned().collect::<NodeSet>();
        (clean(&self.z), clean(&self.w))
    }
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Edge-list file (`A -> B` per line).
    #[arg(long)]
    dag: PathBuf,
    #[command(flatten)]
    roles: Roles,
    /// Latent nodes excluded from the conditioning-set search.
    #[arg(long, value_delimiter = ',', default_value = "")]
    latent: Vec<String>,
}

#[derive(Args, Debug)]
struct AdjustArgs {
    /// Discrete SCM JSON document.
    #[arg(long)]
    scm: PathBuf,
    #[command(flatten)]
    roles: Roles,
    /// Numeric value of each outcome level (defaults to 0, 1, ...).
    #[arg(long, value_delimiter = ',')]
    y_values: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d_w: Option<usize>,
    #[arg(long)]
    d_z: Option<usize>,
    #[arg(long)]
    d_x: Option<usize>,
    /// Confounding strength on the outcome path.
    #[arg(long)]
    u_scale: Option<f64>,
    /// Omit the hidden Z and U columns.
    #[arg(long)]
    observed_only: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
struct ModelSettings {
    latent_dim: usize,
    hidden_width: usize,
    num_layers: usize,
    activation: Activation,
    prior_mode: PriorMode,
    variant: Variant,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let m = ModelConfig::new(1, 1, 1);
        Self {
            latent_dim: m.latent_dim,
            hidden_width: m.hidden_width,
            num_layers: m.num_layers,
            activation: m.activation,
            prior_mode: m.prior_mode,
            variant: m.variant,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default)]
struct TrainDocument {
    model: ModelSettings,
    train: TrainConfig,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    latent_dim: Option<usize>,
    #[arg(long)]
    variant: Option<Variant>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EstimateMethod {
    /// Two-stage estimate on the representation of a trained checkpoint.
    TwoStage,
    /// Two-stage estimate on the dataset's hidden Z columns.
    Oracle,
    /// Regression of Y on T and W.
    Backdoor,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "two-stage")]
    method: EstimateMethod,
    /// Model checkpoint (two-stage method).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// SCM config JSON; when given, the estimation bias is reported.
    #[arg(long)]
    scm: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// bias, strength, dim, ablation or fidelity.
    #[arg(long)]
    experiment: Experiment,
    #[arg(long)]
    reps: Option<usize>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Full-scale grid: 30 replications and sizes 0.5k to 20k.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Number of random SCMs.
    #[arg(long, default_value_t = 200)]
    reps: usize,
    /// Cardinality of every variable.
    #[arg(long, default_value_t = 2)]
    card: usize,
    /// Tolerance on each identity.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn invalid(e: impl std::fmt::Display) -> CliError {
    CliError::Validation(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    Dataset::load(path).map_err(|e| invalid(format!("{}: {e}", path.display())))
}

struct Context<'a> {
    cli: &'a Cli,
    command: &'static str,
}

impl Context<'_> {
    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.cli.out).map_err(|e| runtime(format!("{}: {e}", self.cli.out.display())))?;
        Ok(&self.cli.out)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let path = self.out_dir()?.join(name);
        fs::write(&path, contents).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    fn announce<T: Serialize>(&self, config: &T) -> String {
        let hash = config_hash(config);
        eprintln!("seed: {}", self.cli.seed);
        eprintln!(
            "config: {}",
            serde_json::to_string(config).expect("configs serialize")
        );
        eprintln!("config hash: {hash}");
        hash
    }

    fn stamp(&self, hash: &str) -> serde_json::Value {
        json!({
            "tool": "cfdivae",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "seed": self.cli.seed,
            "config_hash": hash,
        })
    }

    /// Writes `provenance.json` describing the run and its artifacts.
    fn provenance(&self, hash: &str, artifacts: &[PathBuf]) -> Result<()> {
        let names: Vec<String> = artifacts
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect();
        let mut doc = self.stamp(hash);
        doc["artifacts"] = json!(names);
        self.write("provenance.json", &serde_json::to_string_pretty(&doc).expect("json"))?;
        for a in artifacts {
            println!("wrote {}", a.display());
        }
        Ok(())
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cmd_check(args: &CheckArgs) -> Result<()> {
    let dag = parse_dag(&read_text(&args.dag)?).map_err(|e| invalid(format!("{}: {e}", args.dag.display())))?;
    let (z, w) = args.roles.sets();
    let (t, y) = (args.roles.t.as_str(), args.roles.y.as_str());
    let bd = if w.is_empty() {
        None
    } else {
        Some(is_backdoor_set(&dag, t, y, &w).map_err(invalid)?)
    };
    let fd = is_frontdoor_set(&dag, t, y, &z).map_err(invalid)?;
    let cfd = is_cfd_set(&dag, t, y, &z, &w).map_err(invalid)?;
    if let Some(bd) = bd {
        println!("back-door {w}: {}", yes(bd));
    }
    println!("front-door {z}: {}", yes(fd));
    if cfd {
        println!("CFD: yes");
        return Ok(());
    }
    let latent: NodeSet = args.latent.iter().filter(|s| !s.is_empty()).cloned().collect();
    let observed: NodeSet = dag.nodes().iter().filter(|n| !latent.contains(n)).cloned().collect();
    let sets = find_cfd_conditioning_sets(&dag, t, y, &z, &observed).map_err(invalid)?;
    match sets.first() {
        Some(s) => {
            let all: Vec<String> = sets.iter().map(ToString::to_string).collect();
            println!("CFD: no; suggested W: {s}");
            if sets.len() > 1 {
                println!("minimal conditioning sets: {}", all.join(" "));
            }
        }
        None => println!("CFD: no; no conditioning set among observed nodes"),
    }
    Ok(())
}

fn discrete_error(e: DiscreteError) -> CliError {
    match e {
        DiscreteError::Positivity { .. } => runtime(e),
        _ => invalid(e),
    }
}

fn cmd_adjust(args: &AdjustArgs) -> Result<()> {
    let scm = DiscreteScm::from_json(&read_text(&args.scm)?).map_err(invalid)?;
    let (z, w) = args.roles.sets();
    let (t, y) = (args.roles.t.as_str(), args.roles.y.as_str());
    for name in [t, y].into_iter().chain(z.iter()).chain(w.iter()) {
        if !scm.dag().contains(name) {
            return Err(invalid(format!("unknown node `{name}`")));
        }
    }
    let joint = scm.joint().map_err(discrete_error)?;
    let est = cfd_adjust(&joint, t, y, &z, &w).map_err(discrete_error)?;
    let oracle = scm.interventional(t, y).map_err(discrete_error)?;
    let mut text = String::new();
    for (tv, (a, b)) in est.rows.iter().zip(&oracle.rows).enumerate() {
        let fmt = |r: &[f64]| r.iter().map(|p| format!("{p:.6}")).collect::<Vec<_>>().join(" ");
        let _ = writeln!(text, "P({y} | do({t}={tv})): adjusted [{}]  truth [{}]", fmt(a), fmt(b));
    }
    print!("{text}");
    if est.rows.len() == 2 {
        let levels = est.rows[0].len();
        let values = args.y_values.clone().unwrap_or_else(|| (0..levels).map(|v| v as f64).collect());
        let ate = ate_discrete(&est, &values).map_err(invalid)?;
        let truth = ate_discrete(&oracle, &values).map_err(invalid)?;
        println!("ATE: {ate:.3} (truth {truth:.3})");
    }
    println!("max discrepancy: {:.3e}", est.max_abs_diff(&oracle));
    Ok(())
}

fn cmd_generate(ctx: &Context, args: &GenerateArgs) -> Result<()> {
    if args.n == 0 {
        return Err(invalid("--n must be at least 1"));
    }
    let mut scm = match &ctx.cli.config {
        Some(path) => read_json::<LinearScmConfig>(path)?,
        None => {
            let d = ScmDims::default();
            let dims = ScmDims {
                d_w: args.d_w.unwrap_or(d.d_w),
                d_z: args.d_z.unwrap_or(d.d_z),
                d_x: args.d_x.unwrap_or(d.d_x),
            };
            LinearScmConfig::draw(dims, derive_seed(ctx.cli.seed, &[label("scm")])).map_err(invalid)?
        }
    };
    if ctx.cli.config.is_some() && (args.d_w.is_some() || args.d_z.is_some() || args.d_x.is_some()) {
        return Err(invalid("dimensions come from the config document; drop --d-w/--d-z/--d-x"));
    }
    if let Some(u) = args.u_scale {
        scm = scm.scale_confounding(u).map_err(invalid)?;
    }
    scm.validate().map_err(invalid)?;
    let hash = ctx.announce(&scm);
    let mut data = scm
        .generate(args.n, derive_seed(ctx.cli.seed, &[label("data")]))
        .map_err(runtime)?;
    if args.observed_only {
        data = data.observed_only();
    }
    let csv = ctx.out_dir()?.join("data.csv");
    data.save(&csv).map_err(runtime)?;
    let cfg = ctx.write("scm.json", &scm.to_json().map_err(runtime)?)?;
    println!("true ATE: {}", scm.true_ate());
    ctx.provenance(&hash, &[csv, cfg])
}

fn model_error(e: ModelError) -> CliError {
    match e {
        ModelError::InvalidConfig(_) | ModelError::RoleMismatch { .. } | ModelError::Checkpoint(_) | ModelError::Json(_) => {
            invalid(e)
        }
        _ => runtime(e),
    }
}

fn cmd_train(ctx: &Context, args: &TrainArgs) -> Result<()> {
    let mut doc = match &ctx.cli.config {
        Some(path) => read_json::<TrainDocument>(path)?,
        None => TrainDocument::default(),
    };
    doc.train.seed = ctx.cli.seed;
    if let Some(v) = args.epochs {
        doc.train.epochs = v;
    }
    if let Some(v) = args.batch_size {
        doc.train.batch_size = v;
    }
    if let Some(v) = args.lr {
        doc.train.lr = v;
    }
    if let Some(v) = args.latent_dim {
        doc.model.latent_dim = v;
    }
    if let Some(v) = args.variant {
        doc.model.variant = v;
    }
    let data = load_dataset(&args.data)?.observed_only();
    let m = &doc.model;
    let model = ModelConfig {
        hidden_width: m.hidden_width,
        num_layers: m.num_layers,
        activation: m.activation,
        prior_mode: m.prior_mode,
        variant: m.variant,
        ..ModelConfig::new(data.d_x(), data.d_w(), m.latent_dim)
    };
    model.validate().map_err(model_error)?;
    doc.train.validate(data.len()).map_err(model_error)?;
    let hash = ctx.announce(&(&model, &doc.train));
    let (params, history) = train(&data, model, &doc.train).map_err(model_error)?;
    if ctx.cli.verbose {
        for (i, e) in history.epochs.iter().enumerate() {
            eprintln!("epoch {:>3}: elbo {:.5} recon {:.5} kl {:.5}", i + 1, e.elbo, e.reconstruction, e.kl);
        }
    }
    if let Some(last) = history.epochs.last() {
        println!("final ELBO: {:.5}", last.elbo);
    }
    let ckpt = ctx.write("checkpoint.json", &params.to_json().map_err(runtime)?)?;
    let hist = ctx.write(
        "history.json",
        &serde_json::to_string_pretty(&history).expect("history serializes"),
    )?;
    ctx.provenance(&hash, &[ckpt, hist])
}

fn cmd_estimate(ctx: &Context, args: &EstimateArgs) -> Result<()> {
    let data = load_dataset(&args.data)?;
    let scm = match &args.scm {
        Some(p) => Some(read_json::<LinearScmConfig>(p)?),
        None => None,
    };
    let (estimate, hash): (AteEstimate, String) = match args.method {
        EstimateMethod::Backdoor => (
            backdoor_baseline_ate(&data).map_err(runtime)?,
            ctx.announce(&json!({"method": "backdoor"})),
        ),
        EstimateMethod::Oracle => {
            let z = data
                .hidden_z()
                .ok_or_else(|| invalid("dataset has no hidden z columns"))?
                .to_vec();
            let hash = ctx.announce(&json!({"method": "oracle"}));
            let mut est = two_stage_ate(&data.observed_only(), &z).map_err(runtime)?;
            est.method = "oracle-z".into();
            (est, hash)
        }
        EstimateMethod::TwoStage => {
            let path = args
                .checkpoint
                .as_ref()
                .ok_or_else(|| invalid("--checkpoint is required for the two-stage method"))?;
            let params = ModelParams::from_json(&read_text(path)?).map_err(model_error)?;
            let hash = ctx.announce(&json!({"method": "two-stage", "model": params.config()}));
            let observed = data.observed_only();
            let z = infer_representation(&params, &observed).map_err(model_error)?;
            (two_stage_ate(&observed, &z).map_err(runtime)?, hash)
        }
    };
    let text = serde_json::to_string_pretty(&estimate).expect("estimate serializes");
    println!("{text}");
    if let Some(scm) = scm {
        let bias = estimation_bias(estimate.estimate, scm.true_ate()).map_err(runtime)?;
        println!("true ATE: {}  bias: {bias:.3}%", scm.true_ate());
    }
    let doc = json!({"estimate": estimate, "provenance": ctx.stamp(&hash)});
    let path = ctx.write("estimate.json", &serde_json::to_string_pretty(&doc).expect("json"))?;
    ctx.provenance(&hash, &[path])
}

fn cmd_bench(ctx: &Context, args: &BenchArgs) -> Result<()> {
    let mut spec = match &ctx.cli.config {
        Some(path) => read_json::<BenchSpec>(path)?,
        None => BenchSpec::for_experiment(args.experiment),
    };
    spec.experiment = args.experiment;
    if args.full_scale {
        spec = spec.full_scale();
    }
    spec.seed = ctx.cli.seed;
    spec.workers = ctx.cli.workers;
    if let Some(r) = args.reps {
        spec.reps = r;
    }
    if let Some(s) = &args.sizes {
        spec.sizes = s.clone();
    }
    if let Some(e) = args.epochs {
        spec.train.epochs = e;
    }
    spec.validate().map_err(invalid)?;
    let hash = ctx.announce(&spec);
    let report = bench::run(&spec).map_err(runtime)?;
    for row in &report.rows {
        println!(
            "{:<62} {:<9} {:>8.2} ± {:<7.2} (reps {})",
            row.cell_id,
            row.method.as_str(),
            row.mean_bias_pct,
            row.std_bias_pct,
            row.reps
        );
    }
    for f in &report.failures {
        eprintln!("failure in {} rep {}: {}", f.cell_id, f.rep, f.message);
    }
    let files = bench::emit_report(&report, ctx.out_dir()?).map_err(runtime)?;
    ctx.provenance(&hash, &files)?;
    if report.failures.is_empty() {
        Ok(())
    } else {
        Err(runtime(format!("{} replication(s) failed", report.failures.len())))
    }
}

fn cmd_verify(ctx: &Context, args: &VerifyArgs) -> Result<()> {
    if args.reps == 0 || args.card < 2 {
        return Err(invalid("--reps must be positive and --card at least 2"));
    }
    let hash = ctx.announce(&json!({"reps": args.reps, "card": args.card, "tol": args.tol}));
    let dag = parse_dag(CFD_EDGES).expect("built-in graph parses");
    let roles = ChainRoles::default();
    let (mut passed, mut worst) = (0usize, 0.0f64);
    for i in 0..args.reps {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(ctx.cli.seed, &[i as u64]));
        let scm = DiscreteScm::random_positive(dag.clone(), vec![args.card; dag.len()], 0.05, &mut rng)
            .map_err(runtime)?;
        let report = verify_proof_chain(&scm, &roles).map_err(runtime)?;
        worst = worst.max(report.max_step_error());
        if report.passed(args.tol) {
            passed += 1;
        } else if ctx.cli.verbose {
            for p in report.failed_preconditions() {
                eprintln!("SCM {i}: {} failed: {}", p.rule, p.statement);
            }
        }
    }
    let cmp = if worst <= args.tol { "≤" } else { ">" };
    println!(
        "{passed}/{} passed, max step error {worst:.3e} {cmp} {:e}",
        args.reps, args.tol
    );
    let doc = json!({
        "passed": passed,
        "reps": args.reps,
        "max_step_error": worst,
        "tol": args.tol,
        "provenance": ctx.stamp(&hash),
    });
    let path = ctx.write("verification.json", &serde_json::to_string_pretty(&doc).expect("json"))?;
    ctx.provenance(&hash, &[path])?;
    if passed == args.reps {
        Ok(())
    } else {
        Err(runtime(format!("{} SCM(s) failed verification", args.reps - passed)))
    }
}

fn run(cli: &Cli) -> Result<()> {
    if cli.workers == 0 {
        return Err(invalid("--workers must be at least 1"));
    }
    let ctx = |command| Context { cli, command };
    match &cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Adjust(a) => cmd_adjust(a),
        Command::Generate(a) => cmd_generate(&ctx("generate"), a),
        Command::Train(a) => cmd_train(&ctx("train"), a),
        Command::Estimate(a) => cmd_estimate(&ctx("estimate"), a),
        Command::Bench(a) => cmd_bench(&ctx("bench"), a),
        Command::VerifyIdentification(a) => cmd_verify(&ctx("verify-identification"), a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Validation(m) => eprintln!("error: {m}"),
                CliError::Runtime(m) => eprintln!("runtime error: {m}"),
            }
            ExitCode::from(e.code())
        }
    }
}
