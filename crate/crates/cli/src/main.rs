use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nonmarkov_opinf::harness::{self, Experiment, RunOptions, RunOutcome, Status};
use nonmarkov_opinf::models::{appendix_system, AppendixExample, ReactionForm};
use nonmarkov_opinf::{Error, ExperimentConfig, InferenceMode, ModelSpec};

mod stages;

#[derive(Parser, Debug)]
#[command(name = "nonmarkov-opinf", version, about = "Learn non-Markovian reduced models from partial observations")]
struct Cli {
    /// Master seed; replaces the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; replaces the config `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads. NONMARKOV_OPINF_THREADS takes precedence.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a full model and write its operators.
    Model(ModelArgs),
    /// Build the POD basis and re-projected training bursts.
    Sample(StageArgs),
    /// Learn a reduced model from sampled bursts.
    Infer(InferArgs),
    /// Run a stored reduced model under the test inputs.
    Simulate(ModelDirArgs),
    /// Score a stored reduced model, or run the whole pipeline without `--model`.
    Evaluate(EvaluateArgs),
    /// Run every (fraction, n, L, mode) cell; failed cells are kept as rows.
    Sweep(ConfigArg),
    /// Error difference between Markovian and memory reduced models on the
    /// symmetric counterexamples.
    Appendix(AppendixArgs),
}

#[derive(Args, Debug)]
struct ConfigArg {
    #[arg(long, short)]
    config: PathBuf,
}

#[derive(Args, Debug)]
struct StageArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Observation fraction; defaults to the first in the config.
    #[arg(long)]
    fraction: Option<f64>,
    /// Reduced dimension; defaults to the first in the config.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args, Debug)]
struct InferArgs {
    #[command(flatten)]
    stage: StageArgs,
    #[arg(long, default_value = "stagewise")]
    mode: InferenceMode,
    #[arg(long, default_value_t = 0)]
    lag: usize,
    /// Burst length used by batch inference; all sampled steps by default.
    #[arg(long)]
    burst_len: Option<usize>,
}

#[derive(Args, Debug)]
struct ModelDirArgs {
    #[command(flatten)]
    stage: StageArgs,
    /// Directory written by `infer`.
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    stage: StageArgs,
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelKind {
    ChafeeInfante,
    ConvectionDiffusion,
    DiffusionReaction,
    RandomLinear,
}

#[derive(Args, Debug)]
struct ModelArgs {
    kind: ModelKind,
    #[arg(long, default_value_t = 128)]
    nx: usize,
    #[arg(long, default_value_t = 8)]
    ny: usize,
    #[arg(long, default_value_t = 1e-5)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, value_enum, default_value = "plain")]
    form: FormArg,
    #[arg(long, default_value_t = 30)]
    state_dim: usize,
    #[arg(long, default_value_t = 2)]
    inputs: usize,
    #[arg(long, default_value_t = 1)]
    outputs: usize,
    #[arg(long, default_value_t = 0.9)]
    radius: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormArg {
    Plain,
    Cubic,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AppendixKind {
    Example1,
    Example2,
    Random,
}

#[derive(Args, Debug)]
struct AppendixArgs {
    which: AppendixKind,
    #[arg(long, default_value_t = 1)]
    lag: usize,
    #[arg(long, default_value_t = 50)]
    steps: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e) if e.is_config() => 2,
        Some(e) if e.is_divergence() => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let threads = harness::thread_count(cli.threads)?;
    let load = |c: &ConfigArg| -> anyhow::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&c.config)?;
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    };
    let out_dir = |cfg: &ExperimentConfig| cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    match &cli.command {
        Command::Model(args) => stages::model(&model_spec(args, cli.seed.unwrap_or(0)), &cli.out.clone().unwrap_or_else(|| "out".into())),
        Command::Sample(args) => {
            let cfg = load(&args.config)?;
            let dir = out_dir(&cfg);
            stages::sample(&Experiment::new(cfg)?, args.fraction, args.n, &dir)
        }
        Command::Infer(args) => {
            let cfg = load(&args.stage.config)?;
            let dir = out_dir(&cfg);
            stages::infer(&Experiment::new(cfg)?, args.stage.fraction, args.mode, args.lag, args.burst_len, &dir)
        }
        Command::Simulate(args) => {
            let cfg = load(&args.stage.config)?;
            let dir = out_dir(&cfg);
            stages::simulate(&Experiment::new(cfg)?, args.stage.fraction, &args.model, &dir)
        }
        Command::Evaluate(args) => {
            let cfg = load(&args.stage.config)?;
            let dir = out_dir(&cfg);
            match &args.model {
                Some(model) => stages::evaluate(&Experiment::new(cfg)?, args.stage.fraction, model, &dir),
                None => {
                    let opts = RunOptions {
                        out_dir: Some(dir),
                        threads,
                    };
                    report(&harness::run_pipeline(cfg, &opts)?)
                }
            }
        }
        Command::Sweep(args) => {
            let cfg = load(args)?;
            let opts = RunOptions {
                out_dir: Some(out_dir(&cfg)),
                threads,
            };
            report(&harness::sweep(cfg, &opts)?)
        }
        Command::Appendix(args) => appendix(args, cli.seed, cli.out.as_deref()),
    }
}

fn model_spec(args: &ModelArgs, seed: u64) -> ModelSpec {
    match args.kind {
        ModelKind::ChafeeInfante => ModelSpec::ChafeeInfante { nx: args.nx, dt: args.dt },
        ModelKind::ConvectionDiffusion => ModelSpec::ConvectionDiffusion {
            nx: args.nx,
            ny: args.ny,
            dt: args.dt,
        },
        ModelKind::DiffusionReaction => ModelSpec::DiffusionReaction {
            nx: args.nx,
            dt: args.dt,
            form: match args.form {
                FormArg::Plain => ReactionForm::Plain,
                FormArg::Cubic => ReactionForm::Cubic,
            },
            train_mu: vec![args.mu],
            test_mu: vec![args.mu],
        },
        ModelKind::RandomLinear => ModelSpec::RandomLinear {
            state_dim: args.state_dim,
            inputs: args.inputs,
            outputs: args.outputs,
            radius: args.radius,
            seed,
            dt: args.dt,
        },
    }
}

fn report(outcome: &RunOutcome) -> anyhow::Result<()> {
    let failed = outcome.rows.iter().filter(|r| !matches!(r.status, Status::Ok | Status::Pass)).count();
    if let Some(dir) = &outcome.out_dir {
        println!("results: {}", dir.join("results.csv").display());
    }
    println!("rows: {}  failed: {failed}  config hash: {}", outcome.rows.len(), outcome.config_hash);
    for r in &outcome.rows {
        println!(
            "{:.3} n={} L={} {} K_r={} {} = {:.6e} [{}]",
            r.fraction, r.n, r.lag, r.mode, r.k_r, r.metric, r.value, r.status
        );
    }
    Ok(())
}

fn appendix(args: &AppendixArgs, seed: Option<u64>, out: Option<&Path>) -> anyhow::Result<()> {
    let which = match args.which {
        AppendixKind::Example1 => AppendixExample::Example1,
        AppendixKind::Example2 => AppendixExample::Example2,
        AppendixKind::Random => AppendixExample::Random(seed.unwrap_or(0)),
    };
    if args.steps == 0 {
        bail!(Error::Config("steps must be positive".into()));
    }
    let case = appendix_system(which)?;
    let series = nonmarkov_opinf::metrics::error_difference_series(
        &case.system,
        &case.selector,
        &case.v,
        Some(&case.v_perp),
        &case.z0,
        args.steps,
        args.lag,
    )?;
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    let mut csv = String::from("k,difference\n");
    for (k, d) in series.iter().enumerate() {
        csv.push_str(&format!("{k},{d:.16e}\n"));
    }
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join("error_difference.csv");
            std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
            println!("series: {}", path.display());
        }
        None => print!("{csv}"),
    }
    println!("minimum difference: {min:.6e} (negative means the Markovian model is more accurate there)");
    Ok(())
}
