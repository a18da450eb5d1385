use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use monge_mmd::config::CONFIG_KEYS_HELP;
use monge_mmd::io::{write_atomic, write_points_csv};
use monge_mmd::pipeline::{run_comparison, run_eval, run_training, EVAL_FILE, LOSS_FILE};
use monge_mmd::{CostSpec, DatasetSpec, Error, KernelSpec, MaternOrder, RunConfig};

#[derive(Parser)]
#[command(name = "monge-mmd", version, about = "Neural Monge transport maps trained with an MMD penalty")]
#[command(after_help = CONFIG_KEYS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic point cloud as CSV.
    #[command(after_help = CONFIG_KEYS_HELP)]
    Generate(GenerateArgs),
    /// Train a transport map from a run config.
    #[command(after_help = CONFIG_KEYS_HELP)]
    Train(TrainArgs),
    /// Evaluate a checkpoint on source/target CSV point clouds.
    #[command(after_help = CONFIG_KEYS_HELP)]
    Eval(EvalArgs),
    /// Compare the MMD map against the Sinkhorn barycentric map.
    #[command(after_help = CONFIG_KEYS_HELP)]
    Compare(ConfigArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    TwoMoons,
    TwoCircles,
    IsotropicGaussian,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: Family,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Noise SD for moons and circles.
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    /// Inner radius of the two circles.
    #[arg(long, default_value_t = 0.5)]
    factor: f64,
    /// Gaussian mean, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,0")]
    mean: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    variance: f64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    config: PathBuf,
    /// Override a config key, e.g. `--set train.epochs=100`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Continue from a checkpoint written by an earlier run.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelFamily {
    Gaussian,
    Matern,
}

#[derive(Clone, Copy, ValueEnum)]
enum Order {
    Half,
    ThreeHalves,
    FiveHalves,
}

#[derive(Args)]
struct EvalArgs {
    checkpoint: PathBuf,
    source_csv: PathBuf,
    target_csv: PathBuf,
    /// Report path; printed to stdout when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: KernelFamily,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "three-halves")]
    order: Order,
    #[arg(long, default_value_t = 1.0)]
    lengthscale: f64,
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got `{s}`"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

fn load_config(args: &ConfigArgs) -> monge_mmd::Result<RunConfig> {
    let mut config = RunConfig::load(&args.config, &args.overrides)?;
    if let Some(dir) = &args.output_dir {
        config.output_dir = dir.clone();
    }
    Ok(config)
}

fn generate(args: &GenerateArgs) -> monge_mmd::Result<()> {
    let spec = match args.family {
        Family::TwoMoons => DatasetSpec::TwoMoons {
            n: args.n,
            noise: args.noise,
            seed: args.seed,
        },
        Family::TwoCircles => DatasetSpec::TwoCircles {
            n: args.n,
            noise: args.noise,
            factor: args.factor,
            seed: args.seed,
        },
        Family::IsotropicGaussian => DatasetSpec::IsotropicGaussian {
            n: args.n,
            mean: args.mean.clone(),
            variance: args.variance,
            seed: args.seed,
        },
    };
    let points = spec.generate()?;
    write_points_csv(&args.out, &points)?;
    println!("{} rows written to {}", points.len(), args.out.display());
    Ok(())
}

fn train(args: &TrainArgs) -> monge_mmd::Result<()> {
    let config = load_config(&args.config)?;
    let out = run_training(&config, args.resume.as_deref())?;
    if let Some(last) = out.history.last() {
        println!(
            "epoch {}: objective {:.6e}, mmd2 {:.6e}, cost {:.4}",
            last.epoch, last.objective, last.mmd2, last.cost
        );
    }
    println!(
        "pushforward mean {:?}, sd {:?}",
        out.report.mean, out.report.sd
    );
    println!(
        "wrote {} and {} to {}",
        LOSS_FILE,
        EVAL_FILE,
        out.dir.display()
    );
    Ok(())
}

fn eval(args: &EvalArgs) -> monge_mmd::Result<()> {
    let kernel = match args.kernel {
        KernelFamily::Gaussian => KernelSpec::gaussian(args.alpha)?,
        KernelFamily::Matern => {
            let order = match args.order {
                Order::Half => MaternOrder::Half,
                Order::ThreeHalves => MaternOrder::ThreeHalves,
                Order::FiveHalves => MaternOrder::FiveHalves,
            };
            KernelSpec::matern(order, args.lengthscale)?
        }
    };
    let report = run_eval(
        &args.checkpoint,
        &args.source_csv,
        &args.target_csv,
        &kernel,
        &CostSpec::default(),
    )?;
    let json = report.to_json();
    match &args.out {
        Some(path) => write_atomic(path, json.as_bytes())?,
        None => println!("{json}"),
    }
    Ok(())
}

fn compare(args: &ConfigArgs) -> monge_mmd::Result<()> {
    let config = load_config(args)?;
    let (path, rows) = run_comparison(&config)?;
    for r in &rows {
        println!(
            "{:<8} n={:<6} mean {:?} sd {:?} ({:.2}s)",
            r.method.name(),
            r.data_size,
            r.mean,
            r.sd,
            r.runtime_seconds
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    if err.is_numeric() {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
