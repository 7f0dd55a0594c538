use clap::{Args, Parser, Subcommand, ValueEnum};
use mbirlab::io::{run_experiment, ExperimentConfig};
use mbirlab::{Error, Result};
use serde_json::{Map, Value};
use std::path::PathBuf;
use std::process::ExitCode;

/// Model-based and learned image reconstruction experiments.
#[derive(Parser)]
#[command(name = "mbirlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON task config. Relative paths inside it resolve against its directory.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write per-iteration cost traces.
    #[arg(long)]
    trace: bool,
    /// Record wall-clock runtimes in metrics files.
    #[arg(long)]
    timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Fbp,
    Fista,
    PwlsEp,
    PwlsUltra,
    Dict,
    Pnp,
    Lps,
    Hankel,
}

#[derive(Subcommand)]
enum Command {
    /// Shepp-Logan phantom or a seeded variant.
    Phantom(Common),
    /// Forward-project an image and add noise.
    Simulate(Common),
    LearnTransform(Common),
    LearnUltra(Common),
    LearnDict(Common),
    LearnMultilayer(Common),
    Recon {
        #[arg(long, value_enum)]
        method: Method,
        #[command(flatten)]
        common: Common,
    },
    TrainDenoiser(Common),
    SuperTrain(Common),
    SuperRecon(Common),
    /// PSNR and RMSE of images against a reference.
    Metrics(Common),
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Fbp => "fbp",
        Method::Fista => "fista",
        Method::PwlsEp => "pwls-ep",
        Method::PwlsUltra => "pwls-ultra",
        Method::Dict => "dict",
        Method::Pnp => "pnp",
        Method::Lps => "lps",
        Method::Hankel => "hankel",
    }
}

fn build(task: &str, method: Option<&str>, c: &Common) -> Result<ExperimentConfig> {
    let (mut map, base) = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let Value::Object(map) = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))? else {
                return Err(Error::Config("config must be a JSON object".into()));
            };
            (map, p.parent().map(PathBuf::from).unwrap_or_default())
        }
        None => (Map::new(), PathBuf::new()),
    };
    map.insert("task".into(), task.into());
    if let Some(m) = method {
        map.insert("method".into(), m.into());
    }
    if let Some(s) = c.seed {
        map.insert("seed".into(), s.into());
    }
    if c.trace {
        map.insert("trace".into(), true.into());
    }
    if c.timing {
        map.insert("timing".into(), true.into());
    }
    ExperimentConfig::from_value(Value::Object(map), base)
}

fn run(cli: Cli) -> Result<()> {
    let (task, method, common) = match &cli.command {
        Command::Phantom(c) => ("phantom", None, c),
        Command::Simulate(c) => ("simulate", None, c),
        Command::LearnTransform(c) => ("learn", Some("transform"), c),
        Command::LearnUltra(c) => ("learn", Some("ultra"), c),
        Command::LearnDict(c) => ("learn", Some("dict"), c),
        Command::LearnMultilayer(c) => ("learn", Some("multilayer"), c),
        Command::Recon { method, common } => ("recon", Some(method_name(*method)), common),
        Command::TrainDenoiser(c) => ("train", None, c),
        Command::SuperTrain(c) => ("super-train", None, c),
        Command::SuperRecon(c) => ("super-recon", None, c),
        Command::Metrics(c) => ("metrics", None, c),
    };
    let cfg = build(task, method, common)?;
    let report = run_experiment(&cfg, &common.out)?;
    for f in report.outputs {
        log::info!("wrote {}", common.out.join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
