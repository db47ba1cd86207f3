use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ivcox_cli::commands::{run, Dumps};
use ivcox_cli::config::{Command, RunConfig};
use ivcox_cli::CliError;

/// Instrumental variable Cox regression with a discrete endogenous treatment.
#[derive(Parser)]
#[command(name = "ivcox", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Estimate the coefficients of one dataset.
    Estimate(DataArgs),
    /// Bootstrap standard errors and save every resample estimate.
    Bootstrap(DataArgs),
    /// Monte Carlo run of a built-in design.
    Simulate(SimArgs),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report CSV; an aligned `.txt` copy is written next to it.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Override any config key, e.g. `--set ubar=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct DataArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Bootstrap resamples (0 disables standard errors).
    #[arg(long = "B", visible_alias = "bootstrap")]
    b: Option<usize>,
    /// Write `x,u,level,phi,residual` for every solved covariate value.
    #[arg(long)]
    dump_phi: Option<PathBuf>,
    /// Write the first proxy dataset.
    #[arg(long)]
    dump_proxies: Option<PathBuf>,
    /// Write the conditional sub-distribution estimates at `--dump-cdf-at`.
    #[arg(long, requires = "dump_cdf_at")]
    dump_cdf: Option<PathBuf>,
    #[arg(long, requires = "dump_cdf")]
    dump_cdf_at: Option<f64>,
}

#[derive(Args)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    design: Option<String>,
    /// Censoring level in percent, 20 or 40.
    #[arg(long)]
    censoring: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Skip the warp-speed coverage resample.
    #[arg(long)]
    no_warp_speed: bool,
}

fn configure(command: Command, common: &Common, flags: Vec<(&str, String)>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::new(command);
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    if let Some(p) = &common.output {
        cfg.output = Some(p.clone());
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    for (k, v) in flags {
        cfg.set(k, &v)?;
    }
    for pair in &common.set {
        cfg.apply_override(pair)?;
    }
    Ok(cfg)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (cfg, dumps) = match cli.command {
        Sub::Estimate(a) => data_command(Command::Estimate, a)?,
        Sub::Bootstrap(a) => data_command(Command::Bootstrap, a)?,
        Sub::Simulate(a) => {
            let mut flags = Vec::new();
            if let Some(d) = a.design {
                flags.push(("design", d));
            }
            if let Some(c) = a.censoring {
                flags.push(("censoring", c));
            }
            if let Some(n) = a.n {
                flags.push(("n", n.to_string()));
            }
            if let Some(r) = a.reps {
                flags.push(("reps", r.to_string()));
            }
            if a.no_warp_speed {
                flags.push(("warp_speed", "false".into()));
            }
            (configure(Command::Simulate, &a.common, flags)?, Dumps::default())
        }
    };
    let out = run(&cfg, &dumps)?;
    out.write(cfg.output.as_deref())?;
    print!("{}", out.text);
    Ok(())
}

fn data_command(command: Command, a: DataArgs) -> Result<(RunConfig, Dumps), CliError> {
    let mut flags = Vec::new();
    if let Some(p) = &a.input {
        flags.push(("input", p.display().to_string()));
    }
    if let Some(b) = a.b {
        flags.push(("bootstrap", b.to_string()));
    }
    let cfg = configure(command, &a.common, flags)?;
    let dumps = Dumps {
        phi: a.dump_phi,
        proxies: a.dump_proxies,
        cdf: a.dump_cdf.zip(a.dump_cdf_at),
    };
    Ok((cfg, dumps))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Ok(v) = std::env::var("IVCOX_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("ivcox: cannot size the thread pool: {e}");
                    return ExitCode::from(2);
                }
            }
            _ => {
                eprintln!("ivcox: IVCOX_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ivcox: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
