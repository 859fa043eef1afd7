//! `dynbandit`: run regret experiments, sweep ρ̄, identify systems from
//! trajectories and generate special instances.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or configuration
//! errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dynbandit::fixtures::SystemFixture;
use dynbandit::harness::config::LambdaSpec;
use dynbandit::harness::output::{write_aggregate, write_traces};
use dynbandit::harness::{apply_override, Experiment, ExperimentConfig, PolicySpec, SweepResult};
use dynbandit::lti_env::{self, HardInstanceParams, DEFAULT_POWER_CUTOFF};
use dynbandit::sysid::{self, IdentifiedModel, IdentifyOptions, Trajectory};

const DEFAULT_RHO_BARS: [f64; 5] = [0.0, 0.05, 0.1, 0.2, 0.4];

#[derive(Debug, Parser)]
#[command(name = "dynbandit", version, about = "Dynamical linear bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every configured policy over every seed and write regret CSVs.
    Run(RunArgs),
    /// Run the epoch learner once per ρ̄ value.
    SweepRho {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated ρ̄ values.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_RHO_BARS)]
        rho_bars: Vec<f64>,
    },
    /// Identify a system from a trajectory CSV (`t,u_1..u_p,y_1..y_m`).
    Sysid(SysidArgs),
    /// Write a special-instance fixture.
    MakeInstance {
        #[command(subcommand)]
        kind: InstanceKind,
        /// Output fixture path.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
        /// Noise scale of the written system.
        #[arg(long, global = true, default_value_t = 0.0)]
        sigma: f64,
    },
    /// Print the cumulative parameter, optimal action and gap of a config.
    Oracle(ConfigArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// `key=value`, dot-separated keys; repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory (defaults to the config's `output`, then `results`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds replacing the configured list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Worker threads.
    #[arg(long)]
    parallel: Option<usize>,
}

#[derive(Debug, Args)]
struct SysidArgs {
    #[arg(long)]
    trajectory: PathBuf,
    /// Model order; chosen from the Hankel spectrum when omitted.
    #[arg(long)]
    order: Option<usize>,
    /// History window H; derived from `--rho-bar` when omitted.
    #[arg(long)]
    history: Option<usize>,
    /// Decay bound used to pick H.
    #[arg(long, default_value_t = 0.9)]
    rho_bar: f64,
    #[arg(long, default_value_t = sysid::DEFAULT_LAMBDA)]
    lambda: f64,
    /// Output JSON path; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum InstanceKind {
    /// Diagonal lower-bound instance over `{−1, 1}^d`.
    Hard {
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        eps: f64,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        signs: Vec<f64>,
    },
    /// Rewards observed τ rounds after the pull.
    Delayed {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        mu: Vec<f64>,
        #[arg(long)]
        tau: usize,
    },
    /// Rewards spread over the following rounds with fixed weights.
    Composite {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        mu: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        weights: Vec<f64>,
    },
    /// Geometrically decaying rewards.
    Ar1 {
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        mu: Vec<f64>,
        #[arg(long)]
        gamma: f64,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn usage(e: impl std::fmt::Display) -> Self {
        Self::Usage(e.to_string())
    }

    fn runtime(e: impl std::fmt::Display) -> Self {
        Self::Runtime(e.to_string())
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args, None),
        Command::SweepRho { run, rho_bars } => cmd_run(&run, Some(&rho_bars)),
        Command::Sysid(args) => cmd_sysid(&args),
        Command::MakeInstance { kind, out, sigma } => cmd_make_instance(&kind, out.as_deref(), sigma),
        Command::Oracle(args) => cmd_oracle(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_config(args: &ConfigArgs) -> std::result::Result<ExperimentConfig, Failure> {
    let path = &args.config;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: malformed JSON: {e}", path.display())))?;
    for o in &args.overrides {
        apply_override(&mut value, o).map_err(Failure::usage)?;
    }
    ExperimentConfig::from_value(value).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn sweep_policies(config: &ExperimentConfig, rho_bars: &[f64]) -> Vec<PolicySpec> {
    let lambda: Option<LambdaSpec> = config.policies.iter().find_map(|p| match p {
        PolicySpec::DynlinUcb { lambda, .. } => *lambda,
        _ => None,
    });
    rho_bars
        .iter()
        .map(|&r| PolicySpec::DynlinUcb {
            rho_bar: Some(r),
            lambda,
            label: None,
        })
        .collect()
}

fn cmd_run(args: &RunArgs, rho_bars: Option<&[f64]>) -> CmdResult {
    let mut config = load_config(&args.config)?;
    if let Some(seeds) = &args.seeds {
        config.seeds = seeds.clone();
    }
    if args.parallel.is_some() {
        config.parallel = args.parallel;
    }
    if let Some(rhos) = rho_bars {
        if rhos.is_empty() {
            return Err(Failure::usage("rho-bars must be nonempty"));
        }
        config.policies = sweep_policies(&config, rhos);
    }
    let out = args
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    let exp = Experiment::new(config).map_err(Failure::usage)?;
    let sweep = exp.run_sweep().map_err(Failure::runtime)?;
    std::fs::create_dir_all(&out).map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    write_traces(out.join("traces.csv"), &sweep.traces).map_err(Failure::runtime)?;
    write_aggregate(out.join("aggregate.csv"), &sweep.aggregate).map_err(Failure::runtime)?;
    let resolved = exp.config.to_json().map_err(Failure::runtime)?;
    std::fs::write(out.join("config.json"), resolved + "\n")
        .map_err(|e| Failure::Runtime(format!("{}: {e}", out.display())))?;
    print_summary(&exp, &sweep);
    Ok(())
}

fn print_summary(exp: &Experiment, sweep: &SweepResult) {
    let horizon = exp.config.horizon;
    println!("{:<32} {:>14} {:>14} {:>10}", "policy", "offline", "online", "R(T)/R(T/2)");
    for spec in &exp.config.policies {
        let label = spec.label();
        let Some(row) = sweep.row(&label, horizon) else { continue };
        let stat = sweep
            .sublinearity(&label, horizon)
            .map_or_else(|| "-".to_string(), |s| format!("{s:.3}"));
        println!("{label:<32} {:>14.3} {:>14.3} {stat:>10}", row.mean_offline, row.mean_online);
    }
}

fn cmd_sysid(args: &SysidArgs) -> CmdResult {
    let traj = Trajectory::read_csv(&args.trajectory).map_err(Failure::usage)?;
    let history = args
        .history
        .unwrap_or_else(|| sysid::default_history(args.rho_bar, traj.len()));
    let mut opts = IdentifyOptions::new(history).with_lambda(args.lambda);
    if let Some(n) = args.order {
        opts = opts.with_order(n);
    }
    let id = sysid::identify(&traj, &opts).map_err(Failure::runtime)?;
    let text = serde_json::to_string_pretty(&IdentifiedModel::from(&id)).map_err(Failure::runtime)?;
    match &args.out {
        Some(path) => std::fs::write(path, text + "\n")
            .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_make_instance(kind: &InstanceKind, out: Option<&Path>, sigma: f64) -> CmdResult {
    let out = out.ok_or_else(|| Failure::usage("make-instance needs --out"))?;
    let system = match kind {
        InstanceKind::Hard { rho, eps, signs } => {
            lti_env::hard_instance(&HardInstanceParams::from_signs(*rho, *eps, signs)).map(|i| i.system)
        }
        InstanceKind::Delayed { mu, tau } => lti_env::make_delayed_instance(mu, *tau),
        InstanceKind::Composite { mu, weights } => lti_env::make_composite_instance(mu, weights),
        InstanceKind::Ar1 { mu, gamma } => lti_env::make_ar1_instance(mu, *gamma),
    }
    .and_then(|s| s.with_sigma(sigma))
    .map_err(Failure::usage)?;
    SystemFixture::new(system).save(out).map_err(Failure::runtime)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_oracle(args: &ConfigArgs) -> CmdResult {
    let config = load_config(args)?;
    let exp = Experiment::new(config).map_err(Failure::usage)?;
    let stats = exp
        .system()
        .spectral_stats(DEFAULT_POWER_CUTOFF)
        .map_err(Failure::runtime)?;
    let o = &exp.oracle;
    let report = serde_json::json!({
        "h": o.h.as_slice(),
        "h_source": if exp.config.use_stated_h { "stated" } else { "system" },
        "optimal_action": o.optimal_action.as_slice(),
        "optimal_value": o.optimal_value,
        "gap": if o.gap.is_finite() { serde_json::json!(o.gap) } else { serde_json::Value::Null },
        "rho": stats.rho,
        "phi": stats.phi,
    });
    println!("{}", serde_json::to_string_pretty(&report).map_err(Failure::runtime)?);
    Ok(())
}
