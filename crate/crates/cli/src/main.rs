use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spinwire::commands::{cmd_fit, cmd_ideal, cmd_prob_gap, cmd_sweep, render_fits, render_ideal};
use spinwire::config::{
    parse_alpha, parse_b_variant, parse_grid, parse_protocols, parse_sizes, SweepMode, TargetChoice,
};
use spinwire::{CliError, CliResult, ExperimentConfig, ParallelExecutor};
use spinwire_core::ensemble::success_probability_gap;
use spinwire_core::fitting::{AmplitudeRule, BReference};

#[derive(Parser)]
#[command(
    name = "spinwire",
    version,
    about = "Spin-chain state transfer under static disorder"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean-chain transfer probability, phase, time and boundary ratio.
    Ideal(Common),
    /// Monte Carlo sweeps over disorder strength.
    Sweep(SweepArgs),
    /// Fit the Gaussian decay law to sweep tables.
    Fit(FitArgs),
    /// Probability that the fidelity beats 2/3, minimum vs average.
    ProbGap(GapArgs),
}

#[derive(Args)]
struct Common {
    /// TOML config, or a result table whose embedded config is reused.
    #[arg(long)]
    config: Option<PathBuf>,
    /// spin-analogue, optimal-coupling, or both.
    #[arg(long)]
    protocol: Option<String>,
    /// Chain lengths, comma separated.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// opt, heuristic, or a value.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    realizations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// calculus or published.
    #[arg(long = "b-variant")]
    b_variant: Option<String>,
    /// Input weights |beta|^2 at which F_psi is tabulated.
    #[arg(long = "beta-grid")]
    beta_grid: Option<String>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma list or start:stop:step.
    #[arg(long = "sigma-j")]
    sigma_j: Option<String>,
    #[arg(long = "sigma-eps")]
    sigma_eps: Option<String>,
    /// separate or grid.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Args)]
struct GapArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "sigma-j")]
    sigma_j: Option<String>,
    #[arg(long = "sigma-eps")]
    sigma_eps: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Sweep tables to fit.
    #[arg(long)]
    input: Vec<PathBuf>,
    /// average, minimum or both.
    #[arg(long)]
    target: Option<String>,
    /// Fit A and C too instead of holding them at their closed forms.
    #[arg(long = "free-amplitude")]
    free_amplitude: bool,
    /// grid-mean or largest-disorder.
    #[arg(long = "b-reference")]
    b_reference: Option<String>,
}

fn base_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = &common.protocol {
        cfg.protocols = parse_protocols(p)?;
    }
    if let Some(e) = common.epsilon {
        cfg.epsilon = e;
    }
    if let Some(a) = &common.alpha {
        parse_alpha(a)?;
        cfg.alpha = a.clone();
    }
    if let Some(r) = common.realizations {
        cfg.realizations = r;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(b) = &common.b_variant {
        cfg.b_variant = parse_b_variant(b)?;
    }
    if let Some(g) = &common.beta_grid {
        cfg.beta_grid = parse_grid("beta_grid", g)?;
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn executor(common: &Common) -> CliResult<ParallelExecutor> {
    ParallelExecutor::new(common.threads).map_err(|e| CliError::config("threads", e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Ideal(common) => {
            let mut cfg = base_config(&common)?;
            if let Some(n) = &common.n {
                cfg.n = parse_sizes("n", n)?;
            }
            print!("{}", render_ideal(&cmd_ideal(&cfg)?));
        }
        Command::Sweep(args) => {
            let mut cfg = base_config(&args.common)?;
            if let Some(n) = &args.common.n {
                cfg.n = parse_sizes("n", n)?;
            }
            if let Some(g) = &args.sigma_j {
                cfg.sweep.sigma_j = parse_grid("sigma_j", g)?;
            }
            if let Some(g) = &args.sigma_eps {
                cfg.sweep.sigma_eps = parse_grid("sigma_eps", g)?;
            }
            if let Some(m) = &args.mode {
                cfg.sweep.mode = match m.as_str() {
                    "separate" => SweepMode::Separate,
                    "grid" => SweepMode::Grid,
                    other => {
                        return Err(CliError::config(
                            "mode",
                            format!("expected separate or grid, got `{other}`"),
                        ))
                    }
                };
            }
            let exec = executor(&args.common)?;
            for path in cmd_sweep(&cfg, &exec)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Fit(args) => {
            let mut cfg = base_config(&args.common)?;
            if !args.input.is_empty() {
                cfg.fit.input = args.input.clone();
            }
            if let Some(t) = &args.target {
                cfg.fit.target = match t.as_str() {
                    "average" | "favg" => TargetChoice::Average,
                    "minimum" | "fmin" => TargetChoice::Minimum,
                    "both" => TargetChoice::Both,
                    other => {
                        return Err(CliError::config(
                            "target",
                            format!("expected average, minimum or both, got `{other}`"),
                        ))
                    }
                };
            }
            if args.free_amplitude {
                cfg.fit.amplitude = AmplitudeRule::Free;
            }
            if let Some(b) = &args.b_reference {
                cfg.fit.b_reference = match b.as_str() {
                    "grid-mean" => BReference::GridMean,
                    "largest-disorder" => BReference::LargestDisorder,
                    other => {
                        return Err(CliError::config(
                            "b_reference",
                            format!("expected grid-mean or largest-disorder, got `{other}`"),
                        ))
                    }
                };
            }
            print!("{}", render_fits(&cmd_fit(&cfg)?));
            println!("wrote {}", cfg.out.join("fit_report.json").display());
        }
        Command::ProbGap(args) => {
            let mut cfg = base_config(&args.common)?;
            if let Some(n) = &args.common.n {
                cfg.prob_gap.n = parse_sizes("n", n)?;
            }
            if let Some(g) = &args.sigma_j {
                cfg.prob_gap.sigma_j = parse_grid("sigma_j", g)?;
            }
            if let Some(g) = &args.sigma_eps {
                cfg.prob_gap.sigma_eps = parse_grid("sigma_eps", g)?;
            }
            let exec = executor(&args.common)?;
            for t in cmd_prob_gap(&cfg, &exec)? {
                for &n in &t.result.n_list {
                    let worst = t
                        .result
                        .cells
                        .iter()
                        .filter(|c| c.n == n)
                        .map(|c| success_probability_gap(&c.stats))
                        .fold(0.0, f64::min);
                    println!("{} N={n}: largest |gap| {:.3}", t.protocol.name(), -worst);
                }
                println!("wrote {}", t.path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
