use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use leo_apass::harness::{ratio_table, run_campaign, write_outputs, ExperimentConfig, Profile, Scenario};
use leo_apass::maxmin_gp::write_trace_csv;
use leo_apass::schemes::Scheme;
use leo_apass::Error;

#[derive(Parser, Debug)]
#[command(name = "apass", version, about = "Max-min fair LEO downlink power allocation experiments")]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Preset used when no config file is given: desk or paper.
    #[arg(long, global = true, default_value = "desk")]
    profile: String,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the number of trials.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Print the configuration with all defaults filled in and exit.
    #[arg(long)]
    print_default_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one channel realization and write it as CSV.
    SimulateChannel {
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Solve the genie-aided bound for one trial.
    SolveGenie {
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Run one scheme on one trial.
    Run {
        scheme: String,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Normalised prediction-error variance.
        #[arg(long, default_value_t = 0.0)]
        sigma_e2: f64,
    },
    /// Full Monte Carlo campaign.
    Campaign {
        /// Also write per-scheme CDF files.
        #[arg(long)]
        emit_cdf: bool,
    },
    /// Campaign over a list of prediction-error variances.
    SweepError {
        /// Comma-separated variances; defaults to the configured sweep.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long)]
        emit_cdf: bool,
    },
}

enum Failure {
    Config(String),
    Threshold(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Table(_) | Error::Scenario(_) => Failure::Config(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path).map_err(|e| Failure::Config(e.to_string()))?,
        None => ExperimentConfig::profile(cli.profile.parse::<Profile>()?),
    };
    if let Some(seed) = cli.seed {
        cfg.campaign.master_seed = seed;
    }
    if let Some(t) = cli.trials {
        cfg.campaign.n_trials = t;
    }
    if let Some(out) = &cli.out {
        cfg.campaign.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<File, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(name);
    Ok(File::create(&path).map_err(|e| Error::io(&path, e))?)
}

fn campaign(cfg: &ExperimentConfig, emit_cdf: bool) -> Result<(), Failure> {
    let summary = run_campaign(cfg)?;
    let ratios = ratio_table(&summary, &cfg.campaign.schemes, &cfg.campaign.sigma_e2);
    let written = write_outputs(&summary, &ratios, &cfg.campaign.output_dir, emit_cdf)?;
    println!("{:<14} {:>8} {:>14} {:>10} {:>10}", "scheme", "sigma_e2", "mean_min_rate", "genie_frac", "fairness");
    for p in &summary.points {
        println!(
            "{:<14} {:>8} {:>14.4} {:>10.4} {:>10.4}",
            p.scheme.name(),
            p.sigma_e2,
            p.mean_min_rate,
            p.mean_genie_fraction,
            p.mean_fairness
        );
    }
    for path in written {
        log::info!("wrote {}", path.display());
    }
    if summary.failed_rows > 0 {
        eprintln!("{} of {} rows failed", summary.failed_rows, summary.expected_rows);
    }
    if summary.failure_fraction() > cfg.campaign.max_failure_fraction {
        return Err(Failure::Threshold(format!(
            "failure fraction {:.3} exceeds {}",
            summary.failure_fraction(),
            cfg.campaign.max_failure_fraction
        )));
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    if cli.print_default_config {
        print!("{}", cfg.to_toml_string());
        return Ok(());
    }
    let Some(command) = &cli.command else {
        return Err(Failure::Config("no subcommand given (see --help)".into()));
    };
    let out_dir = cfg.campaign.output_dir.clone();
    match command {
        Command::SimulateChannel { trial } => {
            let scenario = Scenario::new(&cfg)?;
            let r = scenario.realization(*trial)?;
            r.write_csv(create(&out_dir, "channel.csv")?)?;
            println!("wrote {} users x {} slots to {}", r.n_users(), r.n_slots(), out_dir.join("channel.csv").display());
        }
        Command::SolveGenie { trial } => {
            let scenario = Scenario::new(&cfg)?;
            let r = scenario.realization(*trial)?;
            let genie = scenario.genie(&r)?;
            write_trace_csv(&genie.trace, create(&out_dir, "genie_trace.csv")?)?;
            println!(
                "genie min-rate {:.6} bit/s/Hz after {} iterations (converged: {})",
                genie.min_rate, genie.iterations, genie.converged
            );
        }
        Command::Run { scheme, trial, sigma_e2 } => {
            let scheme: Scheme = scheme.parse()?;
            if !(*sigma_e2 >= 0.0) {
                return Err(Failure::Config("sigma_e2 must be >= 0".into()));
            }
            let scenario = Scenario::new(&cfg)?;
            let r = scenario.realization(*trial)?;
            let res = scenario.run_scheme(scheme, &r, *sigma_e2, *trial)?;
            let mut w = csv::Writer::from_writer(create(&out_dir, &format!("power_{scheme}.csv"))?);
            w.write_record(["user", "slot", "power"]).map_err(Error::from)?;
            for (k, row) in res.power.p.iter().enumerate() {
                for (n, p) in row.iter().enumerate() {
                    w.write_record([k.to_string(), n.to_string(), p.to_string()]).map_err(Error::from)?;
                }
            }
            w.flush().map_err(|e| Error::io(&out_dir, e))?;
            println!("{scheme}: min-rate {:.6} bit/s/Hz, fairness {:.6}", res.report.min_rate, res.report.fairness);
            for (k, rate) in res.report.per_user_rate.iter().enumerate() {
                println!("  user {k}: {rate:.6}");
            }
        }
        Command::Campaign { emit_cdf } => campaign(&cfg, *emit_cdf)?,
        Command::SweepError { values, emit_cdf } => {
            let mut cfg = cfg.clone();
            if let Some(v) = values {
                cfg.campaign.sigma_e2 = v.clone();
                cfg.validate()?;
            }
            campaign(&cfg, *emit_cdf)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Threshold(msg)) => {
            eprintln!("too many solver failures: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
