use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use otafl::bounds::ConvergenceBudget;
use otafl::channel::ChannelSet;
use otafl::cli::{
    exit, parse_config, run, solve_round, sweep_report, validate_bounds, MethodName, RunError, RunOptions,
    SolveRequest, ValidateOptions,
};

#[derive(Parser)]
#[command(name = "otafl", version, about = "Over-the-air federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a configuration file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed_override: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Monte Carlo check of the error bounds on random rounds.
    ValidateBounds {
        #[arg(long, default_value_t = 4)]
        instances: usize,
        #[arg(long, default_value_t = 2000)]
        draws: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.1])]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Design a single round from a channel dump.
    SolveRound {
        #[arg(long)]
        channels: PathBuf,
        #[arg(long, default_value = "pomfl")]
        method: String,
        #[arg(long, default_value_t = 0.55)]
        alpha: f64,
        #[arg(long, default_value_t = 6.0)]
        delta: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.075)]
        eta: f64,
        #[arg(long, default_value_t = 21.0)]
        p0_dbm: f64,
        #[arg(long, default_value_t = -74.0)]
        noise_dbm: f64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 7850)]
        dim: usize,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0])]
        norms: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![500u64])]
        samples: Vec<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Aggregate summary CSVs into one row per (scenario, method, P0, eps).
    SweepReport {
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            seed_override,
            threads,
            out,
        } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{}: {e}", config.display());
                    return code(exit::INVALID);
                }
            };
            let cfg = match parse_config(&text) {
                Ok(c) => c,
                Err(errs) => {
                    for e in errs {
                        eprintln!("{}: {e}", config.display());
                    }
                    return code(exit::INVALID);
                }
            };
            let opts = RunOptions {
                threads,
                seed_override,
                out,
            };
            match run(&cfg, &opts) {
                Ok(outcome) => {
                    eprintln!("{} cells, {} failed", outcome.cells, outcome.failed);
                    code(outcome.exit_code())
                }
                Err(e @ (RunError::Config(_) | RunError::Data(_))) => {
                    eprintln!("{e}");
                    code(exit::INVALID)
                }
                Err(e) => {
                    eprintln!("{e}");
                    code(exit::CELLS_FAILED)
                }
            }
        }
        Command::ValidateBounds {
            instances,
            draws,
            eps,
            seed,
        } => {
            if eps.iter().any(|e| !(0.0..1.0).contains(e)) {
                eprintln!("every eps must lie in [0,1)");
                return code(exit::INVALID);
            }
            let opts = ValidateOptions {
                instances,
                draws,
                eps,
                seed,
                ..ValidateOptions::default()
            };
            let checks = validate_bounds(&opts);
            println!("instance,eps,bias_bound,bias_empirical,bias_se,mse_bound,mse_empirical,mse_se,passed");
            let mut ok = true;
            for c in &checks {
                ok &= c.passed();
                println!(
                    "{},{},{},{},{},{},{},{},{}",
                    c.instance,
                    c.eps,
                    c.bias_bound,
                    c.bias_empirical,
                    c.bias_se,
                    c.mse_bound,
                    c.mse_empirical,
                    c.mse_se,
                    c.passed()
                );
            }
            code(if ok { exit::OK } else { exit::CELLS_FAILED })
        }
        Command::SolveRound {
            channels,
            method,
            alpha,
            delta,
            beta,
            eta,
            p0_dbm,
            noise_dbm,
            eps,
            dim,
            norms,
            samples,
            seed,
        } => {
            let ch = match std::fs::read_to_string(&channels)
                .map_err(|e| e.to_string())
                .and_then(|t| ChannelSet::from_dump(&t).map_err(|e| e.to_string()))
            {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{}: {e}", channels.display());
                    return code(exit::INVALID);
                }
            };
            let Some(method) = MethodName::parse(&method) else {
                eprintln!("unknown method `{method}`");
                return code(exit::INVALID);
            };
            let budget = match ConvergenceBudget::new(alpha, delta, beta) {
                Ok(b) => b,
                Err(e) => {
                    eprintln!("{e}");
                    return code(exit::INVALID);
                }
            };
            let req = SolveRequest {
                method,
                budget,
                eta,
                p0_dbm,
                noise_dbm,
                eps,
                dim,
                norms,
                samples,
                seed,
            };
            match solve_round(&ch, &req) {
                Ok((_, _, text)) => {
                    print!("{text}");
                    code(exit::OK)
                }
                Err(e) => {
                    eprintln!("{e}");
                    code(exit::CELLS_FAILED)
                }
            }
        }
        Command::SweepReport { inputs, out } => match sweep_report(&inputs) {
            Ok(table) => {
                match out {
                    Some(p) => {
                        if let Err(e) = std::fs::write(&p, table) {
                            eprintln!("{}: {e}", p.display());
                            return code(exit::CELLS_FAILED);
                        }
                    }
                    None => print!("{table}"),
                }
                code(exit::OK)
            }
            Err(e) => {
                eprintln!("{e}");
                code(exit::INVALID)
            }
        },
    }
}
