//! Command-line entry point.
//!
//! Verbs: `run <config>`, `sweep <config> --axis <name> --values <list>`,
//! `validate <config>`, `bounds <config> [--k <list>]`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 a
//! `--check` verdict failed. The output directory comes from the config's
//! `output.dir`, overridable with `AIRGD_OUT_DIR`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use airgd_cli::config::ExperimentConfig;
use airgd_cli::experiment::{check_run, evaluate_bounds, run_experiment, sweep, SweepAxis};

#[derive(Parser)]
#[command(name = "airgd", about = "Over-the-air gradient descent simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write CSV + summary artifacts.
    Run {
        config: PathBuf,
        /// Artifact name stem (defaults to the config file stem).
        #[arg(long)]
        label: Option<String>,
        /// Verify the fitted slope against the window in the config's
        /// analysis block; exit 3 on failure.
        #[arg(long)]
        check: bool,
    },
    /// Re-run the experiment along one axis and compare.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: String,
        /// Comma-separated values for the axis.
        #[arg(long)]
        values: String,
        /// Exit 3 unless every axis verdict holds.
        #[arg(long)]
        check: bool,
    },
    /// Parse and validate a config, reporting problems with line numbers.
    Validate { config: PathBuf },
    /// Print the closed-form bound evaluations for a config.
    Bounds {
        config: PathBuf,
        /// Comma-separated rounds to evaluate at (defaults to
        /// analysis.bound_ks).
        #[arg(long)]
        k: Option<String>,
    },
}

fn load_config(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    match ExperimentConfig::load(path) {
        Ok(cfg) => Ok(cfg),
        Err(e) => {
            eprintln!("config error in {}: {e}", path.display());
            Err(ExitCode::from(1))
        }
    }
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var_os("AIRGD_OUT_DIR") {
        Some(dir) => PathBuf::from(dir),
        None => cfg.output.dir.clone(),
    }
}

fn label_for(path: &Path, label: Option<String>) -> String {
    label.unwrap_or_else(|| {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
    })
}

fn parse_float_list(text: &str, what: &str) -> Result<Vec<f64>, ExitCode> {
    let mut out = Vec::new();
    for part in text.split(',') {
        match part.trim().parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) => {
                eprintln!("config error: cannot parse {what} entry `{part}`");
                return Err(ExitCode::from(1));
            }
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { config, label, check } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return Ok(code),
            };
            let label = label_for(&config, label);
            let dir = out_dir(&cfg);
            let (summary, artifacts, _stats) = run_experiment(&cfg, &dir, &label)?;
            println!("wrote {}", artifacts.csv_path.display());
            println!("wrote {}", artifacts.summary_path.display());
            if let Some(fit) = &summary.fit {
                let predicted = summary
                    .predicted_exponent
                    .map(|p| format!("{p:.4}"))
                    .unwrap_or_else(|| "n/a".into());
                println!(
                    "fitted slope {:.4} (predicted {predicted}, window [{}, {}], r^2 {:.4})",
                    fit.slope, fit.k_min, fit.k_max, fit.r_squared
                );
            }
            println!(
                "final error: mean {:.6e}, median {:.6e}, trimmed mean {:.6e}",
                summary.final_error.mean,
                summary.final_error.median,
                summary.final_error.trimmed_mean_5pct
            );
            if !summary.truncated_trials.is_empty() {
                println!("flagged trials (non-finite, truncated): {:?}", summary.truncated_trials);
            }
            if check {
                let verdicts = check_run(&cfg, &summary)?;
                let mut all_ok = true;
                for (name, ok) in &verdicts {
                    println!("check: {name}: {}", if *ok { "PASS" } else { "FAIL" });
                    all_ok &= ok;
                }
                if !all_ok {
                    return Ok(ExitCode::from(3));
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { config, axis, values, check } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return Ok(code),
            };
            let axis: SweepAxis = match axis.parse() {
                Ok(a) => a,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return Ok(ExitCode::from(1));
                }
            };
            let values = match parse_float_list(&values, "--values") {
                Ok(v) => v,
                Err(code) => return Ok(code),
            };
            let label = label_for(&config, None);
            let dir = out_dir(&cfg);
            let (summary, _runs) = sweep(&cfg, axis, &values, &dir, &label)?;
            println!("{:>10} {:>12} {:>16}", summary.axis, "slope", "final median");
            for e in &summary.entries {
                let slope =
                    e.slope.map(|s| format!("{s:.4}")).unwrap_or_else(|| "n/a".to_string());
                println!("{:>10} {:>12} {:>16.6e}", format!("{}", e.value), slope, e.final_median);
            }
            let mut all_ok = true;
            for (name, ok) in &summary.verdicts {
                println!("verdict: {name}: {}", if *ok { "PASS" } else { "FAIL" });
                all_ok &= ok;
            }
            if check && !all_ok {
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return Ok(code),
            };
            // Building the domain objects re-validates every module-level
            // invariant (problem construction includes the logistic oracle).
            if let Err(e) = cfg.build_channel().and(cfg.build_train()) {
                eprintln!("config error in {}: {e}", config.display());
                return Ok(ExitCode::from(1));
            }
            if let Err(e) = cfg.build_problem() {
                eprintln!("config error in {}: {e}", config.display());
                return Ok(ExitCode::from(1));
            }
            println!("{} is valid", config.display());
            println!(
                "problem: {:?} agents={} dim={}",
                match cfg.problem {
                    airgd_cli::config::ProblemSpec::Quadratic { .. } => "quadratic",
                    airgd_cli::config::ProblemSpec::Logistic { .. } => "logistic",
                },
                cfg.problem.num_agents(),
                cfg.problem.dim()
            );
            println!(
                "channel: alpha={} delta={:?} mu={} rounds={} trials={}",
                cfg.channel.alpha, cfg.channel.delta, cfg.channel.mu, cfg.train.rounds, cfg.train.trials
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Bounds { config, k } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(code) => return Ok(code),
            };
            let ks: Vec<usize> = match k {
                Some(list) => {
                    let floats = match parse_float_list(&list, "--k") {
                        Ok(v) => v,
                        Err(code) => return Ok(code),
                    };
                    let mut ks = Vec::new();
                    for v in floats {
                        if v < 1.0 || v.fract() != 0.0 {
                            eprintln!("config error: --k entries must be positive integers");
                            return Ok(ExitCode::from(1));
                        }
                        ks.push(v as usize);
                    }
                    ks
                }
                None => cfg.analysis.bound_ks.clone(),
            };
            let (bounds, notes) = evaluate_bounds(&cfg, &ks)?;
            if let Some(c_hat) = &bounds.c_hat {
                println!(
                    "calibrated noise moment {:.6} ({} draws, quantile {}; {})",
                    c_hat.value, c_hat.draws, c_hat.quantile, c_hat.note
                );
            }
            println!(
                "gradient bound {:.6} on radius {:.3}; contraction L {}",
                bounds.grad_bound, bounds.region_radius, bounds.contraction_l
            );
            for note in &notes {
                println!("note: {note}");
            }
            if !bounds.theorem1.is_empty() {
                println!("plain-descent bound:");
                for p in &bounds.theorem1 {
                    println!("  k={:<8} {:.6e}", p.k, p.value);
                }
            }
            if let Some(points) = &bounds.theorem2 {
                println!("momentum bound:");
                for p in points {
                    println!("  k={:<8} {:.6e}", p.k, p.value);
                }
            }
            if let Some(g) = bounds.generalization {
                println!("generalization bound: {g:.6e}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
