//! Run and sweep execution.
//!
//! `run_experiment` builds the problem/channel/trainer from a validated
//! config, runs the Monte-Carlo trials, fits the empirical rate, evaluates
//! the closed-form bounds, and writes the CSV + summary artifacts. `sweep`
//! repeats a run along one axis and reports the monotonicity verdicts the
//! acceptance checks use.

use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};

use airgd::analysis::{
    calibrate_noise_moment, fit_rate, generalization_bound, theorem1_bound, theorem2_bound,
    BoundConstants,
};
use airgd::noise::StableParams;
use airgd::rng::RngStream;
use airgd::trainer::{run_monte_carlo, Schedule, TrajectoryStats};

use crate::config::ExperimentConfig;
use crate::report::{
    write_run_artifacts, BoundPoint, BoundsSummary, FinalSummary, FitSummary, NoiseMomentSummary,
    RunArtifacts, RunSummary, SweepEntry, SweepSummary, C_HAT_NOTE,
};

/// Stream id for the noise-moment calibration draws (distinct from any
/// `(trial, round, lane)` stream the trainer derives).
const C_HAT_STREAM: u64 = 0xCA11_B8A7E;

/// Evaluate the closed-form bounds for this config. `None` entries mean the
/// corresponding theorem does not apply (wrong schedule family or an
/// applicability violation), with the reason recorded.
pub fn evaluate_bounds(cfg: &ExperimentConfig, ks: &[usize]) -> Result<(BoundsSummary, Vec<String>)> {
    let problem = cfg.build_problem().map_err(|e| anyhow!("building problem: {e}"))?;
    let channel = cfg.build_channel().map_err(|e| anyhow!("building channel: {e}"))?;
    let mut notes = Vec::new();

    let region_radius = cfg.region_radius();
    let grad_bound = problem.grad_bound(region_radius);
    let c_hat = match cfg.channel.delta {
        Some(delta) => {
            let params = StableParams::new(cfg.channel.alpha, delta)
                .map_err(|e| anyhow!("interference params: {e}"))?;
            let value = calibrate_noise_moment(
                &params,
                problem.dim(),
                cfg.analysis.c_hat_draws,
                cfg.analysis.c_hat_quantile,
                RngStream::new(cfg.train.seed, C_HAT_STREAM),
            )
            .map_err(|e| anyhow!("calibrating noise moment: {e}"))?;
            Some(NoiseMomentSummary {
                value,
                draws: cfg.analysis.c_hat_draws,
                quantile: cfg.analysis.c_hat_quantile,
                note: C_HAT_NOTE,
            })
        }
        None => None,
    };

    let theta = match cfg.train.schedule {
        Schedule::ThetaOverK { theta } => Some(theta),
        _ => {
            notes.push("convergence bounds hold for the theta/k schedule only; skipped".to_string());
            None
        }
    };
    let constants = theta.map(|theta| BoundConstants {
        noise_moment: c_hat.as_ref().map_or(0.0, |c| c.value),
        grad_bound,
        sigma: channel.fading_std(),
        mu: channel.mu(),
        contraction: cfg.analysis.contraction_l,
        theta,
        dim: problem.dim(),
        num_agents: problem.num_agents(),
        alpha: cfg.channel.alpha,
        beta: cfg.train.momentum.unwrap_or(0.0),
    });

    let mut theorem1 = Vec::new();
    let mut theorem2 = None;
    if let Some(c) = constants {
        match ks.iter().map(|&k| theorem1_bound(&c, k).map(|value| BoundPoint { k, value })).collect()
        {
            Ok(points) => theorem1 = points,
            Err(e) => notes.push(format!("plain-descent bound not applicable: {e}")),
        }
        if cfg.train.momentum.is_some() {
            match ks
                .iter()
                .map(|&k| theorem2_bound(&c, k).map(|value| BoundPoint { k, value }))
                .collect()
            {
                Ok(points) => theorem2 = Some(points),
                Err(e) => notes.push(format!("momentum bound not applicable: {e}")),
            }
        }
    }

    let generalization = match &cfg.analysis.generalization {
        Some(g) => Some(
            generalization_bound(g.loss_bound, cfg.channel.alpha, g.lambda, g.dataset_size, g.p)
                .map_err(|e| anyhow!("generalization bound: {e}"))?,
        ),
        None => None,
    };

    Ok((
        BoundsSummary {
            c_hat,
            grad_bound,
            region_radius,
            contraction_l: cfg.analysis.contraction_l,
            theorem1,
            theorem2,
            generalization,
        },
        notes,
    ))
}

/// Execute one experiment and write its artifacts under `out_dir`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    label: &str,
) -> Result<(RunSummary, RunArtifacts, TrajectoryStats)> {
    let started = Instant::now();
    let problem = cfg.build_problem().map_err(|e| anyhow!("building problem: {e}"))?;
    let channel = cfg.build_channel().map_err(|e| anyhow!("building channel: {e}"))?;
    let train = cfg.build_train().map_err(|e| anyhow!("building train config: {e}"))?;

    let stats = run_monte_carlo(problem.as_ref(), &channel, &train)
        .map_err(|e| anyhow!("running trials: {e}"))?;

    let (k_min, k_max) = cfg.fit_window();
    let fit = match fit_rate(&stats, k_min, k_max.min(stats.mean_alpha_err.len() - 1)) {
        Ok(f) => Some(FitSummary {
            slope: f.slope,
            intercept: f.intercept,
            r_squared: f.r_squared,
            k_min: f.k_min,
            k_max: f.k_max,
        }),
        Err(_) if stats.mean_alpha_err.iter().any(|x| !(*x > 0.0)) => None,
        Err(e) => return Err(anyhow!("rate fit: {e}")),
    };

    let (bounds, _notes) = evaluate_bounds(cfg, &cfg.analysis.bound_ks)?;
    let n_final = stats.per_trial_final_err.len() as f64;
    let final_error = FinalSummary {
        mean: stats.per_trial_final_err.iter().sum::<f64>() / n_final,
        median: stats.final_median(),
        trimmed_mean_5pct: stats.final_trimmed_mean(0.05),
    };

    let summary = RunSummary {
        label: label.to_string(),
        config: cfg.raw.clone(),
        rounds: cfg.train.rounds,
        trials: cfg.train.trials,
        fit,
        predicted_exponent: cfg.predicted_exponent(),
        bounds,
        final_error,
        truncated_trials: stats.truncated.clone(),
        csv: format!("{label}.csv"),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let artifacts = write_run_artifacts(out_dir, label, &stats, &summary)
        .with_context(|| format!("writing artifacts for {label}"))?;
    Ok((summary, artifacts, stats))
}

/// Slope-window check for `run --check`; config must carry the window.
pub fn check_run(cfg: &ExperimentConfig, summary: &RunSummary) -> Result<Vec<(String, bool)>> {
    let (Some(lo), Some(hi)) = (cfg.analysis.check_slope_min, cfg.analysis.check_slope_max) else {
        bail!("--check needs analysis.check_slope_min and analysis.check_slope_max in the config");
    };
    let Some(fit) = &summary.fit else {
        return Ok(vec![("rate fit available".to_string(), false)]);
    };
    Ok(vec![(
        format!("fitted slope {:.4} in [{lo}, {hi}]", fit.slope),
        fit.slope >= lo && fit.slope <= hi,
    )])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Alpha,
    NumAgents,
    Rho,
    Beta,
}

impl FromStr for SweepAxis {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(SweepAxis::Alpha),
            "n" => Ok(SweepAxis::NumAgents),
            "rho" => Ok(SweepAxis::Rho),
            "beta" => Ok(SweepAxis::Beta),
            other => bail!("unknown sweep axis `{other}` (expected alpha | n | rho | beta)"),
        }
    }
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::NumAgents => "n",
            SweepAxis::Rho => "rho",
            SweepAxis::Beta => "beta",
        }
    }

    /// Derive the variant config for one swept value.
    fn apply(&self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::Alpha => {
                if !(value > 1.0 && value <= 2.0) {
                    bail!("alpha value {value} outside (1, 2]");
                }
                cfg.channel.alpha = value;
                cfg.raw.insert("channel.alpha".to_string(), format_value(value));
            }
            SweepAxis::NumAgents => {
                if value < 1.0 || value.fract() != 0.0 {
                    bail!("agent count {value} must be a positive integer");
                }
                cfg.problem.set_num_agents(value as usize);
                cfg.raw.insert("problem.num_agents".to_string(), format_value(value));
            }
            SweepAxis::Rho => {
                if !(value > 0.0 && value < 1.0) {
                    bail!("rho value {value} outside (0, 1)");
                }
                cfg.train.schedule = Schedule::Power { rho: value };
                cfg.raw.insert("train.schedule".to_string(), "power".to_string());
                cfg.raw.remove("train.theta");
                cfg.raw.remove("train.eta");
                cfg.raw.insert("train.rho".to_string(), format_value(value));
            }
            SweepAxis::Beta => {
                if !(0.0..1.0).contains(&value) {
                    bail!("beta value {value} outside [0, 1)");
                }
                cfg.train.momentum = Some(value);
                cfg.raw.insert("train.momentum_beta".to_string(), format_value(value));
            }
        }
        Ok(cfg)
    }
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Run the experiment once per value, emit per-value artifacts plus a
/// comparison summary, and compute the axis verdicts.
pub fn sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    out_dir: &Path,
    base_label: &str,
) -> Result<(SweepSummary, Vec<RunSummary>)> {
    if values.len() < 2 {
        bail!("a sweep needs at least two values");
    }
    let started = Instant::now();
    let mut entries = Vec::new();
    let mut summaries = Vec::new();
    for &value in values {
        let cfg = axis.apply(base, value)?;
        let label = format!("{base_label}_{}{}", axis.name(), format_value(value).replace('.', "p"));
        let (summary, _artifacts, stats) = run_experiment(&cfg, out_dir, &label)
            .with_context(|| format!("sweep value {value}"))?;
        entries.push(SweepEntry {
            value,
            label: label.clone(),
            slope: summary.fit.as_ref().map(|f| f.slope),
            final_median: stats.final_median(),
        });
        summaries.push(summary);
    }

    let verdicts = compute_verdicts(axis, &entries, &summaries);
    let sweep_summary = SweepSummary {
        axis: axis.name().to_string(),
        entries,
        verdicts,
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&sweep_summary).context("serializing sweep summary")?;
    crate::report::write_atomic(
        &out_dir.join(format!("{base_label}_sweep_{}.json", axis.name())),
        &format!("{json}\n"),
    )?;
    Ok((sweep_summary, summaries))
}

fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

fn compute_verdicts(
    axis: SweepAxis,
    entries: &[SweepEntry],
    summaries: &[RunSummary],
) -> Vec<(String, bool)> {
    let slopes: Option<Vec<f64>> = entries.iter().map(|e| e.slope).collect();
    match axis {
        SweepAxis::Alpha => {
            // Heavier tail (smaller alpha) converges slower: the fitted
            // slope gets strictly more negative as alpha rises.
            let ok = slopes.as_ref().map(|s| strictly_decreasing(s)).unwrap_or(false);
            vec![("fitted slope strictly decreases in alpha".to_string(), ok)]
        }
        SweepAxis::NumAgents => {
            let medians: Vec<f64> = entries.iter().map(|e| e.final_median).collect();
            vec![("final median error strictly decreases in N".to_string(), strictly_decreasing(&medians))]
        }
        SweepAxis::Rho => {
            let ok = slopes.as_ref().map(|s| strictly_decreasing(s)).unwrap_or(false);
            vec![("fitted slope strictly decreases in rho".to_string(), ok)]
        }
        SweepAxis::Beta => {
            // Momentum affects the multiplier, not the exponent; the check
            // is that every swept run still converges.
            let ok = summaries.iter().zip(entries).all(|(s, e)| {
                s.truncated_trials.is_empty() && e.final_median.is_finite()
            });
            vec![("all momentum runs completed without divergence".to_string(), ok)]
        }
    }
}
