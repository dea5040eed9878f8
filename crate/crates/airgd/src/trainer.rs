//! The training loop.
//!
//! One communication round evaluates every agent's local gradient at the
//! current global model, pushes them through the over-the-air channel, and
//! applies either the plain descent update `w <- w - eta_k g_k` or the
//! momentum pair `v_k = beta v_{k-1} + g_k`, `w <- w - eta_k v_k` (with
//! `v_0 = 0`, so the moving-average expansion of `v_k` holds from round 1).
//!
//! Monte-Carlo trials are embarrassingly parallel: every `(trial, round,
//! lane)` triple addresses its own noise stream, so results are independent
//! of scheduling, and trial aggregation reduces in trial-id order. The
//! per-round error metric is `||w_k - w*||_alpha^alpha`, the quantity the
//! convergence bounds control.
//!
//! Heavy-tail jumps can be enormous but remain finite; a non-finite iterate
//! means the configuration itself diverges (e.g. a constant step above
//! `2/lambda`), so the trajectory is truncated at that round and flagged
//! rather than silently propagated.

use rayon::prelude::*;

use crate::alpha::{alpha_norm_pow, AlphaIndex};
use crate::channel::{aggregate_given, make_basis, AggregationMode, ChannelModel, WaveformBasis};
use crate::error::{Error, Result};
use crate::noise::sample_stable_vec;
use crate::objectives::FederatedProblem;
use crate::rng::{Lane, RngStream};

/// Learning-rate schedule, defined from round `k = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// `eta_k = theta / k`.
    ThetaOverK { theta: f64 },
    /// `eta_k = k^-rho` with `rho` in (0, 1).
    Power { rho: f64 },
    /// Fixed step.
    Constant { eta: f64 },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::ThetaOverK { theta } if theta > 0.0 && theta.is_finite() => Ok(()),
            Schedule::Power { rho } if rho > 0.0 && rho < 1.0 => Ok(()),
            Schedule::Constant { eta } if eta > 0.0 && eta.is_finite() => Ok(()),
            _ => Err(Error::invalid(format!("invalid learning-rate schedule {self:?}"))),
        }
    }
}

/// Learning rate at round `k >= 1`.
pub fn lr(schedule: &Schedule, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("schedules are defined from round 1"));
    }
    schedule.validate()?;
    Ok(match *schedule {
        Schedule::ThetaOverK { theta } => theta / k as f64,
        Schedule::Power { rho } => (k as f64).powf(-rho),
        Schedule::Constant { eta } => eta,
    })
}

/// Plain descent: `w - eta * g`.
pub fn gd_step(w: &[f64], g: &[f64], eta: f64) -> Vec<f64> {
    assert_eq!(w.len(), g.len(), "gd_step dimension mismatch");
    w.iter().zip(g).map(|(wi, gi)| wi - eta * gi).collect()
}

/// Momentum pair: `v = beta * v_prev + g`, then `w - eta * v`.
/// `beta = 0` reduces bit-for-bit to [`gd_step`].
pub fn momentum_step(
    w: &[f64],
    v_prev: &[f64],
    g: &[f64],
    beta: f64,
    eta: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(w.len(), g.len(), "momentum_step dimension mismatch");
    assert_eq!(w.len(), v_prev.len(), "momentum_step velocity mismatch");
    assert!((0.0..1.0).contains(&beta), "momentum weight must be in [0, 1)");
    let v: Vec<f64> = v_prev.iter().zip(g).map(|(vi, gi)| beta * vi + gi).collect();
    let w_next = gd_step(w, &v, eta);
    (w_next, v)
}

/// Initial iterate policy.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// `w* + distance * e_1`: puts `||delta_0||` at the same value across
    /// tail-index sweeps.
    UnitOffset { distance: f64 },
    /// Caller-provided starting point.
    Explicit(Vec<f64>),
}

impl Default for InitMode {
    fn default() -> Self {
        InitMode::UnitOffset { distance: 1.0 }
    }
}

/// Training configuration for one Monte-Carlo experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub schedule: Schedule,
    /// `None` runs plain descent; `Some(0.0)` runs the momentum path, which
    /// produces identical trajectories.
    pub momentum: Option<f64>,
    /// Communication rounds `K`; 0 records the initial point only.
    pub rounds: usize,
    /// Monte-Carlo trials, stream ids `0..trials`.
    pub trials: usize,
    pub init: InitMode,
    pub seed: u64,
    /// Order of the error metric `||w - w*||_alpha^alpha`; normally the
    /// channel's tail index.
    pub alpha_metric: f64,
    pub aggregation: AggregationMode,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if let Some(beta) = self.momentum {
            if !(0.0..1.0).contains(&beta) {
                return Err(Error::invalid(format!("momentum weight must be in [0, 1), got {beta}")));
            }
        }
        if self.trials == 0 {
            return Err(Error::invalid("at least one trial is required"));
        }
        AlphaIndex::new(self.alpha_metric)?;
        if let InitMode::UnitOffset { distance } = self.init {
            if !distance.is_finite() {
                return Err(Error::invalid("initial offset must be finite"));
            }
        }
        Ok(())
    }
}

/// Per-round record of a single trial. Arrays cover round 0 up to the last
/// finite iterate; `truncated_at` names the first non-finite round, if any.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub alpha_err: Vec<f64>,
    pub loss: Vec<f64>,
    pub final_w: Vec<f64>,
    pub truncated_at: Option<usize>,
}

/// Everything observable about one completed round, for tests and logging.
#[derive(Debug)]
pub struct RoundObservation<'a> {
    pub round: usize,
    pub w: &'a [f64],
    pub gradient: &'a [f64],
    pub velocity: &'a [f64],
    pub eta: f64,
}

/// Trial-averaged trajectory statistics.
///
/// The trial mean realizes the expectation in the convergence bounds, but at
/// metric order alpha the mean is itself heavy-tailed, so the per-round
/// median is carried alongside and reports should prefer it for location.
#[derive(Debug, Clone)]
pub struct TrajectoryStats {
    /// Configured round count `K`.
    pub rounds: usize,
    /// Trial mean of `||w_k - w*||_alpha^alpha`; index k in `0..=K`.
    pub mean_alpha_err: Vec<f64>,
    pub median_alpha_err: Vec<f64>,
    pub mean_loss: Vec<f64>,
    /// Trials still alive (not truncated) at each round.
    pub trials_alive: Vec<usize>,
    /// Final recorded error of each trial, in trial order.
    pub per_trial_final_err: Vec<f64>,
    /// `(trial, round)` pairs where trajectories went non-finite.
    pub truncated: Vec<(u64, usize)>,
    pub num_trials: usize,
    pub alpha_metric: f64,
}

impl TrajectoryStats {
    /// Median of the per-trial final errors.
    pub fn final_median(&self) -> f64 {
        median(&mut self.per_trial_final_err.clone())
    }

    /// Mean of the per-trial final errors with the top and bottom `frac`
    /// discarded.
    pub fn final_trimmed_mean(&self, frac: f64) -> f64 {
        let mut v = self.per_trial_final_err.clone();
        v.sort_unstable_by(f64::total_cmp);
        let cut = ((v.len() as f64) * frac).floor() as usize;
        let kept = &v[cut..v.len() - cut.min(v.len() - cut)];
        kept.iter().sum::<f64>() / kept.len().max(1) as f64
    }
}

fn median(v: &mut [f64]) -> f64 {
    assert!(!v.is_empty());
    v.sort_unstable_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn initial_point(problem: &dyn FederatedProblem, init: &InitMode) -> Result<Vec<f64>> {
    match init {
        InitMode::UnitOffset { distance } => {
            let mut w = problem.minimizer().to_vec();
            w[0] += distance;
            Ok(w)
        }
        InitMode::Explicit(w) => {
            if w.len() != problem.dim() {
                return Err(Error::dim(format!(
                    "initial point has {} entries, problem has {}",
                    w.len(),
                    problem.dim()
                )));
            }
            Ok(w.clone())
        }
    }
}

/// Run one trial, invoking `observe` after every completed round.
pub fn run_trial_observed<F>(
    problem: &dyn FederatedProblem,
    channel: &ChannelModel,
    config: &TrainConfig,
    trial_id: u64,
    mut observe: F,
) -> Result<TrialRecord>
where
    F: FnMut(&RoundObservation<'_>),
{
    config.validate()?;
    if problem.num_agents() != channel.num_agents() {
        return Err(Error::dim(format!(
            "problem has {} agents, channel has {}",
            problem.num_agents(),
            channel.num_agents()
        )));
    }
    let d = problem.dim();
    let basis: Option<WaveformBasis> = match config.aggregation {
        AggregationMode::Waveform => Some(make_basis(d, channel.waveform_samples())?),
        AggregationMode::Direct => None,
    };
    let wstar = problem.minimizer();
    let alpha = config.alpha_metric;
    let n = problem.num_agents();

    let mut w = initial_point(problem, &config.init)?;
    let mut velocity = vec![0.0; d];
    let mut delta: Vec<f64> = w.iter().zip(wstar).map(|(a, b)| a - b).collect();

    let mut record = TrialRecord {
        alpha_err: Vec::with_capacity(config.rounds + 1),
        loss: Vec::with_capacity(config.rounds + 1),
        final_w: Vec::new(),
        truncated_at: None,
    };
    record.alpha_err.push(alpha_norm_pow(&delta, alpha)?);
    record.loss.push(problem.global_loss(&w));

    for k in 1..=config.rounds {
        let gradients: Vec<Vec<f64>> = (0..n).map(|a| problem.local_gradient(a, &w)).collect();
        let fading = channel
            .sample_fading_vec(&mut RngStream::for_round(config.seed, trial_id, k, Lane::Fading).rng());
        let interference = match channel.interference() {
            Some(params) => sample_stable_vec(
                params,
                d,
                &mut RngStream::for_round(config.seed, trial_id, k, Lane::Interference).rng(),
            ),
            None => vec![0.0; d],
        };
        let g = aggregate_given(&gradients, &fading, &interference, config.aggregation, basis.as_ref())?;
        let eta = lr(&config.schedule, k)?;
        match config.momentum {
            Some(beta) => {
                let (w_next, v_next) = momentum_step(&w, &velocity, &g, beta, eta);
                w = w_next;
                velocity = v_next;
            }
            None => w = gd_step(&w, &g, eta),
        }
        if w.iter().any(|x| !x.is_finite()) {
            record.truncated_at = Some(k);
            break;
        }
        for ((dl, wi), ws) in delta.iter_mut().zip(&w).zip(wstar) {
            *dl = wi - ws;
        }
        let err = alpha_norm_pow(&delta, alpha)?;
        let loss = problem.global_loss(&w);
        // The metric overflows before the iterate does on divergent runs;
        // recorded entries must stay finite.
        if !err.is_finite() || !loss.is_finite() {
            record.truncated_at = Some(k);
            break;
        }
        record.alpha_err.push(err);
        record.loss.push(loss);
        observe(&RoundObservation { round: k, w: &w, gradient: &g, velocity: &velocity, eta });
    }
    record.final_w = w;
    Ok(record)
}

/// Run one trial; deterministic in `(config.seed, trial_id)`.
pub fn run_trial(
    problem: &dyn FederatedProblem,
    channel: &ChannelModel,
    config: &TrainConfig,
    trial_id: u64,
) -> Result<TrialRecord> {
    run_trial_observed(problem, channel, config, trial_id, |_| {})
}

/// Run `config.trials` independent trials (stream ids `0..trials`) and
/// average. Trials execute in parallel; the reduction is keyed by trial id,
/// so the result does not depend on scheduling.
pub fn run_monte_carlo(
    problem: &dyn FederatedProblem,
    channel: &ChannelModel,
    config: &TrainConfig,
) -> Result<TrajectoryStats> {
    config.validate()?;
    let records: Vec<TrialRecord> = (0..config.trials as u64)
        .into_par_iter()
        .map(|trial| run_trial(problem, channel, config, trial))
        .collect::<Result<Vec<_>>>()?;

    let k_max = records.iter().map(|r| r.alpha_err.len()).max().unwrap_or(1);
    let mut mean_alpha_err = Vec::with_capacity(k_max);
    let mut median_alpha_err = Vec::with_capacity(k_max);
    let mut mean_loss = Vec::with_capacity(k_max);
    let mut trials_alive = Vec::with_capacity(k_max);
    let mut scratch = Vec::with_capacity(records.len());
    for k in 0..k_max {
        scratch.clear();
        let mut loss_sum = 0.0;
        for r in &records {
            if let Some(&e) = r.alpha_err.get(k) {
                scratch.push(e);
                loss_sum += r.loss[k];
            }
        }
        if scratch.is_empty() {
            break;
        }
        let alive = scratch.len();
        mean_alpha_err.push(scratch.iter().sum::<f64>() / alive as f64);
        mean_loss.push(loss_sum / alive as f64);
        median_alpha_err.push(median(&mut scratch));
        trials_alive.push(alive);
    }

    let truncated: Vec<(u64, usize)> = records
        .iter()
        .enumerate()
        .filter_map(|(t, r)| r.truncated_at.map(|k| (t as u64, k)))
        .collect();
    let per_trial_final_err =
        records.iter().map(|r| *r.alpha_err.last().expect("round 0 always recorded")).collect();

    Ok(TrajectoryStats {
        rounds: config.rounds,
        mean_alpha_err,
        median_alpha_err,
        mean_loss,
        trials_alive,
        per_trial_final_err,
        truncated,
        num_trials: config.trials,
        alpha_metric: config.alpha_metric,
    })
}
