//! Strict plain-text configuration.
//!
//! Format: one `key = value` pair per line, full-line `#` comments, and a
//! fixed dotted-key schema. Unknown keys, duplicate keys, keys that do not
//! apply to the selected problem type or mode, and out-of-range values are
//! all rejected with the offending line number, before any computation runs.
//! Strictness is deliberate: silent parameter drift across sweep variants is
//! worse than a noisy rejection.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use airgd::channel::{AggregationMode, ChannelModel, FadingModel};
use airgd::noise::StableParams;
use airgd::objectives::{make_logistic, make_quadratic, FederatedProblem};
use airgd::trainer::{InitMode, Schedule, TrainConfig};

/// Configuration error with the source line when one is known.
#[derive(Debug)]
pub struct ConfigError {
    pub message: String,
    pub line: Option<usize>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type ConfigResult<T> = Result<T, ConfigError>;

fn err<T>(message: impl Into<String>, line: Option<usize>) -> ConfigResult<T> {
    Err(ConfigError { message: message.into(), line })
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Quadratic { num_agents: usize, dim: usize, seed: u64, center_spread: f64 },
    Logistic { num_agents: usize, dim: usize, seed: u64, samples_per_agent: usize, l2_reg: f64 },
}

impl ProblemSpec {
    pub fn num_agents(&self) -> usize {
        match *self {
            ProblemSpec::Quadratic { num_agents, .. } => num_agents,
            ProblemSpec::Logistic { num_agents, .. } => num_agents,
        }
    }

    pub fn set_num_agents(&mut self, n: usize) {
        match self {
            ProblemSpec::Quadratic { num_agents, .. } => *num_agents = n,
            ProblemSpec::Logistic { num_agents, .. } => *num_agents = n,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            ProblemSpec::Quadratic { dim, .. } => dim,
            ProblemSpec::Logistic { dim, .. } => dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub mu: f64,
    pub fading: FadingModel,
    /// Tail index; also the order of the error metric.
    pub alpha: f64,
    /// Interference scale; `None` disables interference.
    pub delta: Option<f64>,
    pub mode: AggregationMode,
    pub waveform_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSpec {
    pub schedule: Schedule,
    pub momentum: Option<f64>,
    pub rounds: usize,
    pub trials: usize,
    pub seed: u64,
    pub init_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenBoundSpec {
    pub loss_bound: f64,
    pub lambda: f64,
    pub dataset_size: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSpec {
    pub fit_kmin: Option<usize>,
    pub fit_kmax: Option<usize>,
    pub c_hat_draws: usize,
    pub c_hat_quantile: f64,
    pub contraction_l: f64,
    /// Radius (around the minimizer) of the region the gradient bound is
    /// reported over; defaults to three times the initial offset to cover
    /// the early transient.
    pub region_radius: Option<f64>,
    pub bound_ks: Vec<usize>,
    pub check_slope_min: Option<f64>,
    pub check_slope_max: Option<f64>,
    pub generalization: Option<GenBoundSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub channel: ChannelSpec,
    pub train: TrainSpec,
    pub analysis: AnalysisSpec,
    pub output: OutputSpec,
    /// Key-value echo of the resolved configuration, for reports.
    pub raw: BTreeMap<String, String>,
}

const KNOWN_KEYS: &[&str] = &[
    "problem.type",
    "problem.num_agents",
    "problem.dim",
    "problem.seed",
    "problem.center_spread",
    "problem.samples_per_agent",
    "problem.l2_reg",
    "channel.mu",
    "channel.fading",
    "channel.fading_std",
    "channel.interference",
    "channel.alpha",
    "channel.delta",
    "channel.mode",
    "channel.waveform_samples",
    "train.schedule",
    "train.theta",
    "train.rho",
    "train.eta",
    "train.momentum_beta",
    "train.rounds",
    "train.trials",
    "train.seed",
    "train.init_distance",
    "analysis.fit_kmin",
    "analysis.fit_kmax",
    "analysis.c_hat_draws",
    "analysis.c_hat_quantile",
    "analysis.contraction_l",
    "analysis.region_radius",
    "analysis.bound_ks",
    "analysis.check_slope_min",
    "analysis.check_slope_max",
    "analysis.gen_loss_bound",
    "analysis.gen_lambda",
    "analysis.gen_dataset_size",
    "analysis.gen_p",
    "output.dir",
];

struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    fn parse(text: &str) -> ConfigResult<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("expected `key = value`, got `{line}`"), Some(lineno));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return err(format!("unknown key `{key}`"), Some(lineno));
            }
            if value.is_empty() {
                return err(format!("key `{key}` has an empty value"), Some(lineno));
            }
            if entries.insert(key.clone(), (value, lineno)).is_some() {
                return err(format!("duplicate key `{key}`"), Some(lineno));
            }
        }
        Ok(RawConfig { entries })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn require(&mut self, key: &str) -> ConfigResult<(String, usize)> {
        self.take(key).ok_or(ConfigError {
            message: format!("missing required key `{key}`"),
            line: None,
        })
    }

    fn reject_leftover(&self, applicable_note: &str) -> ConfigResult<()> {
        if let Some((key, (_, line))) = self.entries.iter().next() {
            return err(format!("key `{key}` does not apply ({applicable_note})"), Some(*line));
        }
        Ok(())
    }
}

fn parse_with<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> ConfigResult<T> {
    value.parse::<T>().map_err(|_| ConfigError {
        message: format!(
            "key `{key}`: cannot parse `{value}` as {}",
            std::any::type_name::<T>()
        ),
        line: Some(line),
    })
}

fn check(cond: bool, key: &str, line: usize, what: &str) -> ConfigResult<()> {
    if cond {
        Ok(())
    } else {
        err(format!("key `{key}`: {what}"), Some(line))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            message: format!("cannot read {}: {e}", path.display()),
            line: None,
        })?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> ConfigResult<Self> {
        let mut raw = RawConfig::parse(text)?;
        let echo: BTreeMap<String, String> =
            raw.entries.iter().map(|(k, (v, _))| (k.clone(), v.clone())).collect();

        // --- problem block ---
        let (ptype, ptype_line) = raw.require("problem.type")?;
        let (na_v, na_l) = raw.require("problem.num_agents")?;
        let num_agents: usize = parse_with("problem.num_agents", &na_v, na_l)?;
        check(num_agents >= 1, "problem.num_agents", na_l, "must be >= 1")?;
        let (dim_v, dim_l) = raw.require("problem.dim")?;
        let dim: usize = parse_with("problem.dim", &dim_v, dim_l)?;
        check(dim >= 1, "problem.dim", dim_l, "must be >= 1")?;
        let (seed_v, seed_l) = raw.require("problem.seed")?;
        let pseed: u64 = parse_with("problem.seed", &seed_v, seed_l)?;
        let problem = match ptype.as_str() {
            "quadratic" => {
                let center_spread = match raw.take("problem.center_spread") {
                    Some((v, l)) => {
                        let s: f64 = parse_with("problem.center_spread", &v, l)?;
                        check(s >= 0.0 && s.is_finite(), "problem.center_spread", l, "must be >= 0")?;
                        s
                    }
                    None => 1.0,
                };
                if let Some((_, l)) = raw.take("problem.samples_per_agent") {
                    return err("key `problem.samples_per_agent` applies to logistic problems only", Some(l));
                }
                if let Some((_, l)) = raw.take("problem.l2_reg") {
                    return err("key `problem.l2_reg` applies to logistic problems only", Some(l));
                }
                ProblemSpec::Quadratic { num_agents, dim, seed: pseed, center_spread }
            }
            "logistic" => {
                let (spa_v, spa_l) = raw.require("problem.samples_per_agent")?;
                let samples_per_agent: usize = parse_with("problem.samples_per_agent", &spa_v, spa_l)?;
                check(samples_per_agent >= 1, "problem.samples_per_agent", spa_l, "must be >= 1")?;
                let (l2_v, l2_l) = raw.require("problem.l2_reg")?;
                let l2_reg: f64 = parse_with("problem.l2_reg", &l2_v, l2_l)?;
                check(l2_reg > 0.0, "problem.l2_reg", l2_l, "must be > 0 for strong convexity")?;
                if let Some((_, l)) = raw.take("problem.center_spread") {
                    return err("key `problem.center_spread` applies to quadratic problems only", Some(l));
                }
                ProblemSpec::Logistic { num_agents, dim, seed: pseed, samples_per_agent, l2_reg }
            }
            other => {
                return err(
                    format!("problem.type must be `quadratic` or `logistic`, got `{other}`"),
                    Some(ptype_line),
                )
            }
        };

        // --- channel block ---
        let (mu_v, mu_l) = raw.require("channel.mu")?;
        let mu: f64 = parse_with("channel.mu", &mu_v, mu_l)?;
        check(mu > 0.0 && mu.is_finite(), "channel.mu", mu_l, "must be > 0")?;
        let (fad_v, fad_l) = raw.require("channel.fading")?;
        let fading = match fad_v.as_str() {
            "rayleigh" => {
                if let Some((_, l)) = raw.take("channel.fading_std") {
                    return err(
                        "key `channel.fading_std` applies to trunc_gaussian fading only \
                         (rayleigh pins sigma^2 = (4/pi - 1) mu^2)",
                        Some(l),
                    );
                }
                FadingModel::Rayleigh
            }
            "fixed" => {
                if let Some((_, l)) = raw.take("channel.fading_std") {
                    return err("key `channel.fading_std` applies to trunc_gaussian fading only", Some(l));
                }
                FadingModel::Fixed
            }
            "trunc_gaussian" => {
                let (std_v, std_l) = raw.require("channel.fading_std")?;
                let std: f64 = parse_with("channel.fading_std", &std_v, std_l)?;
                check(std >= 0.0 && std.is_finite(), "channel.fading_std", std_l, "must be >= 0")?;
                FadingModel::TruncatedGaussian { std }
            }
            other => {
                return err(
                    format!("channel.fading must be rayleigh | fixed | trunc_gaussian, got `{other}`"),
                    Some(fad_l),
                )
            }
        };
        let (alpha_v, alpha_l) = raw.require("channel.alpha")?;
        let alpha: f64 = parse_with("channel.alpha", &alpha_v, alpha_l)?;
        check(alpha > 1.0 && alpha <= 2.0, "channel.alpha", alpha_l, "must satisfy 1 < alpha <= 2")?;
        let (int_v, int_l) = raw.require("channel.interference")?;
        let delta = match int_v.as_str() {
            "on" => {
                let (d_v, d_l) = raw.require("channel.delta")?;
                let delta: f64 = parse_with("channel.delta", &d_v, d_l)?;
                check(delta > 0.0 && delta.is_finite(), "channel.delta", d_l, "must be > 0")?;
                Some(delta)
            }
            "off" => {
                if let Some((_, l)) = raw.take("channel.delta") {
                    return err("key `channel.delta` requires channel.interference = on", Some(l));
                }
                None
            }
            other => {
                return err(
                    format!("channel.interference must be on | off, got `{other}`"),
                    Some(int_l),
                )
            }
        };
        let (mode_v, mode_l) = raw.require("channel.mode")?;
        let (mode, waveform_samples) = match mode_v.as_str() {
            "direct" => {
                if let Some((_, l)) = raw.take("channel.waveform_samples") {
                    return err("key `channel.waveform_samples` requires channel.mode = waveform", Some(l));
                }
                (AggregationMode::Direct, dim)
            }
            "waveform" => {
                let (t_v, t_l) = raw.require("channel.waveform_samples")?;
                let t: usize = parse_with("channel.waveform_samples", &t_v, t_l)?;
                check(t >= dim, "channel.waveform_samples", t_l, "must be >= problem.dim")?;
                (AggregationMode::Waveform, t)
            }
            other => {
                return err(format!("channel.mode must be direct | waveform, got `{other}`"), Some(mode_l))
            }
        };
        let channel = ChannelSpec { mu, fading, alpha, delta, mode, waveform_samples };

        // --- train block ---
        let (sch_v, sch_l) = raw.require("train.schedule")?;
        let schedule = match sch_v.as_str() {
            "theta_over_k" => {
                let (v, l) = raw.require("train.theta")?;
                let theta: f64 = parse_with("train.theta", &v, l)?;
                check(theta > 0.0 && theta.is_finite(), "train.theta", l, "must be > 0")?;
                Schedule::ThetaOverK { theta }
            }
            "power" => {
                let (v, l) = raw.require("train.rho")?;
                let rho: f64 = parse_with("train.rho", &v, l)?;
                check(rho > 0.0 && rho < 1.0, "train.rho", l, "must lie in (0, 1)")?;
                Schedule::Power { rho }
            }
            "constant" => {
                let (v, l) = raw.require("train.eta")?;
                let eta: f64 = parse_with("train.eta", &v, l)?;
                check(eta > 0.0 && eta.is_finite(), "train.eta", l, "must be > 0")?;
                Schedule::Constant { eta }
            }
            other => {
                return err(
                    format!("train.schedule must be theta_over_k | power | constant, got `{other}`"),
                    Some(sch_l),
                )
            }
        };
        for (key, owner) in
            [("train.theta", "theta_over_k"), ("train.rho", "power"), ("train.eta", "constant")]
        {
            if let Some((_, l)) = raw.take(key) {
                return err(format!("key `{key}` requires train.schedule = {owner}"), Some(l));
            }
        }
        let momentum = match raw.take("train.momentum_beta") {
            Some((v, l)) => {
                let beta: f64 = parse_with("train.momentum_beta", &v, l)?;
                check((0.0..1.0).contains(&beta), "train.momentum_beta", l, "must lie in [0, 1)")?;
                Some(beta)
            }
            None => None,
        };
        let (rounds_v, rounds_l) = raw.require("train.rounds")?;
        let rounds: usize = parse_with("train.rounds", &rounds_v, rounds_l)?;
        check(rounds >= 1, "train.rounds", rounds_l, "must be >= 1")?;
        let (trials_v, trials_l) = raw.require("train.trials")?;
        let trials: usize = parse_with("train.trials", &trials_v, trials_l)?;
        check(trials >= 1, "train.trials", trials_l, "must be >= 1")?;
        let (tseed_v, tseed_l) = raw.require("train.seed")?;
        let tseed: u64 = parse_with("train.seed", &tseed_v, tseed_l)?;
        let init_distance = match raw.take("train.init_distance") {
            Some((v, l)) => {
                let d: f64 = parse_with("train.init_distance", &v, l)?;
                check(d.is_finite() && d != 0.0, "train.init_distance", l, "must be finite and nonzero")?;
                d
            }
            None => 1.0,
        };
        let train = TrainSpec { schedule, momentum, rounds, trials, seed: tseed, init_distance };

        // --- analysis block ---
        let fit_kmin = match raw.take("analysis.fit_kmin") {
            Some((v, l)) => Some(parse_with::<usize>("analysis.fit_kmin", &v, l)?),
            None => None,
        };
        let fit_kmax = match raw.take("analysis.fit_kmax") {
            Some((v, l)) => Some(parse_with::<usize>("analysis.fit_kmax", &v, l)?),
            None => None,
        };
        let c_hat_draws = match raw.take("analysis.c_hat_draws") {
            Some((v, l)) => {
                let n: usize = parse_with("analysis.c_hat_draws", &v, l)?;
                check(n >= 100, "analysis.c_hat_draws", l, "must be >= 100")?;
                n
            }
            None => 100_000,
        };
        let c_hat_quantile = match raw.take("analysis.c_hat_quantile") {
            Some((v, l)) => {
                let q: f64 = parse_with("analysis.c_hat_quantile", &v, l)?;
                check(q > 0.5 && q <= 1.0, "analysis.c_hat_quantile", l, "must lie in (0.5, 1]")?;
                q
            }
            None => 0.999,
        };
        let contraction_l = match raw.take("analysis.contraction_l") {
            Some((v, l)) => {
                let c: f64 = parse_with("analysis.contraction_l", &v, l)?;
                check(c > 0.0 && c.is_finite(), "analysis.contraction_l", l, "must be > 0")?;
                c
            }
            None => 1.0,
        };
        let region_radius = match raw.take("analysis.region_radius") {
            Some((v, l)) => {
                let r: f64 = parse_with("analysis.region_radius", &v, l)?;
                check(r > 0.0 && r.is_finite(), "analysis.region_radius", l, "must be > 0")?;
                Some(r)
            }
            None => None,
        };
        let bound_ks = match raw.take("analysis.bound_ks") {
            Some((v, l)) => {
                let mut ks = Vec::new();
                for part in v.split(',') {
                    let k: usize = parse_with("analysis.bound_ks", part.trim(), l)?;
                    check(k >= 1, "analysis.bound_ks", l, "entries must be >= 1")?;
                    ks.push(k);
                }
                ks
            }
            None => vec![100, 1000, 10_000],
        };
        let check_slope_min = match raw.take("analysis.check_slope_min") {
            Some((v, l)) => Some(parse_with::<f64>("analysis.check_slope_min", &v, l)?),
            None => None,
        };
        let check_slope_max = match raw.take("analysis.check_slope_max") {
            Some((v, l)) => Some(parse_with::<f64>("analysis.check_slope_max", &v, l)?),
            None => None,
        };
        let gen_keys = [
            "analysis.gen_loss_bound",
            "analysis.gen_lambda",
            "analysis.gen_dataset_size",
            "analysis.gen_p",
        ];
        let gen_present = gen_keys.iter().filter(|k| raw.entries.contains_key(**k)).count();
        let generalization = if gen_present == 0 {
            None
        } else if gen_present < gen_keys.len() {
            let missing: Vec<&str> =
                gen_keys.iter().copied().filter(|k| !raw.entries.contains_key(*k)).collect();
            return err(
                format!("generalization bound needs all of {gen_keys:?}; missing {missing:?}"),
                None,
            );
        } else {
            let (v, l) = raw.require("analysis.gen_loss_bound")?;
            let loss_bound: f64 = parse_with("analysis.gen_loss_bound", &v, l)?;
            check(loss_bound > 0.0, "analysis.gen_loss_bound", l, "must be > 0")?;
            let (v, l) = raw.require("analysis.gen_lambda")?;
            let lambda: f64 = parse_with("analysis.gen_lambda", &v, l)?;
            check(lambda > 0.0, "analysis.gen_lambda", l, "must be > 0")?;
            let (v, l) = raw.require("analysis.gen_dataset_size")?;
            let dataset_size: usize = parse_with("analysis.gen_dataset_size", &v, l)?;
            check(dataset_size >= 1, "analysis.gen_dataset_size", l, "must be >= 1")?;
            check(
                lambda * lambda * dataset_size as f64 > 1.0,
                "analysis.gen_dataset_size",
                l,
                "needs lambda^2 * dataset_size > 1",
            )?;
            let (v, l) = raw.require("analysis.gen_p")?;
            let p: f64 = parse_with("analysis.gen_p", &v, l)?;
            check(p > 0.0 && p < 1.0, "analysis.gen_p", l, "must lie in (0, 1)")?;
            Some(GenBoundSpec { loss_bound, lambda, dataset_size, p })
        };
        let analysis = AnalysisSpec {
            fit_kmin,
            fit_kmax,
            c_hat_draws,
            c_hat_quantile,
            contraction_l,
            region_radius,
            bound_ks,
            check_slope_min,
            check_slope_max,
            generalization,
        };
        if let (Some(lo), Some(hi)) = (analysis.fit_kmin, analysis.fit_kmax) {
            if lo < 1 || hi <= lo || hi > rounds {
                return err(
                    format!("fit window [{lo}, {hi}] must satisfy 1 <= kmin < kmax <= train.rounds"),
                    None,
                );
            }
        }

        // --- output block ---
        let dir = match raw.take("output.dir") {
            Some((v, _)) => PathBuf::from(v),
            None => PathBuf::from("runs"),
        };
        let output = OutputSpec { dir };

        raw.reject_leftover("given the selected type/mode")?;

        Ok(ExperimentConfig { problem, channel, train, analysis, output, raw: echo })
    }

    pub fn build_problem(&self) -> airgd::Result<Box<dyn FederatedProblem>> {
        Ok(match self.problem {
            ProblemSpec::Quadratic { num_agents, dim, seed, center_spread } => {
                Box::new(make_quadratic(num_agents, dim, center_spread, seed)?)
            }
            ProblemSpec::Logistic { num_agents, dim, seed, samples_per_agent, l2_reg } => {
                Box::new(make_logistic(num_agents, dim, samples_per_agent, l2_reg, seed)?)
            }
        })
    }

    pub fn build_channel(&self) -> airgd::Result<ChannelModel> {
        let interference = match self.channel.delta {
            Some(delta) => Some(StableParams::new(self.channel.alpha, delta)?),
            None => None,
        };
        ChannelModel::new(
            self.channel.mu,
            self.channel.fading,
            interference,
            self.problem.num_agents(),
            self.channel.waveform_samples,
        )
    }

    pub fn build_train(&self) -> airgd::Result<TrainConfig> {
        let cfg = TrainConfig {
            schedule: self.train.schedule,
            momentum: self.train.momentum,
            rounds: self.train.rounds,
            trials: self.train.trials,
            init: InitMode::UnitOffset { distance: self.train.init_distance },
            seed: self.train.seed,
            alpha_metric: self.channel.alpha,
            aggregation: self.channel.mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fit window: explicit keys, or the last two decades of rounds.
    pub fn fit_window(&self) -> (usize, usize) {
        let kmax = self.analysis.fit_kmax.unwrap_or(self.train.rounds);
        let kmin = self.analysis.fit_kmin.unwrap_or_else(|| (kmax / 100).max(1));
        (kmin, kmax)
    }

    /// Region radius for the reported gradient bound.
    pub fn region_radius(&self) -> f64 {
        self.analysis.region_radius.unwrap_or(3.0 * self.train.init_distance.abs().max(1.0))
    }

    /// Predicted log-log exponent for the configured schedule, when one
    /// exists.
    pub fn predicted_exponent(&self) -> Option<f64> {
        match self.train.schedule {
            Schedule::ThetaOverK { .. } => Some(-(self.channel.alpha - 1.0)),
            Schedule::Power { rho } => Some(-rho * (self.channel.alpha - 1.0)),
            Schedule::Constant { .. } => None,
        }
    }
}
