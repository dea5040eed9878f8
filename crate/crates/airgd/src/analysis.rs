//! Rate fitting and closed-form bound evaluation.
//!
//! The convergence theory predicts `E[||w_k - w*||_alpha^alpha]` decays like
//! `k^-(alpha-1)` under the `theta/k` schedule (and `k^-rho(alpha-1)` under a
//! `k^-rho` schedule), with an explicit multiplier built from the channel
//! and problem constants. This module fits the empirical exponent from a
//! trajectory, evaluates the closed-form bounds, and evaluates the
//! tail-index generalization bound.
//!
//! A caveat that shapes the defaults here: for genuinely alpha-stable
//! interference the moment `E[||xi||_alpha^alpha]` sits exactly at the
//! boundary order and diverges, so the noise constant is calibrated as a
//! quantile-truncated empirical mean ([`calibrate_noise_moment`]) and bound
//! comparisons lean on slopes and orderings rather than absolute levels.

use crate::alpha::{alpha_norm_pow, AlphaIndex};
use crate::error::{Error, Result};
use crate::noise::{sample_stable_vec, StableParams};
use crate::rng::RngStream;
use crate::trainer::TrajectoryStats;

/// Result of a log-log least-squares fit over a trajectory window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Fitted exponent (regression slope in log-log space).
    pub slope: f64,
    /// Intercept: natural log of the fitted multiplier.
    pub intercept: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub r_squared: f64,
}

/// Constants entering the closed-form convergence bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    /// Noise moment bound `C` (normally the calibrated truncated moment).
    pub noise_moment: f64,
    /// Gradient bound `G` on the experiment region.
    pub grad_bound: f64,
    /// Fading standard deviation.
    pub sigma: f64,
    /// Fading mean.
    pub mu: f64,
    /// Contraction constant `L` (user-supplied; 1 for identity-Hessian
    /// quadratics).
    pub contraction: f64,
    /// Schedule multiplier `theta` in `eta_k = theta / k`.
    pub theta: f64,
    pub dim: usize,
    pub num_agents: usize,
    pub alpha: f64,
    /// Momentum weight; only the momentum bound reads it.
    pub beta: f64,
}

impl BoundConstants {
    fn validate_common(&self) -> Result<()> {
        AlphaIndex::new(self.alpha)?;
        let ok = self.noise_moment >= 0.0
            && self.grad_bound >= 0.0
            && self.sigma >= 0.0
            && self.mu > 0.0
            && self.contraction > 0.0
            && self.theta > 0.0
            && self.dim >= 1
            && self.num_agents >= 1;
        if !ok {
            return Err(Error::invalid("bound constants out of range".to_string()));
        }
        Ok(())
    }

    /// Shared fading term `sigma^alpha G^alpha d^(1-1/alpha) / N^(alpha/2)`.
    fn fading_term(&self) -> f64 {
        let a = self.alpha;
        self.sigma.powf(a) * self.grad_bound.powf(a) * (self.dim as f64).powf(1.0 - 1.0 / a)
            / (self.num_agents as f64).powf(a / 2.0)
    }
}

/// Least-squares line through `(ln k, ln mean_alpha_err[k])` for
/// `k_min <= k <= k_max`.
pub fn fit_rate(stats: &TrajectoryStats, k_min: usize, k_max: usize) -> Result<RateFit> {
    fit_rate_series(&stats.mean_alpha_err, k_min, k_max)
}

/// Same fit on a raw per-round series (index k holds round k).
pub fn fit_rate_series(series: &[f64], k_min: usize, k_max: usize) -> Result<RateFit> {
    if k_min < 1 || k_max <= k_min {
        return Err(Error::invalid(format!("bad fit window [{k_min}, {k_max}]")));
    }
    if k_max >= series.len() {
        return Err(Error::invalid(format!(
            "fit window end {k_max} outside trajectory of {} rounds",
            series.len().saturating_sub(1)
        )));
    }
    let mut xs = Vec::with_capacity(k_max - k_min + 1);
    let mut ys = Vec::with_capacity(k_max - k_min + 1);
    for (k, &value) in series.iter().enumerate().take(k_max + 1).skip(k_min) {
        if !(value > 0.0) {
            return Err(Error::invalid(format!(
                "non-positive error {value} at round {k}; log-log fit undefined"
            )));
        }
        xs.push((k as f64).ln());
        ys.push(value.ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateFit { slope, intercept, k_min, k_max, r_squared })
}

/// Plain-descent convergence bound at round `k`:
///
/// ```text
/// 4 theta^a (C + sigma^a G^a d^(1-1/a) / N^(a/2))
/// ----------------------------------------------- * k^-(a-1)
///            mu theta L - a + 1
/// ```
///
/// Requires `theta > (alpha - 1) / (mu L)`.
pub fn theorem1_bound(c: &BoundConstants, k: usize) -> Result<f64> {
    c.validate_common()?;
    if k == 0 {
        return Err(Error::invalid("bounds are defined from round 1"));
    }
    let a = c.alpha;
    let denom = c.mu * c.theta * c.contraction - a + 1.0;
    if !(denom > 0.0) {
        return Err(Error::BoundNotApplicable(format!(
            "needs theta > (alpha-1)/(mu L) = {}, got {}",
            (a - 1.0) / (c.mu * c.contraction),
            c.theta
        )));
    }
    let numer = 4.0 * c.theta.powf(a) * (c.noise_moment + c.fading_term());
    Ok(numer / denom * (k as f64).powf(-(a - 1.0)))
}

/// Momentum convergence bound at round `k`:
///
/// ```text
/// 4 theta^a (4C/(1-beta^a) + sigma^a G^a d^(1-1/a) / (N^(a/2) (1-beta^2)^(a/2)))
/// ------------------------------------------------------------------------------ * k^-(a-1)
///                     mu theta L / (1-beta) - a + 1
/// ```
///
/// Requires `theta > (alpha - 1)(1 - beta) / (mu L)`. At `beta = 0` this is
/// the plain bound with `C` replaced by `4C` (the formulas genuinely differ
/// by that factor).
pub fn theorem2_bound(c: &BoundConstants, k: usize) -> Result<f64> {
    c.validate_common()?;
    if k == 0 {
        return Err(Error::invalid("bounds are defined from round 1"));
    }
    if !(0.0..1.0).contains(&c.beta) {
        return Err(Error::invalid(format!("momentum weight must be in [0, 1), got {}", c.beta)));
    }
    let a = c.alpha;
    let denom = c.mu * c.theta * c.contraction / (1.0 - c.beta) - a + 1.0;
    if !(denom > 0.0) {
        return Err(Error::BoundNotApplicable(format!(
            "needs theta > (alpha-1)(1-beta)/(mu L) = {}, got {}",
            (a - 1.0) * (1.0 - c.beta) / (c.mu * c.contraction),
            c.theta
        )));
    }
    let noise = 4.0 * c.noise_moment / (1.0 - c.beta.powf(a));
    let fading = c.fading_term() / (1.0 - c.beta * c.beta).powf(a / 2.0);
    let numer = 4.0 * c.theta.powf(a) * (noise + fading);
    Ok(numer / denom * (k as f64).powf(-(a - 1.0)))
}

/// Predicted log-log exponent `-rho (alpha - 1)` for the `k^-rho` schedule.
/// `rho = 1` is admitted as the `theta/k` limit convention.
pub fn corollary_rate(rho: f64, alpha: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::invalid(format!("rho must lie in (0, 1], got {rho}")));
    }
    AlphaIndex::new(alpha)?;
    Ok(-rho * (alpha - 1.0))
}

/// Tail-index generalization bound:
/// `B * sqrt(2 alpha ln(lambda^2 |D|) / |D| + ln(1/p) / |D|)`,
/// valid with probability at least `1 - p`. Increasing in `alpha`: heavier
/// tails (smaller `alpha`) give the smaller bound.
pub fn generalization_bound(
    loss_bound: f64,
    alpha: f64,
    lambda: f64,
    dataset_size: usize,
    p: f64,
) -> Result<f64> {
    if !(loss_bound > 0.0 && lambda > 0.0) {
        return Err(Error::invalid("loss bound and lambda must be positive".to_string()));
    }
    if dataset_size == 0 {
        return Err(Error::invalid("dataset size must be >= 1"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("confidence level p must lie in (0, 1), got {p}")));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::invalid(format!("tail index must lie in (0, 2], got {alpha}")));
    }
    let size = dataset_size as f64;
    let log_term = (lambda * lambda * size).ln();
    if !(log_term > 0.0) {
        return Err(Error::invalid(
            "need lambda^2 |D| > 1 so the dimension log term is positive".to_string(),
        ));
    }
    Ok(loss_bound * (2.0 * alpha * log_term / size + (1.0 / p).ln() / size).sqrt())
}

/// Calibrated noise moment: the empirical mean of `||xi||_alpha^alpha` over
/// `draws` interference vectors, truncated at the given upper quantile
/// (default use: 0.999). For exact alpha-stable noise the untruncated moment
/// diverges, so any report quoting this constant must note the truncation.
pub fn calibrate_noise_moment(
    params: &StableParams,
    dim: usize,
    draws: usize,
    quantile: f64,
    stream: RngStream,
) -> Result<f64> {
    if dim == 0 || draws < 100 {
        return Err(Error::invalid("calibration needs dim >= 1 and draws >= 100".to_string()));
    }
    if !(quantile > 0.5 && quantile <= 1.0) {
        return Err(Error::invalid(format!("quantile must lie in (0.5, 1], got {quantile}")));
    }
    let alpha = params.alpha();
    let mut rng = stream.rng();
    let mut moments: Vec<f64> = (0..draws)
        .map(|_| {
            let xi = sample_stable_vec(params, dim, &mut rng);
            alpha_norm_pow(&xi, alpha).expect("stable draws are finite")
        })
        .collect();
    moments.sort_unstable_by(f64::total_cmp);
    let keep = ((draws as f64) * quantile).ceil() as usize;
    let kept = &moments[..keep.clamp(1, draws)];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_constants() -> BoundConstants {
        BoundConstants {
            noise_moment: 1.0,
            grad_bound: 1.0,
            sigma: 1.0,
            mu: 1.0,
            contraction: 1.0,
            theta: 1.0,
            dim: 1,
            num_agents: 100,
            alpha: 1.5,
            beta: 0.0,
        }
    }

    #[test]
    fn fit_recovers_exact_power_law() {
        let series: Vec<f64> =
            (0..=2000).map(|k| if k == 0 { 1.0 } else { 7.0 / (k as f64).sqrt() }).collect();
        let fit = fit_rate_series(&series, 10, 2000).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-10, "slope {}", fit.slope);
        assert!((fit.intercept - 7.0f64.ln()).abs() < 1e-10);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);

        let flat = vec![3.0; 100];
        let fit = fit_rate_series(&flat, 5, 90).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_bad_windows_and_values() {
        let series = vec![1.0; 50];
        assert!(fit_rate_series(&series, 0, 10).is_err());
        assert!(fit_rate_series(&series, 10, 10).is_err());
        assert!(fit_rate_series(&series, 10, 50).is_err());
        let mut with_zero = series.clone();
        with_zero[20] = 0.0;
        assert!(fit_rate_series(&with_zero, 10, 30).is_err());
    }

    #[test]
    fn theorem1_reference_value() {
        // 4 * (1 + 100^-0.75) / 0.5 * 100^-0.5, computed by hand.
        let b = theorem1_bound(&reference_constants(), 100).unwrap();
        assert!((b - 0.825298221281347).abs() < 1e-12, "bound {b}");
    }

    #[test]
    fn theorem1_scaling_and_limits() {
        let c = reference_constants();
        let b1 = theorem1_bound(&c, 100).unwrap();
        let b2 = theorem1_bound(&c, 200).unwrap();
        let ratio = b2 / b1;
        assert!((ratio - 2.0f64.powf(-0.5)).abs() < 1e-12);

        // N -> infinity: the fading term vanishes.
        let mut big_n = c;
        big_n.num_agents = usize::MAX;
        let limit = 4.0 * (1.0) / 0.5 * (100.0f64).powf(-0.5);
        let b = theorem1_bound(&big_n, 100).unwrap();
        assert!((b - limit).abs() < 1e-6, "bound {b} vs limit {limit}");
    }

    #[test]
    fn theorem1_applicability() {
        let mut c = reference_constants();
        c.theta = 0.5; // equals (alpha-1)/(mu L): boundary is rejected
        assert!(matches!(theorem1_bound(&c, 10), Err(Error::BoundNotApplicable(_))));
        c.theta = 0.5 + 1e-9;
        assert!(theorem1_bound(&c, 10).is_ok());
        assert!(theorem1_bound(&reference_constants(), 0).is_err());
    }

    #[test]
    fn theorem2_reference_value() {
        // beta = 0: 4 * (4 + 100^-0.75) / 0.5 / 10, computed by hand.
        let b = theorem2_bound(&reference_constants(), 100).unwrap();
        assert!((b - 3.225298221281347).abs() < 1e-12, "bound {b}");
    }

    #[test]
    fn theorem2_beta_sweep_converges_to_finite_limit() {
        // As beta -> 1 the noise numerator 4C/(1-beta^a) and the denominator
        // mu theta L/(1-beta) both scale like 1/(1-beta), so the bound tends
        // to the finite value 16 theta^(a-1) C / (a mu L) * k^-(a-1) while
        // the fading contribution vanishes. Computed, not assumed: the sweep
        // decreases monotonically onto that limit.
        let mut c = reference_constants();
        c.theta = 4.0;
        let limit = 16.0 * c.theta.powf(c.alpha - 1.0) * c.noise_moment
            / (c.alpha * c.mu * c.contraction)
            * 100.0f64.powf(-(c.alpha - 1.0));
        let mut last = f64::INFINITY;
        for beta in [0.9, 0.99, 0.999] {
            c.beta = beta;
            let b = theorem2_bound(&c, 100).unwrap();
            assert!(b.is_finite() && b > limit, "bound {b} vs limit {limit} at beta {beta}");
            assert!(b < last, "sweep not decreasing at beta {beta}");
            last = b;
        }
        assert!((last - limit) / limit < 0.05, "beta = 0.999 bound {last} vs limit {limit}");

        // k-dependence is the same pure power law as the plain bound.
        let b1 = theorem2_bound(&c, 50).unwrap();
        let b2 = theorem2_bound(&c, 100).unwrap();
        assert!((b2 / b1 - 2.0f64.powf(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn corollary_rate_values() {
        assert_eq!(corollary_rate(1.0, 1.5).unwrap(), -0.5);
        assert_eq!(corollary_rate(0.5, 2.0).unwrap(), -0.5);
        assert!(corollary_rate(1e-9, 1.7).unwrap().abs() < 1e-8);
        assert!(corollary_rate(0.0, 1.5).is_err());
        assert!(corollary_rate(1.1, 1.5).is_err());
    }

    #[test]
    fn generalization_reference_value() {
        // sqrt((3 ln 1e4 + ln 20) / 1e4), computed by hand.
        let b = generalization_bound(1.0, 1.5, 1.0, 10_000, 0.05).unwrap();
        assert!((b - 0.05534144323152635).abs() < 1e-15, "bound {b}");
    }

    #[test]
    fn generalization_monotonicity() {
        let base = generalization_bound(1.0, 1.5, 1.0, 10_000, 0.05).unwrap();
        // Heavier tail (smaller alpha) generalizes better: bound increases
        // in alpha.
        assert!(generalization_bound(1.0, 1.9, 1.0, 10_000, 0.05).unwrap() > base);
        assert!(generalization_bound(1.0, 1.3, 1.0, 10_000, 0.05).unwrap() < base);
        // Decreasing in |D|, increasing in B, decreasing in p.
        assert!(generalization_bound(1.0, 1.5, 1.0, 100_000, 0.05).unwrap() < base);
        assert!(generalization_bound(2.0, 1.5, 1.0, 10_000, 0.05).unwrap() > base);
        assert!(generalization_bound(1.0, 1.5, 1.0, 10_000, 0.01).unwrap() > base);
        // |D| -> infinity drives the bound to zero.
        assert!(generalization_bound(1.0, 1.5, 1.0, usize::MAX, 0.05).unwrap() < 1e-6);
    }

    #[test]
    fn generalization_preconditions() {
        assert!(generalization_bound(0.0, 1.5, 1.0, 100, 0.05).is_err());
        assert!(generalization_bound(1.0, 1.5, 1.0, 0, 0.05).is_err());
        assert!(generalization_bound(1.0, 1.5, 1.0, 100, 1.0).is_err());
        // lambda^2 |D| <= 1 makes the log term non-positive.
        assert!(generalization_bound(1.0, 1.5, 0.05, 100, 0.05).is_err());
    }

    #[test]
    fn calibration_is_deterministic_and_orders_by_quantile() {
        let params = StableParams::new(1.5, 1.0).unwrap();
        let a = calibrate_noise_moment(&params, 5, 20_000, 0.999, RngStream::new(51, 0)).unwrap();
        let b = calibrate_noise_moment(&params, 5, 20_000, 0.999, RngStream::new(51, 0)).unwrap();
        assert_eq!(a, b);
        let tighter =
            calibrate_noise_moment(&params, 5, 20_000, 0.9, RngStream::new(51, 0)).unwrap();
        assert!(tighter < a, "heavier truncation must lower the moment");
        assert!(a > 0.0 && a.is_finite());
    }
}
