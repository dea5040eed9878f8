//! The analog uplink.
//!
//! Each agent modulates its gradient onto a shared set of orthonormal
//! baseband waveforms; all agents transmit at once, so the channel itself
//! performs the sum. The receiver's matched filters project the superposed
//! signal back onto the waveforms and output one noisy aggregated gradient
//!
//! ```text
//! g = (1/N) * sum_n h_n * grad_n + xi
//! ```
//!
//! with i.i.d. nonnegative fading `h_n` (mean `mu`, variance `sigma^2`) and
//! an alpha-stable interference vector `xi` (referenced after the receiver's
//! `1/N` normalization, matching the aggregate equation above).
//!
//! Two aggregation paths are provided. `Direct` evaluates the vector formula
//! and is what the trainer uses; `Waveform` actually modulates, superposes,
//! and demodulates, and exists to exercise the signal-space model. Both agree
//! to rounding error.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::noise::{sample_stable_vec, StableParams};
use crate::rng::RngStream;

/// Fading distribution for the per-agent channel gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FadingModel {
    /// No fading: every gain equals `mu` (the sigma = 0 case).
    Fixed,
    /// Rayleigh with scale chosen so the mean equals `mu`; the variance is
    /// then pinned at `(4/pi - 1) mu^2`.
    Rayleigh,
    /// Gaussian with independent standard deviation, resampled until
    /// positive. Moments are only approximate when `std` is not small
    /// relative to `mu`; intended for sensitivity studies.
    TruncatedGaussian { std: f64 },
}

/// Uplink model: fading law, interference law, and waveform length.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    mu: f64,
    fading: FadingModel,
    interference: Option<StableParams>,
    num_agents: usize,
    waveform_samples: usize,
}

impl ChannelModel {
    /// `interference = None` disables the additive noise term entirely.
    pub fn new(
        mu: f64,
        fading: FadingModel,
        interference: Option<StableParams>,
        num_agents: usize,
        waveform_samples: usize,
    ) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("fading mean must be positive, got {mu}")));
        }
        if let FadingModel::TruncatedGaussian { std } = fading {
            if !(std >= 0.0 && std.is_finite()) {
                return Err(Error::invalid(format!("fading std must be >= 0, got {std}")));
            }
        }
        if num_agents == 0 {
            return Err(Error::invalid("channel needs at least one agent"));
        }
        if waveform_samples == 0 {
            return Err(Error::invalid("waveform length must be >= 1"));
        }
        Ok(ChannelModel { mu, fading, interference, num_agents, waveform_samples })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn fading(&self) -> FadingModel {
        self.fading
    }

    pub fn interference(&self) -> Option<&StableParams> {
        self.interference.as_ref()
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn waveform_samples(&self) -> usize {
        self.waveform_samples
    }

    /// Standard deviation implied by the fading model (reported, and for
    /// Rayleigh not independently configurable).
    pub fn fading_std(&self) -> f64 {
        match self.fading {
            FadingModel::Fixed => 0.0,
            FadingModel::Rayleigh => self.mu * (4.0 / std::f64::consts::PI - 1.0).sqrt(),
            FadingModel::TruncatedGaussian { std } => std,
        }
    }

    /// One fading gain draw.
    pub fn sample_fading(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self.fading {
            FadingModel::Fixed => self.mu,
            FadingModel::Rayleigh => {
                // Inverse CDF with scale s = mu * sqrt(2/pi) so E[h] = mu.
                let s = self.mu * (2.0 / std::f64::consts::PI).sqrt();
                let u: f64 = rng.random();
                s * (-2.0 * (1.0 - u).ln()).sqrt()
            }
            FadingModel::TruncatedGaussian { std } => {
                if std == 0.0 {
                    return self.mu;
                }
                loop {
                    let z: f64 = rng.sample(StandardNormal);
                    let h = self.mu + std * z;
                    if h > 0.0 {
                        return h;
                    }
                }
            }
        }
    }

    /// One gain per agent, drawn in agent order.
    pub fn sample_fading_vec(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.num_agents).map(|_| self.sample_fading(rng)).collect()
    }
}

/// `d` discretized orthonormal waveforms of length `t`, stored row-major.
/// Construction validates the Gram matrix against the identity to 1e-12.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformBasis {
    rows: Vec<f64>,
    d: usize,
    t: usize,
}

const GRAM_TOL: f64 = 1e-12;

impl WaveformBasis {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::invalid("basis needs at least one waveform"));
        }
        let t = rows[0].len();
        if rows.iter().any(|r| r.len() != t) {
            return Err(Error::dim("basis rows must share one length".to_string()));
        }
        if t < d {
            return Err(Error::invalid(format!("waveform length {t} shorter than dimension {d}")));
        }
        let basis = WaveformBasis { rows: rows.iter().flatten().copied().collect(), d, t };
        let err = basis.gram_error();
        if err > GRAM_TOL {
            return Err(Error::invalid(format!("rows are not orthonormal (gram error {err:.3e})")));
        }
        Ok(basis)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn samples(&self) -> usize {
        self.t
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.t..(i + 1) * self.t]
    }

    /// Largest deviation of the row Gram matrix from the identity.
    pub fn gram_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.d {
            for j in i..self.d {
                let dot: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Fixed seed for basis construction; the waveforms are a modeling artifact
/// and every run should agree on them.
const BASIS_STREAM: RngStream = RngStream { seed: 0x5157_4156, stream_id: 0 };

/// Build `d` exactly orthonormal discrete waveforms of length `t` by
/// orthogonalizing a seeded Gaussian matrix (modified Gram-Schmidt with one
/// re-orthogonalization pass).
pub fn make_basis(d: usize, t: usize) -> Result<WaveformBasis> {
    if d == 0 {
        return Err(Error::invalid("basis dimension must be >= 1"));
    }
    if t < d {
        return Err(Error::invalid(format!("waveform length {t} shorter than dimension {d}")));
    }
    let mut rng = BASIS_STREAM.rng();
    let mut rows: Vec<Vec<f64>> = (0..d)
        .map(|_| (0..t).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    for i in 0..d {
        let (done, rest) = rows.split_at_mut(i);
        let row = &mut rest[0];
        for _pass in 0..2 {
            for prev in done.iter() {
                let proj: f64 = row.iter().zip(prev).map(|(a, b)| a * b).sum();
                for (x, p) in row.iter_mut().zip(prev) {
                    *x -= proj * p;
                }
            }
        }
        let norm: f64 = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        debug_assert!(norm > 1e-8, "seeded rows were nearly dependent");
        for x in row.iter_mut() {
            *x /= norm;
        }
    }
    WaveformBasis::from_rows(&rows)
}

/// Analog signal for one agent: `sum_i gradient_i * s_i(t)`.
pub fn modulate(gradient: &[f64], basis: &WaveformBasis) -> Result<Vec<f64>> {
    if gradient.len() != basis.dim() {
        return Err(Error::dim(format!(
            "gradient has {} entries, basis has {} waveforms",
            gradient.len(),
            basis.dim()
        )));
    }
    let mut signal = vec![0.0; basis.samples()];
    for (i, &g) in gradient.iter().enumerate() {
        for (s, b) in signal.iter_mut().zip(basis.row(i)) {
            *s += g * b;
        }
    }
    Ok(signal)
}

/// Matched-filter bank: inner product of the signal with each waveform.
pub fn demodulate(signal: &[f64], basis: &WaveformBasis) -> Result<Vec<f64>> {
    if signal.len() != basis.samples() {
        return Err(Error::dim(format!(
            "signal has {} samples, basis expects {}",
            signal.len(),
            basis.samples()
        )));
    }
    Ok((0..basis.dim())
        .map(|i| signal.iter().zip(basis.row(i)).map(|(a, b)| a * b).sum())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationMode {
    /// Evaluate the aggregate equation on vectors.
    Direct,
    /// Modulate, superpose, inject interference in signal space, demodulate.
    Waveform,
}

/// Deterministic aggregation core given already-drawn randomness. Exposed so
/// tests can force fading and interference values.
pub fn aggregate_given(
    gradients: &[Vec<f64>],
    fading: &[f64],
    interference: &[f64],
    mode: AggregationMode,
    basis: Option<&WaveformBasis>,
) -> Result<Vec<f64>> {
    let n = gradients.len();
    if n == 0 {
        return Err(Error::invalid("aggregation needs at least one gradient"));
    }
    if fading.len() != n {
        return Err(Error::dim(format!("{} gradients but {} fading gains", n, fading.len())));
    }
    let d = gradients[0].len();
    if gradients.iter().any(|g| g.len() != d) {
        return Err(Error::dim("gradients must share one dimension".to_string()));
    }
    if interference.len() != d {
        return Err(Error::dim(format!(
            "interference has {} entries, gradients have {d}",
            interference.len()
        )));
    }
    match mode {
        AggregationMode::Direct => {
            let mut out = vec![0.0; d];
            for (g, &h) in gradients.iter().zip(fading) {
                for (o, &x) in out.iter_mut().zip(g) {
                    *o += h * x;
                }
            }
            let inv_n = 1.0 / n as f64;
            for (o, &xi) in out.iter_mut().zip(interference) {
                *o = *o * inv_n + xi;
            }
            Ok(out)
        }
        AggregationMode::Waveform => {
            let basis =
                basis.ok_or_else(|| Error::invalid("waveform aggregation requires a basis"))?;
            if basis.dim() != d {
                return Err(Error::dim(format!(
                    "basis dimension {} does not match gradient dimension {d}",
                    basis.dim()
                )));
            }
            let mut received = vec![0.0; basis.samples()];
            for (g, &h) in gradients.iter().zip(fading) {
                let x = modulate(g, basis)?;
                for (r, &s) in received.iter_mut().zip(&x) {
                    *r += h * s;
                }
            }
            let inv_n = 1.0 / n as f64;
            for r in received.iter_mut() {
                *r *= inv_n;
            }
            // Interference is referenced post-normalization; only its
            // projection onto the basis survives the matched filters, and
            // that projection is exactly the interference vector.
            let xi_signal = modulate(interference, basis)?;
            for (r, &s) in received.iter_mut().zip(&xi_signal) {
                *r += s;
            }
            demodulate(&received, basis)
        }
    }
}

/// Draw fading and interference, then aggregate. Fading gains are drawn
/// first (agent order), then the interference vector.
pub fn ota_aggregate(
    gradients: &[Vec<f64>],
    model: &ChannelModel,
    mode: AggregationMode,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    if gradients.len() != model.num_agents() {
        return Err(Error::dim(format!(
            "channel expects {} agents, got {} gradients",
            model.num_agents(),
            gradients.len()
        )));
    }
    let d = gradients.first().map_or(0, |g| g.len());
    let fading = model.sample_fading_vec(rng);
    let interference = match model.interference() {
        Some(params) => sample_stable_vec(params, d, rng),
        None => vec![0.0; d],
    };
    let basis = match mode {
        AggregationMode::Waveform => Some(make_basis(d, model.waveform_samples())?),
        AggregationMode::Direct => None,
    };
    aggregate_given(gradients, &fading, &interference, mode, basis.as_ref())
}
