//! Analog over-the-air distributed gradient descent under channel fading and
//! heavy-tailed (symmetric alpha-stable) interference.
//!
//! The crate simulates an edge-learning uplink in which `N` agents modulate
//! local gradients onto orthonormal waveforms and transmit simultaneously;
//! the receiver's matched filters output a single aggregated gradient that is
//! distorted by i.i.d. fading and alpha-stable interference. Because the
//! interference has infinite variance for tail index `alpha < 2`, convergence
//! is measured in the fractional metric `||w - w*||_alpha^alpha` instead of
//! the usual squared error.
//!
//! Module map:
//! - [`alpha`]: signed powers, alpha-norms, and the Taylor-type inequality the
//!   convergence analysis rests on.
//! - [`noise`]: exact sampling of symmetric alpha-stable variates plus the
//!   empirical statistics used to verify them.
//! - [`channel`]: waveform modulation, superposition under fading, and
//!   matched-filter demodulation producing the noisy aggregated gradient.
//! - [`objectives`]: convex federated testbeds with known minimizers and
//!   reported assumption constants.
//! - [`trainer`]: the round loop (plain and momentum updates) and Monte-Carlo
//!   trial orchestration.
//! - [`analysis`]: log-log rate fits and closed-form convergence /
//!   generalization bound evaluators.

pub mod alpha;
pub mod analysis;
pub mod channel;
pub mod error;
pub mod noise;
pub mod objectives;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
