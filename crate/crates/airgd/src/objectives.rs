//! Federated testbed objectives.
//!
//! The convergence claims are checked on convex problems whose global
//! minimizer is known exactly (quadratic) or computable to machine precision
//! by a noiseless oracle (regularized logistic regression). Each problem
//! reports the constants the analysis needs: strong convexity `gamma`,
//! smoothness `lambda`, and a gradient bound `G` valid on a stated ball
//! around the minimizer (quadratic gradients are globally unbounded, so the
//! bound is always region-qualified).

use rand::Rng;
use rand_distr::StandardNormal;

use crate::alpha::SquareMat;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// A federated optimization problem: `f = (1/N) sum_n f_n` with strongly
/// convex, smooth `f` and a known global minimizer.
pub trait FederatedProblem: Sync {
    fn num_agents(&self) -> usize;
    fn dim(&self) -> usize;
    fn local_loss(&self, agent: usize, w: &[f64]) -> f64;
    fn local_gradient(&self, agent: usize, w: &[f64]) -> Vec<f64>;
    /// Exact global minimizer (closed form or cached oracle output).
    fn minimizer(&self) -> &[f64];
    /// Strong convexity constant `gamma`.
    fn strong_convexity(&self) -> f64;
    /// Smoothness constant `lambda` (an upper bound).
    fn smoothness(&self) -> f64;
    /// Bound on `||grad f_n(w)||` over the ball of the given radius around
    /// the minimizer.
    fn grad_bound(&self, radius: f64) -> f64;
    /// Hessian of the global loss at `w`.
    fn hessian(&self, w: &[f64]) -> SquareMat;

    fn global_loss(&self, w: &[f64]) -> f64 {
        let n = self.num_agents();
        (0..n).map(|a| self.local_loss(a, w)).sum::<f64>() / n as f64
    }

    fn global_gradient(&self, w: &[f64]) -> Vec<f64> {
        let n = self.num_agents();
        let mut out = vec![0.0; self.dim()];
        for a in 0..n {
            let g = self.local_gradient(a, w);
            for (o, x) in out.iter_mut().zip(g) {
                *o += x;
            }
        }
        for o in out.iter_mut() {
            *o /= n as f64;
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Quadratic testbed
// ---------------------------------------------------------------------------

/// `f_n(w) = 1/2 ||w - c_n||^2`: identity Hessian, `gamma = lambda = 1`, and
/// the minimizer is exactly the mean of the centers.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    centers: Vec<Vec<f64>>,
    wstar: Vec<f64>,
    max_center_dist: f64,
}

impl QuadraticProblem {
    pub fn from_centers(centers: Vec<Vec<f64>>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::invalid("quadratic problem needs at least one center"));
        }
        let d = centers[0].len();
        if d == 0 || centers.iter().any(|c| c.len() != d) {
            return Err(Error::dim("centers must share one nonzero dimension".to_string()));
        }
        let n = centers.len() as f64;
        let wstar: Vec<f64> =
            (0..d).map(|j| centers.iter().map(|c| c[j]).sum::<f64>() / n).collect();
        let max_center_dist = centers
            .iter()
            .map(|c| c.iter().zip(&wstar).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max);
        Ok(QuadraticProblem { centers, wstar, max_center_dist })
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }
}

/// Quadratic testbed with Gaussian centers of the given scale.
pub fn make_quadratic(
    num_agents: usize,
    dim: usize,
    center_spread: f64,
    seed: u64,
) -> Result<QuadraticProblem> {
    if num_agents == 0 || dim == 0 {
        return Err(Error::invalid("problem needs num_agents >= 1 and dim >= 1"));
    }
    if !(center_spread >= 0.0 && center_spread.is_finite()) {
        return Err(Error::invalid(format!("center spread must be >= 0, got {center_spread}")));
    }
    let mut rng = RngStream::new(seed, CENTERS_STREAM).rng();
    let centers: Vec<Vec<f64>> = (0..num_agents)
        .map(|_| (0..dim).map(|_| center_spread * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    QuadraticProblem::from_centers(centers)
}

const CENTERS_STREAM: u64 = 0xC0;
const DATA_STREAM: u64 = 0xDA;

impl FederatedProblem for QuadraticProblem {
    fn num_agents(&self) -> usize {
        self.centers.len()
    }

    fn dim(&self) -> usize {
        self.wstar.len()
    }

    fn local_loss(&self, agent: usize, w: &[f64]) -> f64 {
        0.5 * w.iter().zip(&self.centers[agent]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
    }

    fn local_gradient(&self, agent: usize, w: &[f64]) -> Vec<f64> {
        w.iter().zip(&self.centers[agent]).map(|(a, b)| a - b).collect()
    }

    fn minimizer(&self) -> &[f64] {
        &self.wstar
    }

    fn strong_convexity(&self) -> f64 {
        1.0
    }

    fn smoothness(&self) -> f64 {
        1.0
    }

    fn grad_bound(&self, radius: f64) -> f64 {
        radius + self.max_center_dist
    }

    fn hessian(&self, _w: &[f64]) -> SquareMat {
        SquareMat::identity(self.dim())
    }

    fn global_gradient(&self, w: &[f64]) -> Vec<f64> {
        // Closed form w - mean(centers); agrees with the local average.
        w.iter().zip(&self.wstar).map(|(a, b)| a - b).collect()
    }
}

// ---------------------------------------------------------------------------
// Logistic testbed
// ---------------------------------------------------------------------------

/// L2-regularized logistic regression on synthetic two-cluster data.
/// `gamma = l2_reg`; `lambda` uses the trace bound on the sigmoid curvature.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    /// Per agent: (feature vectors, labels in {-1, +1}).
    data: Vec<Vec<(Vec<f64>, f64)>>,
    l2_reg: f64,
    dim: usize,
    wstar: Vec<f64>,
    smoothness: f64,
    max_feature_term: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticProblem {
    /// Build from explicit data; the minimizer is computed by the noiseless
    /// oracle to tolerance 1e-11 and cached.
    pub fn from_data(data: Vec<Vec<(Vec<f64>, f64)>>, l2_reg: f64) -> Result<Self> {
        if !(l2_reg > 0.0) {
            return Err(Error::invalid(format!(
                "l2 regularization must be positive for strong convexity, got {l2_reg}"
            )));
        }
        if data.is_empty() || data.iter().any(|d| d.is_empty()) {
            return Err(Error::invalid("every agent needs at least one sample"));
        }
        let dim = data[0][0].0.len();
        if dim == 0 || data.iter().any(|agent| agent.iter().any(|(x, _)| x.len() != dim)) {
            return Err(Error::dim("features must share one nonzero dimension".to_string()));
        }
        if data.iter().any(|agent| agent.iter().any(|(_, y)| *y != 1.0 && *y != -1.0)) {
            return Err(Error::invalid("labels must be +1 or -1"));
        }
        // Trace bound: lambda <= l2 + (1/4N) sum_n (1/m_n) sum_i ||x_i||^2.
        let n = data.len() as f64;
        let curvature = data
            .iter()
            .map(|agent| {
                agent.iter().map(|(x, _)| x.iter().map(|v| v * v).sum::<f64>()).sum::<f64>()
                    / agent.len() as f64
            })
            .sum::<f64>()
            / n;
        let smoothness = l2_reg + 0.25 * curvature;
        let max_feature_term = data
            .iter()
            .map(|agent| {
                agent.iter().map(|(x, _)| x.iter().map(|v| v * v).sum::<f64>().sqrt()).sum::<f64>()
                    / agent.len() as f64
            })
            .fold(0.0f64, f64::max);
        let mut problem = LogisticProblem {
            data,
            l2_reg,
            dim,
            wstar: vec![0.0; dim],
            smoothness,
            max_feature_term,
        };
        problem.wstar = oracle_minimize(&problem, 1e-11)?;
        Ok(problem)
    }
}

/// Logistic testbed on two Gaussian clusters separated along a seeded
/// direction, labels `+-1`.
pub fn make_logistic(
    num_agents: usize,
    dim: usize,
    samples_per_agent: usize,
    l2_reg: f64,
    seed: u64,
) -> Result<LogisticProblem> {
    if num_agents == 0 || dim == 0 || samples_per_agent == 0 {
        return Err(Error::invalid(
            "problem needs num_agents, dim, and samples_per_agent all >= 1",
        ));
    }
    let mut rng = RngStream::new(seed, DATA_STREAM).rng();
    // Class mean direction, length 2.
    let mut mean: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    for m in mean.iter_mut() {
        *m *= 2.0 / norm;
    }
    let data = (0..num_agents)
        .map(|_| {
            (0..samples_per_agent)
                .map(|i| {
                    let y = if i % 2 == 0 { 1.0 } else { -1.0 };
                    let x: Vec<f64> =
                        mean.iter().map(|m| y * m + rng.sample::<f64, _>(StandardNormal)).collect();
                    (x, y)
                })
                .collect()
        })
        .collect();
    LogisticProblem::from_data(data, l2_reg)
}

impl FederatedProblem for LogisticProblem {
    fn num_agents(&self) -> usize {
        self.data.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn local_loss(&self, agent: usize, w: &[f64]) -> f64 {
        let samples = &self.data[agent];
        let mut loss = 0.0;
        for (x, y) in samples {
            let margin: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() * y;
            // ln(1 + exp(-margin)), stable for both signs.
            loss += if margin > 0.0 {
                (-margin).exp().ln_1p()
            } else {
                -margin + margin.exp().ln_1p()
            };
        }
        loss / samples.len() as f64 + 0.5 * self.l2_reg * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn local_gradient(&self, agent: usize, w: &[f64]) -> Vec<f64> {
        let samples = &self.data[agent];
        let mut grad = vec![0.0; self.dim];
        for (x, y) in samples {
            let z: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
            let coeff = -y * sigmoid(-y * z);
            for (g, v) in grad.iter_mut().zip(x) {
                *g += coeff * v;
            }
        }
        let m = samples.len() as f64;
        for (g, v) in grad.iter_mut().zip(w) {
            *g = *g / m + self.l2_reg * v;
        }
        grad
    }

    fn minimizer(&self) -> &[f64] {
        &self.wstar
    }

    fn strong_convexity(&self) -> f64 {
        self.l2_reg
    }

    fn smoothness(&self) -> f64 {
        self.smoothness
    }

    fn grad_bound(&self, radius: f64) -> f64 {
        let wstar_norm = self.wstar.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.max_feature_term + self.l2_reg * (wstar_norm + radius)
    }

    fn hessian(&self, w: &[f64]) -> SquareMat {
        let d = self.dim;
        let mut h = vec![vec![0.0; d]; d];
        let n = self.data.len() as f64;
        for agent in &self.data {
            let m = agent.len() as f64;
            for (x, _) in agent {
                let z: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
                let s = sigmoid(z);
                let c = s * (1.0 - s) / (m * n);
                for i in 0..d {
                    for j in 0..d {
                        h[i][j] += c * x[i] * x[j];
                    }
                }
            }
        }
        for (i, row) in h.iter_mut().enumerate() {
            row[i] += self.l2_reg;
        }
        SquareMat::from_rows(&h).expect("hessian is square by construction")
    }
}

// ---------------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------------

/// Noiseless full-gradient descent with fixed step `1/lambda` until
/// `||grad f|| < tol`. This is the reference minimizer the noisy training
/// error is measured against; it never sees the channel.
pub fn oracle_minimize(problem: &dyn FederatedProblem, tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let gamma = problem.strong_convexity();
    let lambda = problem.smoothness();
    let mut w = vec![0.0; problem.dim()];
    let mut grad = problem.global_gradient(&w);
    let mut residual = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    // Fixed-step descent contracts the gradient norm by (1 - gamma/lambda)
    // per iteration; budget twice the implied count plus slack.
    let kappa = lambda / gamma;
    let budget = (2.0 * kappa * ((residual / tol).max(2.0)).ln()).ceil() as usize + 1000;
    let step = 1.0 / lambda;
    for _ in 0..budget {
        if residual < tol {
            return Ok(w);
        }
        for (wi, gi) in w.iter_mut().zip(&grad) {
            *wi -= step * gi;
        }
        grad = problem.global_gradient(&w);
        residual = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    }
    if residual < tol {
        Ok(w)
    } else {
        Err(Error::OracleDidNotConverge { iterations: budget, residual, tolerance: tol })
    }
}
