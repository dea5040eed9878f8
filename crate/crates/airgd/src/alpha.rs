//! The alpha-norm calculus.
//!
//! When the interference has infinite variance, squared-error arguments break
//! down and the analysis runs on fractional moments instead. The primitives
//! here are the entrywise signed power `w^<a>` (with entries
//! `sgn(w_i)|w_i|^a`), the alpha-norm power `||w||_a^a = sum |w_i|^a`, the
//! Taylor-expansion-type inequality
//!
//! ```text
//! ||w + v||_a^a <= ||w||_a^a + a * <w^<a-1>, v> + 4 * ||v||_a^a
//! ```
//!
//! for `a` in `[1, 2]`, and a Monte-Carlo certificate for alpha-positive
//! definiteness of a symmetric matrix (`<v, Q v^<a-1>> > 0` for all
//! `||v||_a > 1`).
//!
//! All functions are pure; there is no shared state.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Tail index in `(1, 2]`. The analysis covers heavy tails with `alpha < 2`;
/// the boundary `alpha = 2` is admitted as the Gaussian case so heavy-tail
/// runs can be sanity-checked against classical SGD behavior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaIndex(f64);

impl AlphaIndex {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(Error::invalid(format!(
                "tail index must satisfy 1 < alpha <= 2, got {alpha}"
            )));
        }
        Ok(AlphaIndex(alpha))
    }

    pub fn get(&self) -> f64 {
        self.0
    }
}

fn check_finite(name: &str, w: &[f64]) -> Result<()> {
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{name} contains a non-finite entry")));
    }
    Ok(())
}

/// `sgn(x) |x|^a` for one entry, with the convention `sgn(0) = 0` so the map
/// stays continuous and the pairing identity holds exactly.
#[inline]
pub fn signed_power_scalar(x: f64, alpha: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else if alpha == 1.0 {
        x
    } else if alpha == 2.0 {
        // Exact at the Gaussian boundary.
        x.signum() * (x * x)
    } else {
        x.signum() * x.abs().powf(alpha)
    }
}

/// Entrywise signed power `w^<a>`.
pub fn signed_power(w: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_finite("signed_power input", w)?;
    if !(alpha >= 0.0) {
        return Err(Error::invalid(format!("signed power exponent must be >= 0, got {alpha}")));
    }
    Ok(w.iter().map(|&x| signed_power_scalar(x, alpha)).collect())
}

/// `||w||_a^a = sum_i |w_i|^a`. At `alpha = 2` this is exactly the squared
/// Euclidean norm (entries are squared with `x * x`, not `powf`).
pub fn alpha_norm_pow(w: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha >= 1.0) {
        return Err(Error::invalid(format!("alpha-norm order must be >= 1, got {alpha}")));
    }
    check_finite("alpha_norm_pow input", w)?;
    let sum = if alpha == 1.0 {
        w.iter().map(|x| x.abs()).sum()
    } else if alpha == 2.0 {
        w.iter().map(|x| x * x).sum()
    } else {
        w.iter().map(|x| x.abs().powf(alpha)).sum()
    };
    Ok(sum)
}

/// Slack of the Taylor-type inequality: RHS minus LHS of
/// `||w+v||_a^a <= ||w||_a^a + a <w^<a-1>, v> + 4 ||v||_a^a`.
/// Nonnegative for `alpha` in `[1, 2]`.
pub fn lemma1_gap(w: &[f64], v: &[f64], alpha: f64) -> Result<f64> {
    if w.len() != v.len() {
        return Err(Error::dim(format!("lemma1_gap: {} vs {}", w.len(), v.len())));
    }
    if !(1.0..=2.0).contains(&alpha) {
        return Err(Error::invalid(format!("lemma1_gap needs alpha in [1, 2], got {alpha}")));
    }
    let sum: Vec<f64> = w.iter().zip(v).map(|(a, b)| a + b).collect();
    let lhs = alpha_norm_pow(&sum, alpha)?;
    let wp = signed_power(w, alpha - 1.0)?;
    let inner: f64 = wp.iter().zip(v).map(|(a, b)| a * b).sum();
    let rhs = alpha_norm_pow(w, alpha)? + alpha * inner + 4.0 * alpha_norm_pow(v, alpha)?;
    Ok(rhs - lhs)
}

/// Dense symmetric matrix, row-major. Small dimensions only; this backs the
/// alpha-positive-definiteness certificate and Hessian probes.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMat {
    data: Vec<f64>,
    n: usize,
}

impl SquareMat {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::dim("matrix rows must form a nonempty square"));
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(SquareMat { data, n })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SquareMat { data: vec![0.0; n * n], n };
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = SquareMat { data: vec![0.0; n * n], n };
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * n + i] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn scale(&self, s: f64) -> SquareMat {
        SquareMat { data: self.data.iter().map(|x| x * s).collect(), n: self.n }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if (self.get(i, j) - self.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::dim(format!("matrix is {}x{}, vector is {}", self.n, self.n, v.len())));
        }
        Ok((0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect())
    }
}

/// Monte-Carlo certificate for alpha-positive definiteness of `q`.
///
/// Draws `samples` vectors with uniform direction and alpha-norm radius
/// strictly above 1, and returns `true` iff `<v, Q v^<alpha-1>>` is strictly
/// positive for every draw. This is a probabilistic certificate, not a proof:
/// the definition quantifies over an uncountable set, so a `true` answer
/// means no violating direction was found within the sample budget.
pub fn is_alpha_pd(q: &SquareMat, alpha: f64, samples: usize, stream: RngStream) -> Result<bool> {
    if !q.is_symmetric(1e-12) {
        return Err(Error::invalid("is_alpha_pd requires a symmetric matrix"));
    }
    AlphaIndex::new(alpha)?;
    if samples == 0 {
        return Err(Error::invalid("is_alpha_pd requires samples >= 1"));
    }
    let d = q.dim();
    let mut rng = stream.rng();
    let mut v = vec![0.0; d];
    for _ in 0..samples {
        // Uniform direction via normalized Gaussians, then a radius in (1, 10]
        // measured in the alpha-norm so that ||v||_alpha > 1 holds exactly.
        loop {
            for x in v.iter_mut() {
                *x = rng.sample(StandardNormal);
            }
            let norm = alpha_norm_pow(&v, alpha)?.powf(1.0 / alpha);
            if norm > 1e-12 {
                let radius = 1.0 + 9.0 * rng.random::<f64>();
                for x in v.iter_mut() {
                    *x *= radius / norm;
                }
                break;
            }
        }
        let vp = signed_power(&v, alpha - 1.0)?;
        let qvp = q.mul_vec(&vp)?;
        let form: f64 = v.iter().zip(&qvp).map(|(a, b)| a * b).sum();
        if !(form > 0.0) {
            return Ok(false);
        }
    }
    Ok(true)
}
