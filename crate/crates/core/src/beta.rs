//! Beta distribution support: sampling and quantiles.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::bandit::ArmPosterior;
use crate::error::{Error, Result};

/// `Beta(alpha, beta)` sampler built from two unit-scale Gamma variates
/// (Marsaglia-Tsang squeeze/rejection): `X / (X + Y)`.
#[derive(Debug, Clone, Copy)]
pub struct BetaSampler {
    x: Gamma<f64>,
    y: Gamma<f64>,
}

impl BetaSampler {
    pub fn new(arm: ArmPosterior) -> Self {
        BetaSampler::with_params(arm.alpha as f64, arm.beta as f64)
    }

    pub fn with_params(alpha: f64, beta: f64) -> Self {
        BetaSampler {
            x: Gamma::new(alpha, 1.0).expect("alpha > 0"),
            y: Gamma::new(beta, 1.0).expect("beta > 0"),
        }
    }
}

impl Distribution<f64> for BetaSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let x = self.x.sample(rng);
        let y = self.y.sample(rng);
        x / (x + y)
    }
}

/// Regularized incomplete beta `I_x(alpha, beta)`.
pub fn regularized_incomplete_beta(x: f64, alpha: f64, beta: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    beta_reg(alpha, beta, x)
}

/// Inverse of `I_x(alpha, beta)` in `x`: bracketed Newton with bisection
/// fallback, converged to well below `1e-10` absolute.
pub fn beta_quantile(p: f64, alpha: f64, beta: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Argument(format!("quantile level {p} outside (0, 1)")));
    }
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::Argument(format!("invalid Beta parameters ({alpha}, {beta})")));
    }
    let log_norm = ln_beta(alpha, beta);
    let density = |x: f64| ((alpha - 1.0) * x.ln() + (beta - 1.0) * (-x).ln_1p() - log_norm).exp();

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = alpha / (alpha + beta);
    for _ in 0..300 {
        let err = regularized_incomplete_beta(x, alpha, beta) - p;
        if err == 0.0 {
            return Ok(x);
        }
        if err < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 1e-15 {
            break;
        }
        let step = err / density(x);
        let mut next = x - step;
        if !(next.is_finite() && next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-16 {
            x = next;
            break;
        }
        x = next;
    }
    Ok(x)
}
