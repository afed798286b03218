//! Unit-mean service-time distributions.
//!
//! Every family is parameterised by a shape only; the scale is pinned so that
//! the mean service requirement is exactly one time unit. The fluid solver
//! needs the survival function Ḡ and the simulator needs sampling, so both
//! views live on the same type.

use core::f64::consts::LN_2;

use libm::{exp, expm1, log, log1p, pow, tgamma};
use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal};

use crate::special::{
    adaptive_simpson, bisect, gamma_q, ln_gamma, ln_gamma_q, ln_normal_sf, log_add_exp,
    normal_cdf, normal_sf,
};

/// Largest age up to which the unit-mean check integrates Ḡ numerically;
/// the remainder comes from the closed-form tail.
const MEAN_CHECK_SPLIT: f64 = 40.0;
const MEAN_TOLERANCE: f64 = 1e-9;
/// Below this survival value ratios Ḡ(a + r) / Ḡ(a) go through logs.
pub const SURVIVAL_UNDERFLOW: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum DistError {
    #[error("argument must be non-negative, got {0}")]
    NegativeArgument(f64),
    #[error("invalid shape parameter: {0}")]
    InvalidShape(&'static str),
    #[error("hazard rate saturated at x = {0} (survival underflow or unbounded density)")]
    HazardSaturated(f64),
    #[error("numerical mean is {0}, expected 1")]
    MeanNotUnit(f64),
}

/// Service-time family and its shape parameter(s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Exponential,
    /// Pareto type II, Ḡ(x) = (1 + x/σ)^(-β) with σ = β - 1.
    Lomax { shape: f64 },
    /// `sigma` is the standard deviation of ln X.
    LogNormal { sigma: f64 },
    Gamma { shape: f64 },
    /// Two-phase mixture; the mixing weight follows from the unit mean.
    HyperExponential { rate1: f64, rate2: f64 },
    Weibull { shape: f64 },
}

#[derive(Debug, Clone, Copy)]
enum Law {
    Exponential,
    Lomax {
        beta: f64,
        scale: f64,
        // Gamma(β-1, 1) for the length-biased law.
        size_biased_denominator: Gamma<f64>,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
        sampler: LogNormal<f64>,
        size_biased: LogNormal<f64>,
    },
    Gamma {
        shape: f64,
        scale: f64,
        ln_norm: f64,
        sampler: Gamma<f64>,
        size_biased: Gamma<f64>,
    },
    HyperExponential {
        weight: f64,
        rate1: f64,
        rate2: f64,
    },
    Weibull {
        shape: f64,
        scale: f64,
        size_biased: Gamma<f64>,
    },
}

/// A unit-mean service law. Immutable after construction; sampling only
/// touches the caller's RNG.
#[derive(Debug, Clone, Copy)]
pub struct ServiceDistribution {
    family: Family,
    law: Law,
}

impl PartialEq for ServiceDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
    }
}

fn gamma_dist(shape: f64, scale: f64) -> Result<Gamma<f64>, DistError> {
    Gamma::new(shape, scale).map_err(|_| DistError::InvalidShape("gamma sampler parameters"))
}

fn positive_finite(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl ServiceDistribution {
    pub fn new(family: Family) -> Result<Self, DistError> {
        let law = match family {
            Family::Exponential => Law::Exponential,
            Family::Lomax { shape } => {
                if !(shape.is_finite() && shape > 1.0) {
                    return Err(DistError::InvalidShape("pareto shape must exceed 1 for a finite mean"));
                }
                Law::Lomax {
                    beta: shape,
                    scale: shape - 1.0,
                    size_biased_denominator: gamma_dist(shape - 1.0, 1.0)?,
                }
            }
            Family::LogNormal { sigma } => {
                if !positive_finite(sigma) {
                    return Err(DistError::InvalidShape("lognormal sigma must be positive"));
                }
                let mu = -0.5 * sigma * sigma;
                let mk = |m: f64| {
                    LogNormal::new(m, sigma)
                        .map_err(|_| DistError::InvalidShape("lognormal sampler parameters"))
                };
                Law::LogNormal {
                    mu,
                    sigma,
                    sampler: mk(mu)?,
                    size_biased: mk(mu + sigma * sigma)?,
                }
            }
            Family::Gamma { shape } => {
                if !positive_finite(shape) {
                    return Err(DistError::InvalidShape("gamma shape must be positive"));
                }
                let scale = 1.0 / shape;
                Law::Gamma {
                    shape,
                    scale,
                    ln_norm: ln_gamma(shape) + shape * log(scale),
                    sampler: gamma_dist(shape, scale)?,
                    size_biased: gamma_dist(shape + 1.0, scale)?,
                }
            }
            Family::HyperExponential { rate1, rate2 } => {
                if !(positive_finite(rate1) && positive_finite(rate2)) || rate1 == rate2 {
                    return Err(DistError::InvalidShape(
                        "hyperexponential rates must be positive and distinct",
                    ));
                }
                // p/λ1 + (1-p)/λ2 = 1
                let weight = (1.0 - 1.0 / rate2) / (1.0 / rate1 - 1.0 / rate2);
                if !(0.0..=1.0).contains(&weight) {
                    return Err(DistError::InvalidShape(
                        "hyperexponential rates must bracket 1 (one mean above, one below)",
                    ));
                }
                Law::HyperExponential { weight, rate1, rate2 }
            }
            Family::Weibull { shape } => {
                if !positive_finite(shape) {
                    return Err(DistError::InvalidShape("weibull shape must be positive"));
                }
                Law::Weibull {
                    shape,
                    scale: 1.0 / tgamma(1.0 + 1.0 / shape),
                    size_biased: gamma_dist(1.0 + 1.0 / shape, 1.0)?,
                }
            }
        };
        let dist = Self { family, law };
        let mean = dist.numerical_mean();
        if !((mean - 1.0).abs() <= MEAN_TOLERANCE) {
            return Err(DistError::MeanNotUnit(mean));
        }
        Ok(dist)
    }

    pub fn exponential() -> Self {
        Self::new(Family::Exponential).expect("exponential is always valid")
    }

    pub fn family(&self) -> Family {
        self.family
    }

    /// Mixing weight of the first phase for the hyper-exponential family.
    pub fn mixing_weight(&self) -> Option<f64> {
        match self.law {
            Law::HyperExponential { weight, .. } => Some(weight),
            _ => None,
        }
    }

    /// Scale parameter fixed by the unit-mean constraint (σ for Lomax, e^μ for
    /// log-normal, θ for gamma, λ for Weibull).
    pub fn scale(&self) -> f64 {
        match self.law {
            Law::Exponential => 1.0,
            Law::Lomax { scale, .. } => scale,
            Law::LogNormal { mu, .. } => exp(mu),
            Law::Gamma { scale, .. } => scale,
            Law::HyperExponential { .. } => 1.0,
            Law::Weibull { scale, .. } => scale,
        }
    }

    // ∫₀^X Ḡ numerically plus the closed-form tail beyond X.
    fn numerical_mean(&self) -> f64 {
        let split = MEAN_CHECK_SPLIT;
        let mut body = 0.0;
        let mut a = 0.0;
        // geometric panels keep the heavy tails cheap
        let mut width = 0.125;
        while a < split {
            let b = (a + width).min(split);
            body += adaptive_simpson(&|x| self.sf(x), a, b, 1e-13);
            a = b;
            width *= 2.0;
        }
        body + self.age_tail(split)
    }

    /// Complementary CDF Ḡ(x).
    pub fn ccdf(&self, x: f64) -> Result<f64, DistError> {
        check(x)?;
        Ok(self.sf(x))
    }

    /// ln Ḡ(x); finite even where Ḡ itself underflows.
    pub fn log_ccdf(&self, x: f64) -> Result<f64, DistError> {
        check(x)?;
        Ok(self.ln_sf(x))
    }

    /// Density g(x).
    pub fn density(&self, x: f64) -> Result<f64, DistError> {
        check(x)?;
        Ok(exp(self.ln_pdf(x)))
    }

    /// Hazard rate h(x) = g(x) / Ḡ(x), evaluated in log space.
    pub fn hazard(&self, x: f64) -> Result<f64, DistError> {
        check(x)?;
        let h = match self.law {
            Law::Exponential => 1.0,
            Law::Lomax { beta, scale, .. } => beta / (scale + x),
            Law::Weibull { shape, scale, .. } => {
                if x == 0.0 {
                    if shape < 1.0 {
                        f64::INFINITY
                    } else if shape == 1.0 {
                        1.0 / scale
                    } else {
                        0.0
                    }
                } else {
                    shape / scale * pow(x / scale, shape - 1.0)
                }
            }
            _ => {
                let lp = self.ln_pdf(x);
                if lp == f64::NEG_INFINITY {
                    0.0
                } else {
                    exp(lp - self.ln_sf(x))
                }
            }
        };
        if h.is_finite() {
            Ok(h)
        } else {
            Err(DistError::HazardSaturated(x))
        }
    }

    /// ∫_r^∞ Ḡ(x) dx, the survival function of the stationary age (equilibrium) law.
    pub fn stationary_age_ccdf(&self, r: f64) -> Result<f64, DistError> {
        check(r)?;
        Ok(self.age_tail(r))
    }

    /// Median of the service law.
    pub fn median(&self) -> f64 {
        match self.law {
            Law::Exponential => LN_2,
            Law::Lomax { beta, scale, .. } => scale * expm1(LN_2 / beta),
            Law::LogNormal { mu, .. } => exp(mu),
            Law::Weibull { shape, scale, .. } => scale * pow(LN_2, 1.0 / shape),
            Law::Gamma { .. } | Law::HyperExponential { .. } => {
                let mut hi = 1.0;
                while self.sf(hi) > 0.5 {
                    hi *= 2.0;
                }
                bisect(|x| self.sf(x) - 0.5, 0.0, hi, 1e-14)
            }
        }
    }

    /// Inverse of Ḡ for the families where it has a closed form: the `x` with
    /// Ḡ(x) = u, for u in (0, 1].
    pub fn inverse_ccdf(&self, u: f64) -> Option<f64> {
        if !(u > 0.0 && u <= 1.0) {
            return None;
        }
        match self.law {
            Law::Exponential => Some(-log(u)),
            Law::Lomax { beta, scale, .. } => Some(scale * expm1(-log(u) / beta)),
            Law::Weibull { shape, scale, .. } => Some(scale * pow(-log(u), 1.0 / shape)),
            _ => None,
        }
    }

    /// Draws a service time.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.law {
            Law::Exponential | Law::Lomax { .. } | Law::Weibull { .. } => {
                let u = open_unit(rng);
                self.inverse_ccdf(u).expect("closed-form inverse")
            }
            Law::LogNormal { sampler, .. } => sampler.sample(rng),
            Law::Gamma { sampler, .. } => sampler.sample(rng),
            Law::HyperExponential { weight, rate1, rate2 } => {
                let rate = if rng.random::<f64>() < *weight { *rate1 } else { *rate2 };
                -log(open_unit(rng)) / rate
            }
        }
    }

    /// Draws `(age, total)` for a job found in service by a stationary renewal
    /// observer: the total is length-biased, the age uniform on `[0, total]`.
    /// The marginal law of the age has density Ḡ(x).
    pub fn sample_stationary_age<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let total = self.sample_length_biased(rng);
        let age = rng.random::<f64>() * total;
        (age, total)
    }

    fn sample_length_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let gamma2 = |rng: &mut R, scale: f64| {
            // Gamma(2, scale) as a sum of two exponentials
            -scale * (log(open_unit(rng)) + log(open_unit(rng)))
        };
        match &self.law {
            Law::Exponential => gamma2(rng, 1.0),
            Law::Lomax { scale, size_biased_denominator, .. } => {
                let num = gamma2(rng, 1.0);
                let den = size_biased_denominator.sample(rng);
                scale * num / den
            }
            Law::LogNormal { size_biased, .. } => size_biased.sample(rng),
            Law::Gamma { size_biased, .. } => size_biased.sample(rng),
            Law::HyperExponential { weight, rate1, rate2 } => {
                let w1 = weight / rate1;
                let rate = if rng.random::<f64>() < w1 { *rate1 } else { *rate2 };
                gamma2(rng, 1.0 / rate)
            }
            Law::Weibull { shape, scale, size_biased } => {
                scale * pow(size_biased.sample(rng), 1.0 / shape)
            }
        }
    }

    /// Ḡ(x) without the domain check; negative `x` is treated as 0.
    #[inline]
    pub(crate) fn sf(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self.law {
            Law::Exponential => exp(-x),
            Law::Lomax { beta, scale, .. } => exp(-beta * log1p(x / scale)),
            Law::LogNormal { mu, sigma, .. } => {
                if x == 0.0 {
                    1.0
                } else {
                    normal_sf((log(x) - mu) / sigma)
                }
            }
            Law::Gamma { shape, scale, .. } => gamma_q(shape, x / scale),
            Law::HyperExponential { weight, rate1, rate2 } => {
                weight * exp(-rate1 * x) + (1.0 - weight) * exp(-rate2 * x)
            }
            Law::Weibull { shape, scale, .. } => exp(-pow(x / scale, shape)),
        }
    }

    #[inline]
    pub(crate) fn ln_sf(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match self.law {
            Law::Exponential => -x,
            Law::Lomax { beta, scale, .. } => -beta * log1p(x / scale),
            Law::LogNormal { mu, sigma, .. } => {
                if x == 0.0 {
                    0.0
                } else {
                    ln_normal_sf((log(x) - mu) / sigma)
                }
            }
            Law::Gamma { shape, scale, .. } => ln_gamma_q(shape, x / scale),
            Law::HyperExponential { weight, rate1, rate2 } => {
                let a = if weight > 0.0 { log(weight) - rate1 * x } else { f64::NEG_INFINITY };
                let b = if weight < 1.0 { log1p(-weight) - rate2 * x } else { f64::NEG_INFINITY };
                log_add_exp(a, b)
            }
            Law::Weibull { shape, scale, .. } => -pow(x / scale, shape),
        }
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        match self.law {
            Law::Exponential => -x,
            Law::Lomax { beta, scale, .. } => log(beta / scale) - (beta + 1.0) * log1p(x / scale),
            Law::LogNormal { mu, sigma, .. } => {
                if x == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let z = (log(x) - mu) / sigma;
                -0.5 * z * z - log(x * sigma) - 0.5 * log(2.0 * core::f64::consts::PI)
            }
            Law::Gamma { shape, scale, ln_norm, .. } => {
                if x == 0.0 {
                    return if shape < 1.0 {
                        f64::INFINITY
                    } else if shape == 1.0 {
                        -ln_norm
                    } else {
                        f64::NEG_INFINITY
                    };
                }
                (shape - 1.0) * log(x) - x / scale - ln_norm
            }
            Law::HyperExponential { weight, rate1, rate2 } => {
                let a = if weight > 0.0 { log(weight * rate1) - rate1 * x } else { f64::NEG_INFINITY };
                let b = if weight < 1.0 {
                    log((1.0 - weight) * rate2) - rate2 * x
                } else {
                    f64::NEG_INFINITY
                };
                log_add_exp(a, b)
            }
            Law::Weibull { shape, scale, .. } => {
                if x == 0.0 {
                    return if shape < 1.0 {
                        f64::INFINITY
                    } else if shape == 1.0 {
                        -log(scale)
                    } else {
                        f64::NEG_INFINITY
                    };
                }
                let y = x / scale;
                log(shape / scale) + (shape - 1.0) * log(y) - pow(y, shape)
            }
        }
    }

    // ∫_r^∞ Ḡ(x) dx = E[(X - r)^+], closed form per family.
    fn age_tail(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        let v = match self.law {
            Law::Exponential => exp(-r),
            Law::Lomax { beta, scale, .. } => scale / (beta - 1.0) * exp((1.0 - beta) * log1p(r / scale)),
            Law::LogNormal { mu, sigma, .. } => {
                if r == 0.0 {
                    exp(mu + 0.5 * sigma * sigma)
                } else {
                    let d1 = (mu + sigma * sigma - log(r)) / sigma;
                    let d2 = d1 - sigma;
                    exp(mu + 0.5 * sigma * sigma) * normal_cdf(d1) - r * normal_cdf(d2)
                }
            }
            Law::Gamma { shape, scale, .. } => {
                let y = r / scale;
                shape * scale * gamma_q(shape + 1.0, y) - r * gamma_q(shape, y)
            }
            Law::HyperExponential { weight, rate1, rate2 } => {
                weight / rate1 * exp(-rate1 * r) + (1.0 - weight) / rate2 * exp(-rate2 * r)
            }
            Law::Weibull { shape, scale, .. } => {
                let y = pow(r / scale, shape);
                let a = 1.0 + 1.0 / shape;
                scale * tgamma(a) * gamma_q(a, y) - r * exp(-y)
            }
        };
        v.max(0.0)
    }
}

#[inline]
fn check(x: f64) -> Result<(), DistError> {
    if x >= 0.0 {
        Ok(())
    } else {
        Err(DistError::NegativeArgument(x))
    }
}

/// Uniform draw on (0, 1].
#[inline]
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}
