//! Observed-layer parametric families and their links.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::DdeError;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Largest linear predictor fed to `exp` for Poisson rates.
const MAX_LOG_RATE: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// Binary responses, logistic link.
    Bernoulli,
    /// Counts, exponential link.
    Poisson,
    /// Real responses, identity link, standard deviation `gamma`.
    Normal,
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FamilyKind::Bernoulli => "bernoulli",
            FamilyKind::Poisson => "poisson",
            FamilyKind::Normal => "normal",
        };
        f.write_str(s)
    }
}

impl FromStr for FamilyKind {
    type Err = DdeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bernoulli" | "binary" => Ok(FamilyKind::Bernoulli),
            "poisson" | "count" => Ok(FamilyKind::Poisson),
            "normal" | "gaussian" => Ok(FamilyKind::Normal),
            other => Err(DdeError::invalid(format!("unknown family '{other}'"))),
        }
    }
}

/// Distribution of each observed `Y_j` given its linear predictor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservedFamily {
    pub kind: FamilyKind,
}

impl ObservedFamily {
    pub const BERNOULLI: Self = Self {
        kind: FamilyKind::Bernoulli,
    };
    pub const POISSON: Self = Self {
        kind: FamilyKind::Poisson,
    };
    pub const NORMAL: Self = Self {
        kind: FamilyKind::Normal,
    };

    pub fn new(kind: FamilyKind) -> Self {
        Self { kind }
    }

    pub fn has_dispersion(&self) -> bool {
        self.kind == FamilyKind::Normal
    }

    /// Mean map `mu(g(eta))`.
    pub fn mean(&self, eta: f64) -> f64 {
        match self.kind {
            FamilyKind::Bernoulli => sigmoid(eta),
            FamilyKind::Poisson => eta.min(MAX_LOG_RATE).exp(),
            FamilyKind::Normal => eta,
        }
    }

    /// Inverse of the mean map. Callers truncate the argument into the
    /// family's open range first.
    pub fn inverse_mean(&self, mu: f64) -> f64 {
        match self.kind {
            FamilyKind::Bernoulli => (mu / (1.0 - mu)).ln(),
            FamilyKind::Poisson => mu.ln(),
            FamilyKind::Normal => mu,
        }
    }

    /// Log density (or mass) of `y` at linear predictor `eta`. `gamma` is the
    /// standard deviation for Normal responses and ignored otherwise.
    pub fn log_density(&self, y: f64, eta: f64, gamma: f64) -> f64 {
        match self.kind {
            FamilyKind::Bernoulli => y * eta - log1pexp(eta),
            FamilyKind::Poisson => {
                let eta = eta.min(MAX_LOG_RATE);
                y * eta - eta.exp() - ln_gamma(y + 1.0)
            }
            FamilyKind::Normal => {
                let r = (y - eta) / gamma;
                -HALF_LN_2PI - gamma.ln() - 0.5 * r * r
            }
        }
    }

    /// Whether `y` lies in the family's sample space.
    pub fn in_support(&self, y: f64) -> bool {
        match self.kind {
            FamilyKind::Bernoulli => y == 0.0 || y == 1.0,
            FamilyKind::Poisson => y >= 0.0 && y.fract() == 0.0 && y.is_finite(),
            FamilyKind::Normal => y.is_finite(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, eta: f64, gamma: f64) -> f64 {
        match self.kind {
            FamilyKind::Bernoulli => f64::from(u8::from(rng.random::<f64>() < sigmoid(eta))),
            FamilyKind::Poisson => {
                let rate = self.mean(eta);
                if rate <= 0.0 {
                    0.0
                } else {
                    Poisson::new(rate).map(|d| d.sample(rng)).unwrap_or(0.0)
                }
            }
            FamilyKind::Normal => {
                let z: f64 = StandardNormal.sample(rng);
                eta + gamma * z
            }
        }
    }

    /// Default spectral rescaling constant for this link.
    pub fn spectral_scale(&self) -> f64 {
        match self.kind {
            FamilyKind::Normal => 1.0,
            FamilyKind::Bernoulli | FamilyKind::Poisson => 0.5,
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn log1pexp(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Log probability of a binary outcome `a` under logistic predictor `eta`.
#[inline]
pub fn log_bernoulli(a: f64, eta: f64) -> f64 {
    a * eta - log1pexp(eta)
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use std::f64::consts::PI;

    use super::*;

    fn normal_log_density(y: f64, mean: f64, sd: f64) -> f64 {
        let r = (y - mean) / sd;
        -0.5 * (2.0 * PI).ln() - sd.ln() - 0.5 * r * r
    }

    #[test]
    fn mean_maps_are_monotone_and_invert() {
        for fam in [
            ObservedFamily::BERNOULLI,
            ObservedFamily::POISSON,
            ObservedFamily::NORMAL,
        ] {
            let mut prev = f64::NEG_INFINITY;
            for i in -20..=20 {
                let eta = f64::from(i) * 0.4;
                let mu = fam.mean(eta);
                assert!(mu > prev, "{fam:?} not increasing at {eta}");
                prev = mu;
                assert_relative_eq!(fam.inverse_mean(mu), eta, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn densities_normalize() {
        let b = ObservedFamily::BERNOULLI;
        let total = b.log_density(0.0, 0.7, 1.0).exp() + b.log_density(1.0, 0.7, 1.0).exp();
        assert_relative_eq!(total, 1.0, epsilon = 1e-14);

        let p = ObservedFamily::POISSON;
        let total: f64 = (0..80)
            .map(|y| p.log_density(f64::from(y), 1.3, 1.0).exp())
            .sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);

        let n = ObservedFamily::NORMAL;
        assert_relative_eq!(
            n.log_density(0.3, 1.0, 2.0),
            normal_log_density(0.3, 1.0, 2.0),
            epsilon = 1e-14
        );
    }

    #[test]
    fn stable_helpers() {
        assert_relative_eq!(log1pexp(0.0), 2f64.ln());
        assert_eq!(log1pexp(1000.0), 1000.0);
        assert!(log1pexp(-1000.0) >= 0.0);
        assert_relative_eq!(logsumexp(&[0.0, 0.0]), 2f64.ln());
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_relative_eq!(sigmoid(-800.0), 0.0);
    }

    #[test]
    fn parse_family() {
        assert_eq!("Normal".parse::<FamilyKind>().unwrap(), FamilyKind::Normal);
        assert!("gamma".parse::<FamilyKind>().is_err());
    }
}
