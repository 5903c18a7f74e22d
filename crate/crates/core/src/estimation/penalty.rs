use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyKind {
    /// Truncated lasso `lambda * min(|b|, tau)`.
    Tlp,
    /// `(tau^2 / 2) * 1(b != 0)`.
    HardThreshold,
    None,
}

/// Sparsity penalty applied to every slope (never to intercepts).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Penalty {
    pub kind: PenaltyKind,
    pub lambda: f64,
    pub tau: f64,
}

impl Penalty {
    pub fn tlp(lambda: f64, tau: f64) -> Self {
        Self {
            kind: PenaltyKind::Tlp,
            lambda,
            tau,
        }
    }

    pub fn hard(tau: f64) -> Self {
        Self {
            kind: PenaltyKind::HardThreshold,
            lambda: 0.0,
            tau,
        }
    }

    pub fn none() -> Self {
        Self {
            kind: PenaltyKind::None,
            lambda: 0.0,
            tau: 1.0,
        }
    }

    pub fn value(&self, b: f64) -> f64 {
        penalty_value(self, b)
    }

    /// Sum of the penalty over the slopes of a row (`row[0]` is the intercept).
    pub fn row_value(&self, row: &[f64]) -> f64 {
        row.iter().skip(1).map(|&b| self.value(b)).sum()
    }
}

pub fn penalty_value(pen: &Penalty, b: f64) -> f64 {
    match pen.kind {
        PenaltyKind::Tlp => pen.lambda * b.abs().min(pen.tau),
        PenaltyKind::HardThreshold => {
            if b != 0.0 {
                0.5 * pen.tau * pen.tau
            } else {
                0.0
            }
        }
        PenaltyKind::None => 0.0,
    }
}

/// Simulation default `lambda = N^(1/4)`, `tau = max(3 N^(-0.3), 0.3)`.
pub fn default_tuning(n: usize) -> Penalty {
    let n = n.max(1) as f64;
    Penalty::tlp(n.powf(0.25), (3.0 * n.powf(-0.3)).max(0.3))
}

/// One point of the EBIC tuning grid: one `lambda` per latent layer of a
/// two-layer model and a shared `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningPoint {
    pub lambda1: f64,
    pub lambda2: f64,
    pub tau: f64,
}

impl TuningPoint {
    pub fn penalties(&self) -> Vec<Penalty> {
        vec![
            Penalty::tlp(self.lambda1, self.tau),
            Penalty::tlp(self.lambda2, self.tau),
        ]
    }
}

/// `lambda1, lambda2 in {N^(1/8), N^(2/8), N^(3/8)}`,
/// `tau in 2 {N^(-1/8), N^(-2/8), N^(-3/8)}`: 27 points.
pub fn tuning_grid(n: usize) -> Vec<TuningPoint> {
    let n = n.max(1) as f64;
    let lambdas: Vec<f64> = (1..=3).map(|e| n.powf(f64::from(e) / 8.0)).collect();
    let taus: Vec<f64> = (1..=3).map(|e| 2.0 * n.powf(-f64::from(e) / 8.0)).collect();
    let mut out = Vec::with_capacity(27);
    for &lambda1 in &lambdas {
        for &lambda2 in &lambdas {
            for &tau in &taus {
                out.push(TuningPoint {
                    lambda1,
                    lambda2,
                    tau,
                });
            }
        }
    }
    out
}
