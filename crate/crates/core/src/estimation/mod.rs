//! Penalized EM (exact E-step, small models) and penalized SAEM (Gibbs
//! simulation step with stochastically averaged M-step objectives).

pub mod gibbs;
pub mod mstep;
pub mod pem;
pub mod penalty;
pub mod saem;
pub mod stats;

use ndarray::{s, Array1, Array2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gibbs::gibbs_sweep;
pub use mstep::{mstep_row, normal_hard_threshold, RowProblem, RowSolution};
pub use pem::pem_fit;
pub use penalty::{default_tuning, penalty_value, tuning_grid, Penalty, PenaltyKind, TuningPoint};
pub use saem::saem_fit;
pub use stats::{GaussianStats, GroupedStats, LayerStats};

use crate::error::{DdeError, Result};
use crate::family::FamilyKind;
use crate::model::{graphs_from_coefficients, sample, Dataset, DdeModel, GraphSet};
use crate::rng::derive_seed;
use crate::spectral::SpectralInit;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Pem,
    Saem,
}

impl std::str::FromStr for Algo {
    type Err = DdeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pem" | "em" => Ok(Algo::Pem),
            "saem" => Ok(Algo::Saem),
            other => Err(DdeError::invalid(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// SAEM step sizes `theta_t`, `t = 1, 2, ...`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `1 / t`.
    Harmonic,
    /// `t^(-a)` with `a` in (1/2, 1].
    Power(f64),
    /// Constant step; violates the Robbins-Monro conditions unless 1, in
    /// which case every iteration discards the past.
    Constant(f64),
}

impl StepSchedule {
    pub fn theta(&self, t: usize) -> f64 {
        let t = t.max(1) as f64;
        match *self {
            StepSchedule::Harmonic => 1.0 / t,
            StepSchedule::Power(a) => t.powf(-a),
            StepSchedule::Constant(c) => c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub algo: Algo,
    /// One penalty per coefficient matrix `B^(1..D)`; a single entry is
    /// shared by all layers and an empty list means [`default_tuning`].
    pub penalties: Vec<Penalty>,
    pub gibbs_c: usize,
    pub step: StepSchedule,
    pub max_iter: usize,
    /// EM stops when the log-likelihood changes by less than this;
    /// `None` means `N / 500`.
    pub conv_pem: Option<f64>,
    /// SAEM stops when `||Theta_new - Theta_old||_2` falls below this;
    /// `None` means `K^(D) / 2`.
    pub conv_saem: Option<f64>,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            algo: Algo::Saem,
            penalties: Vec::new(),
            gibbs_c: 1,
            step: StepSchedule::Harmonic,
            max_iter: 100,
            conv_pem: None,
            conv_saem: None,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn pem() -> Self {
        Self {
            algo: Algo::Pem,
            ..Self::default()
        }
    }

    pub fn saem() -> Self {
        Self::default()
    }

    /// The looser EM threshold `3 N / 500` used when fits only feed model
    /// selection.
    pub fn for_selection(n: usize) -> Self {
        Self {
            algo: Algo::Pem,
            conv_pem: Some(3.0 * n as f64 / 500.0),
            ..Self::default()
        }
    }

    pub fn validate(&self, depth: usize) -> Result<()> {
        if self.gibbs_c == 0 {
            return Err(DdeError::invalid("gibbs_c must be at least 1"));
        }
        if self.penalties.len() > 1 && self.penalties.len() != depth {
            return Err(DdeError::invalid(format!(
                "{} penalties given for {depth} layers",
                self.penalties.len()
            )));
        }
        for p in &self.penalties {
            if p.lambda < 0.0 || p.tau <= 0.0 || !p.lambda.is_finite() || !p.tau.is_finite() {
                return Err(DdeError::invalid("penalty needs lambda >= 0 and tau > 0"));
            }
        }
        let ok = match self.step {
            StepSchedule::Harmonic => true,
            StepSchedule::Power(a) => a > 0.5 && a <= 1.0,
            StepSchedule::Constant(c) => c > 0.0 && c <= 1.0,
        };
        if !ok {
            return Err(DdeError::invalid("step sizes must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Penalty of layer `layer` of `model`. Without explicit penalties the
    /// default tuning applies, except that the Normal observed layer of a
    /// model with three or more latent layers uses the hard threshold.
    pub fn penalty_for(&self, model: &DdeModel, layer: usize, n: usize) -> Penalty {
        match self.penalties.len() {
            0 if layer == 0 && model.depth() >= 3 && model.family.kind == FamilyKind::Normal => {
                Penalty::hard(default_tuning(n).tau)
            }
            0 => default_tuning(n),
            1 => self.penalties[0],
            _ => self.penalties[layer],
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub algo: Algo,
    pub model_hat: DdeModel,
    pub graphs_hat: GraphSet,
    /// EM: penalized log-likelihood per iteration (starting at the initial
    /// value). SAEM: penalized stochastic-approximation objective.
    pub objective_trace: Vec<f64>,
    pub iters: usize,
    pub wallclock_seconds: f64,
    pub seed: u64,
    pub converged: bool,
    /// Row updates whose Newton solve hit its iteration cap.
    pub row_failures: usize,
}

impl FitReport {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        algo: Algo,
        model_hat: DdeModel,
        trace: Vec<f64>,
        iters: usize,
        start: std::time::Instant,
        seed: u64,
        converged: bool,
        row_failures: usize,
    ) -> Self {
        let graphs_hat = graphs_from_coefficients(&model_hat);
        Self {
            algo,
            model_hat,
            graphs_hat,
            objective_trace: trace,
            iters,
            wallclock_seconds: start.elapsed().as_secs_f64(),
            seed,
            converged,
            row_failures,
        }
    }
}

/// Total penalty of a model's slopes under per-layer penalties.
pub fn total_penalty(model: &DdeModel, cfg: &FitConfig, n: usize) -> f64 {
    model
        .coefs
        .iter()
        .enumerate()
        .map(|(d, b)| {
            let pen = cfg.penalty_for(model, d, n);
            b.slice(s![.., 1..])
                .iter()
                .map(|&v| pen.value(v))
                .sum::<f64>()
        })
        .sum()
}

/// Updates every row of every coefficient matrix (and the Normal
/// dispersions) from the layer statistics. Returns the summed penalized row
/// objectives and the number of rows whose solver did not converge.
pub(crate) fn mstep_all(
    model: &mut DdeModel,
    stats: &[LayerStats],
    cfg: &FitConfig,
    n: usize,
) -> (f64, usize) {
    let mut total = 0.0;
    let mut failures = 0;
    for (d, st) in stats.iter().enumerate() {
        let pen = cfg.penalty_for(model, d, n);
        let kind = if d == 0 {
            model.family.kind
        } else {
            FamilyKind::Bernoulli
        };
        let b = &model.coefs[d];
        let rows = b.nrows();
        let results: Vec<(Vec<f64>, Option<f64>, f64, bool)> = match st {
            LayerStats::Grouped(g) => {
                let x = g.design();
                let counts = g.counts();
                (0..rows)
                    .into_par_iter()
                    .map(|r| {
                        let prob = RowProblem::Glm {
                            kind,
                            x: &x,
                            n: &counts,
                            s: g.child_sums(r),
                        };
                        let warm = b.row(r).to_vec();
                        let sol = mstep_row(&prob, &pen, &warm, None);
                        (sol.beta, None, sol.value, sol.converged)
                    })
                    .collect()
            }
            LayerStats::Gaussian(g) => {
                let gamma = model.gamma.as_ref().expect("Normal model has gamma");
                (0..rows)
                    .into_par_iter()
                    .map(|r| {
                        let sxy = g.sxy.column(r).to_owned();
                        if pen.kind == PenaltyKind::HardThreshold {
                            let (beta, gm) =
                                normal_hard_threshold(&g.sxx, &sxy, g.syy[r], g.w, pen.tau);
                            let prob = RowProblem::Gaussian {
                                sxx: &g.sxx,
                                sxy,
                                syy: g.syy[r],
                                w: g.w,
                            };
                            let v = prob.loglik(&beta, gm) - pen.row_value(&beta);
                            (beta, Some(gm), v, true)
                        } else {
                            let prob = RowProblem::Gaussian {
                                sxx: &g.sxx,
                                sxy,
                                syy: g.syy[r],
                                w: g.w,
                            };
                            let sol = mstep_row(&prob, &pen, &b.row(r).to_vec(), Some(gamma[r]));
                            (sol.beta, sol.gamma, sol.value, sol.converged)
                        }
                    })
                    .collect()
            }
        };
        for (r, (beta, gm, v, ok)) in results.into_iter().enumerate() {
            model.coefs[d].row_mut(r).assign(&Array1::from(beta));
            if let (Some(gm), Some(gamma)) = (gm, model.gamma.as_mut()) {
                gamma[r] = gm;
            }
            total += v;
            failures += usize::from(!ok);
        }
    }
    (total, failures)
}

/// Random starting point: `p` and slopes uniform on (0, 1), intercepts
/// uniform on (-1, 0), dispersions uniform on (0.5, 1.5); the latent
/// assignment is drawn from the prior under those parameters.
pub fn random_init(data: &Dataset, dims: &[usize], seed: u64) -> Result<SpectralInit> {
    if dims.is_empty() {
        return Err(DdeError::invalid("need at least one latent layer"));
    }
    let mut r = crate::rng::rng(derive_seed(seed, 0x5EED));
    let top = *dims.last().unwrap();
    let p = Array1::from_shape_fn(top, |_| r.random::<f64>().clamp(1e-3, 1.0 - 1e-3));
    let coefs = dims
        .iter()
        .enumerate()
        .map(|(d, &k)| {
            let rows = if d == 0 { data.j() } else { dims[d - 1] };
            Array2::from_shape_fn((rows, k + 1), |(_, c)| {
                if c == 0 {
                    -r.random::<f64>()
                } else {
                    r.random::<f64>()
                }
            })
        })
        .collect();
    let gamma = data
        .family
        .has_dispersion()
        .then(|| Array1::from_shape_fn(data.j(), |_| 0.5 + r.random::<f64>()));
    let model0 = DdeModel {
        dims: dims.to_vec(),
        n_obs: data.j(),
        family: data.family,
        p,
        coefs,
        gamma,
    };
    model0.validate()?;
    let (_, a0) = sample(&model0, data.n(), derive_seed(seed, 0xA0))?;
    let g0 = graphs_from_coefficients(&model0);
    Ok(SpectralInit {
        model0,
        a0,
        g0,
        singular_values: Vec::new(),
    })
}

/// Runs the configured algorithm from `init`.
pub fn fit(data: &Dataset, init: &SpectralInit, cfg: &FitConfig) -> Result<FitReport> {
    match cfg.algo {
        Algo::Pem => pem_fit(data, &init.model0, cfg),
        Algo::Saem => saem_fit(data, init, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::ObservedFamily;
    use crate::model::{make_benchmark_params, ParamKind};

    #[test]
    fn step_schedules() {
        assert_eq!(StepSchedule::Harmonic.theta(4), 0.25);
        assert_eq!(StepSchedule::Constant(1.0).theta(9), 1.0);
        assert!((StepSchedule::Power(0.75).theta(16) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::default().validate(2).is_ok());
        let bad = FitConfig {
            gibbs_c: 0,
            ..FitConfig::default()
        };
        assert!(bad.validate(2).is_err());
        let bad = FitConfig {
            penalties: vec![Penalty::none(); 3],
            ..FitConfig::default()
        };
        assert!(bad.validate(2).is_err());
    }

    #[test]
    fn random_init_ranges() {
        let m =
            make_benchmark_params(ParamKind::Strict, 18, &[6, 2], ObservedFamily::NORMAL).unwrap();
        let (data, _) = sample(&m, 30, 1).unwrap();
        let init = random_init(&data, &[6, 2], 4).unwrap();
        let m0 = &init.model0;
        assert!(m0
            .coefs
            .iter()
            .all(|b| b.column(0).iter().all(|&v| (-1.0..=0.0).contains(&v))));
        assert!(m0.coefs.iter().all(|b| b
            .slice(s![.., 1..])
            .iter()
            .all(|&v| (0.0..=1.0).contains(&v))));
        assert!(m0
            .gamma
            .as_ref()
            .unwrap()
            .iter()
            .all(|&g| (0.5..=1.5).contains(&g)));
        assert_eq!(init.a0.layers[0].dim(), (30, 6));
    }
}
