//! Simulation harness: simulate, initialize, fit, align and score over a
//! grid of sample sizes and replications.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DdeError, Result};
use crate::estimation::{fit, random_init, Algo, FitConfig, Penalty, StepSchedule};
use crate::evaluation::{accuracy_g, align, rmse_theta};
use crate::family::{FamilyKind, ObservedFamily};
use crate::model::{graphs_from_coefficients, make_benchmark_params, sample, DdeModel, ParamKind};
use crate::spectral::{select_latent_dims, spectral_init, SpectralConfig};
use crate::SCHEMA;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitKind {
    #[default]
    Spectral,
    Random,
}

fn default_reps() -> usize {
    20
}

fn default_algo() -> Algo {
    Algo::Saem
}

fn default_max_iter() -> usize {
    100
}

fn default_gibbs_c() -> usize {
    1
}

/// One benchmark sweep. Every replication `r` uses seed `seed + r` for both
/// simulation and fitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub family: FamilyKind,
    /// Observed dimension `J`.
    #[serde(rename = "J")]
    pub n_obs: usize,
    /// `[K^(1), ..., K^(D)]`.
    #[serde(rename = "K")]
    pub dims: Vec<usize>,
    pub param_kind: ParamKind,
    /// Sample sizes.
    #[serde(rename = "N")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_algo")]
    pub algo: Algo,
    #[serde(default)]
    pub init: InitKind,
    #[serde(default)]
    pub seed: u64,
    /// Per-layer penalties; empty means the default tuning.
    #[serde(default)]
    pub penalties: Vec<Penalty>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_gibbs_c")]
    pub gibbs_c: usize,
    /// Also run the spectral-ratio selector and score whether it recovers
    /// every `K^(d)`.
    #[serde(default)]
    pub select_k: bool,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(DdeError::invalid("reps must be at least 1"));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(DdeError::invalid("need at least one positive sample size"));
        }
        self.truth()?;
        self.fit_config(0).validate(self.dims.len())
    }

    pub fn truth(&self) -> Result<DdeModel> {
        make_benchmark_params(
            self.param_kind,
            self.n_obs,
            &self.dims,
            ObservedFamily::new(self.family),
        )
    }

    pub fn fit_config(&self, seed: u64) -> FitConfig {
        FitConfig {
            algo: self.algo,
            penalties: self.penalties.clone(),
            gibbs_c: self.gibbs_c,
            step: StepSchedule::Harmonic,
            max_iter: self.max_iter,
            conv_pem: None,
            conv_saem: None,
            seed,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| DdeError::invalid(format!("experiment spec: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| DdeError::invalid(format!("experiment spec: {e}")))
    }
}

/// Outcome of one replication. Metrics are `None` when the replication
/// failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepResult {
    #[serde(rename = "N")]
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    pub acc_per_layer: Option<Vec<f64>>,
    pub acc_overall: Option<f64>,
    pub rmse: Option<f64>,
    pub seconds: f64,
    pub iters: Option<usize>,
    pub converged: Option<bool>,
    pub selection_correct: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: Option<f64>,
    /// Sample standard deviation; absent with fewer than two values.
    pub sd: Option<f64>,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: None,
                sd: None,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = (n > 1).then(|| {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        });
        Self {
            mean: Some(mean),
            sd,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    #[serde(rename = "N")]
    pub n: usize,
    pub reps: usize,
    pub failures: usize,
    pub acc_per_layer: Vec<MeanSd>,
    pub acc_overall: MeanSd,
    pub rmse: MeanSd,
    pub seconds: MeanSd,
    pub selection_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub schema: String,
    pub spec: ExperimentSpec,
    pub settings: Vec<SettingSummary>,
    pub replications: Vec<RepResult>,
}

/// Runs one replication at sample size `n`.
pub fn run_replication(spec: &ExperimentSpec, n: usize, rep: usize) -> RepResult {
    let seed = spec.seed.wrapping_add(rep as u64);
    let start = Instant::now();
    let mut out = RepResult {
        n,
        rep,
        seed,
        acc_per_layer: None,
        acc_overall: None,
        rmse: None,
        seconds: 0.0,
        iters: None,
        converged: None,
        selection_correct: None,
        error: None,
    };
    let res = (|| -> Result<()> {
        let truth = spec.truth()?;
        let (data, _) = sample(&truth, n, seed)?;
        let scfg = SpectralConfig::default();
        if spec.select_k {
            let sel = select_latent_dims(&data, spec.dims.len(), &scfg, None)?;
            out.selection_correct = Some(sel.iter().zip(&spec.dims).all(|(s, &k)| s.chosen == k));
        }
        let init = match spec.init {
            InitKind::Spectral => spectral_init(&data, &spec.dims, &scfg)?,
            InitKind::Random => random_init(&data, &spec.dims, seed)?,
        };
        let rep = fit(&data, &init, &spec.fit_config(seed))?;
        let a = align(&rep.model_hat, &truth)?;
        let acc = accuracy_g(&rep.graphs_hat, &graphs_from_coefficients(&truth), &a)?;
        out.rmse = Some(rmse_theta(&rep.model_hat, &truth, &a)?);
        out.acc_per_layer = Some(acc.per_layer);
        out.acc_overall = Some(acc.overall);
        out.iters = Some(rep.iters);
        out.converged = Some(rep.converged);
        Ok(())
    })();
    if let Err(e) = res {
        log::warn!("replication {rep} at N={n} failed: {e}");
        out.error = Some(e.to_string());
    }
    out.seconds = start.elapsed().as_secs_f64();
    out
}

fn summarize(n: usize, depth: usize, reps: &[RepResult]) -> SettingSummary {
    let ok: Vec<&RepResult> = reps.iter().filter(|r| r.error.is_none()).collect();
    let col = |f: &dyn Fn(&RepResult) -> Option<f64>| -> Vec<f64> {
        ok.iter().filter_map(|r| f(r)).collect()
    };
    let acc_per_layer = (0..depth)
        .map(|d| MeanSd::of(&col(&|r| r.acc_per_layer.as_ref().map(|v| v[d]))))
        .collect();
    let sel: Vec<bool> = reps.iter().filter_map(|r| r.selection_correct).collect();
    SettingSummary {
        n,
        reps: reps.len(),
        failures: reps.len() - ok.len(),
        acc_per_layer,
        acc_overall: MeanSd::of(&col(&|r| r.acc_overall)),
        rmse: MeanSd::of(&col(&|r| r.rmse)),
        seconds: MeanSd::of(&reps.iter().map(|r| r.seconds).collect::<Vec<_>>()),
        selection_rate: (!sel.is_empty())
            .then(|| sel.iter().filter(|&&b| b).count() as f64 / sel.len() as f64),
    }
}

/// Runs the full sweep; replications run in parallel.
pub fn run_benchmark(spec: &ExperimentSpec) -> Result<BenchResult> {
    spec.validate()?;
    let mut settings = Vec::new();
    let mut replications = Vec::new();
    for &n in &spec.sizes {
        let reps: Vec<RepResult> = (0..spec.reps)
            .into_par_iter()
            .map(|r| run_replication(spec, n, r))
            .collect();
        settings.push(summarize(n, spec.dims.len(), &reps));
        replications.extend(reps);
    }
    Ok(BenchResult {
        schema: SCHEMA.to_string(),
        spec: spec.clone(),
        settings,
        replications,
    })
}

/// Plottable curves: one line per sample size and layer.
pub fn curves_csv(result: &BenchResult) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let mut out = String::from("N,layer,acc_mean,acc_sd,rmse_mean,rmse_sd,seconds_mean,failures\n");
    for s in &result.settings {
        for (d, acc) in s.acc_per_layer.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                s.n,
                d + 1,
                fmt(acc.mean),
                fmt(acc.sd),
                fmt(s.rmse.mean),
                fmt(s.rmse.sd),
                fmt(s.seconds.mean),
                s.failures
            ));
        }
    }
    out
}
