//! Model parameters, exact sampling, enumerated likelihood and the benchmark
//! parameter sets.
//!
//! Layer indexing follows the generative direction: `dims[0]` is the width of
//! the shallowest latent layer `A^(1)` and `dims[D-1]` the width of the top
//! layer. `coefs[d]` holds `B^(d+1)`, whose rows index the layer below it
//! (the observed layer for `d = 0`) and whose first column is the intercept.
//!
//! Latent configurations of a layer of width `K` are indexed by integers in
//! `0..2^K` with the first coordinate as the most significant bit, so integer
//! order coincides with lexicographic order of the binary vectors.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use statrs::function::gamma::ln_gamma;

use crate::error::{DdeError, Result};
use crate::family::{log1pexp, log_bernoulli, logsumexp, sigmoid, FamilyKind, ObservedFamily};
use crate::rng::row_rng;

/// Default bound on the total number of latent bits for exact enumeration.
pub const ENUMERATION_CAP: usize = 20;

/// Default tolerance for reading graphs off coefficients loaded from files.
pub const GRAPH_EPS: f64 = 1e-8;

const MAX_LOG_RATE: f64 = 30.0;

#[derive(Clone, Debug, PartialEq)]
pub struct DdeModel {
    /// `[K^(1), ..., K^(D)]`.
    pub dims: Vec<usize>,
    /// Observed dimension `J`.
    pub n_obs: usize,
    pub family: ObservedFamily,
    /// Top-layer Bernoulli proportions, length `K^(D)`.
    pub p: Array1<f64>,
    /// `coefs[d]` is `B^(d+1)`, shape `K^(d) x (K^(d+1) + 1)` with `K^(0) = J`.
    pub coefs: Vec<Array2<f64>>,
    /// Normal standard deviations, present iff the family has dispersion.
    pub gamma: Option<Array1<f64>>,
}

/// Observed `N x J` responses.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub y: Array2<f64>,
    pub family: ObservedFamily,
}

/// Realized or estimated latent states; `layers[d]` is `A^(d+1)`, `N x K^(d+1)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatentAssignment {
    pub layers: Vec<Array2<u8>>,
}

/// Per-layer binary adjacency matrices `G^(d)`, `K^(d-1) x K^(d)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSet {
    pub layers: Vec<Array2<u8>>,
}

/// Which benchmark coefficient family to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    /// Two identity blocks plus a banded block: two pure children per latent.
    Strict,
    /// Triangular-band blocks without pure children.
    Generic,
}

impl std::str::FromStr for ParamKind {
    type Err = DdeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "strict" | "s" => Ok(ParamKind::Strict),
            "generic" | "g" => Ok(ParamKind::Generic),
            other => Err(DdeError::invalid(format!(
                "unknown parameter kind '{other}'"
            ))),
        }
    }
}

impl Dataset {
    pub fn new(y: Array2<f64>, family: ObservedFamily) -> Result<Self> {
        if let Some(((i, j), v)) = y.indexed_iter().find(|(_, v)| !family.in_support(**v)) {
            return Err(DdeError::invalid(format!(
                "cell ({i},{j}) = {v} is outside the {} sample space",
                family.kind
            )));
        }
        Ok(Self { y, family })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn j(&self) -> usize {
        self.y.ncols()
    }
}

impl LatentAssignment {
    pub fn n(&self) -> usize {
        self.layers.first().map_or(0, |a| a.nrows())
    }

    pub fn check_against(&self, model: &DdeModel) -> Result<()> {
        if self.layers.len() != model.depth() {
            return Err(DdeError::shape(format!(
                "latent assignment has {} layers, model has {}",
                self.layers.len(),
                model.depth()
            )));
        }
        let n = self.n();
        for (d, (a, &k)) in self.layers.iter().zip(&model.dims).enumerate() {
            if a.ncols() != k || a.nrows() != n {
                return Err(DdeError::shape(format!(
                    "latent layer {} is {}x{}, expected {n}x{k}",
                    d + 1,
                    a.nrows(),
                    a.ncols()
                )));
            }
            if a.iter().any(|&v| v > 1) {
                return Err(DdeError::invalid(format!(
                    "latent layer {} is not binary",
                    d + 1
                )));
            }
        }
        Ok(())
    }
}

impl DdeModel {
    pub fn depth(&self) -> usize {
        self.dims.len()
    }

    /// Total number of latent bits `sum_d K^(d)`.
    pub fn latent_bits(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Width of the layer below `coefs[d]`: `J` for `d = 0`.
    pub fn child_width(&self, d: usize) -> usize {
        if d == 0 {
            self.n_obs
        } else {
            self.dims[d - 1]
        }
    }

    pub fn gamma_at(&self, j: usize) -> f64 {
        self.gamma.as_ref().map_or(1.0, |g| g[j])
    }

    /// Checks shapes and the hard parameter constraints (`p` in (0,1),
    /// positive dispersions, finite coefficients). The shrinking-ladder shape
    /// is only logged.
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() {
            return Err(DdeError::invalid("model needs at least one latent layer"));
        }
        if self.dims.contains(&0) || self.n_obs == 0 {
            return Err(DdeError::invalid("layer widths must be positive"));
        }
        if self.dims.iter().any(|&k| k > 63) {
            return Err(DdeError::invalid(
                "latent layers wider than 63 are not supported",
            ));
        }
        if self.coefs.len() != self.depth() {
            return Err(DdeError::shape(format!(
                "{} coefficient matrices for {} layers",
                self.coefs.len(),
                self.depth()
            )));
        }
        for (d, b) in self.coefs.iter().enumerate() {
            let rows = self.child_width(d);
            let cols = self.dims[d] + 1;
            if b.dim() != (rows, cols) {
                return Err(DdeError::shape(format!(
                    "B^({}) is {}x{}, expected {rows}x{cols}",
                    d + 1,
                    b.nrows(),
                    b.ncols()
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(DdeError::invalid(format!(
                    "B^({}) has non-finite entries",
                    d + 1
                )));
            }
        }
        let top = *self.dims.last().unwrap();
        if self.p.len() != top {
            return Err(DdeError::shape(format!(
                "p has length {}, expected {top}",
                self.p.len()
            )));
        }
        if self.p.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(DdeError::invalid(
                "top-layer proportions must lie in (0, 1)",
            ));
        }
        match (&self.gamma, self.family.has_dispersion()) {
            (Some(g), true) => {
                if g.len() != self.n_obs {
                    return Err(DdeError::shape("gamma length differs from J"));
                }
                if g.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return Err(DdeError::invalid("dispersions must be positive"));
                }
            }
            (None, false) => {}
            (Some(_), false) => {
                return Err(DdeError::invalid(format!(
                    "the {} family has no dispersion parameter",
                    self.family.kind
                )))
            }
            (None, true) => return Err(DdeError::invalid("Normal models need gamma")),
        }
        let ladder_ok = self.n_obs > self.dims[0] && self.dims.windows(2).all(|w| w[0] > w[1]);
        if !ladder_ok {
            log::warn!(
                "layer widths {:?} under J={} are not a shrinking ladder",
                self.dims,
                self.n_obs
            );
        }
        Ok(())
    }

    pub fn check_data(&self, data: &Dataset) -> Result<()> {
        if data.j() != self.n_obs {
            return Err(DdeError::shape(format!(
                "data has {} columns, model expects J={}",
                data.j(),
                self.n_obs
            )));
        }
        if data.family != self.family {
            return Err(DdeError::invalid(format!(
                "data family {} differs from model family {}",
                data.family.kind, self.family.kind
            )));
        }
        Ok(())
    }

    /// All continuous parameters as one vector: `p`, then each `B^(d)`
    /// row-major, then `gamma`.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.p.to_vec();
        for b in &self.coefs {
            out.extend(b.iter().copied());
        }
        if let Some(g) = &self.gamma {
            out.extend(g.iter().copied());
        }
        out
    }

    /// Number of continuous parameters.
    pub fn n_params(&self) -> usize {
        self.p.len()
            + self.coefs.iter().map(|b| b.len()).sum::<usize>()
            + self.gamma.as_ref().map_or(0, |g| g.len())
    }

    /// Number of nonzero continuous parameters.
    pub fn n_nonzero(&self) -> usize {
        self.flatten().iter().filter(|v| **v != 0.0).count()
    }
}

/// `eta(i, k) = B[k, 0] + sum_l B[k, l+1] * parent(i, l)`.
pub fn linear_predictors(b: &Array2<f64>, parent: &Array2<u8>) -> Result<Array2<f64>> {
    if b.ncols() != parent.ncols() + 1 {
        return Err(DdeError::shape(format!(
            "coefficients have {} columns but the parent layer has width {}",
            b.ncols(),
            parent.ncols()
        )));
    }
    let slopes = b.slice(s![.., 1..]);
    let parent = parent.mapv(f64::from);
    let mut eta = parent.dot(&slopes.t());
    eta += &b.column(0);
    Ok(eta)
}

/// Linear predictor of one child row for one parent configuration.
#[inline]
pub(crate) fn row_predictor(b_row: ArrayView1<f64>, parent: &[u8]) -> f64 {
    let mut eta = b_row[0];
    for (l, &a) in parent.iter().enumerate() {
        if a != 0 {
            eta += b_row[l + 1];
        }
    }
    eta
}

/// Bits of configuration `c` in a layer of width `k`, first coordinate first.
pub fn config_bits(c: usize, k: usize) -> Vec<u8> {
    (0..k).map(|l| ((c >> (k - 1 - l)) & 1) as u8).collect()
}

/// Inverse of [`config_bits`].
pub fn config_index(bits: &[u8]) -> usize {
    bits.iter()
        .fold(0usize, |acc, &b| (acc << 1) | usize::from(b))
}

/// Draws `n` samples top-down. Row `i` uses its own stream derived from
/// `(seed, i)`; within a row the draw order is: top layer coordinates in
/// order, then each shallower layer, then the observed coordinates.
pub fn sample(model: &DdeModel, n: usize, seed: u64) -> Result<(Dataset, LatentAssignment)> {
    model.validate()?;
    if n == 0 {
        return Err(DdeError::invalid("sample size must be at least 1"));
    }
    let depth = model.depth();
    let rows: Vec<(Vec<Vec<u8>>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = row_rng(seed, i);
            let mut layers: Vec<Vec<u8>> = vec![Vec::new(); depth];
            layers[depth - 1] = model
                .p
                .iter()
                .map(|&p| u8::from(rng.random::<f64>() < p))
                .collect();
            for d in (0..depth - 1).rev() {
                let b = &model.coefs[d + 1];
                let parent = layers[d + 1].clone();
                layers[d] = (0..model.dims[d])
                    .map(|k| {
                        let eta = row_predictor(b.row(k), &parent);
                        u8::from(rng.random::<f64>() < sigmoid(eta))
                    })
                    .collect();
            }
            let b = &model.coefs[0];
            let y = (0..model.n_obs)
                .map(|j| {
                    let eta = row_predictor(b.row(j), &layers[0]);
                    model.family.sample(&mut rng, eta, model.gamma_at(j))
                })
                .collect();
            (layers, y)
        })
        .collect();

    let mut y = Array2::zeros((n, model.n_obs));
    let mut layers: Vec<Array2<u8>> = model.dims.iter().map(|&k| Array2::zeros((n, k))).collect();
    for (i, (lat, obs)) in rows.into_iter().enumerate() {
        y.row_mut(i).assign(&Array1::from(obs));
        for (d, a) in lat.into_iter().enumerate() {
            layers[d].row_mut(i).assign(&Array1::from(a));
        }
    }
    Ok((
        Dataset {
            y,
            family: model.family,
        },
        LatentAssignment { layers },
    ))
}

/// Cached tables for exact enumeration over all latent configurations.
///
/// The latent layers form a Markov chain `A^(D) -> ... -> A^(1) -> Y`, so the
/// marginal likelihood only needs the prior pmf of `A^(1)` and the observed
/// layer's linear predictors for every `A^(1)` configuration.
#[derive(Clone, Debug)]
pub struct Enumerator {
    /// `log_prior[d][c] = log P(A^(d+1) = c)`.
    pub log_prior: Vec<Vec<f64>>,
    /// `transition[d][(a, b)] = log P(A^(d) = a | A^(d+1) = b)` for `d >= 1`;
    /// `transition[0]` is empty.
    pub transition: Vec<Array2<f64>>,
    /// Observed-layer predictors, `2^K1 x J`.
    pub obs_eta: Array2<f64>,
    /// `log P(y | A^(1) = c) = obs_lin[c] . y - obs_cumulant[c] + h(y)`.
    obs_lin: Array2<f64>,
    obs_cumulant: Array1<f64>,
    family: ObservedFamily,
    inv_var: Option<Array1<f64>>,
    log_norm: f64,
}

pub fn check_capacity(model: &DdeModel, cap: usize) -> Result<()> {
    let bits = model.latent_bits();
    if bits > cap {
        return Err(DdeError::Capacity { bits, cap });
    }
    Ok(())
}

impl Enumerator {
    pub fn new(model: &DdeModel, cap: usize) -> Result<Self> {
        model.validate()?;
        check_capacity(model, cap)?;
        let depth = model.depth();
        let mut log_prior = vec![Vec::new(); depth];
        let top = model.dims[depth - 1];
        log_prior[depth - 1] = (0..1usize << top)
            .map(|c| {
                config_bits(c, top)
                    .iter()
                    .zip(model.p.iter())
                    .map(|(&a, &p)| if a == 1 { p.ln() } else { (1.0 - p).ln() })
                    .sum()
            })
            .collect();

        let mut transition = vec![Array2::zeros((0, 0)); depth];
        for d in (1..depth).rev() {
            let child_k = model.dims[d - 1];
            let parent_k = model.dims[d];
            let b = &model.coefs[d];
            let mut t = Array2::zeros((1 << child_k, 1 << parent_k));
            for pc in 0..1usize << parent_k {
                let parent = config_bits(pc, parent_k);
                let etas: Vec<f64> = (0..child_k)
                    .map(|k| row_predictor(b.row(k), &parent))
                    .collect();
                for cc in 0..1usize << child_k {
                    let child = config_bits(cc, child_k);
                    t[[cc, pc]] = child
                        .iter()
                        .zip(&etas)
                        .map(|(&a, &eta)| log_bernoulli(f64::from(a), eta))
                        .sum();
                }
            }
            let prior_parent = &log_prior[d];
            log_prior[d - 1] = (0..1usize << child_k)
                .map(|cc| {
                    let terms: Vec<f64> = (0..1usize << parent_k)
                        .map(|pc| t[[cc, pc]] + prior_parent[pc])
                        .collect();
                    logsumexp(&terms)
                })
                .collect();
            transition[d] = t;
        }

        let k1 = model.dims[0];
        let mut obs_eta = Array2::zeros((1 << k1, model.n_obs));
        for c in 0..1usize << k1 {
            let bits = config_bits(c, k1);
            for j in 0..model.n_obs {
                obs_eta[[c, j]] = row_predictor(model.coefs[0].row(j), &bits);
            }
        }
        let (obs_lin, obs_cumulant, inv_var, log_norm) = match model.family.kind {
            FamilyKind::Bernoulli => {
                let cum =
                    obs_eta.map_axis(Axis(1), |r| r.iter().map(|&e| log1pexp(e)).sum::<f64>());
                (obs_eta.clone(), cum, None, 0.0)
            }
            FamilyKind::Poisson => {
                let lin = obs_eta.mapv(|e| e.min(MAX_LOG_RATE));
                let cum = lin.map_axis(Axis(1), |r| r.iter().map(|e| e.exp()).sum::<f64>());
                (lin, cum, None, 0.0)
            }
            FamilyKind::Normal => {
                let gamma = model.gamma.as_ref().expect("validated");
                let iv = gamma.mapv(|g| 1.0 / (g * g));
                let lin = &obs_eta * &iv;
                let cum = (&obs_eta * &lin).sum_axis(Axis(1)) * 0.5;
                let log_norm = -(model.n_obs as f64) * 0.5 * (2.0 * std::f64::consts::PI).ln()
                    - gamma.iter().map(|g| g.ln()).sum::<f64>();
                (lin, cum, Some(iv), log_norm)
            }
        };
        Ok(Self {
            log_prior,
            transition,
            obs_eta,
            obs_lin,
            obs_cumulant,
            family: model.family,
            inv_var,
            log_norm,
        })
    }

    /// The part of `log P(y | A^(1))` that does not depend on the latents.
    pub fn obs_offset(&self, y: ArrayView1<f64>) -> f64 {
        match self.family.kind {
            FamilyKind::Bernoulli => 0.0,
            FamilyKind::Poisson => -y.iter().map(|&v| ln_gamma(v + 1.0)).sum::<f64>(),
            FamilyKind::Normal => {
                let iv = self.inv_var.as_ref().expect("normal");
                self.log_norm - 0.5 * y.iter().zip(iv).map(|(v, w)| v * v * w).sum::<f64>()
            }
        }
    }

    /// `log P(y | A^(1) = c)` for every first-layer configuration `c`.
    pub fn obs_loglik(&self, y: ArrayView1<f64>) -> Vec<f64> {
        let h = self.obs_offset(y);
        let lin = self.obs_lin.dot(&y);
        lin.iter()
            .zip(self.obs_cumulant.iter())
            .map(|(l, a)| l - a + h)
            .collect()
    }

    /// Row-batched [`Enumerator::obs_loglik`]: an `n x 2^K1` matrix.
    pub fn obs_loglik_batch(&self, y: ndarray::ArrayView2<f64>) -> Array2<f64> {
        let mut ll = y.dot(&self.obs_lin.t());
        ll -= &self.obs_cumulant;
        for (mut row, yr) in ll.rows_mut().into_iter().zip(y.rows()) {
            let h = self.obs_offset(yr);
            row += h;
        }
        ll
    }

    pub fn row_logprob(&self, y: ArrayView1<f64>) -> f64 {
        let ll = self.obs_loglik(y);
        let terms: Vec<f64> = ll
            .iter()
            .zip(&self.log_prior[0])
            .map(|(a, b)| a + b)
            .collect();
        logsumexp(&terms)
    }
}

/// Log marginal probability of one observed row, by full enumeration.
pub fn marginal_logprob(model: &DdeModel, y: ArrayView1<f64>) -> Result<f64> {
    if y.len() != model.n_obs {
        return Err(DdeError::shape(format!(
            "row has length {}, expected {}",
            y.len(),
            model.n_obs
        )));
    }
    let e = Enumerator::new(model, ENUMERATION_CAP)?;
    Ok(e.row_logprob(y))
}

/// Marginal log-likelihood of a dataset.
pub fn loglik(model: &DdeModel, data: &Dataset) -> Result<f64> {
    loglik_with_cap(model, data, ENUMERATION_CAP)
}

pub fn loglik_with_cap(model: &DdeModel, data: &Dataset, cap: usize) -> Result<f64> {
    model.check_data(data)?;
    let e = Enumerator::new(model, cap)?;
    let per_row: Vec<f64> = data
        .y
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|row| e.row_logprob(row))
        .collect();
    Ok(per_row.iter().sum())
}

/// Reads `g = 1(beta != 0)` off every slope.
pub fn graphs_from_coefficients(model: &DdeModel) -> GraphSet {
    graphs_with_tolerance(model, 0.0)
}

/// Same as [`graphs_from_coefficients`] but treats `|beta| <= eps` as zero.
pub fn graphs_with_tolerance(model: &DdeModel, eps: f64) -> GraphSet {
    let layers = model
        .coefs
        .iter()
        .map(|b| b.slice(s![.., 1..]).mapv(|v| u8::from(v.abs() > eps)))
        .collect();
    GraphSet { layers }
}

fn strict_block(k: usize) -> Array2<f64> {
    // 4 on the diagonal, 4/3 where |row - col| = k/2 (only for even k).
    Array2::from_shape_fn((k, k), |(j, l)| {
        if j == l {
            4.0
        } else if k.is_multiple_of(2) && j.abs_diff(l) == k / 2 {
            4.0 / 3.0
        } else {
            0.0
        }
    })
}

fn banded_block(k: usize) -> Array2<f64> {
    // 4 on the diagonal, 4/3 on the first ceil(k/3) superdiagonals.
    let width = k.div_ceil(3);
    Array2::from_shape_fn((k, k), |(j, l)| {
        if j == l {
            4.0
        } else if l > j && l - j <= width {
            4.0 / 3.0
        } else {
            0.0
        }
    })
}

fn benchmark_layer(kind: ParamKind, rows: usize, k: usize) -> Result<Array2<f64>> {
    if rows != 3 * k {
        return Err(DdeError::invalid(format!(
            "benchmark parameters need each layer to be three times as wide as its parent \
             (got {rows} children for {k} parents)"
        )));
    }
    let (first, second) = match kind {
        ParamKind::Strict => (Array2::eye(k) * 4.0, Array2::eye(k) * 4.0),
        ParamKind::Generic => {
            let b2 = banded_block(k);
            let b2t = b2.t().to_owned();
            (b2, b2t)
        }
    };
    let third = strict_block(k);
    let mut b = Array2::zeros((rows, k + 1));
    for (block, (intercept, slopes)) in [(-2.0, first), (-4.0, second), (-2.0, third)]
        .into_iter()
        .enumerate()
    {
        let r = block * k..(block + 1) * k;
        b.slice_mut(s![r.clone(), 0]).fill(intercept);
        b.slice_mut(s![r, 1..]).assign(&slopes);
    }
    Ok(b)
}

/// Builds the strict (`B_s`) or generic (`B_g`) benchmark parameters.
///
/// Every layer must have three times as many children as parents. Top-layer
/// proportions are 0.5 and Normal dispersions 1. For generic Poisson models
/// the observed-layer intercepts are lowered so the rates stay moderate.
pub fn make_benchmark_params(
    kind: ParamKind,
    n_obs: usize,
    dims: &[usize],
    family: ObservedFamily,
) -> Result<DdeModel> {
    if dims.is_empty() {
        return Err(DdeError::invalid("need at least one latent layer"));
    }
    let mut coefs = Vec::with_capacity(dims.len());
    for (d, &k) in dims.iter().enumerate() {
        let rows = if d == 0 { n_obs } else { dims[d - 1] };
        coefs.push(benchmark_layer(kind, rows, k)?);
    }
    if kind == ParamKind::Generic && family.kind == FamilyKind::Poisson {
        let b1 = &mut coefs[0];
        let k1 = dims[0];
        if dims.len() >= 2 && dims[1] == 6 {
            for j in 0..n_obs {
                let total: f64 = b1.slice(s![j, 1..]).sum();
                b1[[j, 0]] = if total >= 8.0 { -10.0 } else { -5.0 };
            }
        } else {
            for j in 0..n_obs {
                b1[[j, 0]] = if j < k1 {
                    -3.0
                } else if j < 2 * k1 {
                    -5.0
                } else {
                    -2.0
                };
            }
        }
    }
    let top = *dims.last().unwrap();
    let model = DdeModel {
        dims: dims.to_vec(),
        n_obs,
        family,
        p: Array1::from_elem(top, 0.5),
        coefs,
        gamma: family.has_dispersion().then(|| Array1::ones(n_obs)),
    };
    model.validate()?;
    Ok(model)
}

/// Ladder `[3^(D-1) * top, ..., 3 * top, top]` with `J = 3^D * top`.
pub fn ladder_dims(depth: usize, top: usize) -> (usize, Vec<usize>) {
    let dims: Vec<usize> = (0..depth)
        .map(|d| top * 3usize.pow((depth - 1 - d) as u32))
        .collect();
    (dims[0] * 3, dims)
}
