//! Label alignment, recovery metrics, information criteria, latent
//! inference, reconstruction and topic-model metrics.

use log::warn;
use ndarray::{s, Array2, Axis};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::factorial::ln_binomial;

use crate::error::{DdeError, Result};
use crate::estimation::gibbs::sweep_in_place;
use crate::estimation::{pem_fit, FitConfig};
use crate::family::FamilyKind;
use crate::model::{
    config_bits, linear_predictors, loglik, sample, Dataset, DdeModel, Enumerator, GraphSet,
    LatentAssignment, ENUMERATION_CAP,
};
use crate::rng::{derive_seed, row_rng};
use crate::spectral::{spectral_init, SpectralConfig};

/// Gibbs sweeps used by the approximate latent estimate above the
/// enumeration cap.
pub const GIBBS_MAJORITY_SWEEPS: usize = 500;

const TIE_TOL: f64 = 1e-9;

/// Minimum-cost assignment of rows to columns, `perm[row] = column`. Among
/// optimal assignments the lexicographically smallest is returned.
pub fn hungarian(cost: &Array2<f64>) -> Result<Vec<usize>> {
    let n = cost.nrows();
    if cost.ncols() != n {
        return Err(DdeError::shape(format!(
            "cost matrix is {}x{}, expected square",
            n,
            cost.ncols()
        )));
    }
    if cost.iter().any(|v| !v.is_finite()) {
        return Err(DdeError::invalid("cost matrix has non-finite entries"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let (best, _) = assignment(cost);
    let tol = TIE_TOL * (1.0 + best.abs());
    // Fix rows one at a time to the smallest column that keeps the optimum.
    let mut perm = Vec::with_capacity(n);
    let mut fixed = 0.0;
    let mut free_cols: Vec<usize> = (0..n).collect();
    for r in 0..n {
        let rest_rows: Vec<usize> = (r + 1..n).collect();
        let mut chosen = None;
        for (ci, &c) in free_cols.iter().enumerate() {
            let cols: Vec<usize> = free_cols.iter().copied().filter(|&x| x != c).collect();
            let sub = Array2::from_shape_fn((rest_rows.len(), cols.len()), |(i, j)| {
                cost[[rest_rows[i], cols[j]]]
            });
            let rest = if rest_rows.is_empty() {
                0.0
            } else {
                assignment(&sub).0
            };
            if fixed + cost[[r, c]] + rest <= best + tol {
                chosen = Some(ci);
                break;
            }
        }
        let ci = chosen.expect("an optimal completion always exists");
        let c = free_cols.remove(ci);
        fixed += cost[[r, c]];
        perm.push(c);
    }
    Ok(perm)
}

/// O(n^3) shortest-augmenting-path assignment with potentials. Returns the
/// optimal total and `perm[row] = column`.
fn assignment(cost: &Array2<f64>) -> (f64, Vec<usize>) {
    let n = cost.nrows();
    let inf = f64::INFINITY;
    // 1-based arrays; p[j] = row matched to column j.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    let total = (0..n).map(|i| cost[[i, perm[i]]]).sum();
    (total, perm)
}

/// Per-layer label permutations; `perms[d][k]` is the estimated index
/// matched to true latent `k` of layer `d + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub perms: Vec<Vec<usize>>,
}

impl Alignment {
    pub fn identity(dims: &[usize]) -> Self {
        Self {
            perms: dims.iter().map(|&k| (0..k).collect()).collect(),
        }
    }
}

fn check_same_shape(a: &DdeModel, b: &DdeModel) -> Result<()> {
    if a.dims != b.dims || a.n_obs != b.n_obs {
        return Err(DdeError::invalid(format!(
            "model dimensions differ: J={} K={:?} vs J={} K={:?}",
            a.n_obs, a.dims, b.n_obs, b.dims
        )));
    }
    if a.family != b.family {
        return Err(DdeError::invalid("models use different observed families"));
    }
    Ok(())
}

/// Applies `a` to a coefficient matrix of layer `d` (0-based): rows follow
/// the permutation of layer `d - 1`, slope columns that of layer `d`.
fn permute_coefs(b: &Array2<f64>, a: &Alignment, d: usize) -> Array2<f64> {
    let cols = &a.perms[d];
    let rows: Vec<usize> = if d == 0 {
        (0..b.nrows()).collect()
    } else {
        a.perms[d - 1].clone()
    };
    Array2::from_shape_fn(b.dim(), |(r, c)| {
        if c == 0 {
            b[[rows[r], 0]]
        } else {
            b[[rows[r], cols[c - 1] + 1]]
        }
    })
}

fn permute_graph(g: &Array2<u8>, a: &Alignment, d: usize) -> Array2<u8> {
    let cols = &a.perms[d];
    let rows: Vec<usize> = if d == 0 {
        (0..g.nrows()).collect()
    } else {
        a.perms[d - 1].clone()
    };
    Array2::from_shape_fn(g.dim(), |(r, c)| g[[rows[r], cols[c]]])
}

/// Relabels an estimated model into the true model's labels.
pub fn apply_alignment(model: &DdeModel, a: &Alignment) -> DdeModel {
    let depth = model.depth();
    let mut out = model.clone();
    for d in 0..depth {
        out.coefs[d] = permute_coefs(&model.coefs[d], a, d);
    }
    out.p = a.perms[depth - 1].iter().map(|&k| model.p[k]).collect();
    out
}

/// Bottom-up alignment: at each layer the cost between true latent `k` and
/// estimated latent `l` is the squared distance of their slope columns,
/// after the rows have been relabelled by the layer below.
pub fn align(model_hat: &DdeModel, model_star: &DdeModel) -> Result<Alignment> {
    check_same_shape(model_hat, model_star)?;
    let mut a = Alignment::identity(&model_hat.dims);
    for d in 0..model_hat.depth() {
        let rows: Vec<usize> = if d == 0 {
            (0..model_hat.n_obs).collect()
        } else {
            a.perms[d - 1].clone()
        };
        let bh = &model_hat.coefs[d];
        let bs = &model_star.coefs[d];
        let k = model_hat.dims[d];
        let cost = Array2::from_shape_fn((k, k), |(t, e)| {
            (0..rows.len())
                .map(|r| (bs[[r, t + 1]] - bh[[rows[r], e + 1]]).powi(2))
                .sum::<f64>()
        });
        a.perms[d] = hungarian(&cost)?;
    }
    Ok(a)
}

/// Total layer-`d` alignment cost of a permutation set.
pub fn alignment_cost(model_hat: &DdeModel, model_star: &DdeModel, a: &Alignment, d: usize) -> f64 {
    let aligned = permute_coefs(&model_hat.coefs[d], a, d);
    let bs = &model_star.coefs[d];
    aligned
        .slice(s![.., 1..])
        .iter()
        .zip(bs.slice(s![.., 1..]).iter())
        .map(|(x, y)| (x - y).powi(2))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphAccuracy {
    pub per_layer: Vec<f64>,
    /// Entry-weighted mean over all layers.
    pub overall: f64,
}

/// Entrywise agreement of aligned graphs.
pub fn accuracy_g(g_hat: &GraphSet, g_star: &GraphSet, a: &Alignment) -> Result<GraphAccuracy> {
    if g_hat.layers.len() != g_star.layers.len() || g_hat.layers.len() != a.perms.len() {
        return Err(DdeError::shape(
            "graph sets and alignment have different depths",
        ));
    }
    let mut per_layer = Vec::new();
    let (mut hits, mut total) = (0usize, 0usize);
    for (d, (gh, gs)) in g_hat.layers.iter().zip(&g_star.layers).enumerate() {
        if gh.dim() != gs.dim() || a.perms[d].len() != gs.ncols() {
            return Err(DdeError::shape(format!(
                "graph layer {} shapes differ",
                d + 1
            )));
        }
        let aligned = permute_graph(gh, a, d);
        let agree = aligned
            .iter()
            .zip(gs.iter())
            .filter(|(x, y)| (**x != 0) == (**y != 0))
            .count();
        hits += agree;
        total += gs.len();
        per_layer.push(agree as f64 / gs.len().max(1) as f64);
    }
    Ok(GraphAccuracy {
        per_layer,
        overall: hits as f64 / total.max(1) as f64,
    })
}

/// Root mean squared error over `p`, every coefficient and `gamma` after
/// alignment.
pub fn rmse_theta(model_hat: &DdeModel, model_star: &DdeModel, a: &Alignment) -> Result<f64> {
    check_same_shape(model_hat, model_star)?;
    let x = apply_alignment(model_hat, a).flatten();
    let y = model_star.flatten();
    let sse: f64 = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

/// `-2 loglik + df log N + 2 log C(|Theta|, df)` with `df` the number of
/// nonzero parameters.
pub fn ebic(model_hat: &DdeModel, data: &Dataset) -> Result<f64> {
    let ll = loglik(model_hat, data)?;
    Ok(ebic_from_parts(
        ll,
        model_hat.n_params(),
        model_hat.n_nonzero(),
        data.n(),
    ))
}

pub fn ebic_from_parts(loglik: f64, n_params: usize, df: usize, n: usize) -> f64 {
    -2.0 * loglik + df as f64 * (n as f64).ln() + 2.0 * ln_binomial(n_params as u64, df as u64)
}

/// One candidate fit used by the likelihood-based selectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CandidateFit {
    pub dims: Vec<usize>,
    pub loglik: f64,
    pub df: usize,
    pub n_params: usize,
    pub ebic: f64,
}

/// Fits every candidate with the spectral initializer and penalized EM.
pub fn fit_candidates(
    data: &Dataset,
    candidates: &[Vec<usize>],
    spectral: &SpectralConfig,
    cfg: &FitConfig,
) -> Result<Vec<CandidateFit>> {
    candidates
        .iter()
        .map(|dims| {
            let init = spectral_init(data, dims, spectral)?;
            let rep = pem_fit(data, &init.model0, cfg)?;
            let ll = loglik(&rep.model_hat, data)?;
            let (df, n_params) = (rep.model_hat.n_nonzero(), rep.model_hat.n_params());
            Ok(CandidateFit {
                dims: dims.clone(),
                loglik: ll,
                df,
                n_params,
                ebic: ebic_from_parts(ll, n_params, df, data.n()),
            })
        })
        .collect()
}

/// Index of the candidate with the smallest EBIC (first on ties).
pub fn ebic_select(fits: &[CandidateFit]) -> Option<usize> {
    (0..fits.len()).min_by(|&a, &b| fits[a].ebic.total_cmp(&fits[b].ebic))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LrtStep {
    pub statistic: f64,
    pub df: f64,
    pub critical: f64,
    pub rejected: bool,
}

/// Sequential likelihood-ratio tests over candidates in increasing order:
/// stops at the first candidate whose successor is not significantly
/// better at level `alpha`. Degrees of freedom below 1 are raised to 1.
pub fn lrt_select(fits: &[CandidateFit], alpha: f64) -> Result<(usize, Vec<LrtStep>)> {
    if fits.is_empty() {
        return Err(DdeError::invalid("no candidates to select from"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DdeError::invalid("alpha must lie in (0, 1)"));
    }
    let mut steps = Vec::new();
    for i in 0..fits.len() - 1 {
        let stat = (2.0 * (fits[i + 1].loglik - fits[i].loglik)).max(0.0);
        let df = (fits[i + 1].df as f64 - fits[i].df as f64).max(1.0);
        let chi = ChiSquared::new(df).map_err(|e| DdeError::Numeric(e.to_string()))?;
        let critical = chi.inverse_cdf(1.0 - alpha);
        let rejected = stat > critical;
        steps.push(LrtStep {
            statistic: stat,
            df,
            critical,
            rejected,
        });
        if !rejected {
            return Ok((i, steps));
        }
    }
    Ok((fits.len() - 1, steps))
}

/// Candidate dimension lists replacing layer `layer` (0-based) of `dims`.
pub fn candidates_for_layer(dims: &[usize], layer: usize, grid: &[usize]) -> Vec<Vec<usize>> {
    grid.iter()
        .map(|&k| {
            let mut d = dims.to_vec();
            d[layer] = k;
            d
        })
        .collect()
}

/// Latent estimate per row.
#[derive(Clone, Debug)]
pub struct PosteriorLatents {
    pub latents: LatentAssignment,
    /// True when the Gibbs majority vote replaced the exact argmax.
    pub approximate: bool,
}

/// Joint posterior mode of all latent layers for every row (max-product over
/// the enumerated configurations, ties to the smallest configuration index
/// from the top layer down). Above the enumeration cap, falls back to a
/// per-bit majority vote over Gibbs sweeps.
pub fn posterior_latents(model: &DdeModel, data: &Dataset, seed: u64) -> Result<PosteriorLatents> {
    model.check_data(data)?;
    if model.latent_bits() > ENUMERATION_CAP {
        return Ok(PosteriorLatents {
            latents: gibbs_majority(model, data, seed)?,
            approximate: true,
        });
    }
    let e = Enumerator::new(model, ENUMERATION_CAP)?;
    let depth = model.depth();
    let n = data.n();
    let rows: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut msg = e.obs_loglik(data.y.row(i));
            // back[l][b] = best child config of layer l-1 given parent b
            let mut back: Vec<Vec<usize>> = vec![Vec::new(); depth];
            for (l, b) in back.iter_mut().enumerate().skip(1) {
                let t = &e.transition[l];
                let mut next = vec![f64::NEG_INFINITY; t.ncols()];
                *b = vec![0; t.ncols()];
                for (pb, nv) in next.iter_mut().enumerate() {
                    for (a, m) in msg.iter().enumerate() {
                        let v = t[[a, pb]] + m;
                        if v > *nv {
                            *nv = v;
                            b[pb] = a;
                        }
                    }
                }
                msg = next;
            }
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for (c, (m, p)) in msg.iter().zip(&e.log_prior[depth - 1]).enumerate() {
                if m + p > best_v {
                    best_v = m + p;
                    best = c;
                }
            }
            let mut cfg = vec![0; depth];
            cfg[depth - 1] = best;
            for l in (1..depth).rev() {
                cfg[l - 1] = back[l][cfg[l]];
            }
            cfg
        })
        .collect();
    let layers = (0..depth)
        .map(|d| {
            let k = model.dims[d];
            let mut a = Array2::zeros((n, k));
            for (i, cfg) in rows.iter().enumerate() {
                for (kk, b) in config_bits(cfg[d], k).into_iter().enumerate() {
                    a[[i, kk]] = b;
                }
            }
            a
        })
        .collect();
    Ok(PosteriorLatents {
        latents: LatentAssignment { layers },
        approximate: false,
    })
}

fn gibbs_majority(model: &DdeModel, data: &Dataset, seed: u64) -> Result<LatentAssignment> {
    let (_, mut a) = sample(model, data.n(), derive_seed(seed, 0x9B))?;
    let mut counts: Vec<Array2<u32>> = a.layers.iter().map(|m| Array2::zeros(m.dim())).collect();
    for s in 0..GIBBS_MAJORITY_SWEEPS {
        sweep_in_place(data, model, &mut a, derive_seed(seed, s as u64), 1);
        for (c, m) in counts.iter_mut().zip(&a.layers) {
            c.zip_mut_with(m, |x, &y| *x += u32::from(y));
        }
    }
    let half = GIBBS_MAJORITY_SWEEPS as u32 / 2;
    Ok(LatentAssignment {
        layers: counts
            .into_iter()
            .map(|c| c.mapv(|v| u8::from(v > half)))
            .collect(),
    })
}

/// Conditional mean `E(Y | A^(1))` for every cell.
pub fn reconstruct(model: &DdeModel, a: &LatentAssignment) -> Result<Array2<f64>> {
    a.check_against(model)?;
    let eta = linear_predictors(&model.coefs[0], &a.layers[0])?;
    Ok(eta.mapv(|v| model.family.mean(v)))
}

/// Poisson perplexity `exp(-sum y log(lambda / rowsum lambda) / sum y)`.
pub fn perplexity(model: &DdeModel, y: &Array2<f64>, a1: &Array2<u8>) -> Result<f64> {
    if model.family.kind != FamilyKind::Poisson {
        return Err(DdeError::UnsupportedFamily(model.family.kind));
    }
    if y.nrows() != a1.nrows() || y.ncols() != model.n_obs {
        return Err(DdeError::shape("counts and latents do not match the model"));
    }
    let eta = linear_predictors(&model.coefs[0], a1)?;
    let mut num = 0.0;
    let mut total = 0.0;
    for (yr, er) in y.rows().into_iter().zip(eta.rows()) {
        let max = er.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + er.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for (&c, &e) in yr.iter().zip(er.iter()) {
            if c > 0.0 {
                num += c * (e - lse);
                total += c;
            }
        }
    }
    if total == 0.0 {
        return Err(DdeError::invalid("no words to evaluate"));
    }
    Ok((-num / total).exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerplexityPair {
    pub train: f64,
    pub test: f64,
}

/// Train perplexity on the full counts with the joint posterior mode, and
/// test perplexity on a held-out share of each document's words whose
/// latents are estimated from the remaining words alone.
pub fn heldout_perplexity(
    model: &DdeModel,
    data: &Dataset,
    train_share: f64,
    seed: u64,
) -> Result<PerplexityPair> {
    if !(train_share > 0.0 && train_share < 1.0) {
        return Err(DdeError::invalid("train share must lie in (0, 1)"));
    }
    let full = posterior_latents(model, data, seed)?;
    let train = perplexity(model, &data.y, &full.latents.layers[0])?;
    let (n, j) = data.y.dim();
    let mut keep = Array2::zeros((n, j));
    for i in 0..n {
        let mut r: ChaCha8Rng = row_rng(derive_seed(seed, 0x5917), i);
        for jj in 0..j {
            let c = data.y[[i, jj]];
            if c > 0.0 {
                let bin = Binomial::new(c as u64, train_share)
                    .map_err(|e| DdeError::Numeric(e.to_string()))?;
                keep[[i, jj]] = bin.sample(&mut r) as f64;
            }
        }
    }
    let held = &data.y - &keep;
    let part = Dataset {
        y: keep,
        family: data.family,
    };
    let est = posterior_latents(model, &part, seed)?;
    let test = perplexity(model, &held, &est.latents.layers[0])?;
    Ok(PerplexityPair { train, test })
}

/// Document frequencies: `pair[[a, b]]` counts documents containing both
/// words, the diagonal single words.
#[derive(Clone, Debug, PartialEq)]
pub struct DocFreq {
    pub pair: Array2<f64>,
}

impl DocFreq {
    pub fn from_counts(y: &Array2<f64>) -> Self {
        let present = y.mapv(|v| f64::from(u8::from(v > 0.0)));
        Self {
            pair: present.t().dot(&present),
        }
    }

    pub fn single(&self, v: usize) -> f64 {
        self.pair[[v, v]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicMetrics {
    pub representatives: Vec<Vec<usize>>,
    pub neg_coherence: f64,
    pub similarity: usize,
}

/// Representative score of word `j` for topic `k`:
/// `max(min_{l != k} (beta_jk - beta_jl), 0)`; with a single topic the
/// score is `max(beta_jk, 0)`.
pub fn representative_scores(b1: &Array2<f64>) -> Array2<f64> {
    let slopes = b1.slice(s![.., 1..]);
    let k = slopes.ncols();
    Array2::from_shape_fn(slopes.dim(), |(j, t)| {
        let gap = (0..k)
            .filter(|&l| l != t)
            .map(|l| slopes[[j, t]] - slopes[[j, l]])
            .fold(f64::INFINITY, f64::min);
        let gap = if gap.is_finite() { gap } else { slopes[[j, t]] };
        gap.max(0.0)
    })
}

/// Top `top_m` words per topic by representative score (ties to the lower
/// index), the average negative coherence over pairs of distinct
/// representatives and the number of representatives shared across topics.
pub fn topic_metrics(b1: &Array2<f64>, freq: &DocFreq, top_m: usize) -> Result<TopicMetrics> {
    let j = b1.nrows();
    if freq.pair.dim() != (j, j) {
        return Err(DdeError::shape(format!(
            "document frequencies are {:?}, expected {j}x{j}",
            freq.pair.dim()
        )));
    }
    let scores = representative_scores(b1);
    let k = scores.ncols();
    let mut representatives = Vec::with_capacity(k);
    for t in 0..k {
        let mut words: Vec<usize> = (0..j)
            .filter(|&v| {
                let ok = freq.single(v) > 0.0;
                if !ok {
                    warn!("word {v} never occurs; excluded from topic {t}");
                }
                ok
            })
            .collect();
        words.sort_by(|&a, &b| scores[[b, t]].total_cmp(&scores[[a, t]]).then(a.cmp(&b)));
        words.truncate(top_m);
        representatives.push(words);
    }
    let mut coherence = 0.0;
    for words in &representatives {
        for &v1 in words {
            for &v2 in words {
                if v1 != v2 {
                    coherence += ((freq.pair[[v1, v2]] + 1.0) / freq.single(v2)).ln();
                }
            }
        }
    }
    let neg_coherence = if k == 0 { 0.0 } else { -coherence / k as f64 };
    let mut similarity = 0;
    for a in 0..k {
        for b in a + 1..k {
            similarity += representatives[a]
                .iter()
                .map(|v| representatives[b].iter().filter(|w| *w == v).count())
                .sum::<usize>();
        }
    }
    Ok(TopicMetrics {
        representatives,
        neg_coherence,
        similarity,
    })
}

/// Per-bit agreement between two latent matrices.
pub fn bit_agreement(a: &Array2<u8>, b: &Array2<u8>) -> f64 {
    let hits = a.iter().zip(b.iter()).filter(|(x, y)| x == y).count();
    hits as f64 / a.len().max(1) as f64
}

/// Relabels latent columns: column `k` of the result is column `perm[k]`.
pub fn permute_latents(a: &Array2<u8>, perm: &[usize]) -> Array2<u8> {
    a.select(Axis(1), perm)
}
