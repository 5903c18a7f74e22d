//! Complete-conditional Gibbs sweeps over all latent coordinates.
//!
//! A sweep visits the top layer first and then each shallower layer, with
//! coordinates in ascending order inside a layer, always conditioning on the
//! most recent values. Each row draws from its own random stream so the
//! result does not depend on how rows are scheduled across threads.

use ndarray::{ArrayView1, Axis};
use rand::Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::family::{log1pexp, log_bernoulli, logit, sigmoid, FamilyKind, ObservedFamily};
use crate::model::{row_predictor, Dataset, DdeModel, LatentAssignment};
use crate::rng::row_rng;

const MAX_LOG_RATE: f64 = 30.0;

/// `log P(y | eta1) - log P(y | eta0)` for one observed cell.
#[inline]
fn obs_log_ratio(family: ObservedFamily, y: f64, eta1: f64, eta0: f64, gamma: f64) -> f64 {
    match family.kind {
        FamilyKind::Bernoulli => y * (eta1 - eta0) - (log1pexp(eta1) - log1pexp(eta0)),
        FamilyKind::Poisson => {
            let (e1, e0) = (eta1.min(MAX_LOG_RATE), eta0.min(MAX_LOG_RATE));
            y * (e1 - e0) - (e1.exp() - e0.exp())
        }
        FamilyKind::Normal => {
            let (r0, r1) = (y - eta0, y - eta1);
            (r0 * r0 - r1 * r1) / (2.0 * gamma * gamma)
        }
    }
}

/// One sweep over the latent coordinates of a single row. `layers[l]` holds
/// the row's bits of `A^(l+1)`.
pub(crate) fn sweep_row<R: Rng + ?Sized>(
    model: &DdeModel,
    logit_p: &[f64],
    y: ArrayView1<f64>,
    layers: &mut [Vec<u8>],
    rng: &mut R,
) {
    let depth = model.depth();
    // eta[l][k]: predictor of node k of layer l given layer l+1 (l < D-1).
    let mut eta: Vec<Vec<f64>> = (0..depth.saturating_sub(1))
        .map(|l| {
            (0..model.dims[l])
                .map(|k| row_predictor(model.coefs[l + 1].row(k), &layers[l + 1]))
                .collect()
        })
        .collect();
    let mut eta_obs: Vec<f64> = (0..model.n_obs)
        .map(|j| row_predictor(model.coefs[0].row(j), &layers[0]))
        .collect();

    for l in (0..depth).rev() {
        let b = &model.coefs[l];
        for k in 0..model.dims[l] {
            let prior = if l == depth - 1 {
                logit_p[k]
            } else {
                eta[l][k]
            };
            let cur = f64::from(layers[l][k]);
            let mut diff = 0.0;
            let col = b.column(k + 1);
            if l == 0 {
                for (j, &bj) in col.iter().enumerate() {
                    if bj == 0.0 {
                        continue;
                    }
                    let e0 = eta_obs[j] - bj * cur;
                    diff += obs_log_ratio(model.family, y[j], e0 + bj, e0, model.gamma_at(j));
                }
            } else {
                for (c, &bc) in col.iter().enumerate() {
                    if bc == 0.0 {
                        continue;
                    }
                    let e0 = eta[l - 1][c] - bc * cur;
                    let x = f64::from(layers[l - 1][c]);
                    diff += log_bernoulli(x, e0 + bc) - log_bernoulli(x, e0);
                }
            }
            let u: f64 = rng.random();
            let new = u8::from(u < sigmoid(prior + diff));
            if new != layers[l][k] {
                let delta = f64::from(new) - cur;
                layers[l][k] = new;
                if l == 0 {
                    for (j, &bj) in col.iter().enumerate() {
                        eta_obs[j] += bj * delta;
                    }
                } else {
                    for (c, &bc) in col.iter().enumerate() {
                        eta[l - 1][c] += bc * delta;
                    }
                }
            }
        }
    }
}

pub(crate) fn logit_p(model: &DdeModel) -> Vec<f64> {
    model.p.iter().map(|&p| logit(p)).collect()
}

/// One Gibbs sweep over every row. Row `i` draws from stream `i` of `seed`.
pub fn gibbs_sweep(
    data: &Dataset,
    model: &DdeModel,
    a: &LatentAssignment,
    seed: u64,
) -> Result<LatentAssignment> {
    model.check_data(data)?;
    a.check_against(model)?;
    let mut out = a.clone();
    sweep_in_place(data, model, &mut out, seed, 1);
    Ok(out)
}

/// Runs `sweeps` consecutive sweeps on every row in place.
pub(crate) fn sweep_in_place(
    data: &Dataset,
    model: &DdeModel,
    a: &mut LatentAssignment,
    seed: u64,
    sweeps: usize,
) {
    let lp = logit_p(model);
    let n = data.n();
    let rows: Vec<Vec<Vec<u8>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = row_rng(seed, i);
            let mut layers: Vec<Vec<u8>> = a.layers.iter().map(|m| m.row(i).to_vec()).collect();
            for _ in 0..sweeps {
                sweep_row(model, &lp, data.y.row(i), &mut layers, &mut rng);
            }
            layers
        })
        .collect();
    for (i, layers) in rows.into_iter().enumerate() {
        for (m, bits) in a.layers.iter_mut().zip(layers) {
            for (dst, src) in m.index_axis_mut(Axis(0), i).iter_mut().zip(bits) {
                *dst = src;
            }
        }
    }
}
