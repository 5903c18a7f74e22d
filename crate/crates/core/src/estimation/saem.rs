//! Penalized SAEM: Gibbs simulation, stochastic averaging of the complete-data
//! sufficient statistics and a row-wise penalized M-step.

use std::time::Instant;

use ndarray::{Array1, Array2, Axis};

use super::gibbs::sweep_in_place;
use super::stats::{pack_bits, GaussianStats, GroupedStats, LayerStats};
use super::{mstep_all, Algo, FitConfig, FitReport};
use crate::error::{DdeError, Result};
use crate::family::FamilyKind;
use crate::model::{Dataset, DdeModel, LatentAssignment};
use crate::rng::derive_seed;
use crate::spectral::SpectralInit;

/// Complete-data statistics of one latent draw.
pub fn sample_stats(model: &DdeModel, data: &Dataset, a: &LatentAssignment) -> Vec<LayerStats> {
    let depth = model.depth();
    let n = data.n();
    let mut out = Vec::with_capacity(depth);
    for d in 0..depth {
        let parent = &a.layers[d];
        if d == 0 && model.family.kind == FamilyKind::Normal {
            let k = model.dims[0];
            let mut x = Array2::<f64>::ones((n, k + 1));
            x.slice_mut(ndarray::s![.., 1..])
                .assign(&parent.mapv(f64::from));
            let sxx = x.t().dot(&x);
            let sxy = x.t().dot(&data.y);
            let syy = data.y.mapv(|v| v * v).sum_axis(Axis(0));
            out.push(LayerStats::Gaussian(GaussianStats {
                sxx,
                sxy,
                syy,
                w: n as f64,
            }));
            continue;
        }
        let mut g = GroupedStats::new(model.dims[d], model.child_width(d));
        for i in 0..n {
            let key = pack_bits(parent.row(i).iter());
            if d == 0 {
                g.add(key, 1.0, data.y.row(i).iter().copied());
            } else {
                g.add(
                    key,
                    1.0,
                    a.layers[d - 1].row(i).iter().map(|&v| f64::from(v)),
                );
            }
        }
        out.push(LayerStats::Grouped(g));
    }
    out
}

fn top_means(a: &LatentAssignment) -> Array1<f64> {
    let top = a.layers.last().expect("at least one layer");
    top.mapv(f64::from).mean_axis(Axis(0)).expect("non-empty")
}

/// Penalized SAEM from a spectral (or random) starting point. Stops when the
/// Euclidean change in the flattened parameters drops below the threshold.
pub fn saem_fit(data: &Dataset, init: &SpectralInit, cfg: &FitConfig) -> Result<FitReport> {
    let start = Instant::now();
    let model0 = &init.model0;
    model0.validate()?;
    model0.check_data(data)?;
    init.a0.check_against(model0)?;
    if init.a0.n() != data.n() {
        return Err(DdeError::shape(format!(
            "initial latents have {} rows, data has {}",
            init.a0.n(),
            data.n()
        )));
    }
    cfg.validate(model0.depth())?;
    let n = data.n();
    let conv = cfg
        .conv_saem
        .unwrap_or(*model0.dims.last().unwrap() as f64 / 2.0);
    let lo = 0.5 / n as f64;

    let mut model = model0.clone();
    let mut a = init.a0.clone();
    let mut stats: Option<(Vec<LayerStats>, Array1<f64>)> = None;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut failures = 0;
    let mut iters = 0;
    let w = 1.0 / cfg.gibbs_c as f64;
    for t in 1..=cfg.max_iter {
        iters = t;
        let theta = cfg.step.theta(t);
        let mut fresh: Option<(Vec<LayerStats>, Array1<f64>)> = None;
        for c in 0..cfg.gibbs_c {
            sweep_in_place(
                data,
                &model,
                &mut a,
                derive_seed(cfg.seed, ((t as u64) << 16) | c as u64),
                1,
            );
            let s = sample_stats(&model, data, &a);
            let m = top_means(&a);
            match fresh.as_mut() {
                None => {
                    let mut s = s;
                    s.iter_mut().for_each(|x| x.scale(w));
                    fresh = Some((s, m * w));
                }
                Some((acc, am)) => {
                    acc.iter_mut().zip(&s).for_each(|(x, y)| x.add_scaled(y, w));
                    am.scaled_add(w, &m);
                }
            }
        }
        let fresh = fresh.expect("gibbs_c >= 1");
        stats = Some(match stats.take() {
            None => fresh,
            Some((mut s, mut m)) => {
                s.iter_mut()
                    .zip(&fresh.0)
                    .for_each(|(x, y)| x.blend(y, theta));
                m = m * (1.0 - theta) + fresh.1 * theta;
                (s, m)
            }
        });
        let (s, m) = stats.as_ref().unwrap();

        let mut next = model.clone();
        next.p = m.mapv(|v| v.clamp(lo, 1.0 - lo));
        let (value, f) = mstep_all(&mut next, s, cfg, n);
        failures += f;
        let prior: f64 = next
            .p
            .iter()
            .zip(m.iter())
            .map(|(&p, &mk)| n as f64 * (mk * p.ln() + (1.0 - mk) * (1.0 - p).ln()))
            .sum();
        let obj = value + prior;
        if !obj.is_finite() {
            return Err(DdeError::Numeric(format!(
                "non-finite objective at SAEM iteration {t}"
            )));
        }
        trace.push(obj);
        let delta: f64 = next
            .flatten()
            .iter()
            .zip(model.flatten())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        model = next;
        if delta < conv {
            converged = true;
            break;
        }
    }
    Ok(FitReport::new(
        Algo::Saem,
        model,
        trace,
        iters,
        start,
        cfg.seed,
        converged,
        failures,
    ))
}
