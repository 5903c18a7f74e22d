//! Penalized EM with an exact E-step over all latent configurations.

use std::time::Instant;

use ndarray::{s, Array1, Axis};
use rayon::prelude::*;

use super::stats::{GaussianStats, GroupedStats, LayerStats};
use super::{mstep_all, total_penalty, Algo, FitConfig, FitReport};
use crate::error::{DdeError, Result};
use crate::family::{logsumexp, FamilyKind};
use crate::model::{config_bits, Dataset, DdeModel, Enumerator, ENUMERATION_CAP};

const CHUNK: usize = 64;

/// Expected sufficient statistics from one exact E-step.
#[derive(Clone, Debug)]
pub struct EStep {
    pub loglik: f64,
    /// Posterior mean of each top-layer coordinate, summed over rows.
    pub top_sums: Array1<f64>,
    pub layers: Vec<LayerStats>,
}

#[derive(Clone)]
struct Partial {
    loglik: f64,
    top: Vec<f64>,
    // per coefficient matrix d: counts over parent configs and child sums
    counts: Vec<Vec<f64>>,
    sums: Vec<Vec<f64>>,
}

impl Partial {
    fn zeros(model: &DdeModel) -> Self {
        let depth = model.depth();
        Self {
            loglik: 0.0,
            top: vec![0.0; model.dims[depth - 1]],
            counts: (0..depth).map(|d| vec![0.0; 1 << model.dims[d]]).collect(),
            sums: (0..depth)
                .map(|d| vec![0.0; (1 << model.dims[d]) * model.child_width(d)])
                .collect(),
        }
    }

    fn add(&mut self, other: &Partial) {
        self.loglik += other.loglik;
        for (a, b) in self.top.iter_mut().zip(&other.top) {
            *a += b;
        }
        for (x, y) in self.counts.iter_mut().zip(&other.counts) {
            x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
        }
        for (x, y) in self.sums.iter_mut().zip(&other.sums) {
            x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
        }
    }
}

/// Exact E-step. Rows are processed in fixed-size chunks whose partial sums
/// are combined in order, so the result does not depend on the thread count.
pub fn e_step(model: &DdeModel, data: &Dataset) -> Result<EStep> {
    e_step_with_cap(model, data, ENUMERATION_CAP)
}

pub fn e_step_with_cap(model: &DdeModel, data: &Dataset, cap: usize) -> Result<EStep> {
    model.check_data(data)?;
    let e = Enumerator::new(model, cap)?;
    let depth = model.depth();
    let bits: Vec<Vec<Vec<u8>>> = model
        .dims
        .iter()
        .map(|&k| (0..1usize << k).map(|c| config_bits(c, k)).collect())
        .collect();
    let j = model.n_obs;
    let n = data.n();
    let chunks: Vec<Partial> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|ci| {
            let lo = ci * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let y = data.y.slice(s![lo..hi, ..]);
            let obs = e.obs_loglik_batch(y);
            let mut part = Partial::zeros(model);
            let mut msgs: Vec<Vec<f64>> = vec![Vec::new(); depth];
            for (r, yr) in y.rows().into_iter().enumerate() {
                msgs[0] = obs.row(r).to_vec();
                for l in 1..depth {
                    let t = &e.transition[l];
                    let below = &msgs[l - 1];
                    msgs[l] = (0..t.ncols())
                        .map(|b| {
                            let terms: Vec<f64> = below
                                .iter()
                                .enumerate()
                                .map(|(a, m)| t[[a, b]] + m)
                                .collect();
                            logsumexp(&terms)
                        })
                        .collect();
                }
                let top_terms: Vec<f64> = msgs[depth - 1]
                    .iter()
                    .zip(&e.log_prior[depth - 1])
                    .map(|(m, p)| m + p)
                    .collect();
                let lpy = logsumexp(&top_terms);
                part.loglik += lpy;

                for (b, v) in top_terms.iter().enumerate() {
                    let w = (v - lpy).exp();
                    for (k, &bit) in bits[depth - 1][b].iter().enumerate() {
                        if bit == 1 {
                            part.top[k] += w;
                        }
                    }
                }
                // observed layer: posterior marginal of A^(1)
                for (a, m) in msgs[0].iter().enumerate() {
                    let w = (m + e.log_prior[0][a] - lpy).exp();
                    if w == 0.0 {
                        continue;
                    }
                    part.counts[0][a] += w;
                    let base = a * j;
                    for (jj, &v) in yr.iter().enumerate() {
                        part.sums[0][base + jj] += w * v;
                    }
                }
                // latent layers: pairwise posterior of (A^(l), A^(l+1))
                for l in 1..depth {
                    let t = &e.transition[l];
                    let kc = model.dims[l - 1];
                    for b in 0..t.ncols() {
                        let head = e.log_prior[l][b] - lpy;
                        for (a, m) in msgs[l - 1].iter().enumerate() {
                            let w = (head + t[[a, b]] + m).exp();
                            if w == 0.0 {
                                continue;
                            }
                            part.counts[l][b] += w;
                            for (k, &bit) in bits[l - 1][a].iter().enumerate() {
                                if bit == 1 {
                                    part.sums[l][b * kc + k] += w;
                                }
                            }
                        }
                    }
                }
            }
            part
        })
        .collect();
    let mut total = Partial::zeros(model);
    for c in &chunks {
        total.add(c);
    }
    if !total.loglik.is_finite() {
        return Err(DdeError::Numeric(
            "non-finite log-likelihood in the E-step".into(),
        ));
    }

    let mut layers = Vec::with_capacity(depth);
    for d in 0..depth {
        let kp = model.dims[d];
        let nc = model.child_width(d);
        let mut g = GroupedStats::new(kp, nc);
        for c in 0..1usize << kp {
            g.add_raw(
                c as u64,
                total.counts[d][c],
                &total.sums[d][c * nc..(c + 1) * nc],
            );
        }
        if d == 0 && model.family.kind == FamilyKind::Normal {
            let syy = data.y.mapv(|v| v * v).sum_axis(Axis(0));
            layers.push(LayerStats::Gaussian(GaussianStats::from_grouped(
                &g, syy, n as f64,
            )));
        } else {
            layers.push(LayerStats::Grouped(g));
        }
    }
    Ok(EStep {
        loglik: total.loglik,
        top_sums: Array1::from(total.top),
        layers,
    })
}

/// Penalized EM from `init`. The objective trace holds the penalized
/// log-likelihood of the initial model and of every update.
pub fn pem_fit(data: &Dataset, init: &DdeModel, cfg: &FitConfig) -> Result<FitReport> {
    let start = Instant::now();
    init.validate()?;
    init.check_data(data)?;
    cfg.validate(init.depth())?;
    let n = data.n();
    let conv = cfg.conv_pem.unwrap_or(n as f64 / 500.0);
    let mut model = init.clone();
    let mut es = e_step(&model, data)?;
    let mut trace = vec![es.loglik - total_penalty(&model, cfg, n)];
    let mut converged = false;
    let mut failures = 0;
    let mut iters = 0;
    let lo = 1e-6;
    for it in 1..=cfg.max_iter {
        iters = it;
        let mut next = model.clone();
        next.p = es.top_sums.mapv(|v| (v / n as f64).clamp(lo, 1.0 - lo));
        let (_, f) = mstep_all(&mut next, &es.layers, cfg, n);
        failures += f;
        let es_next = e_step(&next, data)?;
        let obj = es_next.loglik - total_penalty(&next, cfg, n);
        if !obj.is_finite() {
            return Err(DdeError::Numeric(format!(
                "non-finite objective at EM iteration {it}"
            )));
        }
        trace.push(obj);
        let delta = (es_next.loglik - es.loglik).abs();
        model = next;
        es = es_next;
        if delta < conv {
            converged = true;
            break;
        }
    }
    Ok(FitReport::new(
        Algo::Pem,
        model,
        trace,
        iters,
        start,
        cfg.seed,
        converged,
        failures,
    ))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};

    use super::*;
    use crate::estimation::Penalty;
    use crate::family::ObservedFamily;
    use crate::model::{loglik, make_benchmark_params, sample, ParamKind};

    #[test]
    fn estep_weights_are_normalized() {
        let m =
            make_benchmark_params(ParamKind::Strict, 18, &[6, 2], ObservedFamily::NORMAL).unwrap();
        let (data, _) = sample(&m, 40, 2).unwrap();
        let es = e_step(&m, &data).unwrap();
        // counts of every coefficient matrix sum to N
        for st in &es.layers {
            let total = match st {
                LayerStats::Grouped(g) => g.counts.iter().sum::<f64>(),
                LayerStats::Gaussian(g) => g.sxx[[0, 0]],
            };
            assert_relative_eq!(total, 40.0, epsilon = 1e-10);
        }
        assert_relative_eq!(es.loglik, loglik(&m, &data).unwrap(), epsilon = 1e-8);
    }

    #[test]
    fn zero_iterations_return_the_init() {
        let m = make_benchmark_params(ParamKind::Strict, 18, &[6, 2], ObservedFamily::BERNOULLI)
            .unwrap();
        let (data, _) = sample(&m, 30, 2).unwrap();
        let cfg = FitConfig {
            max_iter: 0,
            ..FitConfig::pem()
        };
        let rep = pem_fit(&data, &m, &cfg).unwrap();
        assert_eq!(rep.model_hat, m);
        assert_eq!(rep.iters, 0);
    }

    #[test]
    fn unpenalized_one_bit_matches_mixture_em() {
        // Two-class Bernoulli mixture EM written out directly.
        let truth = DdeModel {
            dims: vec![1],
            n_obs: 4,
            family: ObservedFamily::BERNOULLI,
            p: array![0.4],
            coefs: vec![array![[-1.5, 3.0], [-1.0, 2.0], [1.0, -2.5], [0.0, 1.0]]],
            gamma: None,
        };
        let (data, _) = sample(&truth, 500, 13).unwrap();
        let start = DdeModel {
            p: array![0.5],
            coefs: vec![array![[-0.5, 1.0], [-0.5, 1.0], [0.5, -1.0], [0.2, 0.3]]],
            ..truth.clone()
        };
        let cfg = FitConfig {
            penalties: vec![Penalty::none()],
            max_iter: 8,
            conv_pem: Some(0.0),
            ..FitConfig::pem()
        };
        let rep = pem_fit(&data, &start, &cfg).unwrap();

        let sig = crate::family::sigmoid;
        let mut pi = 0.5;
        let mut theta: Array2<f64> = Array2::zeros((4, 2));
        for j in 0..4 {
            theta[[j, 0]] = sig(start.coefs[0][[j, 0]]);
            theta[[j, 1]] = sig(start.coefs[0][[j, 0]] + start.coefs[0][[j, 1]]);
        }
        let ll = |pi: f64, theta: &Array2<f64>| -> (f64, Vec<f64>) {
            let mut total = 0.0;
            let mut resp = Vec::new();
            for row in data.y.rows() {
                let mut l = [(1.0 - pi).ln(), pi.ln()];
                for c in 0..2 {
                    for j in 0..4 {
                        let t = theta[[j, c]];
                        l[c] += if row[j] == 1.0 {
                            t.ln()
                        } else {
                            (1.0 - t).ln()
                        };
                    }
                }
                let z = logsumexp(&l);
                total += z;
                resp.push((l[1] - z).exp());
            }
            (total, resp)
        };
        for it in 0..rep.objective_trace.len() {
            let (l, resp) = ll(pi, &theta);
            assert_relative_eq!(rep.objective_trace[it], l, epsilon = 1e-6);
            let n1: f64 = resp.iter().sum();
            pi = n1 / 500.0;
            for j in 0..4 {
                let s1: f64 = resp.iter().zip(data.y.column(j)).map(|(r, y)| r * y).sum();
                let s0: f64 = resp
                    .iter()
                    .zip(data.y.column(j))
                    .map(|(r, y)| (1.0 - r) * y)
                    .sum();
                theta[[j, 1]] = s1 / n1;
                theta[[j, 0]] = s0 / (500.0 - n1);
            }
        }
    }
}
