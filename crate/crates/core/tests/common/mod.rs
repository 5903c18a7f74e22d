#![allow(dead_code)]

use dde::{DdeModel, FamilyKind, ObservedFamily};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random model with nonzero slopes on a random graph (every column keeps at
/// least one child) and moderate coefficients.
pub fn random_model(kind: FamilyKind, n_obs: usize, dims: &[usize], seed: u64) -> DdeModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coefs = dims
        .iter()
        .enumerate()
        .map(|(d, &k)| {
            let rows = if d == 0 { n_obs } else { dims[d - 1] };
            let mut b = Array2::zeros((rows, k + 1));
            for r in 0..rows {
                b[[r, 0]] = rng.random_range(-1.5..0.5);
                for c in 0..k {
                    if rng.random_bool(0.5) || r % k == c {
                        b[[r, c + 1]] = rng.random_range(0.5..2.5);
                    }
                }
            }
            b
        })
        .collect();
    let top = *dims.last().unwrap();
    let family = ObservedFamily::new(kind);
    DdeModel {
        dims: dims.to_vec(),
        n_obs,
        family,
        p: (0..top).map(|_| rng.random_range(0.2..0.8)).collect(),
        coefs,
        gamma: family.has_dispersion().then(|| {
            (0..n_obs)
                .map(|_| rng.random_range(0.5..1.5))
                .collect::<Array1<f64>>()
        }),
    }
}

fn all_vectors(k: usize) -> Vec<Vec<u8>> {
    (0..1usize << k)
        .map(|c| (0..k).map(|i| ((c >> i) & 1) as u8).collect())
        .collect()
}

fn ln_factorial(y: f64) -> f64 {
    (1..=y as u64).map(|v| (v as f64).ln()).sum()
}

fn eta(b: &Array2<f64>, row: usize, parent: &[u8]) -> f64 {
    b[[row, 0]]
        + parent
            .iter()
            .enumerate()
            .map(|(k, &a)| b[[row, k + 1]] * f64::from(a))
            .sum::<f64>()
}

/// Observed log density written out from the family definitions.
pub fn obs_logpdf(kind: FamilyKind, y: f64, eta: f64, gamma: f64) -> f64 {
    match kind {
        FamilyKind::Bernoulli => {
            let p = 1.0 / (1.0 + (-eta).exp());
            if y > 0.5 {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        }
        FamilyKind::Poisson => y * eta - eta.exp() - ln_factorial(y),
        FamilyKind::Normal => {
            -0.5 * (2.0 * std::f64::consts::PI * gamma * gamma).ln()
                - (y - eta).powi(2) / (2.0 * gamma * gamma)
        }
    }
}

/// `log P(y, A)` for one latent vector per layer.
pub fn joint_logprob(m: &DdeModel, y: &[f64], a: &[&[u8]]) -> f64 {
    let depth = m.dims.len();
    let mut lp = 0.0;
    for (k, &bit) in a[depth - 1].iter().enumerate() {
        lp += if bit == 1 {
            m.p[k].ln()
        } else {
            (1.0 - m.p[k]).ln()
        };
    }
    for d in 1..depth {
        for (r, &bit) in a[d - 1].iter().enumerate() {
            let q = 1.0 / (1.0 + (-eta(&m.coefs[d], r, a[d])).exp());
            lp += if bit == 1 { q.ln() } else { (1.0 - q).ln() };
        }
    }
    for (j, &v) in y.iter().enumerate() {
        let g = m.gamma.as_ref().map_or(1.0, |g| g[j]);
        lp += obs_logpdf(m.family.kind, v, eta(&m.coefs[0], j, a[0]), g);
    }
    lp
}

/// Every joint latent configuration, one vector per layer.
pub fn all_configurations(dims: &[usize]) -> Vec<Vec<Vec<u8>>> {
    let mut out: Vec<Vec<Vec<u8>>> = vec![Vec::new()];
    for &k in dims {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                all_vectors(k).into_iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// `log P(y)` by explicit enumeration over every latent configuration.
pub fn brute_marginal(m: &DdeModel, y: &[f64]) -> f64 {
    all_configurations(&m.dims)
        .iter()
        .map(|cfg| {
            let a: Vec<&[u8]> = cfg.iter().map(|v| v.as_slice()).collect();
            joint_logprob(m, y, &a).exp()
        })
        .sum::<f64>()
        .ln()
}

pub fn random_perm(k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..k).collect();
    for i in (1..k).rev() {
        p.swap(i, rng.random_range(0..=i));
    }
    p
}
