//! Layerwise double-SVD initialization and spectral-ratio selection of the
//! latent dimensions.
//!
//! Each layer is processed the same way: a first truncated SVD denoises the
//! responses so the inverse mean map can be applied, the linearized matrix is
//! centered, and a second SVD plus a Varimax rotation of the right singular
//! vectors exposes the sparse loading pattern. Binary latents are then read
//! off the signs of the centered factor scores, and the estimated latents
//! become the Bernoulli "data" for the next layer.

use ndarray::{s, Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{DdeError, Result};
use crate::family::{FamilyKind, ObservedFamily};
use crate::linalg::{center_columns, least_squares, singular_values, solve_spd, svd};
use crate::model::{Dataset, DdeModel, GraphSet, LatentAssignment};

/// Coefficients produced by the initializer are clipped to this magnitude.
pub const INIT_COEF_BOUND: f64 = 15.0;

/// How many singular components the first (denoising) SVD keeps when the
/// latent dimension is still unknown during selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionFloor {
    /// One more than the largest candidate in the grid.
    GridMax,
    /// One more than the smallest candidate in the grid.
    GridMin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Truncation level for boundary responses before the inverse link.
    pub eps_trunc: f64,
    /// Loading threshold; `None` means `1 / (2.5 sqrt(J))` for the layer.
    pub delta_thresh: Option<f64>,
    /// Coefficient rescaling constant; `None` uses the family default.
    pub c_g: Option<f64>,
    /// Components with `sigma_k >= mult * sqrt(N)` survive denoising.
    pub singular_floor_mult: f64,
    pub varimax_max_iter: usize,
    pub varimax_tol: f64,
    pub selection_floor: SelectionFloor,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            eps_trunc: 1e-4,
            delta_thresh: None,
            c_g: None,
            singular_floor_mult: 1.01,
            varimax_max_iter: 100,
            varimax_tol: 1e-6,
            selection_floor: SelectionFloor::GridMax,
        }
    }
}

impl SpectralConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_trunc > 0.0 && self.eps_trunc < 0.5) {
            return Err(DdeError::invalid("eps_trunc must lie in (0, 0.5)"));
        }
        if matches!(self.delta_thresh, Some(d) if d.is_nan() || d <= 0.0) {
            return Err(DdeError::invalid("delta_thresh must be positive"));
        }
        if matches!(self.c_g, Some(c) if c.is_nan() || c <= 0.0) {
            return Err(DdeError::invalid("C_g must be positive"));
        }
        if self.singular_floor_mult.is_nan() || self.singular_floor_mult <= 0.0 {
            return Err(DdeError::invalid("singular_floor_mult must be positive"));
        }
        Ok(())
    }

    fn delta_for(&self, j: usize) -> f64 {
        self.delta_thresh
            .unwrap_or_else(|| 1.0 / (2.5 * (j as f64).sqrt()))
    }

    fn c_g_for(&self, family: ObservedFamily) -> f64 {
        self.c_g.unwrap_or_else(|| family.spectral_scale())
    }
}

/// Output of the full layerwise initializer.
#[derive(Clone, Debug)]
pub struct SpectralInit {
    pub model0: DdeModel,
    pub a0: LatentAssignment,
    pub g0: GraphSet,
    /// Singular values of each layer's centered linearized matrix.
    pub singular_values: Vec<Vec<f64>>,
}

/// Output of one layer of the initializer.
#[derive(Clone, Debug)]
pub struct LayerInit {
    pub a: Array2<u8>,
    /// `rows x (K + 1)`, intercept first.
    pub b: Array2<f64>,
    pub g: Array2<u8>,
    pub singular_values: Vec<f64>,
}

/// First SVD, truncation into the family's range and elementwise inverse
/// mean map. Normal responses pass through unchanged.
pub fn denoise_and_linearize(
    y: &Array2<f64>,
    k: usize,
    family: ObservedFamily,
    cfg: &SpectralConfig,
) -> Result<Array2<f64>> {
    if k == 0 {
        return Err(DdeError::invalid("latent dimension must be at least 1"));
    }
    denoise_with_floor(y, k + 1, family, cfg)
}

fn denoise_with_floor(
    y: &Array2<f64>,
    floor: usize,
    family: ObservedFamily,
    cfg: &SpectralConfig,
) -> Result<Array2<f64>> {
    cfg.validate()?;
    if family.kind == FamilyKind::Normal {
        return Ok(y.clone());
    }
    let (n, j) = y.dim();
    let f = svd(y)?;
    let above =
        f.s.iter()
            .filter(|&&s| s >= cfg.singular_floor_mult * (n as f64).sqrt())
            .count();
    let mut rank = floor.max(above);
    if rank > f.s.len() {
        log::warn!(
            "denoising rank {rank} exceeds min(N, J) = {}; clipping",
            n.min(j)
        );
        rank = f.s.len();
    }
    let u = f.u.slice(s![.., ..rank]);
    let sv = f.s.slice(s![..rank]);
    let vt = f.vt.slice(s![..rank, ..]);
    let low = (&u * &sv).dot(&vt);
    let eps = cfg.eps_trunc;
    Ok(low.mapv(|v| {
        let v = match family.kind {
            FamilyKind::Bernoulli => v.clamp(eps, 1.0 - eps),
            _ => v.max(eps),
        };
        family.inverse_mean(v)
    }))
}

/// Raw Varimax criterion: sum over columns of the variance of squared
/// loadings.
pub fn varimax_criterion(l: &Array2<f64>) -> f64 {
    let j = l.nrows() as f64;
    l.axis_iter(Axis(1))
        .map(|c| {
            let sq = c.mapv(|v| v * v);
            let m = sq.sum() / j;
            sq.mapv(|v| v * v).sum() / j - m * m
        })
        .sum()
}

/// Varimax rotation by cyclic pairwise plane rotations with the closed-form
/// optimal angle. Returns `(V R, R)` with `R` orthogonal.
pub fn varimax(v: &Array2<f64>, max_iter: usize, tol: f64) -> (Array2<f64>, Array2<f64>) {
    let k = v.ncols();
    let mut l = v.clone();
    let mut r = Array2::eye(k);
    if k < 2 {
        return (l, r);
    }
    let jf = l.nrows() as f64;
    let mut crit = varimax_criterion(&l);
    for _ in 0..max_iter {
        for p in 0..k - 1 {
            for q in p + 1..k {
                let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
                for row in l.rows() {
                    let (x, y) = (row[p], row[q]);
                    let u = x * x - y * y;
                    let w = 2.0 * x * y;
                    a += u;
                    b += w;
                    c += u * u - w * w;
                    d += 2.0 * u * w;
                }
                let num = d - 2.0 * a * b / jf;
                let den = c - (a * a - b * b) / jf;
                let phi = 0.25 * num.atan2(den);
                if phi.abs() < 1e-14 {
                    continue;
                }
                let (sn, cs) = phi.sin_cos();
                rotate_pair(&mut l, p, q, cs, sn);
                rotate_pair(&mut r, p, q, cs, sn);
            }
        }
        let next = varimax_criterion(&l);
        let gain = next - crit;
        crit = next;
        if gain <= tol * crit.abs().max(1e-12) {
            break;
        }
    }
    (l, r)
}

fn rotate_pair(m: &mut Array2<f64>, p: usize, q: usize, cs: f64, sn: f64) {
    for mut row in m.rows_mut() {
        let (x, y) = (row[p], row[q]);
        row[p] = cs * x + sn * y;
        row[q] = -sn * x + cs * y;
    }
}

/// Second SVD, Varimax, thresholding and re-estimation for one layer.
///
/// `z` is the linearized (uncentered) matrix. The returned coefficients have
/// every slope column with a nonnegative sum: a column that comes out
/// negative is flipped together with its latent (`a -> 1 - a`).
pub fn init_layer(z: &Array2<f64>, k: usize, c_g: f64, cfg: &SpectralConfig) -> Result<LayerInit> {
    let (n, j) = z.dim();
    if k == 0 || k > j || k > n {
        return Err(DdeError::invalid(format!(
            "cannot extract {k} factors from a {n}x{j} matrix"
        )));
    }
    let (z0, _) = center_columns(z);
    let f = svd(&z0)?;
    let v = f.vt.slice(s![..k, ..]).t().to_owned();
    let (mut vt, _) = varimax(&v, cfg.varimax_max_iter, cfg.varimax_tol);
    let delta = cfg.delta_for(j);
    vt.mapv_inplace(|x| if x.abs() < delta { 0.0 } else { x });
    for mut col in vt.columns_mut() {
        if col.sum() < 0.0 {
            col.mapv_inplace(|x| -x);
        }
    }
    let g = vt.mapv(|x| u8::from(x != 0.0));

    let gram = vt.t().dot(&vt);
    let (coef, ridged) = solve_spd(&gram, &vt.t().dot(&z0.t()))?;
    if ridged {
        log::warn!("rotated loadings are rank deficient; used a ridge-regularized solve");
    }
    let a0 = coef.t().to_owned();
    let mut a = a0.mapv(|x| u8::from(x > 0.0));

    let mut design = Array2::ones((n, k + 1));
    design.slice_mut(s![.., 1..]).assign(&a.mapv(f64::from));
    let (beta, ridged) = least_squares(&design, z)?;
    if ridged {
        log::warn!("estimated latent design is rank deficient; used a ridge-regularized solve");
    }
    let mut b = beta.t().to_owned() * c_g;
    for ((r, c), x) in b.indexed_iter_mut() {
        if c > 0 && g[[r, c - 1]] == 0 {
            *x = 0.0;
        }
    }
    for c in 0..k {
        if b.column(c + 1).sum() < 0.0 {
            for r in 0..j {
                let bk = b[[r, c + 1]];
                b[[r, 0]] += bk;
                b[[r, c + 1]] = -bk;
            }
            a.column_mut(c).mapv_inplace(|x| 1 - x);
        }
    }
    b.mapv_inplace(|x| x.clamp(-INIT_COEF_BOUND, INIT_COEF_BOUND));
    Ok(LayerInit {
        a,
        b,
        g,
        singular_values: f.s.to_vec(),
    })
}

/// Full layerwise initializer for a model with widths `dims`.
pub fn spectral_init(data: &Dataset, dims: &[usize], cfg: &SpectralConfig) -> Result<SpectralInit> {
    cfg.validate()?;
    if dims.is_empty() {
        return Err(DdeError::invalid("need at least one latent layer"));
    }
    let n = data.n();
    let mut family = data.family;
    let mut current = data.y.clone();
    let mut layers = Vec::with_capacity(dims.len());
    for (d, &k) in dims.iter().enumerate() {
        if d > 0 {
            debug_assert!(current.iter().all(|&v| v == 0.0 || v == 1.0));
            family = ObservedFamily::BERNOULLI;
        }
        let z = denoise_and_linearize(&current, k, family, cfg)?;
        let layer = init_layer(&z, k, cfg.c_g_for(family), cfg)?;
        current = layer.a.mapv(f64::from);
        layers.push(layer);
    }

    let lo = 0.5 / n as f64;
    let p = current
        .mean_axis(Axis(0))
        .unwrap()
        .mapv(|v| v.clamp(lo, 1.0 - lo));
    let gamma = data.family.has_dispersion().then(|| {
        let first = &layers[0];
        let mut design = Array2::ones((n, dims[0] + 1));
        design
            .slice_mut(s![.., 1..])
            .assign(&first.a.mapv(f64::from));
        let resid = &data.y - &design.dot(&first.b.t());
        resid
            .mapv(|r| r * r)
            .mean_axis(Axis(0))
            .unwrap()
            .mapv(|v| v.sqrt().max(1e-3))
    });

    let model0 = DdeModel {
        dims: dims.to_vec(),
        n_obs: data.j(),
        family: data.family,
        p,
        coefs: layers.iter().map(|l| l.b.clone()).collect(),
        gamma,
    };
    model0.validate()?;
    Ok(SpectralInit {
        model0,
        a0: LatentAssignment {
            layers: layers.iter().map(|l| l.a.clone()).collect(),
        },
        g0: GraphSet {
            layers: layers.iter().map(|l| l.g.clone()).collect(),
        },
        singular_values: layers.into_iter().map(|l| l.singular_values).collect(),
    })
}

/// Candidate widths `ceil(K/4) ..= floor(K/2)` below a layer of width `k`.
pub fn candidate_grid(k: usize) -> Vec<usize> {
    (k.div_ceil(4).max(1)..=k / 2).collect()
}

/// Index `k` in `grid` maximizing `sigma_k / sigma_{k+1} - 1` (1-based
/// singular values); ties go to the smallest `k`.
pub fn ratio_argmax(sigma: &[f64], grid: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &k in grid {
        if k == 0 || k >= sigma.len() {
            continue;
        }
        let r = if sigma[k] > 0.0 {
            sigma[k - 1] / sigma[k] - 1.0
        } else {
            f64::INFINITY
        };
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((k, r));
        }
    }
    best.map(|(k, _)| k)
}

/// Per-layer outcome of the spectral-ratio selector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerSelection {
    pub grid: Vec<usize>,
    pub ratios: Vec<f64>,
    pub chosen: usize,
}

/// Selects `D` latent widths layer by layer. `first_grid` overrides the
/// candidate grid for the shallowest layer.
pub fn select_latent_dims(
    data: &Dataset,
    depth: usize,
    cfg: &SpectralConfig,
    first_grid: Option<&[usize]>,
) -> Result<Vec<LayerSelection>> {
    cfg.validate()?;
    if depth == 0 {
        return Err(DdeError::invalid("need at least one latent layer"));
    }
    let mut family = data.family;
    let mut current = data.y.clone();
    let mut out = Vec::with_capacity(depth);
    for d in 0..depth {
        if d > 0 {
            family = ObservedFamily::BERNOULLI;
        }
        let width = current.ncols();
        let grid = match (d, first_grid) {
            (0, Some(g)) => g.to_vec(),
            _ => candidate_grid(width),
        };
        let floor = match cfg.selection_floor {
            SelectionFloor::GridMax => grid.iter().max().copied().unwrap_or(1) + 1,
            SelectionFloor::GridMin => grid.iter().min().copied().unwrap_or(1) + 1,
        };
        let z = denoise_with_floor(&current, floor, family, cfg)?;
        let (z0, _) = center_columns(&z);
        let sigma = singular_values(&z0)?.to_vec();
        let chosen = match ratio_argmax(&sigma, &grid) {
            Some(k) => k,
            None => {
                log::warn!("empty candidate grid below a layer of width {width}; using 1");
                1
            }
        };
        let ratios = grid
            .iter()
            .map(|&k| {
                if k >= 1 && k < sigma.len() {
                    sigma[k - 1] / sigma[k] - 1.0
                } else {
                    f64::NAN
                }
            })
            .collect();
        out.push(LayerSelection {
            grid,
            ratios,
            chosen,
        });
        if d + 1 < depth {
            let z = denoise_and_linearize(&current, chosen, family, cfg)?;
            let layer = init_layer(&z, chosen, cfg.c_g_for(family), cfg)?;
            current = layer.a.mapv(f64::from);
        }
    }
    Ok(out)
}

/// Column means of a binary matrix, used as top-layer proportions.
pub fn column_means(a: &Array2<u8>) -> Array1<f64> {
    a.mapv(f64::from)
        .mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(a.ncols()))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use ndarray::array;
    use rand::Rng;

    use super::*;
    use crate::model::{make_benchmark_params, sample, ParamKind};
    use crate::rng::rng;

    fn rotation(theta: f64) -> Array2<f64> {
        let (s, c) = theta.sin_cos();
        array![[c, -s], [s, c]]
    }

    #[test]
    fn normal_passes_through() {
        let y = array![[0.3, -1.0, 2.0], [1.0, 0.0, 0.5]];
        let z = denoise_and_linearize(&y, 1, ObservedFamily::NORMAL, &SpectralConfig::default())
            .unwrap();
        assert_eq!(z, y);
    }

    #[test]
    fn bernoulli_zero_is_clamped() {
        // All-zero columns stay exactly zero after the rank-k reconstruction.
        let mut y = Array2::zeros((6, 4));
        y[[0, 0]] = 1.0;
        y[[1, 1]] = 1.0;
        let z = denoise_and_linearize(&y, 1, ObservedFamily::BERNOULLI, &SpectralConfig::default())
            .unwrap();
        assert_relative_eq!(z[[0, 3]], (1e-4f64 / (1.0 - 1e-4)).ln(), epsilon = 1e-9);
        assert_relative_eq!(z[[0, 3]], -9.21, epsilon = 1e-2);
    }

    #[test]
    fn noiseless_normal_is_exact() {
        let m =
            make_benchmark_params(ParamKind::Strict, 18, &[6, 2], ObservedFamily::NORMAL).unwrap();
        let (_, lat) = sample(&m, 200, 3).unwrap();
        let eta = crate::model::linear_predictors(&m.coefs[0], &lat.layers[0]).unwrap();
        let z = denoise_and_linearize(&eta, 6, ObservedFamily::NORMAL, &SpectralConfig::default())
            .unwrap();
        for (a, b) in z.iter().zip(eta.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn varimax_fixed_point_on_axis_aligned_input() {
        let w = array![[1.0, 0.0], [0.8, 0.0], [0.0, 0.6], [0.0, 1.2]];
        let before = varimax_criterion(&w);
        let (out, r) = varimax(&w, 100, 1e-10);
        assert_relative_eq!(varimax_criterion(&out), before, epsilon = 1e-9);
        for x in r.iter() {
            assert!(x.abs() < 1e-9 || (x.abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn varimax_recovers_planted_rotation() {
        let w = array![
            [1.0, 0.0, 0.0],
            [0.7, 0.0, 0.0],
            [0.0, 0.9, 0.0],
            [0.0, 1.1, 0.0],
            [0.0, 0.0, 0.5],
            [0.0, 0.0, 1.3]
        ];
        // random orthogonal matrix from the QR of a Gaussian draw
        let mut r = rng(4);
        let g = nalgebra::DMatrix::from_fn(3, 3, |_, _| r.random::<f64>() - 0.5);
        let q = g.qr().q();
        let q = Array2::from_shape_fn((3, 3), |(i, j)| q[(i, j)]);
        let v = w.dot(&q);
        let (out, _) = varimax(&v, 500, 1e-14);
        assert!(varimax_criterion(&out) >= varimax_criterion(&v) - 1e-12);
        for k in 0..3 {
            let col = w.column(k);
            let matched = (0..3).any(|c| {
                let o = out.column(c);
                let plus = col.iter().zip(o.iter()).all(|(a, b)| (a - b).abs() < 1e-6);
                let minus = col.iter().zip(o.iter()).all(|(a, b)| (a + b).abs() < 1e-6);
                plus || minus
            });
            assert!(matched, "column {k} not recovered: {out:?}");
        }
    }

    #[test]
    fn varimax_two_columns_matches_grid_search() {
        let v = array![[0.9, 0.3], [0.5, -0.7], [0.2, 0.8], [-0.4, 0.6], [1.0, 0.1]];
        let (out, _) = varimax(&v, 100, 1e-14);
        let best = (0..200_000)
            .map(|i| {
                let t = i as f64 * std::f64::consts::FRAC_PI_2 / 200_000.0;
                varimax_criterion(&v.dot(&rotation(t)))
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(varimax_criterion(&out), best, epsilon = 1e-8);
    }

    #[test]
    fn varimax_criterion_invariant_to_prerotation() {
        let w = array![[1.0, 0.0], [0.8, 0.0], [0.0, 0.6], [0.0, 1.2]];
        let a = varimax(&w.dot(&rotation(0.3)), 200, 1e-14).0;
        let b = varimax(&w.dot(&rotation(1.1)), 200, 1e-14).0;
        assert_relative_eq!(varimax_criterion(&a), varimax_criterion(&b), epsilon = 1e-9);
    }

    #[test]
    fn constant_input_gives_zero_slopes() {
        let z = Array2::from_elem((20, 6), 1.5);
        let li = init_layer(&z, 2, 1.0, &SpectralConfig::default()).unwrap();
        assert!(li.b.slice(s![.., 1..]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn recover_planted_normal_structure() {
        let m =
            make_benchmark_params(ParamKind::Strict, 18, &[6, 2], ObservedFamily::NORMAL).unwrap();
        let (_, lat) = sample(&m, 500, 8).unwrap();
        let eta = crate::model::linear_predictors(&m.coefs[0], &lat.layers[0]).unwrap();
        let li = init_layer(&eta, 6, 1.0, &SpectralConfig::default()).unwrap();
        // match columns by maximum agreement
        let truth = &lat.layers[0];
        let mut agree = 0usize;
        for k in 0..6 {
            let best = (0..6)
                .map(|c| {
                    truth
                        .column(k)
                        .iter()
                        .zip(li.a.column(c).iter())
                        .filter(|(a, b)| a == b)
                        .count()
                })
                .max()
                .unwrap();
            agree += best;
        }
        assert!(agree as f64 / (6.0 * 500.0) >= 0.99);
    }

    #[test]
    fn spectral_init_sign_fix_and_shapes() {
        let m = make_benchmark_params(ParamKind::Strict, 18, &[6, 2], ObservedFamily::BERNOULLI)
            .unwrap();
        let (data, _) = sample(&m, 1000, 2).unwrap();
        let init = spectral_init(&data, &[6, 2], &SpectralConfig::default()).unwrap();
        for b in &init.model0.coefs {
            for c in 1..b.ncols() {
                assert!(b.column(c).sum() >= 0.0);
            }
        }
        assert_eq!(init.a0.layers[1].dim(), (1000, 2));
        assert_eq!(init.model0.p.len(), 2);
    }

    #[test]
    fn thresholding_is_idempotent() {
        let delta = 0.2;
        let v = array![[0.1, 0.5], [-0.3, 0.19]];
        let th = |m: &Array2<f64>| m.mapv(|x| if x.abs() < delta { 0.0 } else { x });
        let once = th(&v);
        assert_eq!(th(&once), once);
    }

    #[test]
    fn grid_and_ratio() {
        assert_eq!(candidate_grid(18), vec![5, 6, 7, 8, 9]);
        assert_eq!(candidate_grid(6), vec![2, 3]);
        assert!(candidate_grid(1).is_empty());
        let sigma = [10.0, 9.0, 8.0, 2.0, 2.0, 1.0];
        assert_eq!(ratio_argmax(&sigma, &[1, 2, 3, 4]), Some(3));
        // ties go to the smallest k
        assert_eq!(ratio_argmax(&[4.0, 2.0, 1.0], &[1, 2]), Some(1));
    }

    #[test]
    fn noiseless_rank_six_selection() {
        let m =
            make_benchmark_params(ParamKind::Strict, 18, &[6, 2], ObservedFamily::NORMAL).unwrap();
        let (_, lat) = sample(&m, 400, 5).unwrap();
        let eta = crate::model::linear_predictors(&m.coefs[0], &lat.layers[0]).unwrap();
        let data = Dataset::new(eta, ObservedFamily::NORMAL).unwrap();
        let sel = select_latent_dims(&data, 1, &SpectralConfig::default(), None).unwrap();
        assert_eq!(sel[0].grid, vec![5, 6, 7, 8, 9]);
        assert_eq!(sel[0].chosen, 6);
    }
}
