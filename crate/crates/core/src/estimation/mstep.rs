//! Row-wise penalized M-step.
//!
//! Each row of a coefficient matrix is fitted separately: an intercept plus
//! at most `K` slopes. Sparsity is handled by comparing unpenalized optima
//! over slope supports, which for the truncated lasso amounts to searching
//! over which slopes sit on the flat part of the penalty.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

use super::penalty::{Penalty, PenaltyKind};
use crate::family::{log1pexp, sigmoid, FamilyKind};
use crate::linalg::solve_small;

/// Box bound on every fitted coefficient.
pub const COEF_BOUND: f64 = 15.0;

/// Rows with at most this many slopes get an exhaustive support search.
pub const EXHAUSTIVE_SLOPES: usize = 12;

const NEWTON_ITERS: usize = 50;
const MAX_LOG_RATE: f64 = 30.0;

/// Penalized objective of one row, in terms of sufficient statistics.
#[derive(Clone, Debug)]
pub enum RowProblem<'a> {
    /// Logistic or log-linear row: `sum_c s_c eta_c - n_c A(eta_c)` with
    /// `eta_c = x_c' beta`.
    Glm {
        kind: FamilyKind,
        x: &'a Array2<f64>,
        n: &'a Array1<f64>,
        s: Array1<f64>,
    },
    /// Normal row: `-(syy - 2 b'sxy + b'sxx b) / (2 gamma^2) - w ln gamma`.
    Gaussian {
        sxx: &'a Array2<f64>,
        sxy: Array1<f64>,
        syy: f64,
        w: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowSolution {
    pub beta: Vec<f64>,
    pub gamma: Option<f64>,
    /// Penalized objective at the solution.
    pub value: f64,
    /// False when a Newton solve stopped at its iteration cap.
    pub converged: bool,
}

#[inline]
fn cumulant(kind: FamilyKind, eta: f64) -> (f64, f64, f64) {
    match kind {
        FamilyKind::Bernoulli => {
            let m = sigmoid(eta);
            (log1pexp(eta), m, m * (1.0 - m))
        }
        FamilyKind::Poisson => {
            if eta >= MAX_LOG_RATE {
                (MAX_LOG_RATE.exp(), 0.0, 0.0)
            } else {
                let e = eta.exp();
                (e, e, e)
            }
        }
        FamilyKind::Normal => unreachable!("Normal rows use the Gaussian problem"),
    }
}

impl RowProblem<'_> {
    pub fn dim(&self) -> usize {
        match self {
            RowProblem::Glm { x, .. } => x.ncols(),
            RowProblem::Gaussian { sxx, .. } => sxx.nrows(),
        }
    }

    fn rss(sxx: &Array2<f64>, sxy: &Array1<f64>, syy: f64, beta: &[f64]) -> f64 {
        let b = Array1::from(beta.to_vec());
        (syy - 2.0 * b.dot(sxy) + b.dot(&sxx.dot(&b))).max(0.0)
    }

    /// Unpenalized objective. `gamma` is ignored for GLM rows.
    pub fn loglik(&self, beta: &[f64], gamma: f64) -> f64 {
        match self {
            RowProblem::Glm { kind, x, n, s } => {
                let mut total = 0.0;
                for (g, row) in x.rows().into_iter().enumerate() {
                    if n[g] == 0.0 && s[g] == 0.0 {
                        continue;
                    }
                    let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
                    total += s[g] * eta - n[g] * cumulant(*kind, eta).0;
                }
                total
            }
            RowProblem::Gaussian { sxx, sxy, syy, w } => {
                -Self::rss(sxx, sxy, *syy, beta) / (2.0 * gamma * gamma) - w * gamma.ln()
            }
        }
    }

    /// Maximizes the unpenalized objective over `beta` restricted to
    /// `support` (coordinates outside it are zero).
    fn fit_support(&self, support: &[usize], start: &[f64]) -> (Vec<f64>, bool) {
        let p = self.dim();
        let mut beta = vec![0.0; p];
        for &i in support {
            beta[i] = start[i].clamp(-COEF_BOUND, COEF_BOUND);
        }
        match self {
            RowProblem::Gaussian { sxx, sxy, .. } => {
                let m = DMatrix::from_fn(support.len(), support.len(), |a, b| {
                    sxx[[support[a], support[b]]]
                });
                let v = DVector::from_fn(support.len(), |a, _| sxy[support[a]]);
                let sol = solve_small(&m, &v).or_else(|| {
                    let ridge = 1e-8 * m.trace().abs().max(1e-12);
                    solve_small(
                        &(m.clone() + DMatrix::identity(support.len(), support.len()) * ridge),
                        &v,
                    )
                });
                match sol {
                    Some(sol) => {
                        for (a, &i) in support.iter().enumerate() {
                            beta[i] = sol[a].clamp(-COEF_BOUND, COEF_BOUND);
                        }
                        (beta, true)
                    }
                    None => (beta, false),
                }
            }
            RowProblem::Glm { kind, x, n, s } => {
                let q = support.len();
                let mut f = self.loglik(&beta, 1.0);
                for _ in 0..NEWTON_ITERS {
                    let mut grad = DVector::zeros(q);
                    let mut hess = DMatrix::zeros(q, q);
                    for (g, row) in x.rows().into_iter().enumerate() {
                        if n[g] == 0.0 && s[g] == 0.0 {
                            continue;
                        }
                        let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
                        let (_, mu, var) = cumulant(*kind, eta);
                        let r = s[g] - n[g] * mu;
                        let wv = n[g] * var;
                        for a in 0..q {
                            let xa = row[support[a]];
                            if xa == 0.0 {
                                continue;
                            }
                            grad[a] += r * xa;
                            for b in 0..=a {
                                hess[(a, b)] += wv * xa * row[support[b]];
                            }
                        }
                    }
                    for a in 0..q {
                        for b in 0..a {
                            hess[(b, a)] = hess[(a, b)];
                        }
                    }
                    let ridge = 1e-10 * (1.0 + hess.trace());
                    for a in 0..q {
                        hess[(a, a)] += ridge;
                    }
                    let Some(dir) = solve_small(&hess, &grad) else {
                        return (beta, false);
                    };
                    let mut t = 1.0;
                    let mut accepted = None;
                    for _ in 0..40 {
                        let mut trial = beta.clone();
                        for (a, &i) in support.iter().enumerate() {
                            trial[i] = (beta[i] + t * dir[a]).clamp(-COEF_BOUND, COEF_BOUND);
                        }
                        let ft = self.loglik(&trial, 1.0);
                        if ft >= f {
                            accepted = Some((trial, ft));
                            break;
                        }
                        t *= 0.5;
                    }
                    let Some((trial, ft)) = accepted else {
                        return (beta, true);
                    };
                    let moved = support
                        .iter()
                        .map(|&i| (trial[i] - beta[i]).abs())
                        .fold(0.0, f64::max);
                    let gain = ft - f;
                    beta = trial;
                    f = ft;
                    if moved < 1e-10 || gain <= 1e-13 * (1.0 + f.abs()) {
                        return (beta, true);
                    }
                }
                (beta, false)
            }
        }
    }
}

fn support_of(mask: u64, slopes: usize) -> Vec<usize> {
    std::iter::once(0)
        .chain((0..slopes).filter(|k| mask >> k & 1 == 1).map(|k| k + 1))
        .collect()
}

/// Penalized row update. The returned value is never below the value at
/// the warm start.
///
/// Candidates are the unpenalized optima over slope supports. Under TLP a
/// candidate is admissible only when all of its free slopes satisfy
/// `|b| >= tau`, so that the penalty it pays is exactly `lambda * tau` per
/// edge; slopes that would sit on the lasso part of the penalty are set to
/// zero instead. Supports are enumerated exhaustively up to
/// [`EXHAUSTIVE_SLOPES`] slopes and searched greedily (single add/remove
/// moves from the warm support) above.
pub fn mstep_row(
    problem: &RowProblem,
    pen: &Penalty,
    warm: &[f64],
    warm_gamma: Option<f64>,
) -> RowSolution {
    let p = problem.dim();
    assert_eq!(warm.len(), p, "warm start has the wrong length");
    let slopes = p - 1;
    let gaussian = matches!(problem, RowProblem::Gaussian { .. });
    let gamma0 = if gaussian {
        warm_gamma.unwrap_or(1.0)
    } else {
        1.0
    };
    let eval = |beta: &[f64]| problem.loglik(beta, gamma0) - pen.row_value(beta);

    let mut best_beta = warm.to_vec();
    let mut best = eval(warm);
    let mut all_converged = true;

    let admissible = |beta: &[f64], support: &[usize]| match pen.kind {
        PenaltyKind::Tlp => support.iter().skip(1).all(|&i| beta[i].abs() >= pen.tau),
        _ => true,
    };
    let consider =
        |mask: u64, best: &mut f64, best_beta: &mut Vec<f64>, conv: &mut bool| -> Option<f64> {
            let support = support_of(mask, slopes);
            let (beta, ok) = problem.fit_support(&support, warm);
            *conv &= ok;
            if !admissible(&beta, &support) {
                return None;
            }
            let v = eval(&beta);
            if v > *best {
                *best = v;
                *best_beta = beta;
            }
            Some(v)
        };

    if pen.kind == PenaltyKind::None {
        let full = if slopes >= 64 {
            u64::MAX
        } else {
            (1u64 << slopes) - 1
        };
        consider(full, &mut best, &mut best_beta, &mut all_converged);
    } else if slopes <= EXHAUSTIVE_SLOPES {
        for mask in 0..1u64 << slopes {
            consider(mask, &mut best, &mut best_beta, &mut all_converged);
        }
    } else {
        let mut mask = (0..slopes)
            .filter(|&k| warm[k + 1] != 0.0)
            .fold(0u64, |m, k| m | 1 << k);
        let mut current = consider(mask, &mut best, &mut best_beta, &mut all_converged)
            .unwrap_or(f64::NEG_INFINITY);
        if current == f64::NEG_INFINITY {
            mask = 0;
            current = consider(0, &mut best, &mut best_beta, &mut all_converged)
                .unwrap_or(f64::NEG_INFINITY);
        }
        loop {
            let mut step: Option<(u64, f64)> = None;
            for k in 0..slopes {
                let m = mask ^ (1 << k);
                if let Some(v) = consider(m, &mut best, &mut best_beta, &mut all_converged) {
                    if v > current + 1e-12 && step.is_none_or(|(_, sv)| v > sv) {
                        step = Some((m, v));
                    }
                }
            }
            match step {
                Some((m, v)) => {
                    mask = m;
                    current = v;
                }
                None => break,
            }
        }
    }

    let gamma = match problem {
        RowProblem::Gaussian { sxx, sxy, syy, w } => {
            let rss = RowProblem::rss(sxx, sxy, *syy, &best_beta);
            let g = if *w > 0.0 {
                (rss / w).sqrt().max(1e-6)
            } else {
                gamma0
            };
            best = problem.loglik(&best_beta, g) - pen.row_value(&best_beta);
            Some(g)
        }
        RowProblem::Glm { .. } => None,
    };
    RowSolution {
        beta: best_beta,
        gamma,
        value: best,
        converged: all_converged,
    }
}

/// Closed-form Normal update under the hard-threshold penalty: least
/// squares, slopes with `|b| <= tau` set to zero, then `gamma = sqrt(RSS/w)`.
pub fn normal_hard_threshold(
    sxx: &Array2<f64>,
    sxy: &Array1<f64>,
    syy: f64,
    w: f64,
    tau: f64,
) -> (Vec<f64>, f64) {
    let p = sxx.nrows();
    let problem = RowProblem::Gaussian {
        sxx,
        sxy: sxy.clone(),
        syy,
        w,
    };
    let support: Vec<usize> = (0..p).collect();
    let (mut beta, _) = problem.fit_support(&support, &vec![0.0; p]);
    for b in beta.iter_mut().skip(1) {
        if b.abs() <= tau {
            *b = 0.0;
        }
    }
    let rss = RowProblem::rss(sxx, sxy, syy, &beta);
    let gamma = if w > 0.0 {
        (rss / w).sqrt().max(1e-6)
    } else {
        1.0
    };
    (beta, gamma)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    use super::*;
    use crate::rng::rng;

    fn gaussian_moments(x: &Array2<f64>, y: &Array1<f64>) -> (Array2<f64>, Array1<f64>, f64, f64) {
        (x.t().dot(x), x.t().dot(y), y.dot(y), x.nrows() as f64)
    }

    fn random_regression(seed: u64, n: usize, k: usize) -> (Array2<f64>, Array1<f64>) {
        let mut r = rng(seed);
        let x = Array2::from_shape_fn((n, k + 1), |(_, j)| {
            if j == 0 {
                1.0
            } else {
                f64::from(u8::from(r.random::<bool>()))
            }
        });
        let y = Array1::from_shape_fn(n, |i| 0.5 + 2.0 * x[[i, 1]] + r.random::<f64>() - 0.5);
        (x, y)
    }

    #[test]
    fn unpenalized_gaussian_is_ols() {
        let (x, y) = random_regression(1, 60, 3);
        let (sxx, sxy, syy, w) = gaussian_moments(&x, &y);
        let prob = RowProblem::Gaussian {
            sxx: &sxx,
            sxy: sxy.clone(),
            syy,
            w,
        };
        let sol = mstep_row(&prob, &Penalty::none(), &[0.0; 4], Some(1.0));
        let ols = crate::linalg::least_squares(&x, &y.clone().insert_axis(ndarray::Axis(1)))
            .unwrap()
            .0;
        for k in 0..4 {
            assert_relative_eq!(sol.beta[k], ols[[k, 0]], epsilon = 1e-8);
        }
    }

    #[test]
    fn hard_threshold_closed_form() {
        let (x, y) = random_regression(2, 80, 3);
        let (sxx, sxy, syy, w) = gaussian_moments(&x, &y);
        let (beta, gamma) = normal_hard_threshold(&sxx, &sxy, syy, w, 0.3);
        let ols = crate::linalg::least_squares(&x, &y.clone().insert_axis(ndarray::Axis(1)))
            .unwrap()
            .0;
        assert_relative_eq!(beta[0], ols[[0, 0]], epsilon = 1e-9);
        for k in 1..4 {
            let expect = if ols[[k, 0]].abs() > 0.3 {
                ols[[k, 0]]
            } else {
                0.0
            };
            assert_relative_eq!(beta[k], expect, epsilon = 1e-9);
        }
        let resid = &y - &x.dot(&Array1::from(beta.clone()));
        assert_relative_eq!(gamma, (resid.dot(&resid) / 80.0).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn separable_logistic_row_hits_the_box() {
        // y = 1 exactly when the parent bit is 1
        let x = array![[1.0, 0.0], [1.0, 1.0]];
        let n = array![50.0, 50.0];
        let prob = RowProblem::Glm {
            kind: FamilyKind::Bernoulli,
            x: &x,
            n: &n,
            s: array![0.0, 50.0],
        };
        let sol = mstep_row(&prob, &Penalty::none(), &[0.0, 0.0], None);
        assert!(sol.value.is_finite());
        assert!(sol.beta.iter().any(|b| (b.abs() - COEF_BOUND).abs() < 1e-9));
    }

    #[test]
    fn logistic_row_matches_closed_form_proportions() {
        let x = array![[1.0, 0.0], [1.0, 1.0]];
        let n = array![40.0, 60.0];
        let s = array![10.0, 45.0];
        let prob = RowProblem::Glm {
            kind: FamilyKind::Bernoulli,
            x: &x,
            n: &n,
            s,
        };
        let sol = mstep_row(&prob, &Penalty::none(), &[0.0, 0.0], None);
        let l0 = (0.25f64 / 0.75).ln();
        let l1 = (0.75f64 / 0.25).ln();
        assert_relative_eq!(sol.beta[0], l0, epsilon = 1e-8);
        assert_relative_eq!(sol.beta[1], l1 - l0, epsilon = 1e-8);
    }

    #[test]
    fn tlp_drops_weak_slopes() {
        let (x, y) = random_regression(3, 400, 4);
        let (sxx, sxy, syy, w) = gaussian_moments(&x, &y);
        let prob = RowProblem::Gaussian {
            sxx: &sxx,
            sxy,
            syy,
            w,
        };
        let sol = mstep_row(&prob, &Penalty::tlp(4.0, 0.3), &[0.0; 5], Some(0.3));
        assert!(sol.beta[1] > 1.5);
        assert_eq!(&sol.beta[2..], &[0.0, 0.0, 0.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn never_worse_than_warm_start(seed in 0u64..1000, lambda in 0.1..5.0f64, tau in 0.05..1.0f64,
                                       w0 in -2.0..2.0f64, w1 in -2.0..2.0f64, w2 in -2.0..2.0f64) {
            let mut r = rng(seed);
            let x = Array2::from_shape_fn((8, 3), |(g, l)| if l == 0 { 1.0 } else { ((g >> (l - 1)) & 1) as f64 });
            let n = Array1::from_shape_fn(8, |_| 1.0 + 20.0 * r.random::<f64>());
            let s = Array1::from_shape_fn(8, |g| n[g] * r.random::<f64>());
            let prob = RowProblem::Glm { kind: FamilyKind::Bernoulli, x: &x, n: &n, s };
            let pen = Penalty::tlp(lambda, tau);
            let warm = [w0, w1, w2];
            let before = prob.loglik(&warm, 1.0) - pen.row_value(&warm);
            let sol = mstep_row(&prob, &pen, &warm, None);
            prop_assert!(sol.value >= before - 1e-12);
        }

        #[test]
        fn closed_form_equals_numeric_unpenalized(seed in 0u64..1000) {
            let (x, y) = random_regression(seed, 50, 3);
            let (sxx, sxy, syy, w) = gaussian_moments(&x, &y);
            let (cf, _) = normal_hard_threshold(&sxx, &sxy, syy, w, 0.0);
            let prob = RowProblem::Gaussian { sxx: &sxx, sxy, syy, w };
            let num = mstep_row(&prob, &Penalty::none(), &[0.0; 4], Some(1.0));
            for (c, b) in cf.iter().zip(&num.beta) {
                prop_assert!((c - b).abs() < 1e-8);
            }
        }
    }
}
