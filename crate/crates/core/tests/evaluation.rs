mod common;

use dde::evaluation::{
    accuracy_g, align, apply_alignment, candidates_for_layer, ebic, ebic_from_parts, ebic_select,
    hungarian, lrt_select, perplexity, posterior_latents, reconstruct, rmse_theta, topic_metrics,
    Alignment, CandidateFit, DocFreq,
};
use dde::model::{graphs_from_coefficients, loglik, sample};
use dde::{DdeModel, FamilyKind};
use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relabels `m` so that true latent `k` of layer `d` sits at `perms[d][k]`.
fn relabel(m: &DdeModel, perms: &[Vec<usize>]) -> DdeModel {
    let mut out = m.clone();
    for (d, b) in m.coefs.iter().enumerate() {
        let rows: Vec<usize> = if d == 0 {
            (0..b.nrows()).collect()
        } else {
            perms[d - 1].clone()
        };
        for r in 0..b.nrows() {
            out.coefs[d][[rows[r], 0]] = b[[r, 0]];
            for (k, &e) in perms[d].iter().enumerate() {
                out.coefs[d][[rows[r], e + 1]] = b[[r, k + 1]];
            }
        }
    }
    for (k, &e) in perms.last().unwrap().iter().enumerate() {
        out.p[e] = m.p[k];
    }
    out
}

fn brute_assignment_cost(cost: &Array2<f64>) -> f64 {
    fn go(cost: &Array2<f64>, row: usize, used: &mut Vec<bool>) -> f64 {
        if row == cost.nrows() {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for c in 0..cost.ncols() {
            if !used[c] {
                used[c] = true;
                best = best.min(cost[[row, c]] + go(cost, row + 1, used));
                used[c] = false;
            }
        }
        best
    }
    go(cost, 0, &mut vec![false; cost.ncols()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn alignment_undoes_relabelling(dims in prop_oneof![Just(vec![3]), Just(vec![4, 2]), Just(vec![5, 3, 1])], seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = common::random_model(FamilyKind::Normal, 2 * dims[0] + 1, &dims, seed);
        let perms: Vec<Vec<usize>> = dims.iter().map(|&k| common::random_perm(k, &mut rng)).collect();
        let mut hat = relabel(&truth, &perms);
        for b in hat.coefs.iter_mut() {
            b.mapv_inplace(|v| v + rng.random_range(-0.05..0.05));
        }
        let a = align(&hat, &truth).unwrap();
        prop_assert_eq!(&a.perms, &perms);
        let acc = accuracy_g(&graphs_from_coefficients(&relabel(&truth, &perms)), &graphs_from_coefficients(&truth), &a).unwrap();
        prop_assert_eq!(acc.overall, 1.0);
        prop_assert!(rmse_theta(&hat, &truth, &a).unwrap() < 0.05);
        let exact = relabel(&truth, &perms);
        prop_assert_eq!(apply_alignment(&exact, &a), truth);
    }

    #[test]
    fn hungarian_is_optimal(n in 1usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost = Array2::from_shape_fn((n, n), |_| rng.random_range(0.0..10.0));
        let perm = hungarian(&cost).unwrap();
        let got: f64 = perm.iter().enumerate().map(|(r, &c)| cost[[r, c]]).sum();
        prop_assert!((got - brute_assignment_cost(&cost)).abs() < 1e-9);
    }

    #[test]
    fn posterior_mode_maximizes_the_joint(kind in prop_oneof![Just(FamilyKind::Bernoulli), Just(FamilyKind::Poisson), Just(FamilyKind::Normal)], seed in any::<u64>()) {
        let m = common::random_model(kind, 4, &[3, 2], seed);
        let (data, _) = sample(&m, 5, seed).unwrap();
        let est = posterior_latents(&m, &data, 0).unwrap();
        prop_assert!(!est.approximate);
        let configs = common::all_configurations(&m.dims);
        for i in 0..5 {
            let y = data.y.row(i).to_vec();
            let best = configs.iter().map(|c| {
                let a: Vec<&[u8]> = c.iter().map(|v| v.as_slice()).collect();
                common::joint_logprob(&m, &y, &a)
            }).fold(f64::NEG_INFINITY, f64::max);
            let rows: Vec<Vec<u8>> = est.latents.layers.iter().map(|l| l.row(i).to_vec()).collect();
            let a: Vec<&[u8]> = rows.iter().map(|v| v.as_slice()).collect();
            prop_assert!((common::joint_logprob(&m, &y, &a) - best).abs() < 1e-9);
        }
    }
}

#[test]
fn identical_models_score_perfectly() {
    let m = common::random_model(FamilyKind::Poisson, 9, &[3, 1], 4);
    let a = align(&m, &m).unwrap();
    assert_eq!(a, Alignment::identity(&m.dims));
    let g = graphs_from_coefficients(&m);
    assert_eq!(accuracy_g(&g, &g, &a).unwrap().overall, 1.0);
    assert_eq!(rmse_theta(&m, &m, &a).unwrap(), 0.0);
    let other = common::random_model(FamilyKind::Poisson, 9, &[2, 1], 4);
    assert!(align(&m, &other).is_err());
}

#[test]
fn ebic_adds_sparsity_terms_to_deviance() {
    // -2 ll + df ln N + 2 ln C(p, df)
    let want = 2.0 * 100.0 + 3.0 * 50f64.ln() + 2.0 * 10f64.ln();
    assert!((ebic_from_parts(-100.0, 5, 3, 50) - want).abs() < 1e-9);
    let m = common::random_model(FamilyKind::Bernoulli, 6, &[2], 2);
    let (data, _) = sample(&m, 40, 1).unwrap();
    let direct = ebic_from_parts(loglik(&m, &data).unwrap(), m.n_params(), m.n_nonzero(), 40);
    assert!((ebic(&m, &data).unwrap() - direct).abs() < 1e-9);
}

fn cand(k: usize, ll: f64, df: usize) -> CandidateFit {
    CandidateFit {
        dims: vec![k],
        loglik: ll,
        df,
        n_params: 40,
        ebic: -2.0 * ll + df as f64,
    }
}

#[test]
fn lrt_stops_at_the_first_insignificant_gain() {
    // chi-square(1) 95% quantile is 3.841
    let fits = [
        cand(2, -100.0, 10),
        cand(3, -97.0, 11),
        cand(4, -96.0, 12),
        cand(5, -80.0, 13),
    ];
    let (i, steps) = lrt_select(&fits, 0.05).unwrap();
    assert_eq!(i, 1);
    assert_eq!(steps.len(), 2);
    assert!((steps[0].critical - 3.841_458_820_694_124).abs() < 1e-6);
    assert!(steps[0].rejected && !steps[1].rejected);
    assert_eq!(ebic_select(&fits), Some(3));
    assert!(lrt_select(&[], 0.05).is_err());
    assert!(lrt_select(&fits, 1.5).is_err());
}

#[test]
fn candidate_lists_replace_one_layer() {
    assert_eq!(
        candidates_for_layer(&[6, 2], 1, &[1, 2, 3]),
        vec![vec![6, 1], vec![6, 2], vec![6, 3]]
    );
}

#[test]
fn perplexity_of_uniform_rates_is_the_vocabulary_size() {
    let mut m = common::random_model(FamilyKind::Poisson, 5, &[2], 1);
    m.coefs[0] = Array2::from_shape_fn((5, 3), |(_, c)| if c == 0 { 0.3 } else { 0.7 });
    let y = array![[1.0, 0.0, 3.0, 2.0, 0.0], [0.0, 4.0, 1.0, 0.0, 1.0]];
    let a1 = array![[1u8, 0], [1, 1]];
    assert!((perplexity(&m, &y, &a1).unwrap() - 5.0).abs() < 1e-9);
    let mean = reconstruct(&m, &dde::LatentAssignment { layers: vec![a1] }).unwrap();
    assert!((mean[[0, 0]] - 1f64.exp()).abs() < 1e-12);
    let bern = common::random_model(FamilyKind::Bernoulli, 5, &[2], 1);
    assert!(perplexity(&bern, &y, &array![[1u8, 0], [1, 1]]).is_err());
}

#[test]
fn topic_metrics_on_a_small_vocabulary() {
    // words 0, 1 belong to topic 0; words 2, 3 to topic 1; word 4 to both
    let b1 = array![
        [0.0, 3.0, 0.0],
        [0.0, 2.0, 0.5],
        [0.0, 0.0, 3.0],
        [0.0, 0.2, 2.0],
        [0.0, 1.0, 1.0]
    ];
    let y = array![
        [1.0, 1.0, 0.0, 0.0, 1.0],
        [1.0, 0.0, 1.0, 1.0, 0.0],
        [0.0, 2.0, 1.0, 0.0, 0.0]
    ];
    let freq = DocFreq::from_counts(&y);
    assert_eq!(freq.pair[[0, 1]], 1.0);
    assert_eq!(freq.single(1), 2.0);
    let m = topic_metrics(&b1, &freq, 2).unwrap();
    assert_eq!(m.representatives, vec![vec![0, 1], vec![2, 3]]);
    assert_eq!(m.similarity, 0);
    // sum over ordered pairs of ln((D(v1, v2) + 1) / D(v2)), averaged over topics
    let coh0 = ((1.0 + 1.0) / 2.0f64).ln() + ((1.0 + 1.0) / 2.0f64).ln();
    let coh1 = ((1.0 + 1.0) / 1.0f64).ln() + ((1.0 + 1.0) / 2.0f64).ln();
    assert!((m.neg_coherence + (coh0 + coh1) / 2.0).abs() < 1e-12);
    let m3 = topic_metrics(&b1, &freq, 5).unwrap();
    assert_eq!(m3.similarity, 5);
}
