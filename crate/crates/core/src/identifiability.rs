//! Executable identifiability checkers.
//!
//! * Condition A: every latent variable has at least two (A3: three) pure
//!   children, i.e. children with no other parent.
//! * Condition B: outside a designated set of pure-children rows, the
//!   coefficients separate every pair of distinct latent configurations.
//! * Condition C: the child rows split into `I1, I2, I3` such that `G`
//!   restricted to `I1` and to `I2` each has a column-saturating matching and
//!   `G` restricted to `I3` has no empty column.

use std::collections::VecDeque;

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::model::{graphs_from_coefficients, graphs_with_tolerance, DdeModel, GRAPH_EPS};

/// Largest latent width for which condition B enumerates all pairs.
pub const CONDITION_B_MAX_K: usize = 14;
/// Numerical zero for condition B.
pub const CONDITION_B_TOL: f64 = 1e-12;
/// Largest number of child rows for which condition C is searched exhaustively.
pub const CONDITION_C_EXHAUSTIVE_ROWS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    A,
    A3,
    B,
    C,
    /// Top-layer proportions strictly inside (0, 1).
    Proportions,
    /// No graph column without children.
    NonEmptyColumns,
    /// No slope so close to zero that the edge is ambiguous.
    Faithfulness,
    /// Positive slope column sums.
    PositiveColumnSums,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Holds {
    Yes,
    No,
    Unknown,
}

impl Holds {
    /// Process exit code: 0 yes, 1 no, 2 unknown.
    pub fn exit_code(self) -> i32 {
        match self {
            Holds::Yes => 0,
            Holds::No => 1,
            Holds::Unknown => 2,
        }
    }

    /// Conjunction: any `No` wins, then any `Unknown`.
    pub fn all<I: IntoIterator<Item = Holds>>(it: I) -> Holds {
        let mut out = Holds::Yes;
        for h in it {
            match h {
                Holds::No => return Holds::No,
                Holds::Unknown => out = Holds::Unknown,
                Holds::Yes => {}
            }
        }
        out
    }
}

/// Evidence supporting a verdict. Indices are 0-based.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Certificate {
    /// Pure-children rows per column.
    PureChildren {
        per_column: Vec<Vec<usize>>,
    },
    /// Every pair of configurations is separated by some row in `rows`.
    Separated {
        rows: Vec<usize>,
        pairs_checked: u64,
    },
    /// Two configurations no row outside the pure children separates.
    Inseparable {
        alpha: Vec<u8>,
        alpha_prime: Vec<u8>,
    },
    /// A partition with a column-saturating matching on each of `i1`, `i2`;
    /// `matching1[k]` is the row of `i1` matched to column `k`.
    Partition {
        i1: Vec<usize>,
        i2: Vec<usize>,
        i3: Vec<usize>,
        matching1: Vec<usize>,
        matching2: Vec<usize>,
    },
    /// Offending indices of a failed check.
    Offending {
        indices: Vec<usize>,
    },
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: Condition,
    /// 1-based layer index `d` of `G^(d)` / `B^(d)`, when the check is per layer.
    pub layer: Option<usize>,
    pub holds: Holds,
    pub certificate: Certificate,
    pub note: Option<String>,
}

impl ConditionReport {
    fn new(condition: Condition, holds: Holds, certificate: Certificate) -> Self {
        Self {
            condition,
            layer: None,
            holds,
            certificate,
            note: None,
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn at_layer(mut self, d: usize) -> Self {
        self.layer = Some(d);
        self
    }
}

/// Rows with a single one, grouped by the column holding it.
fn pure_rows_by_column(g: ArrayView2<u8>) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); g.ncols()];
    for (j, row) in g.rows().into_iter().enumerate() {
        let ones: Vec<usize> = row
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(k, _)| k)
            .collect();
        if let [k] = ones[..] {
            out[k].push(j);
        }
    }
    out
}

/// Pure-children condition with at least `min_pure` pure children per column.
pub fn check_condition_a(g: &Array2<u8>, min_pure: usize) -> ConditionReport {
    let per_column = pure_rows_by_column(g.view());
    let short: Vec<usize> = (0..g.ncols())
        .filter(|&k| per_column[k].len() < min_pure)
        .collect();
    let condition = if min_pure >= 3 {
        Condition::A3
    } else {
        Condition::A
    };
    if short.is_empty() {
        ConditionReport::new(
            condition,
            Holds::Yes,
            Certificate::PureChildren { per_column },
        )
    } else {
        ConditionReport::new(
            condition,
            Holds::No,
            Certificate::Offending {
                indices: short.clone(),
            },
        )
        .with_note(format!(
            "columns {short:?} have fewer than {min_pure} pure children"
        ))
    }
}

/// The first two pure children per column, for use as condition B's excluded
/// rows. `None` when some column has fewer than two.
pub fn default_pure_rows(g: &Array2<u8>) -> Option<Vec<usize>> {
    let per_column = pure_rows_by_column(g.view());
    let mut rows = Vec::new();
    for col in per_column {
        if col.len() < 2 {
            return None;
        }
        rows.extend_from_slice(&col[..2]);
    }
    rows.sort_unstable();
    Some(rows)
}

/// Distinguishability condition on a coefficient matrix `b` (intercept in
/// column 0), ignoring the rows in `pure_rows`.
///
/// The configurations are separated iff the map `alpha -> B_rest alpha` is
/// injective up to [`CONDITION_B_TOL`] in the max norm. The images are sorted
/// by a projection with incommensurate weights and only neighbours whose
/// projections lie within the tolerance band are compared in full.
pub fn check_condition_b(b: &Array2<f64>, pure_rows: &[usize]) -> ConditionReport {
    let k = b.ncols().saturating_sub(1);
    if k > CONDITION_B_MAX_K {
        return ConditionReport::new(Condition::B, Holds::Unknown, Certificate::None).with_note(
            format!("{k} latent variables exceed the enumeration limit of {CONDITION_B_MAX_K}"),
        );
    }
    let rows: Vec<usize> = (0..b.nrows()).filter(|j| !pure_rows.contains(j)).collect();
    let slopes = b.slice(s![.., 1..]);
    // configuration c has alpha_k = bit k of c (first coordinate lowest)
    let n_cfg = 1usize << k;
    let images: Vec<Vec<f64>> = (0..n_cfg)
        .map(|c| {
            rows.iter()
                .map(|&j| {
                    (0..k)
                        .filter(|&l| (c >> l) & 1 == 1)
                        .map(|l| slopes[[j, l]])
                        .sum()
                })
                .collect()
        })
        .collect();
    let weights: Vec<f64> = (0..rows.len())
        .map(|i| ((i as f64 + 1.0) * std::f64::consts::SQRT_2).fract() + 0.5)
        .collect();
    let band = CONDITION_B_TOL * weights.iter().sum::<f64>();
    let proj: Vec<f64> = images
        .iter()
        .map(|v| v.iter().zip(&weights).map(|(a, w)| a * w).sum())
        .collect();
    let mut order: Vec<usize> = (0..n_cfg).collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));

    let mut worst: Option<(usize, usize)> = None;
    for (pos, &a) in order.iter().enumerate() {
        for &c in &order[pos + 1..] {
            if proj[c] - proj[a] > band {
                break;
            }
            let same = images[a]
                .iter()
                .zip(&images[c])
                .all(|(x, y)| (x - y).abs() <= CONDITION_B_TOL);
            if same {
                let pair = (a.min(c), a.max(c));
                if worst.is_none_or(|w| pair < w) {
                    worst = Some(pair);
                }
            }
        }
    }
    let bits = |c: usize| (0..k).map(|l| ((c >> l) & 1) as u8).collect::<Vec<u8>>();
    match worst {
        None => ConditionReport::new(
            Condition::B,
            Holds::Yes,
            Certificate::Separated {
                rows,
                pairs_checked: (n_cfg as u64) * (n_cfg as u64 - 1) / 2,
            },
        ),
        Some((a, c)) => ConditionReport::new(
            Condition::B,
            Holds::No,
            Certificate::Inseparable {
                alpha: bits(a),
                alpha_prime: bits(c),
            },
        ),
    }
}

/// Maximum bipartite matching between rows and columns of a binary matrix
/// (Hopcroft–Karp). Returns `row -> column`. Deterministic: rows and columns
/// are scanned in ascending order.
pub fn max_bipartite_matching(g: ArrayView2<u8>) -> Vec<Option<usize>> {
    let (nr, nc) = g.dim();
    let adj: Vec<Vec<usize>> = (0..nr)
        .map(|r| (0..nc).filter(|&c| g[[r, c]] != 0).collect())
        .collect();
    hopcroft_karp(&adj, nc)
}

fn hopcroft_karp(adj: &[Vec<usize>], nc: usize) -> Vec<Option<usize>> {
    const INF: usize = usize::MAX;
    let nr = adj.len();
    let mut row_match: Vec<Option<usize>> = vec![None; nr];
    let mut col_match: Vec<Option<usize>> = vec![None; nc];
    let mut dist = vec![INF; nr];

    fn dfs(
        r: usize,
        adj: &[Vec<usize>],
        dist: &mut [usize],
        row_match: &mut [Option<usize>],
        col_match: &mut [Option<usize>],
    ) -> bool {
        for &c in &adj[r] {
            let ok = match col_match[c] {
                None => true,
                Some(r2) => dist[r2] == dist[r] + 1 && dfs(r2, adj, dist, row_match, col_match),
            };
            if ok {
                row_match[r] = Some(c);
                col_match[c] = Some(r);
                return true;
            }
        }
        dist[r] = usize::MAX;
        false
    }

    loop {
        let mut queue = VecDeque::new();
        for r in 0..nr {
            if row_match[r].is_none() {
                dist[r] = 0;
                queue.push_back(r);
            } else {
                dist[r] = INF;
            }
        }
        let mut found = false;
        while let Some(r) = queue.pop_front() {
            for &c in &adj[r] {
                match col_match[c] {
                    None => found = true,
                    Some(r2) if dist[r2] == INF => {
                        dist[r2] = dist[r] + 1;
                        queue.push_back(r2);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        for r in 0..nr {
            if row_match[r].is_none() {
                dfs(r, adj, &mut dist, &mut row_match, &mut col_match);
            }
        }
    }
    row_match
}

/// Column-saturating matching using only `rows` (in the given order);
/// returns the matched row per column.
fn saturating_matching(g: &Array2<u8>, rows: &[usize]) -> Option<Vec<usize>> {
    let nc = g.ncols();
    let adj: Vec<Vec<usize>> = rows
        .iter()
        .map(|&r| (0..nc).filter(|&c| g[[r, c]] != 0).collect())
        .collect();
    let m = hopcroft_karp(&adj, nc);
    let mut per_col = vec![usize::MAX; nc];
    for (i, c) in m.iter().enumerate() {
        if let Some(c) = c {
            per_col[*c] = rows[i];
        }
    }
    per_col.iter().all(|&r| r != usize::MAX).then_some(per_col)
}

fn covers(g: &Array2<u8>, rows: &[usize]) -> bool {
    (0..g.ncols()).all(|c| rows.iter().any(|&r| g[[r, c]] != 0))
}

fn partition_certificate(g: &Array2<u8>, m1: Vec<usize>, m2: Vec<usize>) -> Certificate {
    let mut i1 = m1.clone();
    let mut i2 = m2.clone();
    i1.sort_unstable();
    i2.sort_unstable();
    let i3 = (0..g.nrows())
        .filter(|r| !i1.contains(r) && !i2.contains(r))
        .collect();
    Certificate::Partition {
        i1,
        i2,
        i3,
        matching1: m1,
        matching2: m2,
    }
}

/// Greedy attempt: match on all rows (in `order`), match again on the rest,
/// and check the leftover rows cover every column.
fn greedy_partition(g: &Array2<u8>, order: &[usize]) -> Option<(Vec<usize>, Vec<usize>)> {
    let m1 = saturating_matching(g, order)?;
    let rest: Vec<usize> = order.iter().copied().filter(|r| !m1.contains(r)).collect();
    let m2 = saturating_matching(g, &rest)?;
    let left: Vec<usize> = rest.iter().copied().filter(|r| !m2.contains(r)).collect();
    covers(g, &left).then_some((m1, m2))
}

/// Perfect-matching condition on a graph `G` (children x parents).
pub fn check_condition_c(g: &Array2<u8>) -> ConditionReport {
    let (nr, nc) = g.dim();
    if nc == 0 {
        return ConditionReport::new(
            Condition::C,
            Holds::Yes,
            Certificate::Partition {
                i1: vec![],
                i2: vec![],
                i3: (0..nr).collect(),
                matching1: vec![],
                matching2: vec![],
            },
        );
    }
    // necessary: each column needs a child in each part
    let thin: Vec<usize> = (0..nc)
        .filter(|&c| g.column(c).iter().filter(|&&v| v != 0).count() < 3)
        .collect();
    if !thin.is_empty() {
        return ConditionReport::new(
            Condition::C,
            Holds::No,
            Certificate::Offending { indices: thin },
        )
        .with_note("columns with fewer than three children");
    }
    if nr < 2 * nc + 1 {
        return ConditionReport::new(Condition::C, Holds::No, Certificate::None).with_note(
            format!("{nr} rows cannot hold two matchings of size {nc} and a cover"),
        );
    }
    let natural: Vec<usize> = (0..nr).collect();
    if let Some((m1, m2)) = greedy_partition(g, &natural) {
        return ConditionReport::new(Condition::C, Holds::Yes, partition_certificate(g, m1, m2));
    }
    if nr <= CONDITION_C_EXHAUSTIVE_ROWS {
        return match exhaustive_partition(g) {
            Some((m1, m2)) => {
                ConditionReport::new(Condition::C, Holds::Yes, partition_certificate(g, m1, m2))
            }
            None => ConditionReport::new(Condition::C, Holds::No, Certificate::None)
                .with_note("no partition exists (exhaustive search)"),
        };
    }
    // bounded retries with rotated and reversed row orders
    for shift in 1..nr {
        for rev in [false, true] {
            let mut order: Vec<usize> = (0..nr).map(|i| (i + shift) % nr).collect();
            if rev {
                order.reverse();
            }
            if let Some((m1, m2)) = greedy_partition(g, &order) {
                return ConditionReport::new(
                    Condition::C,
                    Holds::Yes,
                    partition_certificate(g, m1, m2),
                );
            }
        }
    }
    ConditionReport::new(Condition::C, Holds::Unknown, Certificate::None).with_note(format!(
        "{nr} rows exceed the exhaustive limit of {CONDITION_C_EXHAUSTIVE_ROWS}"
    ))
}

/// Searches all pairs of disjoint matchable row sets of size `K`. Shrinking
/// `I1`, `I2` to their matched rows only enlarges `I3`, so this is complete.
fn exhaustive_partition(g: &Array2<u8>) -> Option<(Vec<usize>, Vec<usize>)> {
    let (nr, nc) = g.dim();
    let col_masks: Vec<u32> = (0..nc)
        .map(|c| {
            (0..nr)
                .filter(|&r| g[[r, c]] != 0)
                .fold(0u32, |m, r| m | (1 << r))
        })
        .collect();
    let full: u32 = if nr == 32 { u32::MAX } else { (1u32 << nr) - 1 };
    let mut sets: Vec<(u32, Vec<usize>)> = Vec::new();
    // Gosper's hack over subsets of size nc
    let mut s: u32 = (1u32 << nc) - 1;
    while s <= full {
        let rows: Vec<usize> = (0..nr).filter(|&r| s & (1 << r) != 0).collect();
        if let Some(m) = saturating_matching(g, &rows) {
            sets.push((s, m));
        }
        let c = s & s.wrapping_neg();
        let r = s + c;
        if r == 0 || r > full {
            break;
        }
        s = (((r ^ s) >> 2) / c) | r;
    }
    for (i, (a, ma)) in sets.iter().enumerate() {
        for (b, mb) in &sets[i + 1..] {
            if a & b != 0 {
                continue;
            }
            let rest = full & !(a | b);
            if col_masks.iter().all(|&m| m & rest != 0) {
                return Some((ma.clone(), mb.clone()));
            }
        }
    }
    None
}

/// Checks the standing assumptions: proportions inside (0, 1), no graph
/// column without children, unambiguous edges and positive slope column
/// sums. One report per check and layer.
pub fn validate_model_assumptions(model: &DdeModel) -> Vec<ConditionReport> {
    let mut out = Vec::new();
    let bad_p: Vec<usize> = model
        .p
        .iter()
        .enumerate()
        .filter(|(_, &p)| !(p > 0.0 && p < 1.0))
        .map(|(k, _)| k)
        .collect();
    out.push(verdict(Condition::Proportions, bad_p));
    let graphs = graphs_from_coefficients(model);
    let loose = graphs_with_tolerance(model, GRAPH_EPS);
    for (d, b) in model.coefs.iter().enumerate() {
        let g = &graphs.layers[d];
        let empty: Vec<usize> = (0..g.ncols())
            .filter(|&k| g.column(k).iter().all(|&v| v == 0))
            .collect();
        out.push(verdict(Condition::NonEmptyColumns, empty).at_layer(d + 1));
        let ambiguous: Vec<usize> = (0..g.ncols())
            .filter(|&k| g.column(k) != loose.layers[d].column(k))
            .collect();
        out.push(verdict(Condition::Faithfulness, ambiguous).at_layer(d + 1));
        let nonpositive: Vec<usize> = (0..g.ncols())
            .filter(|&k| b.column(k + 1).sum() <= 0.0)
            .collect();
        out.push(verdict(Condition::PositiveColumnSums, nonpositive).at_layer(d + 1));
    }
    out
}

fn verdict(condition: Condition, offending: Vec<usize>) -> ConditionReport {
    if offending.is_empty() {
        ConditionReport::new(condition, Holds::Yes, Certificate::None)
    } else {
        ConditionReport::new(
            condition,
            Holds::No,
            Certificate::Offending { indices: offending },
        )
    }
}

/// Re-verifies a `Yes` certificate by direct inspection.
pub fn verify_certificate(g: &Array2<u8>, report: &ConditionReport) -> bool {
    match &report.certificate {
        Certificate::PureChildren { per_column } => {
            per_column.iter().enumerate().all(|(k, rows)| {
                rows.iter().all(|&r| {
                    g.row(r).iter().map(|&v| usize::from(v != 0)).sum::<usize>() == 1
                        && g[[r, k]] != 0
                })
            })
        }
        Certificate::Partition {
            i1,
            i2,
            i3,
            matching1,
            matching2,
        } => {
            let nc = g.ncols();
            let ok_matching = |m: &Vec<usize>, part: &Vec<usize>| {
                m.len() == nc
                    && m.iter()
                        .enumerate()
                        .all(|(c, &r)| part.contains(&r) && g[[r, c]] != 0)
                    && {
                        let mut s = m.clone();
                        s.sort_unstable();
                        s.dedup();
                        s.len() == nc
                    }
            };
            let mut all: Vec<usize> = i1.iter().chain(i2).chain(i3).copied().collect();
            all.sort_unstable();
            all == (0..g.nrows()).collect::<Vec<_>>()
                && ok_matching(matching1, i1)
                && ok_matching(matching2, i2)
                && covers(g, i3)
        }
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;
    use proptest::prelude::*;

    use super::*;
    use crate::family::ObservedFamily;
    use crate::model::{make_benchmark_params, ParamKind};

    fn bs() -> DdeModel {
        make_benchmark_params(ParamKind::Strict, 18, &[6, 2], ObservedFamily::NORMAL).unwrap()
    }

    fn bg() -> DdeModel {
        make_benchmark_params(ParamKind::Generic, 18, &[6, 2], ObservedFamily::NORMAL).unwrap()
    }

    #[test]
    fn condition_a_on_benchmarks() {
        let g = graphs_from_coefficients(&bs()).layers[0].clone();
        let r = check_condition_a(&g, 2);
        assert_eq!(r.holds, Holds::Yes);
        let Certificate::PureChildren { per_column } = &r.certificate else {
            panic!()
        };
        for (k, rows) in per_column.iter().enumerate() {
            assert_eq!(rows, &vec![k, k + 6]);
        }
        assert!(verify_certificate(&g, &r));
        let g = graphs_from_coefficients(&bg()).layers[0].clone();
        assert_eq!(check_condition_a(&g, 2).holds, Holds::No);
    }

    #[test]
    fn condition_a_identity() {
        let eye = Array2::<u8>::eye(4);
        assert_eq!(check_condition_a(&eye, 1).holds, Holds::Yes);
        assert_eq!(check_condition_a(&eye, 2).holds, Holds::No);
    }

    #[test]
    fn condition_b_on_strict_parameters() {
        let m = bs();
        let pure: Vec<usize> = (0..12).collect();
        assert_eq!(check_condition_b(&m.coefs[0], &pure).holds, Holds::Yes);
        let g = graphs_from_coefficients(&m).layers[0].clone();
        assert_eq!(default_pure_rows(&g).unwrap(), pure);
    }

    #[test]
    fn condition_b_zero_block_fails_with_first_pair() {
        let mut b = bs().coefs[0].clone();
        b.slice_mut(s![12.., 1..]).fill(0.0);
        let pure: Vec<usize> = (0..12).collect();
        let r = check_condition_b(&b, &pure);
        assert_eq!(r.holds, Holds::No);
        assert_eq!(
            r.certificate,
            Certificate::Inseparable {
                alpha: vec![0; 6],
                alpha_prime: vec![1, 0, 0, 0, 0, 0]
            }
        );
    }

    #[test]
    fn condition_b_third_identity() {
        let k = 4;
        let mut b = Array2::zeros((3 * k, k + 1));
        for blk in 0..3 {
            for i in 0..k {
                b[[blk * k + i, i + 1]] = 2.0;
            }
        }
        let pure: Vec<usize> = (0..2 * k).collect();
        assert_eq!(check_condition_b(&b, &pure).holds, Holds::Yes);
    }

    #[test]
    fn condition_b_capacity() {
        let b = Array2::zeros((3, 16));
        assert_eq!(check_condition_b(&b, &[]).holds, Holds::Unknown);
    }

    #[test]
    fn matching_examples() {
        let eye = Array2::<u8>::eye(5);
        let m = max_bipartite_matching(eye.view());
        assert_eq!(m.iter().flatten().count(), 5);
        let ones = Array2::<u8>::ones((2, 3));
        assert_eq!(
            max_bipartite_matching(ones.view()).iter().flatten().count(),
            2
        );
    }

    #[test]
    fn condition_c_figure_example() {
        let g = Array2::<u8>::ones((5, 2));
        let r = check_condition_c(&g);
        assert_eq!(r.holds, Holds::Yes);
        let Certificate::Partition { i1, i2, i3, .. } = &r.certificate else {
            panic!()
        };
        assert_eq!(
            (i1.clone(), i2.clone(), i3.clone()),
            (vec![0, 1], vec![2, 3], vec![4])
        );
        assert!(verify_certificate(&g, &r));
    }

    #[test]
    fn condition_c_benchmarks_and_empty_column() {
        for m in [bs(), bg()] {
            let g = graphs_from_coefficients(&m).layers[0].clone();
            let r = check_condition_c(&g);
            assert_eq!(r.holds, Holds::Yes);
            assert!(verify_certificate(&g, &r));
        }
        let g = array![[1u8, 0], [1, 0], [1, 0], [1, 0], [1, 0]];
        assert_eq!(check_condition_c(&g).holds, Holds::No);
    }

    #[test]
    fn assumptions() {
        assert!(validate_model_assumptions(&bs())
            .iter()
            .all(|r| r.holds == Holds::Yes));
        let mut m = bs();
        m.p[0] = 1.0;
        let r = validate_model_assumptions(&m);
        assert_eq!(r[0].condition, Condition::Proportions);
        assert_eq!(r[0].holds, Holds::No);
        let mut m = bs();
        m.coefs[0].column_mut(2).mapv_inplace(|v| -v);
        let bad: Vec<_> = validate_model_assumptions(&m)
            .into_iter()
            .filter(|r| r.holds == Holds::No)
            .collect();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].condition, Condition::PositiveColumnSums);
        assert_eq!(
            bad[0].certificate,
            Certificate::Offending { indices: vec![1] }
        );
    }

    fn brute_matching(g: &Array2<u8>) -> usize {
        fn rec(g: &Array2<u8>, r: usize, used: u32) -> usize {
            if r == g.nrows() {
                return 0;
            }
            let mut best = rec(g, r + 1, used);
            for c in 0..g.ncols() {
                if g[[r, c]] != 0 && used & (1 << c) == 0 {
                    best = best.max(1 + rec(g, r + 1, used | (1 << c)));
                }
            }
            best
        }
        rec(g, 0, 0)
    }

    fn graph(rows: usize, cols: usize) -> impl Strategy<Value = Array2<u8>> {
        proptest::collection::vec(proptest::bool::weighted(0.4), rows * cols).prop_map(move |v| {
            Array2::from_shape_vec((rows, cols), v.into_iter().map(u8::from).collect()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn matching_is_maximum(g in graph(8, 5)) {
            let m = max_bipartite_matching(g.view());
            let mut cols: Vec<usize> = m.iter().flatten().copied().collect();
            for (r, c) in m.iter().enumerate() {
                if let Some(c) = c {
                    prop_assert_eq!(g[[r, *c]], 1);
                }
            }
            let size = cols.len();
            cols.sort_unstable();
            cols.dedup();
            prop_assert_eq!(cols.len(), size);
            prop_assert_eq!(size, brute_matching(&g));
        }

        #[test]
        fn a3_implies_a(g in graph(12, 3)) {
            if check_condition_a(&g, 3).holds == Holds::Yes {
                prop_assert_eq!(check_condition_a(&g, 2).holds, Holds::Yes);
            }
        }

        #[test]
        fn adding_an_edge_outside_the_certificate_keeps_c(g in graph(9, 2), r in 0usize..9, c in 0usize..2) {
            let rep = check_condition_c(&g);
            if let (Holds::Yes, Certificate::Partition { i1, i2, .. }) = (rep.holds, &rep.certificate) {
                if !i1.contains(&r) && !i2.contains(&r) {
                    let mut g2 = g.clone();
                    g2[[r, c]] = 1;
                    prop_assert!(verify_certificate(&g2, &rep));
                }
            }
        }
    }
}
