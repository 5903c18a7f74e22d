//! Sufficient statistics for the row-wise M-step objectives.
//!
//! Every row objective of an exponential-family layer depends on the data
//! only through, for each parent configuration `c`, the total weight `n_c`
//! and the weighted sum of the child's values `s_c`. Normal rows depend only
//! on the weighted cross-moments of `x = [1, parent]` and `y`. The same
//! containers hold exact posterior expectations (EM) and stochastically
//! averaged sample statistics (SAEM).

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};

/// Per-parent-configuration weights and child sums for one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedStats {
    pub parent_width: usize,
    pub n_children: usize,
    index: BTreeMap<u64, usize>,
    /// Parent configuration per slot, first coordinate in the highest bit.
    pub configs: Vec<u64>,
    pub counts: Vec<f64>,
    /// `sums[slot * n_children + child]`.
    pub sums: Vec<f64>,
}

impl GroupedStats {
    pub fn new(parent_width: usize, n_children: usize) -> Self {
        assert!(
            parent_width <= 64,
            "parent configurations are packed into u64"
        );
        Self {
            parent_width,
            n_children,
            index: BTreeMap::new(),
            configs: Vec::new(),
            counts: Vec::new(),
            sums: Vec::new(),
        }
    }

    pub fn n_groups(&self) -> usize {
        self.configs.len()
    }

    fn slot(&mut self, config: u64) -> usize {
        if let Some(&s) = self.index.get(&config) {
            return s;
        }
        let s = self.configs.len();
        self.index.insert(config, s);
        self.configs.push(config);
        self.counts.push(0.0);
        self.sums.extend(std::iter::repeat_n(0.0, self.n_children));
        s
    }

    /// Adds weight `w` at parent configuration `config` with child values
    /// `values` (each multiplied by `w`).
    pub fn add<I: IntoIterator<Item = f64>>(&mut self, config: u64, w: f64, values: I) {
        let s = self.slot(config);
        self.counts[s] += w;
        let base = s * self.n_children;
        for (k, v) in values.into_iter().enumerate() {
            self.sums[base + k] += w * v;
        }
    }

    /// Adds pre-weighted sums.
    pub fn add_raw(&mut self, config: u64, count: f64, sums: &[f64]) {
        let s = self.slot(config);
        self.counts[s] += count;
        let base = s * self.n_children;
        for (k, v) in sums.iter().enumerate() {
            self.sums[base + k] += v;
        }
    }

    pub fn scale(&mut self, f: f64) {
        self.counts.iter_mut().for_each(|v| *v *= f);
        self.sums.iter_mut().for_each(|v| *v *= f);
    }

    /// `self += f * other`.
    pub fn add_scaled(&mut self, other: &GroupedStats, f: f64) {
        for (slot, &c) in other.configs.iter().enumerate() {
            let base = slot * other.n_children;
            let sums: Vec<f64> = other.sums[base..base + other.n_children]
                .iter()
                .map(|v| f * v)
                .collect();
            self.add_raw(c, f * other.counts[slot], &sums);
        }
    }

    /// Design rows `[1, bits(c)]` per slot.
    pub fn design(&self) -> Array2<f64> {
        let k = self.parent_width;
        Array2::from_shape_fn((self.n_groups(), k + 1), |(g, l)| {
            if l == 0 {
                1.0
            } else {
                ((self.configs[g] >> (k - l)) & 1) as f64
            }
        })
    }

    pub fn child_sums(&self, child: usize) -> Array1<f64> {
        (0..self.n_groups())
            .map(|g| self.sums[g * self.n_children + child])
            .collect()
    }

    pub fn counts(&self) -> Array1<f64> {
        Array1::from(self.counts.clone())
    }
}

/// Weighted cross-moments for Normal rows: `sxx = sum w x x'`,
/// `sxy = sum w x y'`, `syy_j = sum w y_j^2`, `w = sum w`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianStats {
    pub sxx: Array2<f64>,
    pub sxy: Array2<f64>,
    pub syy: Array1<f64>,
    pub w: f64,
}

impl GaussianStats {
    pub fn zeros(parent_width: usize, n_children: usize) -> Self {
        Self {
            sxx: Array2::zeros((parent_width + 1, parent_width + 1)),
            sxy: Array2::zeros((parent_width + 1, n_children)),
            syy: Array1::zeros(n_children),
            w: 0.0,
        }
    }

    pub fn scale(&mut self, f: f64) {
        self.sxx *= f;
        self.sxy *= f;
        self.syy *= f;
        self.w *= f;
    }

    pub fn add_scaled(&mut self, other: &GaussianStats, f: f64) {
        self.sxx.scaled_add(f, &other.sxx);
        self.sxy.scaled_add(f, &other.sxy);
        self.syy.scaled_add(f, &other.syy);
        self.w += f * other.w;
    }

    /// Converts grouped statistics of a Normal layer; `syy` and `w` are
    /// supplied separately because they are not functions of the groups.
    pub fn from_grouped(g: &GroupedStats, syy: Array1<f64>, w: f64) -> Self {
        let x = g.design();
        let n = g.counts();
        let xw = &x * &n.view().insert_axis(ndarray::Axis(1));
        let sxx = xw.t().dot(&x);
        let s =
            Array2::from_shape_vec((g.n_groups(), g.n_children), g.sums.clone()).expect("shape");
        let sxy = x.t().dot(&s);
        Self { sxx, sxy, syy, w }
    }
}

/// Statistics for the rows of one coefficient matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerStats {
    Grouped(GroupedStats),
    Gaussian(GaussianStats),
}

impl LayerStats {
    pub fn scale(&mut self, f: f64) {
        match self {
            LayerStats::Grouped(g) => g.scale(f),
            LayerStats::Gaussian(g) => g.scale(f),
        }
    }

    /// `self += f * other`.
    pub fn add_scaled(&mut self, other: &LayerStats, f: f64) {
        match (self, other) {
            (LayerStats::Grouped(a), LayerStats::Grouped(b)) => a.add_scaled(b, f),
            (LayerStats::Gaussian(a), LayerStats::Gaussian(b)) => a.add_scaled(b, f),
            _ => panic!("mismatched statistic kinds"),
        }
    }

    /// `self = (1 - theta) self + theta other`.
    pub fn blend(&mut self, other: &LayerStats, theta: f64) {
        self.scale(1.0 - theta);
        self.add_scaled(other, theta);
    }
}

/// Packs a binary row into a configuration key, first coordinate highest.
pub fn pack_bits<'a, I: IntoIterator<Item = &'a u8>>(bits: I) -> u64 {
    bits.into_iter()
        .fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use ndarray::array;

    use super::*;

    #[test]
    fn grouped_accumulates_and_blends() {
        let mut g = GroupedStats::new(2, 1);
        g.add(pack_bits(&[1, 0]), 1.0, [3.0]);
        g.add(pack_bits(&[1, 0]), 1.0, [1.0]);
        g.add(pack_bits(&[0, 1]), 2.0, [0.5]);
        assert_eq!(g.n_groups(), 2);
        assert_eq!(g.counts, vec![2.0, 2.0]);
        assert_eq!(g.child_sums(0), array![4.0, 1.0]);
        assert_eq!(g.design(), array![[1.0, 1.0, 0.0], [1.0, 0.0, 1.0]]);

        let mut other = GroupedStats::new(2, 1);
        other.add(pack_bits(&[1, 1]), 4.0, [1.0]);
        let mut a = LayerStats::Grouped(g);
        a.blend(&LayerStats::Grouped(other), 0.5);
        let LayerStats::Grouped(g) = a else {
            unreachable!()
        };
        assert_eq!(g.counts, vec![1.0, 1.0, 2.0]);
        assert_eq!(g.child_sums(0), array![2.0, 0.5, 2.0]);
    }

    #[test]
    fn gaussian_from_grouped_matches_direct_moments() {
        let rows = [
            ([1u8, 0], 2.0),
            ([0, 1], -1.0),
            ([1, 1], 0.5),
            ([1, 0], 1.0),
        ];
        let mut g = GroupedStats::new(2, 1);
        let mut direct = GaussianStats::zeros(2, 1);
        for (bits, y) in rows {
            g.add(pack_bits(&bits), 1.0, [y]);
            let x = array![1.0, f64::from(bits[0]), f64::from(bits[1])];
            for a in 0..3 {
                for b in 0..3 {
                    direct.sxx[[a, b]] += x[a] * x[b];
                }
                direct.sxy[[a, 0]] += x[a] * y;
            }
        }
        let conv = GaussianStats::from_grouped(&g, array![0.0], 4.0);
        for (a, b) in conv.sxx.iter().zip(direct.sxx.iter()) {
            assert_relative_eq!(a, b);
        }
        for (a, b) in conv.sxy.iter().zip(direct.sxy.iter()) {
            assert_relative_eq!(a, b);
        }
    }
}
