//! Regular lattice on the probability simplex with piecewise-linear
//! interpolation over its Freudenthal triangulation.
//!
//! A point `p` of the `S`-simplex is stored in cumulative coordinates
//! `y_k = h Σ_{i>=k} p_i` for `k = 1..S-1`, so lattice points are the integer
//! vectors with `h >= y_1 >= ... >= y_{S-1} >= 0`. Ranks use the
//! combinatorial number system for such chains.

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexLattice {
    states: usize,
    resolution: u32,
    /// `binom[n][k]` for `n <= resolution + states`.
    binom: Vec<Vec<u64>>,
    points: Vec<Vec<u32>>,
}

impl SimplexLattice {
    pub fn new(states: usize, resolution: u32) -> Result<Self> {
        if states == 0 {
            return Err(invalid("states", "need at least one state"));
        }
        if resolution == 0 {
            return Err(invalid("resolution", "must be at least 1"));
        }
        let nmax = resolution as usize + states;
        let mut binom = vec![vec![0u64; states + 1]; nmax + 1];
        for n in 0..=nmax {
            binom[n][0] = 1;
            for k in 1..=states.min(n) {
                binom[n][k] = binom[n - 1][k - 1] + if k < n { binom[n - 1][k] } else { 0 };
            }
        }
        let mut lat = Self {
            states,
            resolution,
            binom,
            points: Vec::new(),
        };
        let total = lat.len();
        let mut points = vec![Vec::new(); total];
        let d = states - 1;
        let mut y = vec![0u32; d];
        enumerate(&mut y, 0, resolution, &mut |y| {
            points[lat.rank(y)] = y.to_vec();
        });
        lat.points = points;
        Ok(lat)
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    fn dim(&self) -> usize {
        self.states - 1
    }

    /// Number of lattice points, `C(h + d, d)`.
    pub fn len(&self) -> usize {
        self.binom[self.resolution as usize + self.dim()][self.dim()] as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of a lattice point given in cumulative coordinates.
    pub fn rank(&self, y: &[u32]) -> usize {
        let d = self.dim();
        y.iter()
            .enumerate()
            .map(|(i, &yi)| {
                let k = d - i;
                self.binom[yi as usize + k - 1][k] as usize
            })
            .sum()
    }

    /// Probability vector of lattice point `index`.
    pub fn point(&self, index: usize) -> Vec<f64> {
        let y = &self.points[index];
        let h = self.resolution as f64;
        let mut p = Vec::with_capacity(self.states);
        let mut prev = self.resolution;
        for &yi in y {
            p.push((prev - yi) as f64 / h);
            prev = yi;
        }
        p.push(prev as f64 / h);
        p
    }

    pub fn points(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    /// Lattice vertices and barycentric weights of the simplex containing `p`.
    /// Zero-weight vertices are omitted.
    pub fn locate(&self, p: &[f64]) -> Vec<(usize, f64)> {
        let d = self.dim();
        let h = self.resolution as f64;
        if d == 0 {
            return vec![(0, 1.0)];
        }
        // Suffix sums are monotone in floating point, so the chain order holds.
        let mut y = vec![0.0; d];
        let mut acc = 0.0;
        for k in (1..self.states).rev() {
            acc += p[k].max(0.0);
            y[k - 1] = (h * acc).min(h);
        }
        let mut base: Vec<u32> = y.iter().map(|v| v.floor() as u32).collect();
        let frac: Vec<f64> = y.iter().zip(&base).map(|(v, b)| v - *b as f64).collect();
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| frac[b].total_cmp(&frac[a]));

        let mut out = Vec::with_capacity(d + 1);
        let w0 = 1.0 - frac[order[0]];
        if w0 > 0.0 {
            out.push((self.rank(&base), w0));
        }
        for j in 0..d {
            base[order[j]] += 1;
            let next = if j + 1 < d { frac[order[j + 1]] } else { 0.0 };
            let w = frac[order[j]] - next;
            if w > 0.0 {
                out.push((self.rank(&base), w));
            }
        }
        out
    }

    /// Piecewise-linear interpolant of `values` (one per lattice point) at `p`.
    pub fn interpolate(&self, values: &[f64], p: &[f64]) -> f64 {
        self.locate(p).iter().map(|&(i, w)| w * values[i]).sum()
    }
}

fn enumerate(y: &mut [u32], i: usize, upper: u32, f: &mut impl FnMut(&[u32])) {
    if i == y.len() {
        f(y);
        return;
    }
    for v in 0..=upper {
        y[i] = v;
        enumerate(y, i + 1, v, f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sizes_and_ranks_are_bijective() {
        for (s, h) in [(1usize, 3u32), (2, 5), (3, 4), (4, 6), (6, 5)] {
            let lat = SimplexLattice::new(s, h).unwrap();
            let mut seen = vec![false; lat.len()];
            let d = s - 1;
            let mut y = vec![0u32; d];
            let mut count = 0;
            enumerate(&mut y, 0, h, &mut |y| {
                let r = lat.rank(y);
                assert!(!seen[r]);
                seen[r] = true;
                count += 1;
            });
            assert_eq!(count, lat.len());
            for i in 0..lat.len() {
                let p = lat.point(i);
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(p.iter().all(|&x| x >= 0.0));
            }
        }
        assert_eq!(SimplexLattice::new(3, 10).unwrap().len(), 66);
    }

    #[test]
    fn lattice_points_interpolate_to_themselves() {
        let lat = SimplexLattice::new(4, 5).unwrap();
        let values: Vec<f64> = (0..lat.len()).map(|i| (i as f64).sin()).collect();
        for i in 0..lat.len() {
            let v = lat.interpolate(&values, &lat.point(i));
            assert!((v - values[i]).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn linear_functions_are_reproduced(
            raw in prop::collection::vec(0.0f64..1.0, 4),
            coef in prop::collection::vec(-2.0f64..2.0, 4),
            h in 1u32..8,
        ) {
            let total: f64 = raw.iter().sum::<f64>() + 1e-9;
            let p: Vec<f64> = raw.iter().map(|x| (x + 1e-9 / 4.0) / total).collect();
            let lat = SimplexLattice::new(4, h).unwrap();
            let f = |q: &[f64]| q.iter().zip(&coef).map(|(a, b)| a * b).sum::<f64>();
            let values: Vec<f64> = lat.points().map(|q| f(&q)).collect();
            let loc = lat.locate(&p);
            let wsum: f64 = loc.iter().map(|x| x.1).sum();
            prop_assert!((wsum - 1.0).abs() < 1e-12);
            prop_assert!(loc.iter().all(|x| x.1 > 0.0));
            prop_assert!((lat.interpolate(&values, &p) - f(&p)).abs() < 1e-10);
        }
    }
}
