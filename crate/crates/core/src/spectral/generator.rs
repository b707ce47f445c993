use alloc::vec;
use alloc::vec::Vec;

use super::space::StateSpace;
use crate::error::{Error, Result};
use crate::math::{self, KahanSum};
use crate::sos::{rates_at, ExactSampler};

/// Sparse continuous-time generator (off-diagonal rates in CSR form with
/// sorted columns; the diagonal is minus the exit rate) together with its
/// stationary law.
#[derive(Clone, Debug)]
pub struct RateMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    rates: Vec<f64>,
    exit: Vec<f64>,
    pi: Vec<f64>,
}

impl RateMatrix {
    /// Assembles from `(from, to, rate)` triplets: duplicates are summed,
    /// self-loops and zero rates dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(u32, u32, f64)>, pi: Vec<f64>) -> Result<Self> {
        if pi.len() != n {
            return Err(Error::InvalidParameters("stationary vector length"));
        }
        triplets.retain(|t| t.0 != t.1 && t.2 != 0.0);
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut rates: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(u32, u32)> = None;
        for (i, j, r) in triplets {
            if r < 0.0 || !r.is_finite() {
                return Err(Error::InvalidParameters("rates must be finite and nonnegative"));
            }
            if last == Some((i, j)) {
                *rates.last_mut().unwrap() += r;
            } else {
                cols.push(j);
                rates.push(r);
                row_ptr[i as usize + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut m = Self { n, row_ptr, cols, rates, exit: vec![0.0; n], pi };
        m.refresh_exit();
        Ok(m)
    }

    fn refresh_exit(&mut self) {
        for i in 0..self.n {
            let mut s = KahanSum::default();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s.add(self.rates[k]);
            }
            self.exit[i] = s.value();
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().zip(&self.rates[r]).map(|(&j, &q)| (j as usize, q))
    }

    #[inline]
    pub(crate) fn row_slices(&self, i: usize) -> (&[u32], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.rates[r])
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        let (c, r) = self.row_slices(i);
        match c.binary_search(&(j as u32)) {
            Ok(k) => r[k],
            Err(_) => 0.0,
        }
    }

    #[inline]
    pub fn exit_rate(&self, i: usize) -> f64 {
        self.exit[i]
    }

    pub fn max_exit(&self) -> f64 {
        self.exit.iter().cloned().fold(0.0, f64::max)
    }

    /// `(Qf)(i) = sum_j q_ij (f_j - f_i)`.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let (c, r) = self.row_slices(i);
            let mut acc = 0.0;
            for (&j, &q) in c.iter().zip(r) {
                acc += q * (f[j as usize] - f[i]);
            }
            out[i] = acc;
        }
    }

    /// `(mu Q)(j)`.
    pub fn apply_left(&self, mu: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..self.n {
            let (c, r) = self.row_slices(i);
            for (&j, &q) in c.iter().zip(r) {
                out[j as usize] += mu[i] * q;
            }
            out[i] -= mu[i] * self.exit[i];
        }
    }

    /// Largest `|pi_i q_ij - pi_j q_ji|`.
    pub fn reversibility_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for (j, q) in self.row(i) {
                let back = self.rate(j, i);
                worst = worst.max(math::abs(self.pi[i] * q - self.pi[j] * back));
            }
        }
        worst
    }

    /// Largest `|(pi Q)_j|`.
    pub fn stationarity_residual(&self) -> f64 {
        let mut out = vec![0.0; self.n];
        self.apply_left(&self.pi, &mut out);
        out.iter().fold(0.0, |m, &x| m.max(math::abs(x)))
    }

    /// Largest `|q_ii + sum_{j != i} q_ij|`.
    pub fn row_sum_residual(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let s: f64 = self.row(i).map(|(_, q)| q).sum();
                math::abs(s - self.exit[i])
            })
            .fold(0.0, f64::max)
    }

    pub fn is_irreducible(&self) -> bool {
        if self.n == 0 {
            return false;
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for (j, _) in self.row(i) {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        // reversible chains: reachability from one state is enough
        count == self.n
    }

    /// The generator with every rate multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut m = self.clone();
        m.rates.iter_mut().for_each(|r| *r *= c);
        m.refresh_exit();
        m
    }

    /// `sqrt(q_ij q_ji)`, the symmetrized entry.
    #[inline]
    pub fn sym_rate(&self, i: usize, q: f64, j: usize) -> f64 {
        math::sqrt(q * self.rate(j, i))
    }

    /// Dirichlet form `(1/2) sum_{i,j} pi_i q_ij (f_j - f_i)^2`.
    pub fn dirichlet(&self, f: &[f64]) -> f64 {
        let mut s = KahanSum::default();
        for i in 0..self.n {
            for (j, q) in self.row(i) {
                let d = f[j] - f[i];
                s.add(0.5 * self.pi[i] * q * d * d);
            }
        }
        s.value()
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        let mut s = KahanSum::default();
        for (p, x) in self.pi.iter().zip(f) {
            s.add(p * x);
        }
        s.value()
    }

    pub fn variance(&self, f: &[f64]) -> f64 {
        let m = self.mean(f);
        let mut s = KahanSum::default();
        for (p, x) in self.pi.iter().zip(f) {
            s.add(p * (x - m) * (x - m));
        }
        s.value()
    }

    /// All entries including the diagonal, as `(row, col, rate)`.
    pub fn coordinates(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            core::iter::once((i, i, -self.exit[i])).chain(self.row(i).map(move |(j, q)| (i, j, q)))
        })
    }
}

/// Builds the generator of the single-site dynamics on `space`: SOS
/// heat-bath rates with window and wall moves as self-loops, or rate 1/2
/// per allowed surface move. Fails on reducible spaces.
pub fn build_generator(space: &StateSpace) -> Result<RateMatrix> {
    let m = build_filtered(space, &|_| true)?;
    if !m.is_irreducible() {
        return Err(Error::Reducible);
    }
    Ok(m)
}

/// Generator restricted to moves at sites accepted by `keep`.
pub(crate) fn build_filtered(space: &StateSpace, keep: &dyn Fn(usize) -> bool) -> Result<RateMatrix> {
    let n = space.len();
    let mut trip = Vec::with_capacity(n * 2 * space.sites());
    let pi = match space {
        StateSpace::Sos(s) => {
            let p = s.params();
            let sampler = ExactSampler::new(p.clone())?;
            let mut state = vec![0i64; p.len()];
            let mut pi = Vec::with_capacity(n);
            for idx in 0..n {
                s.decode_into(idx, &mut state);
                pi.push(math::exp(sampler.log_prob(&state)));
                for i in 0..p.len() {
                    if !keep(i) {
                        continue;
                    }
                    let (l, r) = p.neighbors(&state, i);
                    let (down, up) = rates_at(l, state[i], r);
                    let (lo, hi) = p.site_bounds(i);
                    if state[i] < hi {
                        trip.push((idx as u32, (idx + s.stride(i)) as u32, up.value()));
                    }
                    if state[i] > lo {
                        trip.push((idx as u32, (idx - s.stride(i)) as u32, down.value()));
                    }
                }
            }
            let z: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|x| *x /= z);
            pi
        }
        StateSpace::Surface(s) => {
            let d = s.dynamics();
            for idx in 0..n {
                let state = space.state(idx);
                let grid = d.grid_from_heights(&state);
                for site in 0..state.len() {
                    if !keep(site) {
                        continue;
                    }
                    for up in [true, false] {
                        let mut g = grid.clone();
                        if d.move_at(&mut g, site, up) {
                            let mut next = state.clone();
                            next[site] = g[d.region().site_cell(site)];
                            let j = space.index_of(&next).ok_or(Error::InvalidParameters("move left the space"))?;
                            trip.push((idx as u32, j as u32, 0.5));
                        }
                    }
                }
            }
            vec![1.0 / n as f64; n]
        }
    };
    RateMatrix::from_triplets(n, trip, pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{planar_reference, Region, SlopeVector, SosParams};
    use crate::math::E_M2;
    use crate::spectral::space::{enumerate_sos, enumerate_surface, DEFAULT_STATE_CAP};
    use crate::surface::SurfaceDynamics;
    use alloc::sync::Arc;

    #[test]
    fn three_state_chain() {
        let p = Arc::new(SosParams::with_window(1, 0, 1).unwrap());
        let s = enumerate_sos(p, DEFAULT_STATE_CAP).unwrap();
        let q = build_generator(&s).unwrap();
        let beta = E_M2 / (1.0 + E_M2);
        let gamma = 1.0 / (1.0 + E_M2);
        assert!((q.rate(1, 0) - beta).abs() < 1e-15);
        assert!((q.rate(1, 2) - beta).abs() < 1e-15);
        assert!((q.rate(0, 1) - gamma).abs() < 1e-15);
        assert!((q.rate(2, 1) - gamma).abs() < 1e-15);
        let z = 1.0 + 2.0 * E_M2;
        assert!((q.pi()[0] - E_M2 / z).abs() < 1e-15);
        assert!((q.pi()[1] - 1.0 / z).abs() < 1e-15);
        assert!(q.row_sum_residual() < 1e-15);
        assert!(q.stationarity_residual() < 1e-15);
    }

    #[test]
    fn reversible_on_tiny_spaces() {
        for (l, h) in [(2, 0), (3, 1), (3, 2)] {
            let p = Arc::new(SosParams::bounded(l, h).unwrap());
            let q = build_generator(&enumerate_sos(p, DEFAULT_STATE_CAP).unwrap()).unwrap();
            assert!(q.reversibility_residual() < 1e-14);
        }
        let slope = SlopeVector::diagonal();
        let d = SurfaceDynamics::new(Arc::new(Region::square(2).unwrap()), |x| planar_reference(&slope, x), None, None)
            .unwrap();
        let q = build_generator(&enumerate_surface(&d, DEFAULT_STATE_CAP).unwrap()).unwrap();
        assert!(q.reversibility_residual() < 1e-15);
        assert!(q.stationarity_residual() < 1e-14);
    }

    #[test]
    fn constant_functions_are_harmonic() {
        let p = Arc::new(SosParams::bounded(3, 1).unwrap());
        let q = build_generator(&enumerate_sos(p, DEFAULT_STATE_CAP).unwrap()).unwrap();
        let f = vec![2.5; q.len()];
        let mut out = vec![1.0; q.len()];
        q.apply(&f, &mut out);
        assert!(out.iter().all(|&x| x == 0.0));
        assert_eq!(q.dirichlet(&f), 0.0);
    }

    #[test]
    fn triplet_assembly_and_reducibility() {
        let q = RateMatrix::from_triplets(3, vec![(0, 1, 1.0), (0, 1, 0.5), (1, 0, 1.5), (2, 2, 4.0)], vec![0.5, 0.5, 0.0])
            .unwrap();
        assert_eq!(q.rate(0, 1), 1.5);
        assert_eq!(q.exit_rate(2), 0.0);
        assert!(!q.is_irreducible());
    }
}
