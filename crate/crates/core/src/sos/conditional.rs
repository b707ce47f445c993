use alloc::vec::Vec;
use rand_core::RngCore;

use super::chain::Parity;
use crate::error::{Error, Result};
use crate::events::unit_f64;
use crate::lattice::SosPath;
use crate::math::{self, E_M2};

/// Geometric pieces of the single-site conditional law
/// `P(k) ∝ exp(-|k - left| - |k - right|)` on `[lo, hi]`.
///
/// Up to a constant the weight is `r^{dist(k, [a, b])}` with `r = e^{-2}`:
/// geometric to the left of `a`, flat on `[a, b]`, geometric to the right
/// of `b`. When `[lo, hi]` misses `[a, b]` the nearest end is moved to
/// the edge of the support so the largest weight is `O(1)`.
struct Pieces {
    lo: i64,
    hi: i64,
    a: i64,
    b: i64,
    // masses of [lo, a-1], [a, b], [b+1, hi] after clipping
    left: f64,
    mid: f64,
    right: f64,
}

const ONE_MINUS_R: f64 = 1.0 - E_M2;

/// `sum_{d = d0}^{d1} r^d` for `0 <= d0 <= d1`.
#[inline]
fn geo(d0: i64, d1: i64) -> f64 {
    if d1 < d0 {
        return 0.0;
    }
    (math::exp(-2.0 * d0 as f64) - math::exp(-2.0 * (d1 + 1) as f64)) / ONE_MINUS_R
}

impl Pieces {
    fn new(left: i64, right: i64, lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidRange { lo, hi });
        }
        let (mut a, mut b) = if left <= right { (left, right) } else { (right, left) };
        if hi < a {
            a = hi + 1;
            b = a;
        } else if lo > b {
            b = lo - 1;
            a = b;
        }
        let lm = if lo < a { geo(1, a - lo) } else { 0.0 };
        let mid = (b.min(hi) - a.max(lo) + 1).max(0) as f64;
        let rm = if hi > b { geo(1, hi - b) } else { 0.0 };
        Ok(Self { lo, hi, a, b, left: lm, mid, right: rm })
    }

    fn total(&self) -> f64 {
        self.left + self.mid + self.right
    }

    /// Cumulative mass of `[lo, k]` within the left piece (`k < a`).
    #[inline]
    fn cum_left(&self, k: i64) -> f64 {
        geo(self.a - k, self.a - self.lo)
    }

    /// Cumulative mass of `[b+1, k]` within the right piece.
    #[inline]
    fn cum_right(&self, k: i64) -> f64 {
        geo(1, k - self.b)
    }

    fn quantile(&self, u: f64) -> i64 {
        let target = u * self.total();
        if target < self.left {
            // smallest k in [lo, a-1] with cum_left(k) > target
            let q = target * ONE_MINUS_R + math::exp(-2.0 * (self.a - self.lo + 1) as f64);
            let guess = libm::ceil(self.a as f64 + 0.5 * math::ln(q)) as i64;
            let mut k = guess.clamp(self.lo, self.a - 1);
            while k > self.lo && self.cum_left(k - 1) > target {
                k -= 1;
            }
            while k < self.a - 1 && self.cum_left(k) <= target {
                k += 1;
            }
            return k;
        }
        let t = target - self.left;
        if t < self.mid {
            let k = self.a.max(self.lo) + libm::floor(t) as i64;
            return k.min(self.b.min(self.hi));
        }
        let t = t - self.mid;
        if self.right == 0.0 {
            return self.b.min(self.hi);
        }
        let q = E_M2 - t * ONE_MINUS_R;
        let guess = if q > 0.0 {
            libm::ceil(self.b as f64 - 1.0 - 0.5 * math::ln(q)) as i64
        } else {
            self.hi
        };
        let mut k = guess.clamp(self.b + 1, self.hi);
        while k > self.b + 1 && self.cum_right(k - 1) > t {
            k -= 1;
        }
        while k < self.hi && self.cum_right(k) <= t {
            k += 1;
        }
        k
    }
}

/// The `u`-quantile of `P(k) ∝ exp(-|k-left| - |k-right|)` on `[lo, hi]`,
/// by closed-form inversion of the geometric pieces.
pub fn site_conditional_sample(left: i64, right: i64, lo: i64, hi: i64, u: f64) -> Result<i64> {
    Ok(Pieces::new(left, right, lo, hi)?.quantile(u))
}

/// Normalized conditional law on `[lo, hi]`, index `k - lo`.
pub fn conditional_pmf(left: i64, right: i64, lo: i64, hi: i64) -> Result<Vec<f64>> {
    if lo > hi {
        return Err(Error::InvalidRange { lo, hi });
    }
    let e: Vec<f64> = (lo..=hi).map(|k| -(((k - left).abs() + (k - right).abs()) as f64)).collect();
    let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = e.iter().map(|&x| math::exp(x - m)).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Resamples every site of the given parity from its exact conditional
/// law given the other parity, window and walls. Sites of equal parity are
/// never neighbors, so the order of updates is irrelevant.
pub fn column_sweep<R: RngCore + ?Sized>(path: &mut SosPath, parity: Parity, rng: &mut R) {
    let params = path.params().clone();
    let first = match parity {
        Parity::Odd => 0,
        Parity::Even => 1,
    };
    let n = params.len();
    let hs = path.heights_mut();
    for i in (first..n).step_by(2) {
        let (l, r) = params.neighbors(hs, i);
        let (lo, hi) = params.site_bounds(i);
        hs[i] = Pieces::new(l, r, lo, hi)
            .expect("site bounds are nonempty")
            .quantile(unit_f64(rng));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::rng_from_key;
    use crate::lattice::SosParams;
    use alloc::sync::Arc;
    use alloc::vec;

    #[test]
    fn flat_neighbors_three_point_window() {
        let pmf = conditional_pmf(0, 0, -1, 1).unwrap();
        assert!((pmf[1] - 1.0 / (1.0 + 2.0 * E_M2)).abs() < 1e-15);
        assert_eq!(site_conditional_sample(0, 0, -1, 1, 0.5).unwrap(), 0);
        assert_eq!(site_conditional_sample(0, 0, -1, 1, 0.0).unwrap(), -1);
        assert_eq!(site_conditional_sample(0, 0, -1, 1, 0.999_999).unwrap(), 1);
    }

    #[test]
    fn collapsed_range_and_uniform_middle() {
        for u in [0.0, 0.3, 0.99] {
            assert_eq!(site_conditional_sample(-3, 8, 5, 5, u).unwrap(), 5);
        }
        let pmf = conditional_pmf(0, 4, 0, 4).unwrap();
        assert!(pmf.iter().all(|&p| (p - 0.2).abs() < 1e-15));
        assert_eq!(site_conditional_sample(0, 4, 0, 4, 0.5).unwrap(), 2);
        assert_eq!(site_conditional_sample(0, 0, 2, 1, 0.5), Err(Error::InvalidRange { lo: 2, hi: 1 }));
    }

    /// Quantiles agree with a brute-force CDF scan on every small case.
    #[test]
    fn quantiles_match_brute_force() {
        let us: Vec<f64> = (0..200).map(|j| (j as f64 + 0.5) / 200.0).chain([0.0, 1.0 - 1e-16]).collect();
        for lo in -6..=0 {
            for hi in lo..=lo + 12 {
                for left in -8..=8 {
                    for right in [-7, -2, 0, 1, 5, 8] {
                        let pmf = conditional_pmf(left, right, lo, hi).unwrap();
                        for &u in &us {
                            let mut acc = 0.0;
                            let mut want = hi;
                            for (j, p) in pmf.iter().enumerate() {
                                acc += p;
                                if u < acc - 1e-12 {
                                    want = lo + j as i64;
                                    break;
                                }
                                if u < acc + 1e-12 {
                                    // on a CDF step: either side is acceptable
                                    want = i64::MIN;
                                    break;
                                }
                            }
                            let got = site_conditional_sample(left, right, lo, hi, u).unwrap();
                            assert!(want == i64::MIN || got == want, "{left} {right} [{lo},{hi}] u={u}: {got} vs {want}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn far_support_does_not_underflow() {
        let k = site_conditional_sample(0, 0, 900, 1000, 0.3).unwrap();
        assert_eq!(k, 900);
        let k = site_conditional_sample(0, 0, -1000, -900, 0.999).unwrap();
        assert!(k >= -901);
    }

    #[test]
    fn sweep_keeps_flat_path_at_median() {
        let p = Arc::new(SosParams::bounded(5, 0).unwrap());
        let mut path = SosPath::new(p, vec![0; 5]).unwrap();
        let mut rng = rng_from_key(1);
        column_sweep(&mut path, Parity::Odd, &mut rng);
        column_sweep(&mut path, Parity::Even, &mut rng);
        assert!(path.params().admits(path.heights()));
        // median quantile of a symmetric conditional around 0 is 0
        assert_eq!(site_conditional_sample(0, 0, -5, 5, 0.5).unwrap(), 0);
    }
}
