use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use rand_core::RngCore;

use super::generator::{build_filtered, RateMatrix};
use super::space::{enumerate_sos, StateSpace, DEFAULT_STATE_CAP};
use super::tv::{evolve, tv_distance};
use crate::error::{Error, Result};
use crate::events::{index, rng_from_key, unit_f64};
use crate::lattice::SosParams;
use crate::sos::{CensorSchedule, Parity};

/// Generator of the dynamics with the sites of parity `frozen` censored.
pub fn parity_generator(space: &StateSpace, frozen: Parity) -> Result<RateMatrix> {
    build_filtered(space, &|i| Parity::of_index(i) != frozen)
}

/// A random increasing function on an SOS space: a positive mixture of
/// up-set indicators `1{eta >= zeta}` plus increasing single-site terms.
pub(crate) fn random_monotone<R: RngCore + ?Sized>(space: &StateSpace, rng: &mut R) -> Vec<f64> {
    let n = space.len();
    let sites = space.sites();
    let k = 1 + index(rng, 4);
    let zetas: Vec<(Vec<i64>, f64)> = (0..k).map(|_| (space.state(index(rng, n)), unit_f64(rng))).collect();
    // per-site increasing steps, possibly flat
    let lo: Vec<i64> = space.state(space.bottom_index());
    let hi: Vec<i64> = space.state(space.top_index());
    let steps: Vec<Vec<f64>> = (0..sites)
        .map(|i| {
            let mut acc = 0.0;
            let mut v = vec![0.0];
            for _ in lo[i]..hi[i] {
                acc += if unit_f64(rng) < 0.5 { 0.0 } else { unit_f64(rng) };
                v.push(acc);
            }
            v
        })
        .collect();
    let weight = 0.2 * unit_f64(rng);
    (0..n)
        .map(|s| {
            let eta = space.state(s);
            let ups: f64 = zetas.iter().filter(|(z, _)| eta.iter().zip(z).all(|(a, b)| a >= b)).map(|(_, c)| c).sum();
            let singles: f64 = (0..sites).map(|i| steps[i][(eta[i] - lo[i]) as usize]).sum();
            ups + weight * singles
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct CensorComparison {
    pub times: Vec<f64>,
    pub functions: usize,
    /// `min_{f, t} (E_censored f - E_uncensored f)`
    pub min_margin: f64,
    pub tv_censored: Vec<f64>,
    pub tv_uncensored: Vec<f64>,
    /// `pi` mass of the conditioning event of the start
    pub start_mass: f64,
}

/// Exact comparison of censored and uncensored evolutions of the SOS
/// dynamics on `params`, started from `pi` conditioned on every height
/// being at least `level` (a law with increasing density). The censoring
/// alternates frozen parities on epochs of half-length `half`. Both laws
/// are computed by uniformization, piecewise in time for the censored one.
pub fn censored_vs_uncensored(
    params: Arc<SosParams>,
    level: i64,
    half: f64,
    times: &[f64],
    functions: usize,
    seed: u64,
) -> Result<CensorComparison> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidParameters("times must be sorted and nonnegative"));
    }
    let space = enumerate_sos(params, DEFAULT_STATE_CAP)?;
    let full = build_filtered(&space, &|_| true)?;
    let odd = parity_generator(&space, Parity::Odd)?;
    let even = parity_generator(&space, Parity::Even)?;
    let pi = full.pi().to_vec();
    let n = space.len();
    let mut start = vec![0.0; n];
    for (s, slot) in start.iter_mut().enumerate() {
        if space.state(s).iter().all(|&v| v >= level) {
            *slot = pi[s];
        }
    }
    let mass: f64 = start.iter().sum();
    if mass == 0.0 {
        return Err(Error::EmptySupport("conditioning event has no mass"));
    }
    start.iter_mut().for_each(|x| *x /= mass);

    let horizon = times.last().copied().unwrap_or(0.0);
    let schedule = CensorSchedule::new(half, horizon)?;
    let mut unc = Vec::with_capacity(times.len());
    let mut cen = Vec::with_capacity(times.len());
    let mut mu = start.clone();
    let mut now = 0.0;
    for &t in times {
        unc.push(evolve(&full, &start, t)?);
        // advance the censored law through the epoch boundaries up to t
        while now < t {
            let frozen = schedule.frozen(now).expect("inside the horizon");
            let boundary = (libm::floor(now / half + 1e-12) + 1.0) * half;
            let end = boundary.min(t);
            let gen = if frozen == Parity::Odd { &odd } else { &even };
            mu = evolve(gen, &mu, end - now)?;
            now = end;
        }
        cen.push(mu.clone());
    }

    let mut rng = rng_from_key(seed);
    let mut min_margin = f64::INFINITY;
    for _ in 0..functions {
        let f = random_monotone(&space, &mut rng);
        for (a, b) in cen.iter().zip(&unc) {
            let ea: f64 = a.iter().zip(&f).map(|(p, v)| p * v).sum();
            let eb: f64 = b.iter().zip(&f).map(|(p, v)| p * v).sum();
            min_margin = min_margin.min(ea - eb);
        }
    }
    Ok(CensorComparison {
        times: times.to_vec(),
        functions,
        min_margin,
        tv_censored: cen.iter().map(|m| tv_distance(m, &pi)).collect(),
        tv_uncensored: unc.iter().map(|m| tv_distance(m, &pi)).collect(),
        start_mass: mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_generators_split_the_full_one() {
        let p = Arc::new(SosParams::with_window(3, 0, 2).unwrap());
        let s = enumerate_sos(p, DEFAULT_STATE_CAP).unwrap();
        let full = build_filtered(&s, &|_| true).unwrap();
        let a = parity_generator(&s, Parity::Odd).unwrap();
        let b = parity_generator(&s, Parity::Even).unwrap();
        for i in 0..s.len() {
            assert!((a.exit_rate(i) + b.exit_rate(i) - full.exit_rate(i)).abs() < 1e-14);
        }
        assert!(a.stationarity_residual() < 1e-14 && b.stationarity_residual() < 1e-14);
    }

    #[test]
    fn random_functions_are_monotone() {
        let p = Arc::new(SosParams::with_window(2, 0, 2).unwrap());
        let s = enumerate_sos(p, DEFAULT_STATE_CAP).unwrap();
        let mut rng = rng_from_key(1);
        for _ in 0..20 {
            let f = random_monotone(&s, &mut rng);
            for i in 0..s.len() {
                for j in 0..s.len() {
                    let (a, b) = (s.state(i), s.state(j));
                    if a.iter().zip(&b).all(|(x, y)| x <= y) {
                        assert!(f[i] <= f[j] + 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn censoring_only_slows_convergence() {
        let p = Arc::new(SosParams::with_window(3, 0, 2).unwrap());
        let c = censored_vs_uncensored(p, 1, 0.25, &[0.5, 1.0, 2.0], 50, 9).unwrap();
        assert!(c.min_margin >= -1e-10, "{}", c.min_margin);
        for (a, b) in c.tv_censored.iter().zip(&c.tv_uncensored) {
            assert!(a >= &(b - 1e-10));
        }
    }
}
