//! Reproducible event streams.
//!
//! Independent rate-1 clocks on `n` sites are realized as one Poisson
//! process of rate `n` with a uniformly chosen site per ring. Every event
//! also carries a uniform `u` in `[0,1)`; surface chains read it as a fair
//! coin (`u < 1/2` is an up move), SOS chains compare it with the rates.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub site: usize,
    pub u: f64,
}

impl Event {
    #[inline]
    pub fn is_up(&self) -> bool {
        self.u < 0.5
    }
}

/// SplitMix64 finalizer, used to fold seeds and ids into stream keys.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a stream key from a master seed and a path of ids, e.g.
/// `(seed, replica)` or `(seed, L, replica)`.
pub fn derive_key(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(master), |k, &p| mix64(k ^ mix64(p)))
}

/// A ChaCha8 generator keyed by `key`.
pub fn rng_from_key(key: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    let mut k = key;
    for chunk in seed.chunks_mut(8) {
        k = mix64(k);
        chunk.copy_from_slice(&k.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Uniform in `[0,1)` with 53 random bits.
#[inline]
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in `(0,1]`, safe for logarithms.
#[inline]
pub fn unit_open0<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform index in `0..n` (multiply-shift; bias below `n / 2^64`).
#[inline]
pub fn index<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

#[inline]
pub fn exponential<R: RngCore + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -math::ln(unit_open0(rng)) / rate
}

/// Standard normal by Box-Muller (one draw per call).
pub fn normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let r = math::sqrt(-2.0 * math::ln(unit_open0(rng)));
    r * libm::cos(core::f64::consts::TAU * unit_f64(rng))
}

/// Poisson-clock event source over `sites` sites.
#[derive(Clone, Debug)]
pub struct EventStream {
    rng: ChaCha8Rng,
    sites: usize,
    time: f64,
    count: u64,
    pending: Option<Event>,
}

impl EventStream {
    pub fn new(key: u64, sites: usize) -> Self {
        Self::starting_at(key, sites, 0.0)
    }

    /// A stream whose first event comes after `t0`.
    pub fn starting_at(key: u64, sites: usize, t0: f64) -> Self {
        assert!(sites > 0, "event stream needs at least one site");
        Self { rng: rng_from_key(key), sites, time: t0, count: 0, pending: None }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// Events handed out so far.
    pub fn consumed(&self) -> u64 {
        self.count
    }

    fn draw(&mut self) -> Event {
        self.time += exponential(&mut self.rng, self.sites as f64);
        let site = index(&mut self.rng, self.sites);
        let u = unit_f64(&mut self.rng);
        Event { time: self.time, site, u }
    }

    pub fn peek(&mut self) -> Event {
        if self.pending.is_none() {
            self.pending = Some(self.draw());
        }
        self.pending.unwrap()
    }

    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> Event {
        self.count += 1;
        match self.pending.take() {
            Some(e) => e,
            None => self.draw(),
        }
    }

    /// Next event if it happens no later than `horizon`.
    pub fn next_before(&mut self, horizon: f64) -> Option<Event> {
        (self.peek().time <= horizon).then(|| self.next())
    }
}
