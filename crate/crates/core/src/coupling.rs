//! Grand monotone coupling, coalescence times and coupling from the past.
//!
//! All chains of an ensemble read the same event stream. Both models are
//! attractive under this coupling, so chains started from ordered states
//! stay ordered and the top and bottom chains sandwich every other one.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::events::{derive_key, index, rng_from_key, Event, EventStream};
use crate::math;

/// A single-site monotone Markov system driven by shared events.
pub trait MonotoneDynamics {
    /// Number of updatable sites.
    fn sites(&self) -> usize;
    /// Maximal state.
    fn top(&self) -> Vec<i64>;
    /// Minimal state.
    fn bottom(&self) -> Vec<i64>;
    /// Position in the state vector written by an update at `site`.
    fn slot(&self, site: usize) -> usize;
    fn apply(&self, state: &mut [i64], ev: &Event);
    /// Interior heights in site order.
    fn interior(&self, state: &[i64]) -> Vec<i64>;
}

/// Ordered chains sharing one clock.
#[derive(Clone, Debug)]
pub struct CoupledEnsemble<'a, D: MonotoneDynamics> {
    dynamics: &'a D,
    chains: Vec<Vec<i64>>,
    time: f64,
    events: u64,
}

impl<'a, D: MonotoneDynamics> CoupledEnsemble<'a, D> {
    /// Chains listed bottom to top; they must be pointwise ordered.
    pub fn new(dynamics: &'a D, chains: Vec<Vec<i64>>) -> Result<Self> {
        let ens = Self { dynamics, chains, time: 0.0, events: 0 };
        if !ens.is_ordered() {
            return Err(Error::IncompatibleConfigurations("ensemble chains must be ordered bottom to top"));
        }
        Ok(ens)
    }

    /// The two extremal chains, bottom first.
    pub fn extremes(dynamics: &'a D) -> Self {
        Self { dynamics, chains: vec![dynamics.bottom(), dynamics.top()], time: 0.0, events: 0 }
    }

    pub fn chains(&self) -> &[Vec<i64>] {
        &self.chains
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn is_ordered(&self) -> bool {
        self.chains.windows(2).all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| a <= b))
    }

    pub fn coalesced(&self) -> bool {
        self.chains.windows(2).all(|w| w[0] == w[1])
    }
}

/// Applies `ev` to every chain. The order can only break at the updated
/// slot, so that slot alone is checked.
pub fn grand_coupled_step<D: MonotoneDynamics>(ens: &mut CoupledEnsemble<'_, D>, ev: &Event) -> Result<()> {
    for c in ens.chains.iter_mut() {
        ens.dynamics.apply(c, ev);
    }
    ens.events += 1;
    ens.time = ens.time.max(ev.time);
    let s = ens.dynamics.slot(ev.site);
    if ens.chains.windows(2).any(|w| w[0][s] > w[1][s]) {
        return Err(Error::CouplingViolation { event: ens.events });
    }
    Ok(())
}

/// One coalescence run of the extremal chains.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoalescenceRecord {
    pub seed: u64,
    /// linear size (`L` for SOS, side `N` for surfaces)
    pub size: usize,
    pub h: i64,
    /// coalescence time, or the horizon when censored
    pub time: f64,
    pub events: u64,
    pub censored: bool,
}

/// Runs bottom- and top-started chains on the stream keyed by `seed` until
/// they agree, or until `horizon` (a censored record).
///
/// Agreement is tracked exactly with a count of mismatched sites, updated
/// in `O(1)` per event, so the recorded time is the event that merged the
/// chains.
pub fn coalescence_time<D: MonotoneDynamics>(
    dynamics: &D,
    seed: u64,
    horizon: f64,
    tag: (usize, i64),
) -> Result<CoalescenceRecord> {
    let mut top = dynamics.top();
    let mut bot = dynamics.bottom();
    let n = dynamics.sites();
    let mut mismatched = (0..n).filter(|&s| {
        let k = dynamics.slot(s);
        top[k] != bot[k]
    }).count();
    let mut rec = CoalescenceRecord { seed, size: tag.0, h: tag.1, time: 0.0, events: 0, censored: false };
    if mismatched == 0 {
        return Ok(rec);
    }
    let mut stream = EventStream::new(seed, n);
    loop {
        let ev = stream.next();
        if ev.time > horizon {
            rec.time = horizon;
            rec.censored = true;
            return Ok(rec);
        }
        rec.events += 1;
        let k = dynamics.slot(ev.site);
        let before = top[k] != bot[k];
        dynamics.apply(&mut top, &ev);
        dynamics.apply(&mut bot, &ev);
        if bot[k] > top[k] {
            return Err(Error::CouplingViolation { event: rec.events });
        }
        let after = top[k] != bot[k];
        match (before, after) {
            (true, false) => mismatched -= 1,
            (false, true) => mismatched += 1,
            _ => {}
        }
        if mismatched == 0 {
            rec.time = ev.time;
            return Ok(rec);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CftpOptions {
    /// length of the most recent block `[-T0, 0)`
    pub initial_span: f64,
    /// number of doublings before giving up
    pub max_doublings: u32,
}

impl Default for CftpOptions {
    fn default() -> Self {
        Self { initial_span: 1.0, max_doublings: 30 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CftpStats {
    /// starting time `-T` of the successful attempt
    pub span: f64,
    pub doublings: u32,
}

/// Events of block `j`: `[-T0, 0)` for `j = 0`, `[-2^j T0, -2^{j-1} T0)`
/// otherwise. Blocks are keyed by `(seed, j)` so restarts reuse them.
fn block_events(seed: u64, j: u32, t0: f64, sites: usize) -> Vec<Event> {
    let (start, end) = if j == 0 {
        (-t0, 0.0)
    } else {
        (-t0 * math::powf(2.0, j as f64), -t0 * math::powf(2.0, j as f64 - 1.0))
    };
    let mut s = EventStream::starting_at(derive_key(seed, &[j as u64]), sites, start);
    let mut out = Vec::new();
    while let Some(e) = s.next_before(end) {
        if e.time < end {
            out.push(e);
        }
    }
    out
}

/// Monotone coupling from the past with time doubling. Returns an exact
/// draw from the stationary law (in the site order of `interior`).
pub fn cftp_sample<D: MonotoneDynamics>(dynamics: &D, seed: u64, opts: CftpOptions) -> Result<(Vec<i64>, CftpStats)> {
    let n = dynamics.sites();
    let top0 = dynamics.top();
    let bot0 = dynamics.bottom();
    if top0 == bot0 {
        return Ok((dynamics.interior(&top0), CftpStats { span: 0.0, doublings: 0 }));
    }
    let mut blocks: Vec<Vec<Event>> = Vec::new();
    for k in 0..=opts.max_doublings {
        blocks.push(block_events(seed, k, opts.initial_span, n));
        let mut top = top0.clone();
        let mut bot = bot0.clone();
        let mut mismatched = (0..n).filter(|&s| top[dynamics.slot(s)] != bot[dynamics.slot(s)]).count();
        for j in (0..=k as usize).rev() {
            for ev in &blocks[j] {
                if mismatched == 0 {
                    dynamics.apply(&mut top, ev);
                    continue;
                }
                let s = dynamics.slot(ev.site);
                let before = top[s] != bot[s];
                dynamics.apply(&mut top, ev);
                dynamics.apply(&mut bot, ev);
                let after = top[s] != bot[s];
                if before && !after {
                    mismatched -= 1;
                } else if after && !before {
                    mismatched += 1;
                }
            }
        }
        if mismatched == 0 {
            let span = opts.initial_span * math::powf(2.0, k as f64);
            return Ok((dynamics.interior(&top), CftpStats { span, doublings: k }));
        }
    }
    Err(Error::IterationCap(opts.max_doublings))
}

/// Threshold crossing estimate of the mixing time.
#[derive(Clone, Debug, PartialEq)]
pub struct TmixEstimate {
    pub estimate: f64,
    pub band: (f64, f64),
    /// Kaplan-Meier survival `(t, P(coalescence > t))` at event times
    pub survival: Vec<(f64, f64)>,
}

/// `(2e)^{-1}`.
pub const TMIX_THRESHOLD: f64 = 0.183_939_720_585_721_16;

fn kaplan_meier(records: &[(f64, bool)]) -> Vec<(f64, f64)> {
    let mut rs: Vec<(f64, bool)> = records.to_vec();
    // events before censorings at tied times
    rs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut at_risk = rs.len() as f64;
    let mut s = 1.0;
    let mut out = Vec::new();
    let mut i = 0;
    while i < rs.len() {
        let t = rs[i].0;
        let mut deaths = 0.0;
        let mut removed = 0.0;
        while i < rs.len() && rs[i].0 == t {
            if !rs[i].1 {
                deaths += 1.0;
            }
            removed += 1.0;
            i += 1;
        }
        if deaths > 0.0 {
            s *= 1.0 - deaths / at_risk;
            out.push((t, s));
        }
        at_risk -= removed;
    }
    out
}

fn crossing(survival: &[(f64, f64)], threshold: f64) -> Option<f64> {
    survival.iter().find(|&&(_, s)| s <= threshold).map(|&(t, _)| t)
}

/// First time the Kaplan-Meier estimate of `P(coalescence > t)` drops to
/// `(2e)^{-1}`, with a percentile bootstrap band (200 resamples keyed by
/// `seed`). Since `P(coalescence > t)` bounds the worst-case distance from
/// equilibrium, the estimate is an upper estimate of the mixing time.
pub fn tmix_upper_from_coalescence(records: &[CoalescenceRecord], seed: u64) -> Result<TmixEstimate> {
    if records.len() < 30 {
        return Err(Error::InvalidParameters("need at least 30 coalescence records"));
    }
    let data: Vec<(f64, bool)> = records.iter().map(|r| (r.time, r.censored)).collect();
    let survival = kaplan_meier(&data);
    let estimate = crossing(&survival, TMIX_THRESHOLD)
        .ok_or(Error::UndefinedEstimate("survival never reaches (2e)^-1"))?;
    let mut rng = rng_from_key(seed);
    let mut boots = Vec::with_capacity(200);
    let mut resample = vec![(0.0, false); data.len()];
    for _ in 0..200 {
        for r in resample.iter_mut() {
            *r = data[index(&mut rng, data.len())];
        }
        if let Some(t) = crossing(&kaplan_meier(&resample), TMIX_THRESHOLD) {
            boots.push(t);
        }
    }
    boots.sort_by(f64::total_cmp);
    let band = if boots.is_empty() {
        (estimate, f64::INFINITY)
    } else {
        let q = |p: f64| boots[((p * (boots.len() - 1) as f64) + 0.5) as usize];
        (q(0.025), q(0.975))
    };
    Ok(TmixEstimate { estimate, band, survival })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{planar_reference, Region, SlopeVector, SosParams};
    use crate::sos::SosDynamics;
    use crate::surface::SurfaceDynamics;
    use alloc::sync::Arc;

    fn sos(l: usize, h: i64, m: i64) -> SosDynamics {
        SosDynamics::new(Arc::new(SosParams::with_window(l, h, m).unwrap()))
    }

    #[test]
    fn equal_chains_stay_equal() {
        let d = sos(4, 1, 4);
        let s = d.top();
        let mut ens = CoupledEnsemble::new(&d, vec![s.clone(), s.clone(), s]).unwrap();
        let mut stream = EventStream::new(1, 4);
        for _ in 0..1000 {
            grand_coupled_step(&mut ens, &stream.next()).unwrap();
            assert!(ens.coalesced());
        }
    }

    #[test]
    fn single_site_low_u_moves_both_up() {
        let d = sos(1, 0, 1);
        let mut ens = CoupledEnsemble::new(&d, vec![vec![-1], vec![1]]).unwrap();
        grand_coupled_step(&mut ens, &Event { time: 0.1, site: 0, u: 0.1 }).unwrap();
        assert_eq!(ens.chains(), &[vec![0], vec![1]]);
        assert!(ens.is_ordered());
    }

    #[test]
    fn surface_extremes_stay_ordered() {
        let region = Arc::new(Region::square(3).unwrap());
        let n = SlopeVector::diagonal();
        let d = SurfaceDynamics::new(region, |p| planar_reference(&n, p), None, None).unwrap();
        let mut ens = CoupledEnsemble::extremes(&d);
        let mut stream = EventStream::new(2, 9);
        for _ in 0..100_000 {
            grand_coupled_step(&mut ens, &stream.next()).unwrap();
        }
        assert!(ens.is_ordered());
    }

    #[test]
    fn coalescence_is_deterministic() {
        let d = sos(6, 0, 6);
        let a = coalescence_time(&d, 5, 1e6, (6, 0)).unwrap();
        let b = coalescence_time(&d, 5, 1e6, (6, 0)).unwrap();
        assert_eq!(a, b);
        assert!(!a.censored && a.time > 0.0);
        let c = coalescence_time(&d, 5, 1e-3, (6, 0)).unwrap();
        assert!(c.censored);
    }

    #[test]
    fn single_state_space() {
        let p = SosParams::with_window(2, 0, 0).unwrap();
        let d = SosDynamics::new(Arc::new(p));
        let (x, st) = cftp_sample(&d, 1, CftpOptions::default()).unwrap();
        assert_eq!(x, vec![0, 0]);
        assert_eq!(st.span, 0.0);
        assert_eq!(coalescence_time(&d, 1, 10.0, (2, 0)).unwrap().time, 0.0);
    }

    #[test]
    fn cftp_is_reproducible() {
        let d = sos(4, 1, 4);
        let a = cftp_sample(&d, 77, CftpOptions::default()).unwrap();
        let b = cftp_sample(&d, 77, CftpOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    fn rec(t: f64, censored: bool) -> CoalescenceRecord {
        CoalescenceRecord { seed: 0, size: 1, h: 0, time: t, events: 0, censored }
    }

    #[test]
    fn tmix_estimate_of_constant_records() {
        let rs: Vec<_> = (0..40).map(|_| rec(3.5, false)).collect();
        let e = tmix_upper_from_coalescence(&rs, 1).unwrap();
        assert_eq!(e.estimate, 3.5);
        assert_eq!(e.band, (3.5, 3.5));
        let censored: Vec<_> = (0..40).map(|_| rec(3.5, true)).collect();
        assert!(matches!(tmix_upper_from_coalescence(&censored, 1), Err(Error::UndefinedEstimate(_))));
        assert!(tmix_upper_from_coalescence(&rs[..10], 1).is_err());
    }

    #[test]
    fn kaplan_meier_handles_censoring() {
        let s = kaplan_meier(&[(1.0, false), (2.0, true), (3.0, false), (4.0, false)]);
        assert_eq!(s[0], (1.0, 0.75));
        assert!((s[1].1 - 0.375).abs() < 1e-15);
        assert_eq!(s[2], (4.0, 0.0));
    }
}
