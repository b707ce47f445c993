use alloc::sync::Arc;
use alloc::vec::Vec;

use super::rates::{rates_at, Move};
use crate::coupling::MonotoneDynamics;
use crate::error::{Error, Result};
use crate::events::{Event, EventStream};
use crate::lattice::{SosParams, SosPath};
use crate::surface::Trajectory;

/// Parity of a site label `1..=L` (0-based index `i` has label `i + 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

impl Parity {
    #[inline]
    pub fn of_index(i: usize) -> Parity {
        if i % 2 == 0 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    pub fn other(self) -> Parity {
        match self {
            Parity::Odd => Parity::Even,
            Parity::Even => Parity::Odd,
        }
    }
}

/// Epochs `[2kT, 2(k+1)T)`: odd sites frozen in the first half, even sites
/// in the second. Nothing is frozen after `horizon`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CensorSchedule {
    pub half: f64,
    pub horizon: f64,
}

impl CensorSchedule {
    pub fn new(half: f64, horizon: f64) -> Result<Self> {
        if !(half > 0.0) || !(horizon >= 0.0) {
            return Err(Error::InvalidParameters("censoring needs T > 0 and horizon >= 0"));
        }
        Ok(Self { half, horizon })
    }

    #[inline]
    pub fn frozen(&self, t: f64) -> Option<Parity> {
        if t > self.horizon {
            return None;
        }
        let phase = t - 2.0 * self.half * libm::floor(t / (2.0 * self.half));
        Some(if phase < self.half { Parity::Odd } else { Parity::Even })
    }

    #[inline]
    pub fn is_frozen(&self, t: f64, i: usize) -> bool {
        self.frozen(t) == Some(Parity::of_index(i))
    }
}

/// Height after move `m` at site `i`, clamped to the window and walls.
/// Clamps and wall rejections are self-loops.
#[inline]
pub(crate) fn sos_update(params: &SosParams, heights: &mut [i64], i: usize, u: f64) -> bool {
    let (l, r) = params.neighbors(heights, i);
    let x = heights[i];
    let (lo, hi) = params.site_bounds(i);
    let new = match Move::choose(u, rates_at(l, x, r)) {
        Move::Up if x < hi => x + 1,
        Move::Down if x > lo => x - 1,
        _ => x,
    };
    heights[i] = new;
    new != x
}

/// Single-site Glauber chain with optional censoring.
#[derive(Clone, Debug)]
pub struct SosChain {
    path: SosPath,
    time: f64,
    events: u64,
    censor: Option<CensorSchedule>,
}

impl SosChain {
    pub fn new(path: SosPath) -> Self {
        Self { path, time: 0.0, events: 0, censor: None }
    }

    pub fn with_censoring(mut self, schedule: CensorSchedule) -> Self {
        self.censor = Some(schedule);
        self
    }

    pub fn path(&self) -> &SosPath {
        &self.path
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// One event: `u < p+` up, `u > 1 - p-` down, otherwise hold. Events at
    /// censored sites are consumed without effect.
    pub fn step(&mut self, ev: &Event) -> bool {
        self.events += 1;
        self.time = self.time.max(ev.time);
        if self.censor.is_some_and(|c| c.is_frozen(ev.time, ev.site)) {
            return false;
        }
        let params = self.path.params().clone();
        sos_update(&params, self.path.heights_mut(), ev.site, ev.u)
    }

    pub fn run(&mut self, horizon: f64, stream: &mut EventStream, checkpoints: &[f64]) -> Trajectory {
        let mut traj = Trajectory::default();
        let mut cps = checkpoints.iter().copied().filter(|&t| t <= horizon).peekable();
        let start = self.events;
        loop {
            let next_t = stream.peek().time;
            while let Some(&t) = cps.peek() {
                if t >= next_t {
                    break;
                }
                traj.times.push(t);
                traj.states.push(self.path.heights().to_vec());
                cps.next();
            }
            if next_t > horizon {
                break;
            }
            let ev = stream.next();
            self.step(&ev);
        }
        self.time = self.time.max(horizon);
        traj.events = self.events - start;
        traj
    }
}

/// Runs `chain` under `schedule` until `horizon`.
pub fn censored_run(
    chain: SosChain,
    schedule: CensorSchedule,
    horizon: f64,
    stream: &mut EventStream,
    checkpoints: &[f64],
) -> Result<(SosChain, Trajectory)> {
    if schedule.horizon < horizon {
        return Err(Error::InvalidParameters("censoring schedule shorter than the run"));
    }
    let mut chain = chain.with_censoring(schedule);
    let traj = chain.run(horizon, stream, checkpoints);
    Ok((chain, traj))
}

/// The SOS chain as a monotone system; states are height vectors.
#[derive(Clone, Debug)]
pub struct SosDynamics {
    params: Arc<SosParams>,
    censor: Option<CensorSchedule>,
}

impl SosDynamics {
    pub fn new(params: Arc<SosParams>) -> Self {
        Self { params, censor: None }
    }

    pub fn censored(params: Arc<SosParams>, schedule: CensorSchedule) -> Self {
        Self { params, censor: Some(schedule) }
    }

    pub fn params(&self) -> &Arc<SosParams> {
        &self.params
    }
}

impl MonotoneDynamics for SosDynamics {
    fn sites(&self) -> usize {
        self.params.len()
    }

    fn top(&self) -> Vec<i64> {
        self.params.top()
    }

    fn bottom(&self) -> Vec<i64> {
        self.params.bottom()
    }

    #[inline]
    fn slot(&self, site: usize) -> usize {
        site
    }

    #[inline]
    fn apply(&self, state: &mut [i64], ev: &Event) {
        if self.censor.is_some_and(|c| c.is_frozen(ev.time, ev.site)) {
            return;
        }
        sos_update(&self.params, state, ev.site, ev.u);
    }

    fn interior(&self, state: &[i64]) -> Vec<i64> {
        state.to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::wall_profile;
    use alloc::vec;

    fn path(l: usize, h: i64, hs: Vec<i64>) -> SosPath {
        SosPath::new(Arc::new(SosParams::bounded(l, h).unwrap()), hs).unwrap()
    }

    #[test]
    fn hold_in_the_middle() {
        let mut c = SosChain::new(path(3, 0, vec![0, 0, 0]));
        assert!(!c.step(&Event { time: 0.1, site: 1, u: 0.5 }));
        assert_eq!(c.path().heights(), &[0, 0, 0]);
        assert_eq!(c.events(), 1);
    }

    #[test]
    fn window_top_clamps() {
        let mut c = SosChain::new(path(1, 0, vec![1]));
        assert!(!c.step(&Event { time: 0.1, site: 0, u: 0.0 }));
        assert_eq!(c.path().heights(), &[1]);
    }

    #[test]
    fn wall_rejects_down() {
        let params = Arc::new(SosParams::bounded(10, 5).unwrap().above_wall().unwrap());
        let w = wall_profile(10, 5).unwrap().values;
        let mut c = SosChain::new(SosPath::new(params, w.clone()).unwrap());
        for i in 0..10 {
            c.step(&Event { time: 0.1, site: i, u: 0.999_999 });
        }
        assert_eq!(c.path().heights(), w.as_slice());
    }

    #[test]
    fn censoring_freezes_by_parity() {
        let s = CensorSchedule::new(1.0, 10.0).unwrap();
        assert_eq!(s.frozen(0.5), Some(Parity::Odd));
        assert_eq!(s.frozen(1.5), Some(Parity::Even));
        assert_eq!(s.frozen(2.5), Some(Parity::Odd));
        assert_eq!(s.frozen(11.0), None);
        assert!(s.is_frozen(0.5, 0));
        assert!(!s.is_frozen(0.5, 1));

        let params = Arc::new(SosParams::bounded(6, 0).unwrap());
        let start = SosPath::top(params);
        let mut stream = EventStream::new(4, 6);
        let (chain, traj) =
            censored_run(SosChain::new(start.clone()), s, 0.99, &mut stream, &[0.99]).unwrap();
        for i in (0..6).step_by(2) {
            assert_eq!(chain.path().heights()[i], start.heights()[i]);
        }
        assert!(traj.events > 0);
        assert!(censored_run(SosChain::new(start), s, 20.0, &mut stream, &[]).is_err());
    }
}
