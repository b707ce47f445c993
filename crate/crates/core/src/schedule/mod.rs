//! Deterministic cap schedules `(u_n, R_n, t_n)` mimicking flattening by
//! mean curvature, and the monitor comparing a trajectory started from the
//! maximal state with the caps.
//!
//! Both models use a base of radius `rho_L = L ln L` and start from
//! `u_0 = 2L`, `t_0 = 0`. The surface schedule lowers `u` by one per step
//! and waits `R_n (ln L)^a` between steps. The SOS schedule lowers `u` by
//! `(rho^2/u)^{1/3} (ln L)^b` and waits `(rho^2/u)^{4/3} (ln L)^c`. The
//! generic schedule interpolates with a fluctuation exponent `gamma`.
//!
//! The default exponents are proof artifacts; at desk scale they make the
//! times astronomically conservative (for SOS the stopping height even
//! exceeds `u_0`, so the schedule is empty), hence the `scaled` profiles.

mod geometry;
mod monitor;

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

pub use geometry::{segment_radius, CapGeometry, SegmentGeometry};
pub use monitor::{domination_monitor, Envelope, MonitorConfig, MonitorReport, MonitorRow};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Model {
    Surface,
    Sos,
    Generic { gamma: f64 },
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Surface => "surface",
            Model::Sos => "sos",
            Model::Generic { .. } => "generic",
        }
    }

    fn gamma(&self) -> f64 {
        match *self {
            Model::Surface => 0.0,
            Model::Sos => 0.5,
            Model::Generic { gamma } => gamma,
        }
    }
}

/// Powers of `ln L` entering a schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Exponents {
    /// multiplies each height decrement (unused by the surface schedule,
    /// whose steps are exactly one)
    pub step: f64,
    /// multiplies each waiting time
    pub time: f64,
    /// the schedule stops once `u_n <= L^gamma (ln L)^stop`
    pub stop: f64,
    pub scaled: bool,
}

impl Exponents {
    pub fn surface() -> Self {
        Self { step: 0.0, time: 8.5, stop: 1.25, scaled: false }
    }

    /// Waiting time `R_n (ln L)^{3/2}`.
    pub fn surface_scaled() -> Self {
        Self { time: 1.5, scaled: true, ..Self::surface() }
    }

    pub fn sos(alpha1: f64) -> Self {
        Self { step: 2.0, time: 3.0 + alpha1, stop: 4.0, scaled: false }
    }

    /// Steps `(rho^2/u)^{1/3}`, waits `(rho^2/u)^{4/3}`, stops at
    /// `sqrt(L) ln L`.
    pub fn sos_scaled() -> Self {
        Self { step: 0.0, time: 0.0, stop: 1.0, scaled: true }
    }

    pub fn label(&self) -> &'static str {
        if self.scaled {
            "scaled"
        } else {
            "default"
        }
    }
}

/// Default `alpha_1` of the SOS schedule.
pub const ALPHA1: f64 = 17.0;

/// One row of a schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleRow {
    pub n: usize,
    pub u: f64,
    pub r: f64,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CapSchedule {
    pub model: Model,
    pub l: usize,
    pub rho: f64,
    pub u: Vec<f64>,
    pub r: Vec<f64>,
    pub t: Vec<f64>,
    pub exponents: Exponents,
    /// `L^gamma (ln L)^stop`
    pub stop_height: f64,
    /// the recursion would have stepped to `u <= 0` before the stop rule
    pub truncated: bool,
}

/// `t_M` against a bound `K L^2 (ln L)^p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    pub t_m: f64,
    pub k: f64,
    pub exponent: f64,
    pub bound: f64,
    pub holds: bool,
}

impl BoundCheck {
    pub fn ratio(&self) -> f64 {
        self.t_m / self.bound
    }
}

/// Ratios of `R_0` and `R_M` to their asymptotic forms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadiusRatios {
    /// `R_0 / (L (ln L)^2 / 4)`
    pub r0: f64,
    /// `R_M / (L^2 / (2 (ln L)^{3/4}))`
    pub rm_stated: f64,
    /// `R_M / (L^2 (ln L)^{3/4} / 2)`, the value `rho^2 / (2 u_M)` gives
    pub rm_corrected: f64,
}

fn check_size(l: usize) -> Result<()> {
    if l < 8 {
        return Err(Error::InvalidParameters("schedules need L >= 8"));
    }
    Ok(())
}

/// Surface schedule: `u_n = 2L - n`, `t_n = t_{n-1} + R_n (ln L)^time`,
/// `M = ceil(2L - (ln L)^stop)`.
pub fn schedule_surface(l: usize, exps: Exponents) -> Result<CapSchedule> {
    check_size(l)?;
    let lf = l as f64;
    let ln = math::ln(lf);
    let rho = lf * ln;
    let stop_height = math::powf(ln, exps.stop);
    let m = math::ceil(2.0 * lf - stop_height).max(0.0) as usize;
    let wait = math::powf(ln, exps.time);
    let mut s = CapSchedule::empty(Model::Surface, l, rho, exps, stop_height);
    let mut t = 0.0;
    for n in 0..=m {
        let u = (2 * l - n) as f64;
        let r = segment_radius(u, rho)?;
        if n > 0 {
            t += r * wait;
        }
        s.push(u, r, t);
    }
    Ok(s)
}

/// SOS schedule with `alpha_1` folded into `exps.time` (see
/// [`Exponents::sos`]).
pub fn schedule_sos(l: usize, exps: Exponents) -> Result<CapSchedule> {
    check_size(l)?;
    recursive(Model::Sos, l, exps)
}

/// `u_n - u_{n+1} = (rho^2/u_n)^{g/(2-g)} (ln L)^c1`,
/// `t_{n+1} - t_n = (rho^2/u_n)^{2/(2-g)} (ln L)^c2`, stopped once
/// `u_n <= L^g (ln L)^c3`.
pub fn generic_schedule(l: usize, gamma: f64, exps: Exponents) -> Result<CapSchedule> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(Error::UnsupportedExponent(gamma));
    }
    check_size(l)?;
    recursive(Model::Generic { gamma }, l, exps)
}

fn recursive(model: Model, l: usize, exps: Exponents) -> Result<CapSchedule> {
    let g = model.gamma();
    let lf = l as f64;
    let ln = math::ln(lf);
    let rho = lf * ln;
    let stop_height = math::powf(lf, g) * math::powf(ln, exps.stop);
    let step_pow = g / (2.0 - g);
    let time_pow = 2.0 / (2.0 - g);
    let step_log = math::powf(ln, exps.step);
    let time_log = math::powf(ln, exps.time);
    let mut s = CapSchedule::empty(model, l, rho, exps, stop_height);
    let mut u = 2.0 * lf;
    let mut t = 0.0;
    loop {
        s.push(u, segment_radius(u, rho)?, t);
        if u <= stop_height {
            break;
        }
        let q = rho * rho / u;
        let next = u - math::powf(q, step_pow) * step_log;
        if next <= 0.0 {
            s.truncated = true;
            break;
        }
        t += math::powf(q, time_pow) * time_log;
        u = next;
    }
    Ok(s)
}

impl CapSchedule {
    fn empty(model: Model, l: usize, rho: f64, exponents: Exponents, stop_height: f64) -> Self {
        Self {
            model,
            l,
            rho,
            u: Vec::new(),
            r: Vec::new(),
            t: Vec::new(),
            exponents,
            stop_height,
            truncated: false,
        }
    }

    fn push(&mut self, u: f64, r: f64, t: f64) {
        self.u.push(u);
        self.r.push(r);
        self.t.push(t);
    }

    /// The index `M` of the last cap.
    pub fn m(&self) -> usize {
        self.u.len() - 1
    }

    pub fn t_m(&self) -> f64 {
        self.t[self.m()]
    }

    pub fn rows(&self) -> impl Iterator<Item = ScheduleRow> + '_ {
        (0..self.u.len()).map(move |n| ScheduleRow { n, u: self.u[n], r: self.r[n], t: self.t[n] })
    }

    /// Largest relative error of `(2R_n - u_n) u_n = rho^2`.
    pub fn radius_residual(&self) -> f64 {
        let rho2 = self.rho * self.rho;
        self.u
            .iter()
            .zip(&self.r)
            .map(|(u, r)| math::abs((2.0 * r - u) * u - rho2) / rho2)
            .fold(0.0, f64::max)
    }

    /// `max_n R_{n+1}/R_n - 1`.
    pub fn max_radius_growth(&self) -> f64 {
        self.r.windows(2).map(|w| w[1] / w[0] - 1.0).fold(0.0, f64::max)
    }

    pub fn is_well_formed(&self) -> bool {
        let decreasing = self.u.windows(2).all(|w| w[1] < w[0]);
        let increasing = self.t.windows(2).all(|w| w[1] > w[0]);
        decreasing
            && increasing
            && self.u[0] == 2.0 * self.l as f64
            && self.t[0] == 0.0
            && self.radius_residual() < 1e-9
    }

    /// `u_{n+1} >= u_n / 2` along the schedule.
    pub fn half_step_holds(&self) -> bool {
        self.u.windows(2).all(|w| w[1] >= w[0] / 2.0)
    }

    /// `t_M <= K L^2 (ln L)^p`. The exponent tracks the waiting-time
    /// exponent: `time + 3` for surfaces, `time + 1` for SOS, so the
    /// default profiles give `23/2` and `4 + alpha_1`.
    pub fn time_bound(&self, k: f64) -> BoundCheck {
        let lf = self.l as f64;
        let ln = math::ln(lf);
        let exponent = match self.model {
            Model::Surface => self.exponents.time + 3.0,
            _ => self.exponents.time + 1.0,
        };
        let bound = k * lf * lf * math::powf(ln, exponent);
        let t_m = self.t_m();
        BoundCheck { t_m, k, exponent, bound, holds: t_m <= bound }
    }

    pub fn radius_ratios(&self) -> RadiusRatios {
        let lf = self.l as f64;
        let ln = math::ln(lf);
        let rm = self.r[self.m()];
        RadiusRatios {
            r0: self.r[0] / (lf * ln * ln / 4.0),
            rm_stated: rm / (lf * lf / (2.0 * math::powf(ln, 0.75))),
            rm_corrected: rm / (lf * lf * math::powf(ln, 0.75) / 2.0),
        }
    }
}

/// One size of a generic sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub l: usize,
    pub m: usize,
    pub t_m: f64,
    /// `M / L^{(2-2g)/(2-g)}`
    pub m_scaled: f64,
    /// `t_M / L^2`
    pub t_scaled: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenericSweep {
    pub gamma: f64,
    pub rows: Vec<SweepRow>,
    /// least-squares slope of `ln m_scaled` against `ln ln L`
    pub m_log_power: f64,
    /// least-squares slope of `ln t_scaled` against `ln ln L`
    pub t_log_power: f64,
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Generic schedules over `sizes`, with the polylog powers left in `M` and
/// `t_M` after dividing out `L^{(2-2g)/(2-g)}` and `L^2`. Finite powers
/// mean polylogarithmic growth; a leftover power of `L` would show up as a
/// slope growing with the sweep.
pub fn generic_sweep(sizes: &[usize], gamma: f64, exps: Exponents) -> Result<GenericSweep> {
    if sizes.len() < 2 {
        return Err(Error::InvalidParameters("need at least two sizes"));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &l in sizes {
        let s = generic_schedule(l, gamma, exps)?;
        let lf = l as f64;
        let m = s.m();
        rows.push(SweepRow {
            l,
            m,
            t_m: s.t_m(),
            m_scaled: m as f64 / math::powf(lf, (2.0 - 2.0 * gamma) / (2.0 - gamma)),
            t_scaled: s.t_m() / (lf * lf),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| math::ln(math::ln(r.l as f64))).collect();
    let ms: Vec<f64> = rows.iter().map(|r| math::ln(r.m_scaled.max(f64::MIN_POSITIVE))).collect();
    let ts: Vec<f64> = rows.iter().map(|r| math::ln(r.t_scaled.max(f64::MIN_POSITIVE))).collect();
    Ok(GenericSweep { gamma, m_log_power: log_slope(&xs, &ms), t_log_power: log_slope(&xs, &ts), rows })
}
