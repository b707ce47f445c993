use alloc::vec;
use alloc::vec::Vec;

use super::geometry::{CapGeometry, SegmentGeometry};
use super::CapSchedule;
use crate::error::{Error, Result};
use crate::lattice::SlopeVector;
use crate::math;
use crate::surface::Trajectory;

/// Where the caps sit relative to the sites of a trajectory.
#[derive(Clone, Debug, PartialEq)]
pub enum Envelope {
    /// SOS sites labelled `1..=len` under segments centred at `len/2`;
    /// containment also asks `eta >= 0`.
    Segment { len: usize },
    /// Surface sites at horizontal positions `sites` under caps whose base
    /// is centred above `center` on `Pi^n` shifted up by `shift`.
    Cap { sites: Vec<(f64, f64)>, slope: SlopeVector, shift: f64, center: (f64, f64) },
}

impl Envelope {
    fn len(&self) -> usize {
        match self {
            Envelope::Segment { len } => *len,
            Envelope::Cap { sites, .. } => sites.len(),
        }
    }

    /// `(lower, upper)` limits for each site under cap `n`. A site outside
    /// the base gets an upper limit of minus infinity.
    fn limits(&self, s: &CapSchedule, n: usize) -> Result<Vec<(f64, f64)>> {
        let u = s.u[n];
        match self {
            Envelope::Segment { len } => {
                let g = SegmentGeometry::for_sos(*len, s.rho, u)?;
                Ok((1..=*len)
                    .map(|i| (0.0, g.height(i as f64).unwrap_or(f64::NEG_INFINITY)))
                    .collect())
            }
            Envelope::Cap { sites, slope, shift, center } => {
                let g = CapGeometry::on_plane(*center, slope, *shift, s.rho, u)?;
                Ok(sites.iter().map(|&x| (f64::NEG_INFINITY, g.height(x).unwrap_or(f64::NEG_INFINITY))).collect())
            }
        }
    }
}

/// Thresholds of the equilibrium bands and the observation horizon used
/// around the surface domination argument.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonitorConfig {
    /// half-width `2 (ln L)^{3/2}` of the bands around the plane
    pub band: f64,
    /// `T = L^2 (ln L)^12 / 2`
    pub horizon: f64,
}

impl MonitorConfig {
    pub fn for_size(l: usize) -> Self {
        let lf = l as f64;
        let ln = math::ln(lf);
        Self { band: 2.0 * math::powf(ln, 1.5), horizon: 0.5 * lf * lf * math::powf(ln, 12.0) }
    }

    /// Whether `heights` stays within the band around `reference`.
    pub fn within_band(&self, heights: &[i64], reference: &[f64]) -> bool {
        heights.iter().zip(reference).all(|(&h, &r)| math::abs(h as f64 - r) <= self.band)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonitorRow {
    pub n: usize,
    pub t: f64,
    pub u: f64,
    /// the state is inside cap `n` at `t_n` and at every sampled time in
    /// `[t_n, t_{n+1})`
    pub satisfied: bool,
    /// largest excess above the cap (or below the floor) over those times,
    /// zero when satisfied
    pub max_violation: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorReport {
    pub rows: Vec<MonitorRow>,
    pub all_satisfied: bool,
    /// `max_i (eta_i(t_M) - reference_i)`
    pub final_deviation: f64,
}

/// Checks a trajectory started from the maximal state against the caps of
/// `schedule`. Every `t_n` must be a checkpoint; further checkpoints are
/// attributed to the last `t_n` before them.
pub fn domination_monitor(
    traj: &Trajectory,
    schedule: &CapSchedule,
    envelope: &Envelope,
    reference: &[f64],
) -> Result<MonitorReport> {
    let sites = envelope.len();
    if reference.len() != sites {
        return Err(Error::IncompatibleConfigurations("reference length"));
    }
    let mut rows: Vec<MonitorRow> = Vec::with_capacity(schedule.u.len());
    for n in 0..schedule.u.len() {
        if traj.state_at(schedule.t[n]).is_none() {
            return Err(Error::IncompleteTrajectory(n));
        }
        rows.push(MonitorRow { n, t: schedule.t[n], u: schedule.u[n], satisfied: true, max_violation: 0.0, samples: 0 });
    }
    let mut limits: Vec<Option<Vec<(f64, f64)>>> = vec![None; rows.len()];
    for (&time, state) in traj.times.iter().zip(&traj.states) {
        if time < schedule.t[0] {
            continue;
        }
        if state.len() != sites {
            return Err(Error::IncompatibleConfigurations("state length"));
        }
        let n = schedule.t.partition_point(|&t| t <= time) - 1;
        if limits[n].is_none() {
            limits[n] = Some(envelope.limits(schedule, n)?);
        }
        let lim = limits[n].as_ref().expect("just filled");
        let worst = state
            .iter()
            .zip(lim)
            .map(|(&h, &(lo, hi))| {
                let h = h as f64;
                (h - hi).max(lo - h)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let row = &mut rows[n];
        row.samples += 1;
        if worst > 0.0 {
            row.satisfied = false;
            row.max_violation = row.max_violation.max(worst);
        }
    }
    let last = traj.state_at(schedule.t_m()).expect("checked above");
    let final_deviation = last
        .iter()
        .zip(reference)
        .map(|(&h, r)| h as f64 - r)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(MonitorReport { all_satisfied: rows.iter().all(|r| r.satisfied), rows, final_deviation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{schedule_sos, schedule_surface, Exponents};

    fn flat_trajectory(times: &[f64], state: Vec<i64>) -> Trajectory {
        Trajectory { times: times.to_vec(), states: vec![state; times.len()], events: 0 }
    }

    #[test]
    fn flat_path_is_always_dominated() {
        let s = schedule_sos(64, Exponents::sos_scaled()).unwrap();
        let traj = flat_trajectory(&s.t, vec![0; 64]);
        let rep = domination_monitor(&traj, &s, &Envelope::Segment { len: 64 }, &[0.0; 64]).unwrap();
        assert!(rep.all_satisfied);
        assert_eq!(rep.rows.len(), s.u.len());
        assert_eq!(rep.final_deviation, 0.0);
    }

    #[test]
    fn maximal_state_fits_under_the_first_cap() {
        let s = schedule_sos(64, Exponents::sos_scaled()).unwrap();
        let traj = flat_trajectory(&s.t, vec![64; 64]);
        let rep = domination_monitor(&traj, &s, &Envelope::Segment { len: 64 }, &[0.0; 64]).unwrap();
        assert!(rep.rows[0].satisfied);
        assert!(!rep.rows[s.m()].satisfied);
        assert!(rep.rows[s.m()].max_violation > 0.0);
        assert_eq!(rep.final_deviation, 64.0);
    }

    #[test]
    fn negative_heights_violate_the_segment() {
        let s = schedule_sos(16, Exponents::sos_scaled()).unwrap();
        let mut state = vec![0; 16];
        state[3] = -2;
        let traj = flat_trajectory(&s.t, state);
        let rep = domination_monitor(&traj, &s, &Envelope::Segment { len: 16 }, &[0.0; 16]).unwrap();
        assert!(rep.rows.iter().all(|r| !r.satisfied && r.max_violation == 2.0));
    }

    #[test]
    fn missing_checkpoint() {
        let s = schedule_sos(64, Exponents::sos_scaled()).unwrap();
        let traj = flat_trajectory(&s.t[..2], vec![0; 64]);
        let err = domination_monitor(&traj, &s, &Envelope::Segment { len: 64 }, &[0.0; 64]);
        assert_eq!(err, Err(Error::IncompleteTrajectory(2)));
    }

    #[test]
    fn surface_envelope() {
        let s = schedule_surface(16, Exponents::surface_scaled()).unwrap();
        let slope = SlopeVector::diagonal();
        let sites: Vec<(f64, f64)> = (0..4).flat_map(|x| (0..4).map(move |y| (x as f64, y as f64))).collect();
        let planar: Vec<i64> = sites.iter().map(|&(x, y)| -(x + y) as i64).collect();
        let reference: Vec<f64> = planar.iter().map(|&h| h as f64).collect();
        let env = Envelope::Cap { sites, slope, shift: 2.0, center: (1.5, 1.5) };
        let traj = flat_trajectory(&s.t, planar);
        let rep = domination_monitor(&traj, &s, &env, &reference).unwrap();
        assert!(rep.all_satisfied);
        assert_eq!(rep.final_deviation, 0.0);
    }

    #[test]
    fn sampled_times_count_toward_the_current_cap() {
        let s = schedule_sos(64, Exponents::sos_scaled()).unwrap();
        let mut times = s.t.clone();
        times.push(s.t[1] + 1.0);
        times.sort_by(f64::total_cmp);
        let traj = flat_trajectory(&times, vec![0; 64]);
        let rep = domination_monitor(&traj, &s, &Envelope::Segment { len: 64 }, &[0.0; 64]).unwrap();
        assert_eq!(rep.rows[1].samples, 2);
    }

    #[test]
    fn config_values() {
        let c = MonitorConfig::for_size(64);
        let ln = (64f64).ln();
        assert!((c.band - 2.0 * ln.powf(1.5)).abs() < 1e-12);
        assert!(c.within_band(&[0, 1], &[0.0, 0.0]));
        assert!(!c.within_band(&[100], &[0.0]));
    }
}
