//! Experiment runners. Every runner is a pure function of the config:
//! replica `r` at size `L` draws from the stream keyed by
//! `(seed, L, h, r)`, and rows are emitted in (size, replica) order no
//! matter how the worker pool schedules them.

use std::sync::Arc;

use anyhow::{bail, Context};
use curvmix_core::coupling::{cftp_sample, coalescence_time, CftpOptions};
use curvmix_core::events::{derive_key, rng_from_key};
use curvmix_core::lattice::SlopeVector;
use curvmix_core::schedule::{
    domination_monitor, generic_schedule, schedule_sos, schedule_surface, CapSchedule, Envelope, Exponents, ALPHA1,
};
use curvmix_core::sos::{ExactSampler, SosDynamics};
use curvmix_core::spectral::{build_generator, exact_gap, exact_tmix, mixing_law_check};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Experiment, ExperimentConfig, ModelKind, Profile};
use crate::models::{planar_square, sos_params, System};
use crate::output::{cell, Report, Summary, Table};
use crate::stats::{fit_scaling, fluctuation_stats, line_fit, median};

/// Environment variable holding the worker count.
pub const WORKERS_ENV: &str = "CURVMIX_WORKERS";

pub fn replica_key(seed: u64, l: usize, h: i64, replica: usize) -> u64 {
    derive_key(seed, &[l as u64, h as u64, replica as u64])
}

fn slope(cfg: &ExperimentConfig) -> anyhow::Result<SlopeVector> {
    Ok(SlopeVector::from_direction(cfg.slope)?)
}

pub fn system(cfg: &ExperimentConfig, l: usize) -> anyhow::Result<System> {
    Ok(match cfg.model {
        ModelKind::Sos => System::Sos(SosDynamics::new(sos_params(l, cfg.h, cfg.window, cfg.walls)?)),
        ModelKind::Surface => {
            let s = slope(cfg)?;
            System::Surface(planar_square(l, &s)?, s)
        }
    })
}

fn window_label(cfg: &ExperimentConfig, l: usize) -> i64 {
    cfg.window.unwrap_or(l as i64)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<Report> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Simulate => simulate(cfg),
        Experiment::Coalesce => coalesce(cfg),
        Experiment::Cftp => cftp(cfg),
        Experiment::GapExact => gap(cfg),
        Experiment::TvExact => tv(cfg),
        Experiment::Schedule => schedule(cfg),
        Experiment::Monitor => monitor(cfg),
        Experiment::Fluctuations => fluctuations(cfg),
    }
}

fn simulate(cfg: &ExperimentConfig) -> anyhow::Result<Report> {
    let mut table = Table::new(&["model", "L", "h", "seed", "replica", "t", "max_deviation", "mean_height", "events"]);
    let summary = Summary::new(cfg);
    for l in cfg.size_list() {
        let sys = system(cfg, l)?;
        let reference = sys.reference();
        let horizon = cfg.horizon.unwrap_or((l * l) as f64);
        let checkpoints: Vec<f64> = (0..=10).map(|k| horizon * k as f64 / 10.0).collect();
        let runs: Vec<_> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| sys.trajectory(replica_key(cfg.seed, l, cfg.h, r), horizon, &checkpoints))
            .collect();
        for (r, traj) in runs.iter().enumerate() {
            for (t, state) in traj.times.iter().zip(&traj.states) {
                let dev = crate::stats::max_deviation(state, &reference);
                let mean = state.iter().sum::<i64>() as f64 / state.len() as f64;
                table.push(vec![
                    cell(cfg.model.name()),
                    cell(l),
                    cell(cfg.h),
                    cell(cfg.seed),
                    cell(r),
                    cell(t),
                    cell(dev),
                    cell(mean),
                    cell(traj.events),
                ]);
            }
        }
    }
    Ok(Report { table, summary })
}

/// Default coalescence horizon, far beyond the observed `L^2` scale.
pub fn coalescence_horizon(l: usize) -> f64 {
    let lf = l as f64;
    200.0 * lf * lf * (1.0 + lf.ln())
}

fn coalesce(cfg: &ExperimentConfig) -> anyhow::Result<Report> {
    let mut table = Table::new(&["model", "L", "h", "seed", "replica", "coalescence_time", "events", "censored"]);
    let mut summary = Summary::new(cfg);
    let mut medians = Vec::new();
    for l in cfg.size_list() {
        let sys = system(cfg, l)?;
        let horizon = cfg.horizon.unwrap_or_else(|| coalescence_horizon(l));
        let recs: Vec<_> = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| {
                let key = replica_key(cfg.seed, l, cfg.h, r);
                match &sys {
                    System::Sos(d) => coalescence_time(d, key, horizon, (l, cfg.h)),
                    System::Surface(d, _) => coalescence_time(d, key, horizon, (l, cfg.h)),
                }
            })
            .collect::<Result<_, _>>()?;
        for (r, rec) in recs.iter().enumerate() {
            table.push(vec![
                cell(cfg.model.name()),
                cell(l),
                cell(cfg.h),
                cell(cfg.seed),
                cell(r),
                cell(rec.time),
                cell(rec.events),
                cell(rec.censored),
            ]);
        }
        if !recs.is_empty() {
            let times: Vec<f64> = recs.iter().map(|r| r.time).collect();
            medians.push((l as f64, median(&times)));
        }
    }
    summary.record("medians", &medians);
    if medians.len() >= 3 {
        let fit = fit_scaling(&medians)?;
        summary.record("fit", &fit);
    }
    Ok(Report { table, summary })
}

/// Empirical law of CFTP samples against the enumerated stationary law.
pub fn cftp_tv(sys: &System, samples: &[Vec<i64>]) -> anyhow::Result<f64> {
    let (space, pi) = sys.stationary()?;
    let mut counts = vec![0usize; pi.len()];
    for s in samples {
        let i = space.index_of(s).context("CFTP returned a state outside the space")?;
        counts[i] += 1;
    }
    let n = samples.len() as f64;
    Ok(0.5 * counts.iter().zip(&pi).map(|(&c, p)| (c as f64 / n - p).abs()).sum::<f64>())
}

pub fn cftp_batch(sys: &System, seed: u64, l: usize, h: i64, n: usize) -> anyhow::Result<Vec<(Vec<i64>, f64, u32)>> {
    let opts = CftpOptions::default();
    (0..n)
        .into_par_iter()
        .map(|r| {
            let key = replica_key(seed, l, h, r);
            let (s, st) = match sys {
                System::Sos(d) => cftp_sample(d, key, opts)?,
                System::Surface(d, _) => cftp_sample(d, key, opts)?,
            };
            Ok((s, st.span, st.doublings))
        })
        .collect()
}

fn cftp(cfg: &ExperimentConfig) -> anyhow::Result<Report> {
    let mut table = Table::new(&["model", "L", "h", "seed", "replica", "span", "doublings", "heights"]);
    let mut summary = Summary::new(cfg);
    for l in cfg.size_list() {
        let sys = system(cfg, l)?;
        let out = cftp_batch(&sys, cfg.seed, l, cfg.h, cfg.replicas)?;
        for (r, (s, span, d)) in out.iter().enumerate() {
            let heights: Vec<String> = s.iter().map(|v| v.to_string()).collect();
            table.push(vec![
                cell(cfg.model.name()),
                cell(l),
                cell(cfg.h),
                cell(cfg.seed),
                cell(r),
                cell(span),
                cell(d),
                heights.join(";"),
            ]);
        }
        if !out.is_empty() {
            let samples: Vec<Vec<i64>> = out.into_iter().map(|o| o.0).collect();
            if let Ok(tv) = cftp_tv(&sys, &samples) {
                summary.record(&format!("tv_L{l}"), tv);
            }
        }
    }
    Ok(Report { table, summary })
}

fn gap(cfg: &ExperimentConfig) -> anyhow::Result<Report> {
    let mut table = Table::new(&["model", "L", "h", "window", "states", "gap", "method", "residual"]);
    let mut summary = Summary::new(cfg);
    let mut points = Vec::new();
    for l in cfg.size_list() {
        let sys = system(cfg, l)?;
        let m = build_generator(&sys.enumerate()?)?;
        let g = exact_gap(&m)?;
        table.push(vec![
            cell(cfg.model.name()),
            cell(l),
            cell(cfg.h),
            cell(window_label(cfg, l)),
            cell(m.len()),
            cell(g.gap),
            cell(g.method.name()),
            cell(g.residual),
        ]);
        points.push((l as f64, 1.0 / g.gap));
    }
    if points.len() >= 3 {
        summary.record("relaxation_fit", fit_scaling(&points)?);
    }
    Ok(Report { table, summary })
}

fn tv(cfg: &ExperimentConfig) -> anyhow::Result<Report> {
    let mut table = Table::new(&["model", "L", "h", "window", "states", "tmix", "k", "t", "sup_tv", "upper", "bound"]);
    let mut summary = Summary::new(cfg);
    let mut all = true;
    for l in cfg.size_list() {
        let sys = system(cfg, l)?;
        let space = sys.enumerate()?;
        let m = build_generator(&space)?;
        let sym = space.reflection();
        let g = exact_gap(&m)?;
        let res = exact_tmix(&m, sym.as_deref())?;
        let law = mixing_law_check(&m, sym.as_deref(), &res, Some(g.gap))?;
        all &= law.holds;
        for row in &law.rows {
            table.push(vec![
                cell(cfg.model.name()),
                cell(l),
                cell(cfg.h),
                cell(window_label(cfg, l)),
                cell(m.len()),
                cell(res.tmix),
                cell(row.k),
                cell(row.t),
                cell(row.sup_tv),
                cell(row.upper),
                cell(row.bound),
            ]);
        }
        summary.record(&format!("max_excess_L{l}"), law.max_excess);
    }
    summary.assert("mixing_law", all);
    Ok(Report { table, summary })
}

/// The schedule selected by the config at size `l`.
pub fn build_schedule(cfg: &ExperimentConfig, l: usize) -> anyhow::Result<CapSchedule> {
    let scaled = cfg.profile == Profile::Scaled;
    if let Some(g) = cfg.gamma {
        let exps = if scaled { Exponents { step: 0.0, time: 0.0, stop: 1.0, scaled: true } } else { Exponents::sos(cfg.alpha1) };
        return Ok(generic_schedule(l, g, exps)?);
    }
    Ok(match cfg.model {
        ModelKind::Surface => {
            schedule_surface(l, if scaled { Exponents::surface_scaled() } else { Exponents::surface() })?
        }
        ModelKind::Sos => schedule_sos(l, if scaled { Exponents::sos_scaled() } else { Exponents::sos(cfg.alpha1) })?,
    })
}

fn schedule(cfg: &ExperimentConfig) -> anyhow::Result<Report> {
    let mut table = Table::new(&["L", "n", "u_n", "R_n", "t_n"]);
    let mut summary = Summary::new(cfg);
    for l in cfg.size_list() {
        let s = build_schedule(cfg, l)?;
        for row in s.rows() {
            table.push(vec![cell(l), cell(row.n), cell(row.u), cell(row.r), cell(row.t)]);
        }
        let b = s.time_bound(1.0);
        summary.record(
            &format!("L{l}"),
            json!({
                "model": s.model.name(),
                "profile": s.exponents.label(),
                "M": s.m(),
                "t_M": s.t_m(),
                "bound": b.bound,
                "bound_exponent": b.exponent,
                "K": b.k,
                "half_step": s.half_step_holds(),
                "radius_residual": s.radius_residual(),
                "truncated": s.truncated,
            }),
        );
        summary.assert(&format!("t_M_bound_L{l}"), b.holds);
    }
    Ok(Report { table, summary })
}

/// Outcome of one monitored run.
#[derive(Clone, Debug)]
pub struct MonitorRun {
    pub replica: usize,
    pub report: curvmix_core::schedule::MonitorReport,
}

/// Runs `replicas` chains from the maximal state and checks them against
/// the caps of `schedule`. SOS chains live above the wall, as the caps
/// also bound heights from below by zero.
pub fn monitor_runs(cfg: &ExperimentConfig, l: usize, schedule: &CapSchedule) -> anyhow::Result<Vec<MonitorRun>> {
    let horizon = schedule.t_m();
    let (sys, envelope) = match cfg.model {
        ModelKind::Sos => {
            let sys = System::Sos(SosDynamics::new(sos_params(l, cfg.h, cfg.window, true)?));
            (sys, Envelope::Segment { len: l })
        }
        ModelKind::Surface => {
            let s = slope(cfg)?;
            let d = planar_square(l, &s)?;
            let sites = d.region().sites().iter().map(|&(a, b)| (a as f64, b as f64)).collect();
            let env = Envelope::Cap { sites, slope: s, shift: cfg.c * (l as f64).ln(), center: d.region().center() };
            (System::Surface(d, s), env)
        }
    };
    let reference = sys.reference();
    (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let traj = sys.trajectory(replica_key(cfg.seed, l, cfg.h, r), horizon, &schedule.t);
            let report = domination_monitor(&traj, schedule, &envelope, &reference)?;
            Ok(MonitorRun { replica: r, report })
        })
        .collect()
}

fn monitor(cfg: &ExperimentConfig) -> anyhow::Result<Report> {
    let mut table = Table::new(&["L", "n", "t_n", "u_n", "satisfied", "max_violation", "replica"]);
    let mut summary = Summary::new(cfg);
    for l in cfg.size_list() {
        let s = build_schedule(cfg, l)?;
        let runs = monitor_runs(cfg, l, &s)?;
        for run in &runs {
            for row in &run.report.rows {
                table.push(vec![
                    cell(l),
                    cell(row.n),
                    cell(row.t),
                    cell(row.u),
                    cell(row.satisfied),
                    cell(row.max_violation),
                    cell(run.replica),
                ]);
            }
        }
        let contained = runs.iter().filter(|r| r.report.all_satisfied).count();
        let deviations: Vec<f64> = runs.iter().map(|r| r.report.final_deviation).collect();
        summary.record(
            &format!("L{l}"),
            json!({
                "profile": s.exponents.label(),
                "exponents": [s.exponents.step, s.exponents.time, s.exponents.stop],
                "M": s.m(),
                "t_M": s.t_m(),
                "runs": runs.len(),
                "contained": contained,
                "final_deviation": deviations,
            }),
        );
    }
    Ok(Report { table, summary })
}

/// Surface thresholds are multiples of `(ln L)^{1 + FLUCTUATION_EPS}`.
pub const FLUCTUATION_EPS: f64 = 0.1;

/// `n` exact equilibrium SOS samples, sample `i` keyed by `(seed, L, h, i)`.
pub fn sos_samples(params: Arc<curvmix_core::SosParams>, seed: u64, n: usize) -> anyhow::Result<Vec<Vec<i64>>> {
    let sampler = ExactSampler::new(params.clone())?;
    let (l, h) = (params.len(), params.h());
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_key(replica_key(seed, l, h, i));
            let mut out = vec![0i64; l];
            sampler.sample_into(&mut rng, &mut out);
            out
        })
        .collect())
}

fn fluctuations(cfg: &ExperimentConfig) -> anyhow::Result<Report> {
    let mut table = Table::new(&["L", "h", "threshold", "tail_prob", "ci_lo", "ci_hi"]);
    let mut summary = Summary::new(cfg);
    let multipliers = if cfg.thresholds.is_empty() { vec![1.0, 1.5, 2.0, 2.5, 3.0] } else { cfg.thresholds.clone() };
    for l in cfg.size_list() {
        let lf = l as f64;
        let (samples, reference, unit) = match cfg.model {
            ModelKind::Sos => {
                let p = sos_params(l, cfg.h, cfg.window, cfg.walls)?;
                (sos_samples(p, cfg.seed, cfg.replicas)?, crate::models::sos_reference(l, cfg.h), lf.sqrt())
            }
            ModelKind::Surface => {
                let sys = system(cfg, l)?;
                let out = cftp_batch(&sys, cfg.seed, l, cfg.h, cfg.replicas)?;
                (out.into_iter().map(|o| o.0).collect(), sys.reference(), lf.ln().powf(1.0 + FLUCTUATION_EPS))
            }
        };
        let thresholds: Vec<f64> = multipliers.iter().map(|a| a * unit).collect();
        let rows = fluctuation_stats(&samples, &reference, &thresholds)?;
        for r in &rows {
            table.push(vec![cell(l), cell(cfg.h), cell(r.threshold), cell(r.tail_prob), cell(r.ci_lo), cell(r.ci_hi)]);
        }
        let pts: Vec<(f64, f64)> = multipliers
            .iter()
            .zip(&rows)
            .filter(|(_, r)| r.tail_prob > 0.0)
            .map(|(a, r)| (a * a, r.tail_prob.ln()))
            .collect();
        if pts.len() >= 2 {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
            summary.record(&format!("log_tail_vs_a2_L{l}"), line_fit(&xs, &ys)?);
        }
        summary.assert(&format!("monotone_L{l}"), rows.windows(2).all(|w| w[1].tail_prob <= w[0].tail_prob));
    }
    Ok(Report { table, summary })
}

/// Fits `value ~ L^z` to a CSV with columns `x` and `y`, taking the median
/// of `y` at each distinct `x`.
pub fn fit_table(table: &Table, x: &str, y: &str) -> anyhow::Result<crate::stats::ScalingFit> {
    let (Some(ix), Some(iy)) = (table.column(x), table.column(y)) else {
        bail!("missing column {x} or {y}");
    };
    let mut groups: std::collections::BTreeMap<u64, (f64, Vec<f64>)> = Default::default();
    for row in &table.rows {
        let xv: f64 = row[ix].parse().with_context(|| format!("parsing {x}"))?;
        let yv: f64 = row[iy].parse().with_context(|| format!("parsing {y}"))?;
        groups.entry(xv.to_bits()).or_insert((xv, Vec::new())).1.push(yv);
    }
    let mut pts: Vec<(f64, f64)> = groups.into_values().map(|(x, ys)| (x, median(&ys))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(fit_scaling(&pts)?)
}

/// Default `alpha_1` re-exported for the CLI help.
pub const DEFAULT_ALPHA1: f64 = ALPHA1;
