//! Acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Run a subset with `cargo test --test acceptance -- 3 10`. The process
//! exits nonzero only when a criterion outside `EXPECTED_FAILURES` fails;
//! expected failures still print FAIL with their numbers.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use curvmix::config::{Experiment, ExperimentConfig, ModelKind, Profile};
use curvmix::models::{planar_profile, planar_square, sos_params, System};
use curvmix::runs::{cftp_batch, cftp_tv, run_experiment};
use curvmix::stats::{fit_scaling, line_fit, max_deviation, median};
use curvmix_core::coupling::coalescence_time;
use curvmix_core::events::rng_from_key;
use rand_core::RngCore;
use curvmix_core::lattice::{SlopeVector, SosParams, SosPath};
use curvmix_core::schedule::{schedule_sos, schedule_surface, Exponents, ALPHA1};
use curvmix_core::sos::{glauber_rates, rates_at, Rate, SosDynamics, BETA, GAMMA};
use curvmix_core::spectral::{
    block_generator, build_generator, censored_vs_uncensored, decompose, decompose_with, enumerate_sos, exact_gap,
    exact_tmix, mixing_law_check, variance_decomposition_check, BlockRect, DEFAULT_STATE_CAP,
};

/// Criteria known to fail, with the reason printed next to them.
const EXPECTED_FAILURES: &[(u32, &str)] = &[
    (
        8,
        "with 1e5 samples the empirical TV of an exact sampler sits near 0.5 sqrt(2K/(pi n)) on K states, above 0.02 here",
    ),
    (
        10,
        "the stated R_M asymptotic L^2/(2 (ln L)^{3/4}) disagrees with rho^2/(2 u_M) = L^2 (ln L)^{3/4}/2 by (ln L)^{3/2}",
    ),
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn out_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name)
}

fn sos_instances() -> Vec<(usize, i64)> {
    let mut v = Vec::new();
    for l in 1..=4usize {
        for h in 0..=2i64 {
            if h <= l as i64 {
                v.push((l, h));
            }
        }
    }
    v
}

fn surface_instances() -> Vec<System> {
    let s = SlopeVector::diagonal();
    [2usize, 3].iter().map(|&n| System::Surface(planar_square(n, &s).unwrap(), s)).collect()
}

fn c1_rates() -> Outcome {
    let mut cases = 0;
    let mut worst = 0.0f64;
    let mut exact = true;
    for a in -4i64..=4 {
        for x in -4i64..=4 {
            for b in -4i64..=4 {
                let (down, up) = rates_at(a, x, b);
                for (r, y) in [(down, x - 1), (up, x + 1)] {
                    let dh = (a - y).abs() + (b - y).abs() - (a - x).abs() - (b - x).abs();
                    let want = match dh {
                        2 => Rate::Low,
                        0 => Rate::Half,
                        -2 => Rate::High,
                        _ => unreachable!("energy changes by 0 or 2"),
                    };
                    exact &= r == want;
                    let w = (-(dh as f64)).exp();
                    worst = worst.max((r.value() - w / (1.0 + w)).abs());
                    cases += 1;
                }
            }
        }
    }
    let e2 = (-2.0f64).exp();
    let consts = (BETA - e2 / (1.0 + e2)).abs().max((GAMMA - 1.0 / (1.0 + e2)).abs());
    // the path accessor reads the pinned ends
    let p = Arc::new(SosParams::bounded(3, 1).unwrap());
    let path = SosPath::new(p, vec![0, 2, 1]).unwrap();
    let ends = glauber_rates(&path, 0) == rates_at(0, 0, 2) && glauber_rates(&path, 2) == rates_at(2, 1, 1);
    let ok = exact && ends && worst <= 1e-15 && consts <= 1e-15;
    outcome(ok, format!("{cases} moves, symbolic match {exact}, max float error {worst:.1e}, constants {consts:.1e}"))
}

fn c2_detailed_balance() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for (l, h) in sos_instances() {
        let m = build_generator(&enumerate_sos(sos_params(l, h, None, false).unwrap(), DEFAULT_STATE_CAP).unwrap())
            .unwrap();
        worst = worst.max(m.reversibility_residual());
        count += 1;
    }
    for sys in surface_instances() {
        let m = build_generator(&sys.enumerate().unwrap()).unwrap();
        worst = worst.max(m.reversibility_residual());
        count += 1;
    }
    outcome(worst < 1e-12, format!("{count} generators, max residual {worst:.2e}"))
}

fn c3_gap_oracle() -> Outcome {
    let p = Arc::new(SosParams::with_window(1, 0, 1).unwrap());
    let m = build_generator(&enumerate_sos(p, DEFAULT_STATE_CAP).unwrap()).unwrap();
    let g = exact_gap(&m).unwrap();
    let want = 1.0 / (1.0 + (-2.0f64).exp());
    let err = (g.gap - want).abs();
    outcome(err < 1e-12, format!("gap {:.15} vs 1/(1+e^-2) {:.15}, error {err:.1e}", g.gap, want))
}

fn sos_gap(l: usize, window: Option<i64>) -> f64 {
    let m = build_generator(&enumerate_sos(sos_params(l, 0, window, false).unwrap(), DEFAULT_STATE_CAP).unwrap())
        .unwrap();
    exact_gap(&m).unwrap().gap
}

fn c4_gap_scaling() -> Outcome {
    let pts: Vec<(f64, f64)> = (2..=5).map(|l| (l as f64, sos_gap(l, None))).collect();
    let inv: Vec<(f64, f64)> = pts.iter().map(|&(l, g)| (l, 1.0 / g)).collect();
    let fit = fit_scaling(&inv).unwrap();
    let sweep: Vec<f64> = [4i64, 8, 16].iter().map(|&hh| sos_gap(4, Some(hh))).collect();
    // stabilization: the last doubling of the ceiling moves the gap by at
    // most 5%; the spread over the whole sweep is reported alongside
    let last = (sweep[1] - sweep[2]).abs() / sweep[2];
    let spread = sweep.iter().cloned().fold(f64::MIN, f64::max) / sweep.iter().cloned().fold(f64::MAX, f64::min) - 1.0;
    let ok = (1.5..=2.5).contains(&fit.z) && last <= 0.05;
    let gaps: Vec<String> = pts.iter().map(|(l, g)| format!("L={l}:{g:.5}")).collect();
    let sw: Vec<String> = sweep.iter().map(|g| format!("{g:.5}")).collect();
    outcome(
        ok,
        format!(
            "gaps {}; z={:.3}; ceiling sweep H=4,8,16 at L=4: {} (last step {:.2}%, whole sweep {:.2}%)",
            gaps.join(" "),
            fit.z,
            sw.join(" "),
            100.0 * last,
            100.0 * spread
        ),
    )
}

fn c5_mixing_law() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut all = true;
    let mut lines = Vec::new();
    let mut systems: Vec<(String, System)> = sos_instances()
        .into_iter()
        .map(|(l, h)| (format!("sos L={l} h={h}"), System::Sos(SosDynamics::new(sos_params(l, h, None, false).unwrap()))))
        .collect();
    for (i, s) in surface_instances().into_iter().enumerate() {
        systems.push((format!("surface {}x{}", i + 2, i + 2), s));
    }
    for (name, sys) in systems {
        let space = sys.enumerate().unwrap();
        let m = build_generator(&space).unwrap();
        let sym = space.reflection();
        let g = exact_gap(&m).unwrap();
        let res = exact_tmix(&m, sym.as_deref()).unwrap();
        let law = mixing_law_check(&m, sym.as_deref(), &res, Some(g.gap)).unwrap();
        all &= law.holds;
        worst = worst.max(law.max_excess);
        lines.push(format!("{name}: tmix={:.3}", res.tmix));
    }
    outcome(all, format!("{} instances, max excess over e^-k {:.2e}; {}", lines.len(), worst, lines.join(", ")))
}

fn c6_coalescence() -> Outcome {
    let mut cfg = ExperimentConfig::new(Experiment::Coalesce, ModelKind::Sos, 8, 6);
    cfg.sizes = vec![8, 16, 32, 64];
    cfg.replicas = 50;
    cfg.out = out_dir("c6");
    let rep = run_experiment(&cfg).unwrap();
    rep.write(&cfg.out).unwrap();
    let censored = rep.table.rows.iter().filter(|r| r[7] == "true").count();
    let fit = &rep.summary.results["fit"];
    let z = fit["z"].as_f64().unwrap();
    let meds: Vec<String> = rep.summary.results["medians"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| format!("L={:.0}:{:.0}", p[0].as_f64().unwrap(), p[1].as_f64().unwrap()))
        .collect();
    outcome((1.7..=2.6).contains(&z) && censored == 0, format!("medians {}; z={z:.3}; censored {censored}", meds.join(" ")))
}

fn c7_surface() -> Outcome {
    let s = SlopeVector::diagonal();
    let mut meds = Vec::new();
    let seeds = 20;
    for n in [8usize, 16, 32] {
        let d = planar_square(n, &s).unwrap();
        let horizon = curvmix::runs::coalescence_horizon(n);
        let times: Vec<f64> = (0..seeds)
            .map(|r| coalescence_time(&d, curvmix::runs::replica_key(7, n, 0, r), horizon, (n, 0)).unwrap().time)
            .collect();
        meds.push((n as f64, median(&times)));
    }
    let z = fit_scaling(&meds).unwrap().z;
    let n = 32usize;
    let d = planar_square(n, &s).unwrap();
    let reference = planar_profile(&d, &s);
    let t = (n * n) as f64 * (n as f64).ln();
    let bound = 10.0 * (n as f64).ln().powi(2);
    let sys = System::Surface(d, s);
    let mut good = 0;
    let mut worst = 0.0f64;
    for r in 0..20 {
        let traj = sys.trajectory(curvmix::runs::replica_key(70, n, 0, r), t, &[t]);
        let dev = max_deviation(&traj.states[0], &reference);
        worst = worst.max(dev);
        if dev <= bound {
            good += 1;
        }
    }
    let m: Vec<String> = meds.iter().map(|(n, t)| format!("N={n}:{t:.0}")).collect();
    outcome(
        (1.7..=2.7).contains(&z) && good >= 15,
        format!("medians {}; z={z:.3}; N=32 at t=N^2 ln N: {good}/20 within {bound:.1} (worst {worst})", m.join(" ")),
    )
}

/// TV between `n` i.i.d. draws from `pi` and `pi`, averaged over `reps`:
/// the floor any exact sampler sits on at this sample size.
fn iid_tv_floor(pi: &[f64], n: usize, reps: u64) -> f64 {
    let mut cdf = Vec::with_capacity(pi.len());
    let mut acc = 0.0;
    for p in pi {
        acc += p;
        cdf.push(acc);
    }
    let mut total = 0.0;
    for r in 0..reps {
        let mut rng = rng_from_key(0xF100 + r);
        let mut counts = vec![0usize; pi.len()];
        for _ in 0..n {
            let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * acc;
            counts[cdf.partition_point(|&c| c <= u).min(pi.len() - 1)] += 1;
        }
        total += 0.5 * counts.iter().zip(pi).map(|(&c, p)| (c as f64 / n as f64 - p).abs()).sum::<f64>();
    }
    total / reps as f64
}

fn c8_cftp() -> Outcome {
    let n = 100_000;
    let s = SlopeVector::diagonal();
    let cases = [
        ("sos L=4 h=1", System::Sos(SosDynamics::new(sos_params(4, 1, None, false).unwrap())), 4usize, 1i64),
        ("surface 3x3", System::Surface(planar_square(3, &s).unwrap(), s), 3, 0),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, sys, l, h) in cases {
        let samples: Vec<Vec<i64>> = cftp_batch(&sys, 8, l, h, n).unwrap().into_iter().map(|o| o.0).collect();
        let tv = cftp_tv(&sys, &samples).unwrap();
        let (space, pi) = sys.stationary().unwrap();
        let floor = iid_tv_floor(&pi, n, 5);
        ok &= tv < 0.02;
        parts.push(format!("{name} ({} states): TV {tv:.4}, i.i.d. draws from pi give {floor:.4}", space.len()));
    }
    outcome(ok, parts.join("; "))
}

fn c9_monitor() -> Outcome {
    let mut cfg = ExperimentConfig::new(Experiment::Monitor, ModelKind::Sos, 64, 9);
    cfg.replicas = 20;
    cfg.profile = Profile::Scaled;
    cfg.out = out_dir("c9");
    let rep = run_experiment(&cfg).unwrap();
    rep.write(&cfg.out).unwrap();
    let s = &rep.summary.results["L64"];
    let contained = s["contained"].as_u64().unwrap();
    let bound = 4.0 * 8.0;
    let devs: Vec<f64> = s["final_deviation"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let close = devs.iter().filter(|&&d| d <= bound).count();
    let worst = devs.iter().cloned().fold(f64::MIN, f64::max);
    outcome(
        contained >= 15 && close >= 15,
        format!(
            "profile {} exponents {}, M={}, t_M={:.0}, seed {} (replicas 0..20): contained {contained}/20, final max(eta - etabar) <= 32 in {close}/20 (worst {worst})",
            s["profile"],
            s["exponents"],
            s["M"],
            s["t_M"].as_f64().unwrap(),
            cfg.seed
        ),
    )
}

fn c10_schedules() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let mut worst_sos = 0.0f64;
    let mut worst_surface = 0.0f64;
    for k in 6..=12 {
        let l = 1usize << k;
        let s = schedule_sos(l, Exponents::sos(ALPHA1)).unwrap();
        let b = s.time_bound(1.0);
        ok &= b.holds && s.half_step_holds() && s.is_well_formed();
        worst_sos = worst_sos.max(b.ratio());
        let f = schedule_surface(l, Exponents::surface()).unwrap();
        let b = f.time_bound(1.0);
        ok &= b.holds && f.is_well_formed();
        worst_surface = worst_surface.max(b.ratio());
    }
    let big = schedule_surface(4096, Exponents::surface()).unwrap();
    let r = big.radius_ratios();
    let in_band = |x: f64| (0.8..=1.25).contains(&x);
    let ratios_ok = in_band(r.r0) && in_band(r.rm_stated);
    notes.push(format!("sos t_M/bound max {worst_sos:.2e} (M=0 at every size with default exponents)"));
    notes.push(format!("surface t_M/(K L^2 (ln L)^11.5) max {worst_surface:.3} with K=1"));
    notes.push(format!(
        "L=4096: R_0 ratio {:.4}, R_M ratio as stated {:.3}, against L^2 (ln L)^0.75/2 {:.4}",
        r.r0, r.rm_stated, r.rm_corrected
    ));
    outcome(ok && ratios_ok, notes.join("; "))
}

fn c11_censoring() -> Outcome {
    let p = Arc::new(SosParams::with_window(3, 0, 2).unwrap());
    let c = censored_vs_uncensored(p, 1, 0.25, &[0.5, 1.0, 2.0], 200, 11).unwrap();
    let tv_ok = c.tv_censored.iter().zip(&c.tv_uncensored).all(|(a, b)| *a >= b - 1e-10);
    outcome(
        c.min_margin >= -1e-10,
        format!(
            "200 monotone functions, start = pi given all heights >= 1 (mass {:.4}), min margin {:.3e}; TV censored {:?} vs uncensored {:?} (ordered: {tv_ok})",
            c.start_mass,
            c.min_margin,
            c.tv_censored.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>(),
            c.tv_uncensored.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn c12_blocks() -> Outcome {
    let mut stat = 0.0f64;
    let mut margin = f64::INFINITY;
    let mut splits = 0;
    let mut geometry = true;
    let mut seed = 0u64;
    for base in 1..=3usize {
        for height in 2..=6i64 {
            let lambda = BlockRect::new(base, height).unwrap();
            for cap in 1..height {
                for min_overlap in 0..=cap {
                    let out = decompose_with(lambda, cap, min_overlap, usize::MAX);
                    // (a) pieces fit under the cap, (b) overlaps are tall
                    // enough, (c) overlaps are pairwise disjoint
                    for s in &out {
                        geometry &= s.lower.height() <= cap && s.upper.height() <= cap;
                        geometry &= s.overlap >= min_overlap;
                        geometry &= s.lower.bottom == lambda.bottom && s.upper.top == lambda.top;
                    }
                    for w in out.windows(2) {
                        geometry &= w[0].overlap_interval().1 < w[1].overlap_interval().0;
                    }
                    for s in out.iter().take(1) {
                        let q = block_generator(s).unwrap();
                        stat = stat.max(q.stationarity_residual());
                        seed += 1;
                        let rep = variance_decomposition_check(s, 200, seed).unwrap();
                        margin = margin.min(rep.margin_lower).min(rep.margin_upper);
                        stat = stat.max(rep.stationarity);
                        splits += 1;
                    }
                }
            }
        }
    }
    // a rectangle of the top class at n = 60
    let n = 60u32;
    let big = BlockRect::new(3, 1.5f64.powi(n as i32).floor() as i64).unwrap();
    let d = decompose(big, n);
    let cap = 1.5f64.powi(n as i32 - 1).floor() as i64;
    let min_overlap = 1.5f64.powf(0.75 * n as f64).ceil() as i64;
    let full = d.is_complete() && d.splits.len() >= d.required;
    let shaped = d.splits.iter().all(|s| s.lower.height() <= cap && s.upper.height() <= cap && s.overlap >= min_overlap);
    let disjoint = d.splits.windows(2).all(|w| w[0].overlap_interval().1 < w[1].overlap_interval().0);
    geometry &= shaped;
    let ok = stat < 1e-12 && margin >= -1e-10 && geometry && full && disjoint;
    outcome(
        ok,
        format!(
            "{splits} enumerated splits: stationarity {stat:.1e}, min margin {margin:.3e}, geometry {geometry}; n=60: {} of {} required splits, disjoint {disjoint}",
            d.splits.len(),
            d.required
        ),
    )
}

fn c13_fluctuations() -> Outcome {
    let mut cfg = ExperimentConfig::new(Experiment::Fluctuations, ModelKind::Sos, 256, 13);
    cfg.replicas = 10_000;
    cfg.thresholds = vec![1.0, 1.5, 2.0, 2.5, 3.0];
    cfg.out = out_dir("c13");
    let rep = run_experiment(&cfg).unwrap();
    rep.write(&cfg.out).unwrap();
    let probs: Vec<f64> = rep.table.rows.iter().map(|r| r[3].parse().unwrap()).collect();
    let monotone = probs.windows(2).all(|w| w[1] <= w[0]);
    let ordering = probs[4] < probs[0] / 5.0;
    let a2: Vec<f64> = [1.0f64, 1.5, 2.0, 2.5].iter().map(|a| a * a).collect();
    let lp: Vec<f64> = probs[..4].iter().map(|p| p.ln()).collect();
    let fit = if probs[..4].iter().all(|&p| p > 0.0) { line_fit(&a2, &lp).ok() } else { None };
    let fit_ok = fit.map_or(false, |f| f.slope < 0.0 && f.r2 > 0.9);
    outcome(
        monotone && ordering && fit_ok,
        format!(
            "P(max > a sqrt L) for a=1,1.5,2,2.5,3: {:?}; slope {:.3} R^2 {:.4}",
            probs.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>(),
            fit.map_or(f64::NAN, |f| f.slope),
            fit.map_or(f64::NAN, |f| f.r2)
        ),
    )
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: Vec<(u32, &str, fn() -> Outcome)> = vec![
        (1, "exact heat-bath rates", c1_rates),
        (2, "detailed balance", c2_detailed_balance),
        (3, "exact gap oracle", c3_gap_oracle),
        (4, "gap scaling", c4_gap_scaling),
        (5, "exact mixing law", c5_mixing_law),
        (6, "SOS coalescence scaling", c6_coalescence),
        (7, "surface relaxation", c7_surface),
        (8, "CFTP exactness", c8_cftp),
        (9, "domination monitor", c9_monitor),
        (10, "schedule arithmetic", c10_schedules),
        (11, "censoring domination", c11_censoring),
        (12, "block dynamics", c12_blocks),
        (13, "equilibrium fluctuations", c13_fluctuations),
    ];
    let mut unexpected = Vec::new();
    for (id, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag} {name} ({secs:.1}s): {}", o.detail);
        if !o.pass {
            match EXPECTED_FAILURES.iter().find(|(k, _)| *k == id) {
                Some((_, why)) => println!("             expected failure: {why}"),
                None => unexpected.push(id),
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
