use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use super::generator::RateMatrix;
use crate::coupling::TMIX_THRESHOLD;
use crate::error::{Error, Result};
use crate::math;

/// Poisson mass left outside every uniformization window.
pub const TRUNCATION: f64 = 1e-10;

/// Starts evolved together as the columns of one dense block.
const BLOCK: usize = 32;

pub fn point_mass(n: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v
}

/// `(1/2) sum |mu - nu|`.
pub fn tv_distance(mu: &[f64], nu: &[f64]) -> f64 {
    0.5 * mu.iter().zip(nu).map(|(a, b)| math::abs(a - b)).sum::<f64>()
}

/// `P = I + Q / lambda` with `lambda` the largest exit rate, stored by
/// incoming transitions so a row-major block of measures updates in place
/// row by row.
struct Uniformized {
    n: usize,
    lambda: f64,
    diag: Vec<f64>,
    ptr: Vec<usize>,
    from: Vec<u32>,
    weight: Vec<f64>,
}

impl Uniformized {
    fn new(m: &RateMatrix) -> Self {
        let n = m.len();
        let lambda = m.max_exit();
        let mut counts = vec![0usize; n + 1];
        for i in 0..n {
            for (j, _) in m.row(i) {
                counts[j + 1] += 1;
            }
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let ptr = counts.clone();
        let mut fill = counts;
        let mut from = vec![0u32; m.nnz()];
        let mut weight = vec![0.0; m.nnz()];
        for i in 0..n {
            for (j, q) in m.row(i) {
                from[fill[j]] = i as u32;
                weight[fill[j]] = q / lambda;
                fill[j] += 1;
            }
        }
        let diag = (0..n).map(|i| if lambda > 0.0 { 1.0 - m.exit_rate(i) / lambda } else { 1.0 }).collect();
        Self { n, lambda, diag, ptr, from, weight }
    }

    /// `dst = src P` for `b` measures interleaved by state.
    fn step(&self, src: &[f64], dst: &mut [f64], b: usize) {
        for i in 0..self.n {
            let out = &mut dst[i * b..(i + 1) * b];
            let d = self.diag[i];
            for (o, s) in out.iter_mut().zip(&src[i * b..(i + 1) * b]) {
                *o = d * s;
            }
            for k in self.ptr[i]..self.ptr[i + 1] {
                let j = self.from[k] as usize;
                let w = self.weight[k];
                for (o, s) in out.iter_mut().zip(&src[j * b..(j + 1) * b]) {
                    *o += w * s;
                }
            }
        }
    }
}

/// Poisson(`m`) weights on a window `[k0, k0 + w.len())` whose expansion
/// in `m` is monotone, so windows of increasing times start in order.
struct Window {
    k0: usize,
    w: Vec<f64>,
}

fn poisson_window(m: f64) -> Result<Window> {
    if m <= 0.0 {
        return Ok(Window { k0: 0, w: vec![1.0] });
    }
    // both tails stay below 4e-11 for all m (Poisson tails checked up to 1e5)
    let spread = 6.5 * math::sqrt(m);
    let k0 = math::floor(m - spread - 2.0).max(0.0) as usize;
    let k1 = math::ceil(m + spread + 12.0) as usize;
    let mode = (math::floor(m) as usize).clamp(k0, k1);
    let mut w = vec![0.0; k1 - k0 + 1];
    let lm = math::ln(m);
    w[mode - k0] = math::exp(-m + mode as f64 * lm - math::ln_gamma(mode as f64 + 1.0));
    for k in (k0..mode).rev() {
        w[k - k0] = w[k + 1 - k0] * (k + 1) as f64 / m;
    }
    for k in mode + 1..=k1 {
        w[k - k0] = w[k - 1 - k0] * m / k as f64;
    }
    // the mode weight carries the relative error of ln_gamma (~1e-10 at
    // m = 1e5); renormalizing removes it, leaving only the tail mass
    let total = w.iter().sum::<f64>();
    if !(total > 1.0 - 1e-6) {
        return Err(Error::NoConvergence(1.0 - total));
    }
    w.iter_mut().for_each(|x| *x /= total);
    Ok(Window { k0, w })
}

struct Pending {
    tag: usize,
    t: f64,
    win: Window,
    acc: Vec<f64>,
}

/// Evolves a block of `b` measures (row-major, `n x b`) through the times
/// produced by `times` (nondecreasing; `None` ends the run), calling
/// `visit(tag, t, block)` at each. Stops early when `visit` returns false.
fn run_block<T, V>(u: &Uniformized, init: Vec<f64>, b: usize, mut times: T, mut visit: V) -> Result<()>
where
    T: FnMut(usize) -> Option<f64>,
    V: FnMut(usize, f64, &[f64]) -> bool,
{
    let len = u.n * b;
    let mut cur = init;
    let mut next = vec![0.0; len];
    let mut active: VecDeque<Pending> = VecDeque::new();
    let mut tag = 0usize;
    let mut upcoming = match times(0) {
        Some(t) => Some((t, poisson_window(u.lambda * t)?)),
        None => None,
    };
    let mut k = 0usize;
    loop {
        while let Some((t, win)) = upcoming.take() {
            if win.k0 > k {
                upcoming = Some((t, win));
                break;
            }
            debug_assert_eq!(win.k0, k.min(win.k0));
            active.push_back(Pending { tag, t, win, acc: vec![0.0; len] });
            tag += 1;
            upcoming = match times(tag) {
                Some(t2) => Some((t2, poisson_window(u.lambda * t2)?)),
                None => None,
            };
        }
        if active.is_empty() && upcoming.is_none() {
            return Ok(());
        }
        for p in active.iter_mut() {
            let off = k - p.win.k0;
            if off < p.win.w.len() {
                let w = p.win.w[off];
                p.acc.iter_mut().zip(&cur).for_each(|(a, c)| *a += w * c);
            }
        }
        while active.front().is_some_and(|p| p.win.k0 + p.win.w.len() == k + 1) {
            let p = active.pop_front().unwrap();
            if !visit(p.tag, p.t, &p.acc) {
                return Ok(());
            }
        }
        if active.is_empty() && upcoming.is_none() {
            return Ok(());
        }
        u.step(&cur, &mut next, b);
        core::mem::swap(&mut cur, &mut next);
        k += 1;
    }
}

/// TV distance to `pi` of every column of a block.
fn block_tv(acc: &[f64], pi: &[f64], b: usize, out: &mut [f64]) {
    out[..b].iter_mut().for_each(|x| *x = 0.0);
    for (i, &p) in pi.iter().enumerate() {
        for (o, a) in out[..b].iter_mut().zip(&acc[i * b..(i + 1) * b]) {
            *o += math::abs(a - p);
        }
    }
    out[..b].iter_mut().for_each(|x| *x *= 0.5);
}

/// `||mu / pi - 1||_{L^2(pi)}` of every column.
fn block_l2(acc: &[f64], pi: &[f64], b: usize, out: &mut [f64]) {
    out[..b].iter_mut().for_each(|x| *x = 0.0);
    for (i, &p) in pi.iter().enumerate() {
        for (o, a) in out[..b].iter_mut().zip(&acc[i * b..(i + 1) * b]) {
            *o += a * a / p;
        }
    }
    out[..b].iter_mut().for_each(|x| *x = math::sqrt((*x - 1.0).max(0.0)));
}

fn init_block(n: usize, starts: &[usize]) -> Vec<f64> {
    let b = starts.len();
    let mut m = vec![0.0; n * b];
    for (c, &s) in starts.iter().enumerate() {
        m[s * b + c] = 1.0;
    }
    m
}

/// `mu P_t`, by uniformization.
pub fn evolve(m: &RateMatrix, mu: &[f64], t: f64) -> Result<Vec<f64>> {
    if mu.len() != m.len() || !(t >= 0.0) {
        return Err(Error::InvalidParameters("measure length or time"));
    }
    let u = Uniformized::new(m);
    let mut out = Vec::new();
    run_block(&u, mu.to_vec(), 1, |i| (i == 0).then_some(t), |_, _, acc| {
        out = acc.to_vec();
        false
    })?;
    Ok(out)
}

/// `||mu^xi_t - pi||` at each of the sorted `times`.
pub fn tv_curve(m: &RateMatrix, xi: usize, times: &[f64]) -> Result<Vec<f64>> {
    if xi >= m.len() {
        return Err(Error::InvalidParameters("start outside the space"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidParameters("times must be sorted and nonnegative"));
    }
    let u = Uniformized::new(m);
    let mut out = Vec::with_capacity(times.len());
    let mut tv = [0.0];
    run_block(&u, point_mass(m.len(), xi), 1, |i| times.get(i).copied(), |_, _, acc| {
        block_tv(acc, m.pi(), 1, &mut tv);
        out.push(tv[0]);
        true
    })?;
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct TmixResult {
    /// smallest time found with `sup_xi ||mu^xi_t - pi|| <= (2e)^{-1}`
    pub tmix: f64,
    /// a time at which the sup still exceeds the threshold
    pub lower: f64,
    pub worst_start: usize,
    /// distinct starts evolved (after symmetry reduction)
    pub starts: usize,
    pub lambda: f64,
    /// TV and `L^2(pi)` distance of every representative start at `tmix`
    profile: Option<Profile>,
}

#[derive(Clone, Debug)]
struct Profile {
    reps: Vec<usize>,
    tv: Vec<f64>,
    l2: Vec<f64>,
}

/// Representatives of the orbits of an optional involution.
fn representatives(n: usize, symmetry: Option<&[u32]>) -> Vec<usize> {
    match symmetry {
        Some(r) => (0..n).filter(|&i| r[i] as usize >= i).collect(),
        None => (0..n).collect(),
    }
}

fn representative(i: usize, symmetry: Option<&[u32]>) -> usize {
    symmetry.map_or(i, |r| i.min(r[i] as usize))
}

/// Coarse time grid in units of uniformization steps: spacing grows like
/// the Poisson spread so only a handful of windows overlap.
fn time_grid(lambda: f64, len: usize) -> Vec<f64> {
    let mut s = 0.0f64;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(s / lambda);
        s += (2.0 * math::sqrt(s)).max(2.0);
    }
    out
}

/// TV (and optionally `L^2`) distances of `starts` at the single time `t`.
fn distances_at(u: &Uniformized, pi: &[f64], starts: &[usize], t: f64, with_l2: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut tv = Vec::with_capacity(starts.len());
    let mut l2 = Vec::with_capacity(if with_l2 { starts.len() } else { 0 });
    let mut buf = vec![0.0; BLOCK];
    for chunk in starts.chunks(BLOCK) {
        let b = chunk.len();
        run_block(u, init_block(u.n, chunk), b, |i| (i == 0).then_some(t), |_, _, acc| {
            block_tv(acc, pi, b, &mut buf);
            tv.extend_from_slice(&buf[..b]);
            if with_l2 {
                block_l2(acc, pi, b, &mut buf);
                l2.extend_from_slice(&buf[..b]);
            }
            false
        })?;
    }
    Ok((tv, l2))
}

/// Grid index at which each start first has TV `<= (2e)^{-1}`.
fn crossings(u: &Uniformized, pi: &[f64], starts: &[usize], grid: &[f64]) -> Result<Vec<usize>> {
    let mut crossing = vec![usize::MAX; starts.len()];
    let mut tv = vec![0.0; BLOCK];
    for (bi, chunk) in starts.chunks(BLOCK).enumerate() {
        let b = chunk.len();
        let done = &mut crossing[bi * BLOCK..bi * BLOCK + b];
        run_block(u, init_block(u.n, chunk), b, |g| grid.get(g).copied(), |g, _, acc| {
            block_tv(acc, pi, b, &mut tv);
            for c in 0..b {
                if done[c] == usize::MAX && tv[c] <= TMIX_THRESHOLD {
                    done[c] = g;
                }
            }
            done.iter().any(|&x| x == usize::MAX)
        })?;
        if done.iter().any(|&x| x == usize::MAX) {
            return Err(Error::NoConvergence(grid[grid.len() - 1]));
        }
    }
    Ok(crossing)
}

/// Crossing of the sup over `starts`: bracket on the grid, then bisect
/// with the starts whose own crossing falls in the last bracket (all
/// others are already below the threshold there). Returns
/// `(lower, upper, worst)`.
fn sup_crossing(u: &Uniformized, pi: &[f64], starts: &[usize], grid: &[f64]) -> Result<(f64, f64, usize)> {
    let crossing = crossings(u, pi, starts, grid)?;
    let g_max = *crossing.iter().max().unwrap();
    let cands: Vec<usize> = starts.iter().zip(&crossing).filter(|(_, &g)| g == g_max).map(|(&s, _)| s).collect();
    if g_max == 0 {
        return Ok((0.0, 0.0, cands[0]));
    }
    let (mut lo, mut hi) = (grid[g_max - 1], grid[g_max]);
    let mut worst = cands[0];
    while hi - lo > 1e-9 * hi {
        let mid = 0.5 * (lo + hi);
        let (tv, _) = distances_at(u, pi, &cands, mid, false)?;
        let (c, &d) = tv.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        if d <= TMIX_THRESHOLD {
            hi = mid;
        } else {
            lo = mid;
            worst = cands[c];
        }
    }
    Ok((lo, hi, worst))
}

/// Exact mixing time: the first time the worst-case TV distance over all
/// starts is at most `(2e)^{-1}`.
///
/// The crossing for the extremal states (first and last index) is found
/// first; every other start is then evaluated once at that time. Starts
/// still above the threshold there, if any, join a second bracketing and
/// bisection. `symmetry`, when given, is an involution of the state space
/// preserving the generator and `pi`, and halves the work.
pub fn exact_tmix(m: &RateMatrix, symmetry: Option<&[u32]>) -> Result<TmixResult> {
    let n = m.len();
    let u = Uniformized::new(m);
    let reps = representatives(n, symmetry);
    if n == 1 || u.lambda == 0.0 {
        return Ok(TmixResult { tmix: 0.0, lower: 0.0, worst_start: 0, starts: n, lambda: u.lambda, profile: None });
    }
    let grid = time_grid(u.lambda, 100_000);
    let mut seeds = vec![representative(0, symmetry), representative(n - 1, symmetry)];
    seeds.dedup();
    let (mut lo, mut hi, mut worst) = sup_crossing(&u, m.pi(), &seeds, &grid)?;
    let (tv, l2) = distances_at(&u, m.pi(), &reps, hi, true)?;
    let late: Vec<usize> = reps.iter().zip(&tv).filter(|(_, &d)| d > TMIX_THRESHOLD).map(|(&s, _)| s).collect();
    let profile = if late.is_empty() {
        Some(Profile { reps: reps.clone(), tv, l2 })
    } else {
        seeds.extend(late);
        (lo, hi, worst) = sup_crossing(&u, m.pi(), &seeds, &grid)?;
        None
    };
    Ok(TmixResult { tmix: hi, lower: lo, worst_start: worst, starts: reps.len(), lambda: u.lambda, profile })
}

#[derive(Clone, Debug)]
pub struct MixingLawRow {
    pub t: f64,
    /// `floor(t / t_mix)`
    pub k: u32,
    /// worst-case TV over the starts evolved to `t`
    pub sup_tv: f64,
    /// `sup_tv` joined with the decay bounds of certified starts
    pub upper: f64,
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct MixingLawReport {
    pub tmix: f64,
    pub rows: Vec<MixingLawRow>,
    pub max_excess: f64,
    pub holds: bool,
    /// start/time pairs settled by the `L^2` decay bound instead of evolution
    pub certified: usize,
    pub evolved: usize,
}

/// Checks `sup_xi ||mu^xi_t - pi|| <= e^{-floor(t / t_mix)} + 1e-12` for
/// `t <= 5 t_mix`. Worst-case TV is nonincreasing, so the right side's
/// steps at `t = k t_mix` are the binding points and only those are
/// evaluated. With `gap` given, a start whose `L^2(pi)` distance `l` at
/// `t_mix` already gives `l e^{-gap (k - 1) t_mix} / 2 <= e^{-k}` for every
/// `k` is certified without further evolution.
pub fn mixing_law_check(m: &RateMatrix, symmetry: Option<&[u32]>, res: &TmixResult, gap: Option<f64>) -> Result<MixingLawReport> {
    let n = m.len();
    let tmix = res.tmix;
    let u = Uniformized::new(m);
    let ks: Vec<u32> = (0..=5).collect();
    let bound: Vec<f64> = ks.iter().map(|&k| math::exp(-(k as f64))).collect();
    let mut sup = vec![0.0f64; ks.len()];
    let mut upper = vec![0.0f64; ks.len()];
    let reps = representatives(n, symmetry);
    // t = 0: distance 1 - pi(xi) exactly
    sup[0] = reps.iter().map(|&s| 1.0 - m.pi()[s]).fold(0.0, f64::max);
    let profile = match &res.profile {
        Some(p) if p.reps == reps => p.clone(),
        _ => {
            let (tv, l2) = distances_at(&u, m.pi(), &reps, tmix, true)?;
            Profile { reps: reps.clone(), tv, l2 }
        }
    };
    sup[1] = profile.tv.iter().cloned().fold(0.0, f64::max);
    let safe_gap = gap.map(|g| g * (1.0 - 1e-8));
    let mut certified = 0usize;
    let mut pending = Vec::new();
    for (i, &s) in reps.iter().enumerate() {
        let est: Option<Vec<f64>> = safe_gap.and_then(|g| {
            let e: Vec<f64> = (2..=5)
                .map(|k| (0.5 * profile.l2[i] * math::exp(-g * (k - 1) as f64 * tmix)).min(profile.tv[i]))
                .collect();
            e.iter().zip(&bound[2..]).all(|(x, b)| x <= b).then_some(e)
        });
        match est {
            Some(e) => {
                for (j, x) in e.into_iter().enumerate() {
                    upper[j + 2] = upper[j + 2].max(x);
                }
                certified += 4;
            }
            None => pending.push(s),
        }
    }
    let mut tv = vec![0.0; BLOCK];
    for chunk in pending.chunks(BLOCK) {
        let b = chunk.len();
        run_block(&u, init_block(n, chunk), b, |j| (j < 4).then(|| (j + 2) as f64 * tmix), |j, _, acc| {
            block_tv(acc, m.pi(), b, &mut tv);
            for &d in &tv[..b] {
                sup[j + 2] = sup[j + 2].max(d);
            }
            true
        })?;
    }
    let rows: Vec<MixingLawRow> = ks
        .iter()
        .enumerate()
        .map(|(j, &k)| MixingLawRow { t: k as f64 * tmix, k, sup_tv: sup[j], upper: sup[j].max(upper[j]), bound: bound[j] })
        .collect();
    let max_excess = rows.iter().map(|r| r.upper - r.bound).fold(f64::NEG_INFINITY, f64::max);
    Ok(MixingLawReport { tmix, rows, max_excess, holds: max_excess <= 1e-12, certified, evolved: pending.len() })
}
