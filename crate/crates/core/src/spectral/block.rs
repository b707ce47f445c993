//! The constrained two-block dynamics on rectangles `Lambda = [1, l] x [0, h]`
//! of the bounded SOS model (zero boundary, heights in `[0, h]`), its
//! variance decomposition, and the recursion over rectangle classes.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use rand_core::RngCore;

use super::censor::random_monotone;
use super::eigen::exact_gap;
use super::generator::{build_generator, RateMatrix};
use super::space::{enumerate_sos, StateSpace, DEFAULT_STATE_CAP};
use crate::error::{Error, Result};
use crate::events::{index, normal, rng_from_key, unit_f64};
use crate::lattice::SosParams;
use crate::math;
use crate::sos::rates_at;

/// Sites `1..=base`, heights `[bottom, top]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockRect {
    pub base: usize,
    pub bottom: i64,
    pub top: i64,
}

impl BlockRect {
    pub fn new(base: usize, height: i64) -> Result<Self> {
        if base == 0 || height < 0 {
            return Err(Error::InvalidParameters("rectangle needs base > 0 and height >= 0"));
        }
        Ok(Self { base, bottom: 0, top: height })
    }

    pub fn height(&self) -> i64 {
        self.top - self.bottom
    }

    /// Membership in the class of rectangles of base at most `l` and height
    /// at most `cap`.
    pub fn fits(&self, l: usize, cap: i64) -> bool {
        self.base <= l && self.height() <= cap
    }
}

/// `Lambda_1 = [0, h1]` and `Lambda_2 = [h1 - h_I, h]`, both on `Lambda`'s
/// base; their intersection is the overlap strip of height `h_I`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockSplit {
    pub lambda: BlockRect,
    pub lower: BlockRect,
    pub upper: BlockRect,
    pub overlap: i64,
    pub n: u32,
}

impl BlockSplit {
    pub fn new(lambda: BlockRect, h1: i64, overlap: i64, n: u32) -> Result<Self> {
        let theta = h1 - overlap;
        if !(overlap >= 0 && theta >= lambda.bottom && h1 <= lambda.top) {
            return Err(Error::InvalidParameters("need bottom <= h1 - h_I <= h1 <= top"));
        }
        let lower = BlockRect { base: lambda.base, bottom: lambda.bottom, top: h1 };
        let upper = BlockRect { base: lambda.base, bottom: theta, top: lambda.top };
        Ok(Self { lambda, lower, upper, overlap, n })
    }

    pub fn h1(&self) -> i64 {
        self.lower.top
    }

    /// `h1 - h_I`, the bottom of `Lambda_2`.
    pub fn theta(&self) -> i64 {
        self.upper.bottom
    }

    /// Overlap strip `[theta, h1]`.
    pub fn overlap_interval(&self) -> (i64, i64) {
        (self.theta(), self.h1())
    }
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub splits: Vec<BlockSplit>,
    pub required: usize,
    /// why fewer than `required` splits exist, if so
    pub diagnostic: Option<&'static str>,
}

impl Decomposition {
    pub fn is_complete(&self) -> bool {
        self.diagnostic.is_none()
    }
}

/// `floor((3/2)^k)` as an integer height cap.
fn cap_for(k: f64) -> i64 {
    math::floor(math::powf(1.5, k)) as i64
}

/// Splits of `lambda` with both pieces of height at most `cap`, overlaps
/// of height at least `min_overlap` that are pairwise disjoint, at most
/// `max_splits` of them.
pub fn decompose_with(lambda: BlockRect, cap: i64, min_overlap: i64, max_splits: usize) -> Vec<BlockSplit> {
    let h = lambda.height();
    let mut out = Vec::new();
    if h <= cap || min_overlap < 0 {
        return out;
    }
    // h1 <= cap and h - (h1 - h_I) <= cap; stepping by h_I + 1 keeps the
    // strips [h1 - h_I, h1] disjoint
    let mut h1 = lambda.bottom + h + min_overlap - cap;
    while h1 <= lambda.bottom + cap && out.len() < max_splits {
        if h1 - min_overlap >= lambda.bottom {
            if let Ok(s) = BlockSplit::new(lambda, h1, min_overlap, 0) {
                out.push(s);
            }
        }
        h1 += min_overlap + 1;
    }
    out
}

/// Splits of `lambda` (height above `(3/2)^{n-1}`) into two rectangles of
/// height at most `(3/2)^{n-1}` overlapping on at least `(3/2)^{3n/4}`,
/// asking for `floor((3/2)^{n/5})` of them with disjoint overlaps.
pub fn decompose(lambda: BlockRect, n: u32) -> Decomposition {
    let nf = n as f64;
    let cap = cap_for(nf - 1.0);
    let required = math::floor(math::powf(1.5, nf / 5.0)) as usize;
    if lambda.height() <= cap {
        return Decomposition { splits: Vec::new(), required, diagnostic: Some("already in the lower class") };
    }
    let min_overlap = math::ceil(math::powf(1.5, 0.75 * nf)) as i64;
    let mut splits = decompose_with(lambda, cap, min_overlap, required.max(1));
    splits.iter_mut().for_each(|s| s.n = n);
    let diagnostic = (splits.len() < required).then_some("overlap too tall for the height cap at this n");
    Decomposition { splits, required, diagnostic }
}

fn rect_params(r: &BlockRect) -> Result<Arc<SosParams>> {
    Ok(Arc::new(SosParams::with_bounds(r.base, r.bottom, r.bottom, r.top)?))
}

/// Enumerated `Omega_Lambda` with its single-site generator.
struct RectSpace {
    space: StateSpace,
    glauber: RateMatrix,
}

fn rect_space(r: &BlockRect) -> Result<RectSpace> {
    let space = enumerate_sos(rect_params(r)?, DEFAULT_STATE_CAP)?;
    let glauber = build_generator(&space)?;
    Ok(RectSpace { space, glauber })
}

/// States of `space` that agree with `eta` off `free` and lie in `[lo, hi]`
/// on `free`.
fn fiber(space: &StateSpace, eta: &[i64], free: &[usize], lo: i64, hi: i64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut cur = eta.to_vec();
    for &i in free {
        cur[i] = lo;
    }
    loop {
        if let Some(ix) = space.index_of(&cur) {
            out.push(ix);
        }
        let mut k = 0;
        loop {
            if k == free.len() {
                return out;
            }
            cur[free[k]] += 1;
            if cur[free[k]] <= hi {
                break;
            }
            cur[free[k]] = lo;
            k += 1;
        }
    }
}

/// The kernel pieces of the block dynamics, as probability rows.
struct BlockKernel {
    /// `G = {eta <= h1}` membership
    in_g: Vec<bool>,
    /// states of `Lambda_1` and their `pi_{Lambda_1}` weights
    lower: Vec<(usize, f64)>,
    /// `pi^eta_{Lambda_2}` for every `eta`
    upper: Vec<Vec<(usize, f64)>>,
}

fn block_kernel(rs: &RectSpace, split: &BlockSplit) -> BlockKernel {
    let space = &rs.space;
    let pi = rs.glauber.pi();
    let n = space.len();
    let h1 = split.h1();
    let theta = split.theta();
    let top = split.lambda.top;
    let in_g: Vec<bool> = (0..n).map(|s| space.state(s).iter().all(|&v| v <= h1)).collect();
    let zg: f64 = (0..n).filter(|&s| in_g[s]).map(|s| pi[s]).sum();
    let lower = (0..n).filter(|&s| in_g[s]).map(|s| (s, pi[s] / zg)).collect();
    let upper = (0..n)
        .map(|s| {
            let eta = space.state(s);
            let free: Vec<usize> = (0..eta.len()).filter(|&i| eta[i] > theta).collect();
            let states = fiber(space, &eta, &free, theta + 1, top);
            let z: f64 = states.iter().map(|&t| pi[t]).sum();
            states.into_iter().map(|t| (t, pi[t] / z)).collect()
        })
        .collect();
    BlockKernel { in_g, lower, upper }
}

/// Generator `1_G (pi_{Lambda_1} - 1) + (pi^eta_{Lambda_2} - 1)` on
/// `Omega_Lambda`, with `pi_Lambda` attached.
pub fn block_generator(split: &BlockSplit) -> Result<RateMatrix> {
    let rs = rect_space(&split.lambda)?;
    Ok(assemble(&rs, &block_kernel(&rs, split))?)
}

fn assemble(rs: &RectSpace, k: &BlockKernel) -> Result<RateMatrix> {
    let mut trip = Vec::new();
    for (s, row) in k.upper.iter().enumerate() {
        if k.in_g[s] {
            trip.extend(k.lower.iter().map(|&(t, p)| (s as u32, t as u32, p)));
        }
        trip.extend(row.iter().map(|&(t, p)| (s as u32, t as u32, p)));
    }
    RateMatrix::from_triplets(rs.space.len(), trip, rs.glauber.pi().to_vec())
}

/// Largest inverse gap over `Lambda_1` and the interval chains that make
/// up `pi^eta_{Lambda_2}`: SOS on `m <= base` sites with heights in
/// `[theta + 1, top]` and boundary at or below `theta` (the rates do not
/// depend on the boundary value there).
pub fn reference_gap_inverse(split: &BlockSplit) -> Result<f64> {
    let mut worst = 1.0 / exact_gap(&rect_space(&split.lower)?.glauber)?.gap;
    let (theta, top) = (split.theta(), split.lambda.top);
    if theta + 1 <= top {
        for m in 1..=split.lambda.base {
            let p = Arc::new(SosParams::with_bounds(m, theta, theta + 1, top)?);
            let space = enumerate_sos(p, DEFAULT_STATE_CAP)?;
            if space.len() < 2 {
                continue;
            }
            let g = exact_gap(&build_generator(&space)?)?.gap;
            worst = worst.max(1.0 / g);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct VarianceReport {
    pub functions: usize,
    pub gamma_ref: f64,
    pub block_gap: f64,
    /// `max |pi Q_block|`
    pub stationarity: f64,
    /// `max |E_block - pi(1_G Var_1) - pi(Var^eta_2)|` over test functions
    pub identity_residual: f64,
    /// `min (gamma_ref E_1 - pi(G) Var_{Lambda_1})`
    pub margin_lower: f64,
    /// `min (gamma_ref E_2 - pi(Var^eta_{Lambda_2}))`
    pub margin_upper: f64,
    /// `max Var_Lambda(f) block_gap / E_block(f)`, at most 1
    pub block_ratio: f64,
}

/// Test function: a monotone mixture or an independent Gaussian per state.
fn random_test_function<R: RngCore + ?Sized>(space: &StateSpace, rng: &mut R) -> Vec<f64> {
    if unit_f64(rng) < 0.5 {
        random_monotone(space, rng)
    } else {
        let mut f: Vec<f64> = (0..space.len()).map(|_| normal(rng)).collect();
        // occasionally sparse, to probe localized directions
        if index(rng, 4) == 0 {
            f.iter_mut().for_each(|x| {
                if unit_f64(rng) < 0.8 {
                    *x = 0.0
                }
            });
        }
        f
    }
}

/// Checks the two variational inequalities behind the block bound,
///
/// `pi(G) Var_{Lambda_1}(f) <= gamma_ref pi(G) E_{Lambda_1}(f)` and
/// `pi(Var^eta_{Lambda_2} f) <= gamma_ref pi(E^eta_{Lambda_2}(f))`,
///
/// where the right sides are the single-site Dirichlet forms restricted
/// to moves inside `G` and to moves keeping the resampled sites above
/// `theta`. Also reports `Var_Lambda / E_block` against the block gap.
/// `functions` test functions come from a seeded mix of monotone and
/// Gaussian directions; the constant function is always included.
pub fn variance_decomposition_check(split: &BlockSplit, functions: usize, seed: u64) -> Result<VarianceReport> {
    let rs = rect_space(&split.lambda)?;
    let kernel = block_kernel(&rs, split);
    let block = assemble(&rs, &kernel)?;
    let gamma_ref = reference_gap_inverse(split)?;
    let block_gap = exact_gap(&block)?.gap;
    let space = &rs.space;
    let pi = rs.glauber.pi();
    let n = space.len();
    let (theta, top) = (split.theta(), split.lambda.top);
    let params = rect_params(&split.lambda)?;
    let pg: f64 = (0..n).filter(|&s| kernel.in_g[s]).map(|s| pi[s]).sum();

    // single-site moves (s, t, pi(s) p) tagged by the block they belong to
    let mut moves_lower = Vec::new();
    let mut moves_upper = Vec::new();
    let mut state = vec![0i64; split.lambda.base];
    for s in 0..n {
        state.copy_from_slice(&space.state(s));
        for i in 0..state.len() {
            let (l, r) = params.neighbors(&state, i);
            let (down, up) = rates_at(l, state[i], r);
            for (delta, rate) in [(1i64, up.value()), (-1, down.value())] {
                let v = state[i] + delta;
                if v < split.lambda.bottom || v > top {
                    continue;
                }
                let mut next = state.clone();
                next[i] = v;
                let t = space.index_of(&next).expect("inside the rectangle");
                let w = pi[s] * rate;
                if kernel.in_g[s] && kernel.in_g[t] {
                    moves_lower.push((s, t, w));
                }
                if state[i] > theta && v > theta && v <= top {
                    moves_upper.push((s, t, w));
                }
            }
        }
    }
    let form = |moves: &[(usize, usize, f64)], f: &[f64]| -> f64 {
        0.5 * moves.iter().map(|&(s, t, w)| w * (f[t] - f[s]) * (f[t] - f[s])).sum::<f64>()
    };

    let mut rng = rng_from_key(seed);
    let mut report = VarianceReport {
        functions: 0,
        gamma_ref,
        block_gap,
        stationarity: block.stationarity_residual(),
        identity_residual: 0.0,
        margin_lower: f64::INFINITY,
        margin_upper: f64::INFINITY,
        block_ratio: 0.0,
    };
    for k in 0..=functions {
        let f = if k == 0 { vec![1.0; n] } else { random_test_function(space, &mut rng) };
        let var = rs.glauber.variance(&f);
        // pi(G) Var_{Lambda_1}(f)
        let m1: f64 = kernel.lower.iter().map(|&(s, p)| p * f[s]).sum();
        let v1: f64 = kernel.lower.iter().map(|&(s, p)| p * (f[s] - m1) * (f[s] - m1)).sum();
        let lhs1 = pg * v1;
        // pi(Var^eta_{Lambda_2} f)
        let lhs2: f64 = (0..n)
            .map(|s| {
                let row = &kernel.upper[s];
                let m: f64 = row.iter().map(|&(t, p)| p * f[t]).sum();
                pi[s] * row.iter().map(|&(t, p)| p * (f[t] - m) * (f[t] - m)).sum::<f64>()
            })
            .sum();
        let rhs1 = gamma_ref * form(&moves_lower, &f);
        let rhs2 = gamma_ref * form(&moves_upper, &f);
        let e_block = block.dirichlet(&f);
        report.identity_residual = report.identity_residual.max(math::abs(e_block - lhs1 - lhs2) / var.max(1.0));
        report.margin_lower = report.margin_lower.min(rhs1 - lhs1);
        report.margin_upper = report.margin_upper.min(rhs2 - lhs2);
        if var > 1e-14 {
            report.block_ratio = report.block_ratio.max(var * block_gap / e_block);
        }
        report.functions += 1;
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct RecursionRow {
    pub n: u32,
    /// height cap `floor((3/2)^n)` of the class, before the size limit
    pub height_cap: i64,
    /// largest height actually enumerated
    pub enumerated_height: i64,
    /// `max gap^{-1}` over enumerated rectangles of the class
    pub gamma: f64,
    /// `(1 + (3/2)^{-n/6}) gamma(n - 1)`
    pub bound: f64,
    pub holds: bool,
    pub rectangles: usize,
}

/// `gamma(L, n) = max gap(Lambda)^{-1}` over rectangles of base `<= l` and
/// height `<= (3/2)^n`, restricted to heights `<= max_height` so every
/// space is enumerable, compared with `(1 + delta_n) gamma(L, n - 1)`.
/// Rows whose class was truncated by `max_height` have
/// `enumerated_height < height_cap`.
pub fn gap_recursion_report(l: usize, n_max: u32, max_height: i64) -> Result<Vec<RecursionRow>> {
    let mut cache: Vec<Vec<Option<f64>>> = vec![vec![None; max_height as usize + 1]; l + 1];
    let mut inv_gap = |b: usize, h: i64| -> Result<f64> {
        if let Some(v) = cache[b][h as usize] {
            return Ok(v);
        }
        let v = if h == 0 { 0.0 } else { 1.0 / exact_gap(&rect_space(&BlockRect::new(b, h)?)?.glauber)?.gap };
        cache[b][h as usize] = Some(v);
        Ok(v)
    };
    let mut rows: Vec<RecursionRow> = Vec::new();
    let mut prev: Option<f64> = None;
    for n in 1..=n_max {
        let height_cap = cap_for(n as f64);
        let hmax = height_cap.min(max_height);
        let mut gamma = 0.0f64;
        let mut count = 0;
        for b in 1..=l {
            for h in 1..=hmax {
                gamma = gamma.max(inv_gap(b, h)?);
                count += 1;
            }
        }
        let delta = math::powf(1.5, -(n as f64) / 6.0);
        let bound = prev.map_or(f64::INFINITY, |g| (1.0 + delta) * g);
        rows.push(RecursionRow {
            n,
            height_cap,
            enumerated_height: hmax,
            gamma,
            bound,
            holds: gamma <= bound,
            rectangles: count,
        });
        prev = Some(gamma);
    }
    Ok(rows)
}
